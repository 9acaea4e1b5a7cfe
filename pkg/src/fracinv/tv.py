"""Total variation of P1 fields and its dual description.

For a continuous piecewise linear ``f`` the gradient is constant on each
element, so ``TV(f) = sum_K |K| |grad f_K|`` and the supremum over the dual
unit ball of piecewise constant vector fields is attained element-wise.
"""
import numpy as np

from .fem import Mesh, gradient

__all__ = ["tv_value", "project_ball", "dual_pairing", "canonical_dual", "in_dual_ball"]


def tv_value(mesh: Mesh, f) -> float:
    g = gradient(mesh, f)
    return float(mesh.element_measure @ np.linalg.norm(g, axis=1))


def project_ball(rho) -> np.ndarray:
    """Element-wise projection onto the Euclidean unit ball, ``rho_K / max(1, |rho_K|)``.

    Vectors within a few ulps of the sphere are left alone, so that the
    projection is exactly idempotent despite rounding in the normalisation.
    """
    rho = np.asarray(rho, dtype=float)
    norms = np.linalg.norm(rho, axis=-1, keepdims=True)
    return rho / np.where(norms > 1.0 + 4 * np.finfo(float).eps, norms, 1.0)


def in_dual_ball(rho, slack=1e-14) -> bool:
    return bool(np.all(np.linalg.norm(np.asarray(rho), axis=-1) <= 1.0 + slack))


def dual_pairing(mesh: Mesh, f, rho) -> float:
    """``int grad f . rho dx`` for a P1 field and a piecewise constant vector field."""
    g = gradient(mesh, f)
    rho = np.asarray(rho, dtype=float).reshape(g.shape)
    return float(mesh.element_measure @ np.einsum("ed,ed->e", g, rho))


def canonical_dual(mesh: Mesh, f) -> np.ndarray:
    """Maximiser ``grad f / |grad f|`` of the dual pairing, zero where the gradient vanishes."""
    g = gradient(mesh, f)
    n = np.linalg.norm(g, axis=1, keepdims=True)
    out = np.zeros_like(g)
    np.divide(g, n, out=out, where=n > 0)
    return out
