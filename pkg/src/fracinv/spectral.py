"""Eigenfunction-expansion reference solutions on the unit interval and square.

With Dirichlet eigenpairs ``(lambda_j, phi_j)`` of ``-Laplace`` the direct
problem has the solution

    u(x, T) = sum_j (f, phi_j) phi_j(x) int_0^T (T-s)^(alpha-1) E_{alpha,alpha}(-lambda_j (T-s)^alpha) mu(s) ds

and for constant ``mu = c`` the time integral is ``c T^alpha E_{alpha,alpha+1}(-lambda_j T^alpha)``.
Used only to verify the discrete solvers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

from .fem import Mesh
from .mittag_leffler import EvaluationError, mittag_leffler

__all__ = [
    "EigenBasis",
    "spectral_coefficients",
    "project_function",
    "time_factor",
    "spectral_final_state",
    "adjoint_profile",
]


@dataclass(frozen=True)
class EigenBasis:
    """Dirichlet eigenpairs of ``-Laplace`` on ``(0,1)`` or ``(0,1)^2``, sorted by eigenvalue."""

    kind: str
    J: int

    def __post_init__(self):
        if self.kind not in ("interval", "square"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.J < 1:
            raise ValueError("need at least one mode")

    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval" else 2

    @cached_property
    def indices(self) -> np.ndarray:
        if self.kind == "interval":
            return np.arange(1, self.J + 1)[:, None]
        side = int(math.ceil(math.sqrt(self.J))) + 2
        m, n = np.meshgrid(np.arange(1, side + 1), np.arange(1, side + 1), indexing="ij")
        mn = np.column_stack([m.ravel(), n.ravel()])
        order = np.lexsort((mn[:, 1], mn[:, 0], (mn**2).sum(axis=1)))
        return mn[order[: self.J]]

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return math.pi**2 * (self.indices**2).sum(axis=1).astype(float)

    def evaluate(self, x, J=None) -> np.ndarray:
        """``phi_j(x)`` for the first ``J`` modes; shape (n_points, J)."""
        J = self.J if J is None else J
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            x = x.T
        idx = self.indices[:J]
        vals = np.ones((x.shape[0], J))
        for axis in range(self.dim):
            vals *= math.sqrt(2.0) * np.sin(math.pi * np.outer(x[:, axis], idx[:, axis]))
        return vals


def _gauss_rule(dim, order):
    """Reference-element points (barycentric-free) and weights on the unit simplex."""
    g, w = np.polynomial.legendre.leggauss(order)
    g = 0.5 * (g + 1.0)
    w = 0.5 * w
    if dim == 1:
        return g[:, None], w
    # collapsed tensor rule on the triangle (0,0),(1,0),(0,1)
    u, v = np.meshgrid(g, g, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    x = u.ravel()
    y = (v * (1.0 - u)).ravel()
    wt = (wu * wv * (1.0 - u)).ravel()
    return np.column_stack([x, y]), wt


def _element_quadrature(mesh: Mesh, order):
    """Physical quadrature points (E, q, d), weights (E, q), and P1 shape values (q, d+1)."""
    ref, w = _gauss_rule(mesh.dim, order)
    shape = np.column_stack([1.0 - ref.sum(axis=1), ref])
    x = mesh.nodes[mesh.elements]  # (E, d+1, d)
    pts = np.einsum("qa,ead->eqd", shape, x)
    # reference simplex has measure 1 (1D) or 1/2 (2D)
    ref_measure = 1.0 if mesh.dim == 1 else 0.5
    weights = mesh.element_measure[:, None] * (w[None, :] / ref_measure)
    return pts, weights, shape


def spectral_coefficients(f, mesh: Mesh, basis: EigenBasis, J=None, order=12) -> np.ndarray:
    """``(f_h, phi_j)`` for the P1 interpolant ``f_h`` of nodal values ``f``.

    Element-wise Gauss quadrature with ``order`` points per direction.
    """
    J = basis.J if J is None else J
    f = np.asarray(f, dtype=float)
    pts, weights, shape = _element_quadrature(mesh, order)
    fq = np.einsum("qa,ea->eq", shape, f[mesh.elements])
    phi = basis.evaluate(pts.reshape(-1, mesh.dim), J).reshape(pts.shape[0], pts.shape[1], J)
    return np.einsum("eq,eq,eqj->j", weights, fq, phi)


def project_function(func, basis: EigenBasis, J=None, n_cells=200, order=12) -> np.ndarray:
    """``(func, phi_j)`` for a callable ``func(x)`` by composite Gauss quadrature.

    ``x`` is passed with shape (n_points, dim).
    """
    from .fem import build_interval_mesh, build_unit_square_mesh

    J = basis.J if J is None else J
    mesh = build_interval_mesh(n_cells) if basis.dim == 1 else build_unit_square_mesh(n_cells)
    pts, weights, _ = _element_quadrature(mesh, order)
    flat = pts.reshape(-1, mesh.dim)
    fq = np.asarray(func(flat), dtype=float).reshape(weights.shape)
    phi = basis.evaluate(flat, J).reshape(pts.shape[0], pts.shape[1], J)
    return np.einsum("eq,eq,eqj->j", weights, fq, phi)


def time_factor(alpha, lam, T, mu) -> float:
    """``int_0^T (T-s)^(alpha-1) E_{alpha,alpha}(-lam (T-s)^alpha) mu(s) ds``.

    ``mu`` may be a number (closed form) or a callable (adaptive quadrature
    with the algebraic endpoint weight).
    """
    if not callable(mu):
        return float(mu) * T**alpha * mittag_leffler(alpha, alpha + 1.0, -lam * T**alpha)

    def kernel(r):
        return mittag_leffler(alpha, alpha, -lam * r**alpha) * mu(T - r)

    # E_{a,a}(-lam r^a) varies on the scale r ~ lam^(-1/a)
    split = min(T, 20.0 * lam ** (-1.0 / alpha))
    total, err = integrate.quad(kernel, 0.0, split, weight="alg", wvar=(alpha - 1.0, 0.0),
                                epsabs=1e-14, epsrel=1e-11, limit=400)
    # the tail spans many decades when lam is large; integrate decade by decade
    edges = [split]
    while edges[-1] < T:
        edges.append(min(T, 10.0 * edges[-1]))
    for lo, hi in zip(edges[:-1], edges[1:]):
        piece, err2 = integrate.quad(lambda r: r ** (alpha - 1.0) * kernel(r), lo, hi,
                                     epsabs=1e-15, epsrel=1e-11, limit=400)
        total += piece
        err += err2
    if err > 1e-8 * abs(total) + 1e-12:
        raise EvaluationError(f"time quadrature error {err:.2e} for lambda={lam}")
    return total


def spectral_final_state(basis: EigenBasis, alpha, T, mu, f, x, J=None, tail_tol=1e-10,
                         mesh=None) -> np.ndarray:
    """Truncated eigen-expansion of ``u(., T)`` evaluated at points ``x``.

    Parameters
    ----------
    f : callable, nodal array, or coefficient array
        A callable is projected with :func:`project_function`; a nodal array
        needs ``mesh`` and is projected with :func:`spectral_coefficients`;
        otherwise ``f`` is taken as the coefficient sequence itself.
    tail_tol : float
        Modes whose coefficient magnitude is below ``tail_tol`` times the
        largest one are skipped.
    """
    J = basis.J if J is None else J
    if callable(f):
        coef = project_function(f, basis, J)
    elif mesh is not None:
        coef = spectral_coefficients(f, mesh, basis, J)
    else:
        coef = np.asarray(f, dtype=float)[:J]
    J = coef.size
    scale = np.max(np.abs(coef)) if J else 0.0
    out_coef = np.zeros(J)
    if scale == 0.0:
        return np.zeros(np.atleast_2d(x).shape[0] if np.ndim(x) > 1 else np.size(x))
    for j in range(J):
        if abs(coef[j]) <= tail_tol * scale:
            continue
        out_coef[j] = coef[j] * time_factor(alpha, basis.eigenvalues[j], T, mu)
    return basis.evaluate(x, J) @ out_coef


def adjoint_profile(basis: EigenBasis, alpha, t, coef) -> np.ndarray:
    """Mode amplitudes ``c_j t^(alpha-1) E_{alpha,alpha}(-lambda_j t^alpha)`` of the time-reversed adjoint state."""
    coef = np.asarray(coef, dtype=float)
    lam = basis.eigenvalues[: coef.size]
    ml = np.array([mittag_leffler(alpha, alpha, -l * t**alpha) for l in lam])
    return coef * t ** (alpha - 1.0) * ml
