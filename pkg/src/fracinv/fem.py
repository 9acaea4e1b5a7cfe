"""P1 finite elements on uniform simplicial meshes of the unit interval and square.

Meshes are structured: the interval is split into ``n`` equal cells and the
square into ``n x n`` cells, each cut along the diagonal from its lower-left
to its upper-right corner. Nodal vectors live on every node (the space of
continuous piecewise linears); the homogeneous Dirichlet subspace is handled
by restricting solves to interior nodes and zero-padding the result.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

__all__ = [
    "Mesh",
    "SolverError",
    "build_interval_mesh",
    "build_unit_square_mesh",
    "assemble_mass",
    "assemble_stiffness",
    "gradient",
    "gradient_adjoint",
    "solve_spd",
    "write_mesh",
]


class SolverError(RuntimeError):
    """Raised when an iterative linear solve fails to reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class Mesh:
    """Simplicial mesh with per-element P1 basis gradients.

    Attributes
    ----------
    nodes : ndarray, shape (n_nodes, dim)
    elements : ndarray of int, shape (n_elements, dim + 1)
    boundary_nodes : ndarray of int
        Sorted indices of the nodes lying on the domain boundary.
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary_nodes: np.ndarray

    def __post_init__(self):
        if self.elements.min() < 0 or self.elements.max() >= self.n_nodes:
            raise ValueError("element connectivity references a missing node")
        if np.any(self.element_measure <= 0):
            raise ValueError("mesh contains degenerate or inverted elements")

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @cached_property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    @cached_property
    def _jacobians(self) -> np.ndarray:
        x = self.nodes[self.elements]  # (E, d+1, d)
        return np.transpose(x[:, 1:, :] - x[:, :1, :], (0, 2, 1))

    @cached_property
    def element_measure(self) -> np.ndarray:
        d = self.dim
        det = np.linalg.det(self._jacobians)
        return det / (1.0 if d == 1 else 2.0)

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Constant gradients of the element's barycentric functions, shape (E, d+1, d)."""
        inv = np.linalg.inv(self._jacobians)  # rows are grad(lambda_1..lambda_d)
        g0 = -inv.sum(axis=1, keepdims=True)
        return np.concatenate([g0, inv], axis=1)

    @cached_property
    def gradient_matrix(self) -> sp.csr_matrix:
        """Sparse map from nodal values to stacked element gradients (E*d rows)."""
        E, d = self.n_elements, self.dim
        grads = self.basis_gradients  # (E, d+1, d)
        rows = (np.arange(E)[:, None, None] * d + np.arange(d)[None, None, :])
        rows = np.broadcast_to(rows, grads.shape)
        cols = np.broadcast_to(self.elements[:, :, None], grads.shape)
        G = sp.coo_matrix((grads.ravel(), (rows.ravel(), cols.ravel())),
                          shape=(E * d, self.n_nodes))
        return G.tocsr()

    def is_boundary(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = True
        return mask


def build_interval_mesh(n: int) -> Mesh:
    """Uniform mesh of [0, 1] with ``n`` cells."""
    if int(n) != n or n < 2:
        raise ValueError(f"need at least 2 cells, got n={n}")
    n = int(n)
    nodes = np.linspace(0.0, 1.0, n + 1)[:, None]
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    return Mesh(nodes, elements, np.array([0, n]))


def build_unit_square_mesh(n: int) -> Mesh:
    """Uniform mesh of [0, 1]^2 with ``2 n^2`` congruent right triangles.

    Every grid cell is split along its lower-left to upper-right diagonal.
    Node ``i + (n + 1) * j`` sits at ``(i / n, j / n)``.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"need at least 2 cells per side, got n={n}")
    n = int(n)
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    p00 = (i + (n + 1) * j).ravel()
    p10 = p00 + 1
    p01 = p00 + n + 1
    p11 = p01 + 1
    lower = np.column_stack([p00, p10, p11])
    upper = np.column_stack([p00, p11, p01])
    elements = np.empty((2 * n * n, 3), dtype=int)
    elements[0::2] = lower
    elements[1::2] = upper

    on_edge = (np.isclose(nodes, 0.0) | np.isclose(nodes, 1.0)).any(axis=1)
    return Mesh(nodes, elements, np.flatnonzero(on_edge))


def _assemble(mesh, local):
    """Scatter per-element matrices ``local`` (E, d+1, d+1) into a CSR matrix."""
    el = mesh.elements
    k = el.shape[1]
    rows = np.repeat(el, k, axis=1).ravel()
    cols = np.tile(el, (1, k)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)),
                        shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()
    mat.sum_duplicates()
    return mat


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix, ``M[i, j] = int phi_i phi_j``."""
    d = mesh.dim
    ref = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    local = mesh.element_measure[:, None, None] * ref[None]
    return _assemble(mesh, local)


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """P1 stiffness matrix, ``A[i, j] = int grad phi_i . grad phi_j``."""
    g = mesh.basis_gradients
    local = mesh.element_measure[:, None, None] * np.einsum("eik,ejk->eij", g, g)
    return _assemble(mesh, local)


def gradient(mesh: Mesh, f) -> np.ndarray:
    """Element-wise constant gradient of a P1 field, shape (E, d)."""
    f = np.asarray(f, dtype=float)
    return (mesh.gradient_matrix @ f).reshape(mesh.n_elements, mesh.dim)


def gradient_adjoint(mesh: Mesh, rho) -> np.ndarray:
    """Measure-weighted transpose of :func:`gradient`.

    Returns ``q`` with ``q @ f == sum_K |K| gradient(f)_K . rho_K`` for every
    nodal vector ``f``.
    """
    rho = np.asarray(rho, dtype=float).reshape(mesh.n_elements, mesh.dim)
    weighted = (mesh.element_measure[:, None] * rho).ravel()
    return mesh.gradient_matrix.T @ weighted


def solve_spd(matrix, rhs, tol=1e-10, restrict_to_interior=None, maxiter=None):
    """Conjugate gradients for a symmetric positive definite system.

    Parameters
    ----------
    matrix : sparse matrix
    rhs : array_like
    tol : float
        Relative residual target, ``||matrix @ x - rhs|| <= tol * ||rhs||``.
    restrict_to_interior : Mesh, optional
        When given, only the interior rows/columns are solved and the
        boundary entries of the result are set to zero.
    maxiter : int, optional
        Iteration cap; defaults to ten times the number of unknowns.

    Raises
    ------
    SolverError
        If the tolerance is not met within ``maxiter`` iterations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rhs = np.asarray(rhs, dtype=float)
    A = sp.csr_matrix(matrix)
    idx = None
    if restrict_to_interior is not None:
        idx = restrict_to_interior.interior_nodes
        A = A[idx][:, idx]
        b = rhs[idx]
    else:
        b = rhs

    out = np.zeros_like(rhs)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return out
    if maxiter is None:
        maxiter = 10 * b.size

    diag = A.diagonal()
    precond = spla.LinearOperator(A.shape, matvec=lambda v: v / diag) if np.all(diag > 0) else None
    x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=maxiter, M=precond)
    res = np.linalg.norm(A @ x - b)
    if info != 0 or res > tol * bnorm * (1 + 1e-8):
        raise SolverError(
            f"CG did not converge: residual {res:.3e} vs target {tol * bnorm:.3e}",
            residual=res, iterations=maxiter)
    if idx is None:
        return x
    out[idx] = x
    return out


def write_mesh(mesh: Mesh, path) -> None:
    """Plain-text mesh dump: node coordinates, a blank line, then element node indices."""
    lines = [" ".join(f"{c:.17g}" for c in x) for x in mesh.nodes]
    lines.append("")
    lines += [" ".join(str(i) for i in e) for e in mesh.elements]
    Path(path).write_text("\n".join(lines) + "\n")
