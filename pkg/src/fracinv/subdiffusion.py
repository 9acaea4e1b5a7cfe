"""L1 time stepping for the subdiffusion equation with a separable source.

The direct problem is ``D_t^alpha u - Laplace u = mu(t) f(x)`` on the unit
interval or square with ``u = 0`` on the boundary and ``u(0) = 0``. Space is
discretised by P1 elements and the Caputo derivative by the L1 formula, so
each step solves ``(M + eta A) u^{k+1} = M sum_j (b_j - b_{j+1}) u^{k-j} +
eta mu^{k+1} M f`` on the interior nodes.

Two adjoints of the source-to-final-state map are available:

* :meth:`SubdiffusionOperator.adjoint_final` is the exact transpose of the
  discrete map in the mass inner product, computed by running the linear
  recurrence backwards in time.
* :meth:`SubdiffusionOperator.adjoint_pde_solve` discretises the backward
  Riemann-Liouville adjoint equation with the same L1 machinery. Its extra
  source term uses ``t^(-alpha)`` (see the note in that method).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import gamma

from .fem import Mesh, assemble_mass, assemble_stiffness, solve_spd

__all__ = [
    "L1Weights",
    "TimeGrid",
    "SubdiffusionOperator",
    "l1_weights",
    "direct_solve",
    "forward_final",
    "adjoint_final",
    "adjoint_pde_solve",
    "misfit_gradient_via_adjoint_pde",
    "write_trajectory_csv",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k * T / K`` for ``k = 0..K``."""

    T: float
    K: int

    def __post_init__(self):
        if self.T <= 0 or self.K < 1 or int(self.K) != self.K:
            raise ValueError(f"invalid time grid T={self.T}, K={self.K}")

    @property
    def tau(self) -> float:
        return self.T / self.K

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.K + 1) * self.tau


@dataclass(frozen=True)
class L1Weights:
    """Coefficients of the L1 approximation of the Caputo derivative.

    ``b[j] = (j+1)^(1-alpha) - j^(1-alpha)`` for ``j = 0..K`` and
    ``eta = Gamma(2 - alpha) tau^alpha``.
    """

    alpha: float
    tau: float
    b: np.ndarray
    eta: float

    @property
    def history(self) -> np.ndarray:
        """``b_j - b_{j+1}``, the weights multiplying past states."""
        return self.b[:-1] - self.b[1:]

    def zeta(self, k: int) -> np.ndarray:
        """Coefficients ``zeta_0..zeta_{k+1}`` of the discrete operator at ``t_{k+1}``.

        ``L u(t_{k+1}) = sum_j zeta_j u(t_{k+1-j}) / eta``.
        """
        if not 0 <= k < len(self.b):
            raise ValueError(f"k={k} outside the weight table")
        z = np.empty(k + 2)
        z[0] = 1.0
        z[1:k + 1] = self.b[1:k + 1] - self.b[:k]
        z[k + 1] = -self.b[k]
        return z


def l1_weights(alpha: float, K: int, tau: float) -> L1Weights:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if tau <= 0:
        raise ValueError("tau must be positive")
    j = np.arange(K + 2, dtype=float)
    p = j ** (1.0 - alpha)
    b = p[1:] - p[:-1]
    return L1Weights(alpha, tau, b, float(gamma(2.0 - alpha) * tau**alpha))


def _sample_mu(mu, grid):
    if callable(mu):
        values = np.array([mu(t) for t in grid.times], dtype=float)
    else:
        values = np.asarray(mu, dtype=float)
        if values.ndim == 0:
            values = np.full(grid.K + 1, float(values))
    if values.shape != (grid.K + 1,):
        raise ValueError(f"mu must give K+1={grid.K + 1} samples, got {values.shape}")
    return values


class SubdiffusionOperator:
    """Fully discrete source-to-state map for fixed mesh, grid, order and ``mu``.

    Parameters
    ----------
    mesh : Mesh
    grid : TimeGrid
    alpha : float
        Fractional order in (0, 1).
    mu : callable or array_like
        Temporal source factor; callables are sampled at ``grid.times``.
    solver : {"direct", "cg"}
        ``"direct"`` factorises ``M + eta A`` once (sparse LU); ``"cg"`` runs
        :func:`fracinv.fem.solve_spd` at every step.
    tol : float
        Relative tolerance of the CG solves.
    """

    def __init__(self, mesh: Mesh, grid: TimeGrid, alpha: float, mu, solver="direct", tol=1e-12):
        if solver not in ("direct", "cg"):
            raise ValueError(f"unknown solver {solver!r}")
        self.mesh = mesh
        self.grid = grid
        self.alpha = float(alpha)
        self.weights = l1_weights(alpha, grid.K, grid.tau)
        self.mu = _sample_mu(mu, grid)
        self.solver = solver
        self.tol = tol

        self.M = assemble_mass(mesh)
        self.A = assemble_stiffness(mesh)
        idx = mesh.interior_nodes
        self._idx = idx
        self._M_II = self.M[idx][:, idx].tocsr()
        self._M_I = self.M[idx].tocsr()  # interior rows, all columns
        self._B = (self._M_II + self.weights.eta * self.A[idx][:, idx]).tocsc()

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_nodes

    @cached_property
    def _B_solve(self):
        if self.solver == "direct":
            return spla.factorized(self._B)
        return lambda r: solve_spd(self._B, r, tol=self.tol)

    @cached_property
    def _M_solve(self):
        if self.solver == "direct":
            return spla.factorized(self.M.tocsc())
        return lambda r: solve_spd(self.M, r, tol=self.tol)

    def mass_solve(self, v) -> np.ndarray:
        """Solve ``M x = v`` on all nodes."""
        return self._M_solve(np.asarray(v, dtype=float))

    def inner(self, u, v) -> float:
        """L2 inner product of two nodal fields."""
        return float(u @ (self.M @ v))

    def norm(self, u) -> float:
        return math.sqrt(max(self.inner(u, u), 0.0))

    def _pad(self, interior):
        out = np.zeros(interior.shape[:-1] + (self.n_nodes,))
        out[..., self._idx] = interior
        return out

    def _march(self, load):
        """Run the L1 recurrence with per-step interior loads ``load[m]``, m=1..K."""
        K = self.grid.K
        d = self.weights.history
        U = np.zeros((K + 1, self._idx.size))
        for k in range(K):
            rhs = load[k + 1]
            if k > 0:
                hist = d[:k] @ U[k:0:-1]
                rhs = rhs + self._M_II @ hist
            U[k + 1] = self._B_solve(rhs)
        return U

    def direct_solve(self, f) -> np.ndarray:
        """All time levels, shape (K+1, n_nodes); row 0 is zero."""
        f = np.asarray(f, dtype=float)
        Mf = self._M_I @ f
        load = self.weights.eta * self.mu[:, None] * Mf[None, :]
        return self._pad(self._march(load))

    def forward_final(self, f) -> np.ndarray:
        return self.direct_solve(f)[-1]

    def forward_final_transpose(self, w) -> np.ndarray:
        """Euclidean transpose of :meth:`forward_final` applied to ``w``.

        ``forward_final(z) @ w == z @ forward_final_transpose(w)`` for all z.
        """
        K = self.grid.K
        d = self.weights.history
        seed = np.asarray(w, dtype=float)[self._idx]
        # P[m] = M_II q^m where q^m = B^{-1} v^m is the adjoint of step m's load
        P = np.zeros((K + 1, self._idx.size))
        acc = np.zeros(self._idx.size)
        for m in range(K, 0, -1):
            v = seed if m == K else d[:K - m] @ P[m + 1:]
            q = self._B_solve(v)
            P[m] = self._M_II @ q
            acc += self.mu[m] * q
        return self._M_I.T @ (self.weights.eta * acc)

    def adjoint_final(self, r) -> np.ndarray:
        """Adjoint of :meth:`forward_final` in the L2 (mass) inner product."""
        r = np.asarray(r, dtype=float)
        return self.mass_solve(self.forward_final_transpose(self.M @ r))

    def misfit_gradient(self, f, g) -> np.ndarray:
        """L2 gradient of ``0.5 ||forward_final(f) - g||^2`` via the exact adjoint."""
        return self.adjoint_final(self.forward_final(f) - g)

    def adjoint_pde_solve(self, residual) -> np.ndarray:
        """Time-reversed adjoint state ``w(T - t_k)`` at every level, shape (K+1, n_nodes).

        Level 0 carries the initial value that encodes the singular start
        ``I^{1-alpha} w -> residual``; it is fixed together with level 1 by
        the pair of equations ``w^0 + w^1 = 2 Gamma(2-alpha) tau^(alpha-1) residual``
        and the first L1 step.

        The correction from converting the Riemann-Liouville derivative to a
        Caputo one is ``-eta t_{k+1}^(-alpha) / Gamma(1-alpha) M w^0``. The
        exponent ``-alpha`` follows from the continuous equation; a
        ``t^(-1)`` factor is not dimensionally consistent with it.
        """
        alpha = self.alpha
        K = self.grid.K
        tau = self.grid.tau
        wts = self.weights
        d = wts.history
        times = self.grid.times
        eta = wts.eta

        r = np.asarray(residual, dtype=float)
        c0 = 2.0 * gamma(2.0 - alpha) / tau ** (1.0 - alpha)
        Mr = self._M_I @ r
        # first step: B w1 = kappa M w0, kappa = b_0 - eta t_1^-alpha / Gamma(1-alpha)
        kappa = 1.0 - eta * times[1] ** (-alpha) / gamma(1.0 - alpha)
        W = np.zeros((K + 1, self._idx.size))
        shifted = (self._B + kappa * self._M_II).tocsc()
        if self.solver == "direct":
            W[1] = spla.spsolve(shifted, kappa * c0 * Mr)
        else:
            W[1] = solve_spd(shifted, kappa * c0 * Mr, tol=self.tol)
        W[0] = c0 * spla.spsolve(self._M_II.tocsc(), Mr) - W[1]

        Mw0 = self._M_II @ W[0]
        for k in range(1, K):
            hist = d[:k] @ W[k:0:-1]
            src = wts.b[k] - eta * times[k + 1] ** (-alpha) / gamma(1.0 - alpha)
            rhs = self._M_II @ hist + src * Mw0
            W[k + 1] = self._B_solve(rhs)
        return self._pad(W)

    def misfit_gradient_via_adjoint_pde(self, f, g) -> np.ndarray:
        """``int_0^T mu(t) w(., t) dt`` by the trapezoidal rule, ``w`` from :meth:`adjoint_pde_solve`."""
        W = self.adjoint_pde_solve(self.forward_final(f) - g)
        # w(t_k) = W[K - k]
        weights = np.full(self.grid.K + 1, self.grid.tau)
        weights[[0, -1]] *= 0.5
        return (weights * self.mu) @ W[::-1]


def direct_solve(mesh, grid, alpha, mu, f, **kw):
    return SubdiffusionOperator(mesh, grid, alpha, mu, **kw).direct_solve(f)


def forward_final(mesh, grid, alpha, mu, f, **kw):
    return SubdiffusionOperator(mesh, grid, alpha, mu, **kw).forward_final(f)


def adjoint_final(mesh, grid, alpha, mu, r, **kw):
    return SubdiffusionOperator(mesh, grid, alpha, mu, **kw).adjoint_final(r)


def adjoint_pde_solve(mesh, grid, alpha, residual, **kw):
    # mu does not enter the adjoint equation itself
    return SubdiffusionOperator(mesh, grid, alpha, 1.0, **kw).adjoint_pde_solve(residual)


def misfit_gradient_via_adjoint_pde(mesh, grid, alpha, mu, f, g_delta, **kw):
    return SubdiffusionOperator(mesh, grid, alpha, mu, **kw).misfit_gradient_via_adjoint_pde(f, g_delta)


def write_trajectory_csv(path, grid: TimeGrid, states) -> None:
    """One row per time level: ``t`` followed by the nodal values."""
    states = np.asarray(states)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"u{i}" for i in range(states.shape[1])])
        for t, row in zip(grid.times, states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
