"""Accelerated linearized primal-dual iteration for L2-TV source reconstruction.

Minimises

    J(f) = 0.5 ||S f - g||^2 + 0.5 beta ||f||^2 + gamma TV(f)

over P1 fields ``f``, where ``S`` maps a source to the final state of the
discrete subdiffusion problem. TV is dualised with a piecewise constant
field ``rho`` in the unit ball, and each sweep performs

1. extrapolation ``f~ = f^n + theta_n (f^n - f^{n-1})``;
2. dual ascent ``rho^{n+1} = P(rho^n + gamma sigma_n / upsilon_n grad f~)``;
3. a linearised proximal step in ``f`` solved with one mass-matrix solve;
4. ``theta_{n+1} = 1/sqrt(1 + 2 beta sigma_n)``, ``sigma_{n+1} = theta_{n+1} sigma_n``,
   ``upsilon_{n+1} = upsilon_n theta_{n+1} sigma_{n+1} / sigma_n``.

All L2 norms are taken in the mass-matrix inner product.
"""
from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .fem import gradient, gradient_adjoint
from .subdiffusion import SubdiffusionOperator
from .tv import project_ball, tv_value

log = logging.getLogger(__name__)

_BLOWUP = 1e6

__all__ = [
    "PDParams",
    "PDState",
    "StoppingReason",
    "Metrics",
    "NormEstimate",
    "InversionResult",
    "StepConditionError",
    "DegenerateInputError",
    "estimate_norms",
    "check_step_condition",
    "initial_state",
    "pd_iterate",
    "run_inversion",
    "add_noise",
    "objective",
    "error_metrics",
    "optimality_residuals",
]


class StepConditionError(ValueError):
    """The step-size condition for convergence is violated."""


class DegenerateInputError(ValueError):
    """Noise requested for identically zero data."""


class StoppingReason(str, enum.Enum):
    RELATIVE_CHANGE = "relative-change"
    DISCREPANCY = "discrepancy"
    ITERATION_CAP = "iteration-cap"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class PDParams:
    """Regularisation weights, schedule seeds and stopping knobs.

    ``tol_rel = 0`` disables the relative-change rule and ``delta=None``
    disables the discrepancy principle.
    """

    beta: float
    gamma: float
    sigma0: float = 300.0
    upsilon0: float = 1e-4
    theta0: float = 1.0
    n_max: int = 5000
    tol_rel: float = 1e-4
    discrepancy_factor: float = 1.2
    delta: float | None = None

    def __post_init__(self):
        if self.beta < 0 or self.gamma < 0:
            raise ValueError("beta and gamma must be non-negative")
        if min(self.sigma0, self.upsilon0, self.theta0) <= 0:
            raise ValueError("sigma0, upsilon0 and theta0 must be positive")
        if self.n_max < 0 or self.tol_rel < 0 or self.discrepancy_factor <= 0:
            raise ValueError("invalid stopping parameters")
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be non-negative")


@dataclass
class PDState:
    f: np.ndarray
    f_prev: np.ndarray
    rho: np.ndarray
    sigma: float
    upsilon: float
    theta: float
    n: int = 0
    residual: np.ndarray | None = None  # S f - g for the current f, when known


@dataclass
class Metrics:
    """Per-iteration history; index ``n`` refers to the iterate ``f^n``."""

    e_r: list = field(default_factory=list)
    res: list = field(default_factory=list)
    step: list = field(default_factory=list)
    objective: list = field(default_factory=list)

    @property
    def final_e_r(self):
        return self.e_r[-1] if self.e_r else None

    @property
    def final_res(self):
        return self.res[-1] if self.res else None


@dataclass(frozen=True)
class NormEstimate:
    c: float
    grad_norm: float
    converged: bool = True


@dataclass
class InversionResult:
    f: np.ndarray
    rho: np.ndarray
    n: int
    reason: StoppingReason
    metrics: Metrics
    state: PDState

    @property
    def converged(self) -> bool:
        return self.reason is not StoppingReason.DIVERGED


def _power_iteration(apply, inner, v0, max_iter, rtol):
    v = v0 / math.sqrt(inner(v0, v0))
    est = 0.0
    for _ in range(max_iter):
        w = apply(v)
        new = math.sqrt(max(inner(w, w), 0.0))
        if new == 0.0:
            return 0.0, True
        v = w / new
        if abs(new - est) <= rtol * new:
            return new, True
        est = new
    return est, False


def estimate_norms(op: SubdiffusionOperator, max_iter=30, rtol=1e-6, grad_max_iter=500) -> NormEstimate:
    """Power-iteration estimates of ``||S||`` and ``||grad||`` in the L2 norm.

    ``c`` is the square root of the dominant eigenvalue of ``S* S``; the
    gradient norm comes from ``M^-1 grad^T W grad``, which equals ``M^-1 A``.
    """
    mesh = op.mesh
    v0 = np.random.default_rng(0).random(mesh.n_nodes) + 0.5
    lam, ok1 = _power_iteration(lambda v: op.adjoint_final(op.forward_final(v)), op.inner, v0,
                                max_iter, rtol)
    lam_g, ok2 = _power_iteration(
        lambda v: op.mass_solve(gradient_adjoint(mesh, gradient(mesh, v))), op.inner,
        np.cos(np.pi * np.arange(mesh.n_nodes)) + 0.0, grad_max_iter, rtol)
    ok = ok1 and ok2
    if not ok:
        warnings.warn("power iteration stopped at its cap before stagnating", RuntimeWarning)
    return NormEstimate(math.sqrt(lam), math.sqrt(lam_g), ok)


def check_step_condition(params: PDParams, c: float, grad_norm: float) -> bool:
    """``(1 - 3 c^2 sigma0) / sigma0 > beta^2 (sigma0 / upsilon0) ||grad||^2``.

    The inequality is used exactly as stated; note it involves ``beta`` and
    not the TV weight ``gamma``.
    """
    s = params.sigma0
    lhs = (1.0 - 3.0 * c * c * s) / s
    rhs = params.beta**2 * (s / params.upsilon0) * grad_norm**2
    return bool(lhs > rhs)


def initial_state(op: SubdiffusionOperator, params: PDParams, f0=None, rho0=None) -> PDState:
    mesh = op.mesh
    f0 = np.zeros(mesh.n_nodes) if f0 is None else np.array(f0, dtype=float)
    if rho0 is None:
        rho = np.full((mesh.n_elements, mesh.dim), 0.5)
    else:
        rho = np.broadcast_to(np.asarray(rho0, dtype=float), (mesh.n_elements, mesh.dim)).copy()
    return PDState(f0, f0.copy(), rho, params.sigma0, params.upsilon0, params.theta0)


def pd_iterate(state: PDState, params: PDParams, op: SubdiffusionOperator, g_delta) -> PDState:
    """One sweep of the primal-dual iteration; returns the new state."""
    mesh = op.mesh
    s, u, th = state.sigma, state.upsilon, state.theta
    f = state.f
    res = state.residual if state.residual is not None else op.forward_final(f) - g_delta

    f_bar = f + th * (f - state.f_prev)
    rho = project_ball(state.rho + (params.gamma * s / u) * gradient(mesh, f_bar))

    rhs = (op.M @ f) / s - op.forward_final_transpose(op.M @ res)
    if params.gamma:
        rhs -= params.gamma * gradient_adjoint(mesh, rho)
    f_new = op.mass_solve(rhs) / (1.0 / s + params.beta)

    th_new = 1.0 / math.sqrt(1.0 + 2.0 * params.beta * s)
    s_new = th_new * s
    u_new = u * th_new * s_new / s
    return PDState(f_new, f, rho, s_new, u_new, th_new, state.n + 1)


def add_noise(g, delta_rel: float, seed: int, op: SubdiffusionOperator):
    """Perturb interior values of ``g`` by uniform noise scaled to relative level ``delta_rel``.

    ``g_delta = g + delta_rel ||g|| r / ||r||`` with ``r`` uniform in
    ``[-1, 1)`` on the interior nodes, so that ``g_delta`` keeps the
    homogeneous boundary values. Returns ``(g_delta, delta)`` with
    ``delta = delta_rel ||g||``.
    """
    g = np.asarray(g, dtype=float)
    if delta_rel < 0:
        raise ValueError("delta_rel must be non-negative")
    if delta_rel == 0:
        return g.copy(), 0.0
    gnorm = op.norm(g)
    if gnorm == 0.0:
        raise DegenerateInputError("cannot scale relative noise for zero data")
    rng = np.random.default_rng(seed)
    r = np.zeros_like(g)
    r[op.mesh.interior_nodes] = 2.0 * rng.random(op.mesh.interior_nodes.size) - 1.0
    noise = r * (delta_rel * gnorm / op.norm(r))
    return g + noise, delta_rel * gnorm


def objective(f, g_delta, params: PDParams, op: SubdiffusionOperator, residual=None) -> float:
    res = op.forward_final(f) - g_delta if residual is None else residual
    return (0.5 * op.inner(res, res) + 0.5 * params.beta * op.inner(f, f)
            + params.gamma * tv_value(op.mesh, f))


def error_metrics(f_n, f_dagger, g_delta, op: SubdiffusionOperator, residual=None):
    """``(e_r, res)``; ``e_r`` is ``None`` for a missing or zero ground truth."""
    res_vec = op.forward_final(f_n) - g_delta if residual is None else residual
    res = op.norm(res_vec)
    e_r = None
    if f_dagger is not None:
        ref = op.norm(f_dagger)
        if ref > 0:
            e_r = op.norm(np.asarray(f_n) - f_dagger) / ref
    return e_r, res


def optimality_residuals(f, rho, g_delta, params: PDParams, op: SubdiffusionOperator):
    """Relative primal residual and TV duality gap at ``(f, rho)``.

    The primal residual is the L2 norm of the Riesz representative of
    ``S*(S f - g) + beta f - gamma div rho`` divided by the norm of its
    largest term; the gap is ``TV(f) - (grad f, rho)``.
    """
    mesh = op.mesh
    res = op.forward_final(f) - g_delta
    parts = [op.forward_final_transpose(op.M @ res), params.beta * (op.M @ f),
             params.gamma * gradient_adjoint(mesh, rho)]
    total = op.mass_solve(sum(parts))
    scale = max(op.norm(op.mass_solve(p)) for p in parts) or 1.0
    g = gradient(mesh, f)
    pairing = float(mesh.element_measure @ np.einsum("ed,ed->e", g, rho))
    return op.norm(total) / scale, tv_value(mesh, f) - pairing


def run_inversion(g_delta, params: PDParams, op: SubdiffusionOperator, f0=None, rho0=None,
                  f_true=None, norms: NormEstimate | None = None, force=False,
                  callback=None) -> InversionResult:
    """Iterate until the discrepancy principle, the relative-change rule or the cap fires.

    Stopping is tested on each iterate ``f^n`` before the next sweep, with
    precedence discrepancy > relative change > iteration cap. A non-finite
    iterate ends the run with reason ``diverged``.

    Raises
    ------
    StepConditionError
        If the step-size condition fails and ``force`` is false.
    """
    g_delta = np.asarray(g_delta, dtype=float)
    if norms is None:
        norms = estimate_norms(op)
    if not check_step_condition(params, norms.c, norms.grad_norm):
        msg = (f"step condition violated: sigma0={params.sigma0}, upsilon0={params.upsilon0}, "
               f"c={norms.c:.4g}, |grad|={norms.grad_norm:.4g}, beta={params.beta}")
        if not force:
            raise StepConditionError(msg)
        log.warning("%s; continuing because force=True", msg)

    state = initial_state(op, params, f0, rho0)
    metrics = Metrics()
    threshold = None if params.delta is None else params.discrepancy_factor * params.delta

    while True:
        res_vec = op.forward_final(state.f) - g_delta
        state.residual = res_vec
        e_r, res = error_metrics(state.f, f_true, g_delta, op, residual=res_vec)
        step = op.norm(state.f - state.f_prev)
        fnorm = op.norm(state.f)
        metrics.e_r.append(e_r)
        metrics.res.append(res)
        metrics.step.append(step)
        metrics.objective.append(objective(state.f, g_delta, params, op, residual=res_vec))
        if callback is not None:
            callback(state, metrics)

        fired = []
        # the residual of a convergent run never grows far past its start
        if (not (math.isfinite(res) and math.isfinite(fnorm))
                or (metrics.res[0] > 0 and res > _BLOWUP * metrics.res[0])):
            log.warning("iteration %d: residual %.3g has blown up, giving up", state.n, res)
            return InversionResult(state.f, state.rho, state.n, StoppingReason.DIVERGED, metrics, state)
        if threshold is not None and res <= threshold:
            fired.append(StoppingReason.DISCREPANCY)
        if state.n > 0 and params.tol_rel > 0 and fnorm > 0 and step / fnorm <= params.tol_rel:
            fired.append(StoppingReason.RELATIVE_CHANGE)
        if state.n >= params.n_max:
            fired.append(StoppingReason.ITERATION_CAP)
        if fired:
            if len(fired) > 1:
                log.info("iteration %d: several stopping rules fired %s", state.n,
                         [r.value for r in fired])
            return InversionResult(state.f, state.rho, state.n, fired[0], metrics, state)

        state = pd_iterate(state, params, op, g_delta)


def with_noise_level(params: PDParams, delta: float, beta_from_noise=False) -> PDParams:
    """Copy of ``params`` with ``delta`` set and optionally ``beta = delta^2``."""
    if beta_from_noise:
        return replace(params, delta=delta, beta=delta**2)
    return replace(params, delta=delta)
