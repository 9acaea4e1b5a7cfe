"""Quick oracle and invariant checks, run by ``fracinv verify``.

Each check returns ``(name, passed, detail)``. The suite is small enough to
finish in well under a minute; the full set of acceptance checks lives in
the test suite.
"""
import math

import numpy as np
from scipy.special import erfcx

from .fem import assemble_mass, assemble_stiffness, build_interval_mesh, build_unit_square_mesh
from .mittag_leffler import mittag_leffler
from .subdiffusion import SubdiffusionOperator, TimeGrid, l1_weights
from .tv import canonical_dual, dual_pairing, project_ball, tv_value


def check_l1_weights():
    worst = 0.0
    ok = True
    for alpha in (0.1, 0.3, 0.5, 0.7, 0.9):
        w = l1_weights(alpha, 1000, 1e-3)
        b = w.b[:1001]
        ok &= b[0] == 1.0 and bool(np.all(np.diff(b) < 0)) and bool(np.all(b > 0))
        z = w.zeta(1000)
        ok &= z[0] == 1.0 and bool(np.all(z[1:] < 0))
        worst = max(worst, abs(z.sum()))
    ok &= worst <= 1e-14
    return "l1 weights", ok, f"max |sum zeta| = {worst:.1e}"


def check_fem_matrices():
    mesh = build_interval_mesh(10)
    h = 0.1
    M = assemble_mass(mesh).toarray()
    A = assemble_stiffness(mesh).toarray()
    err = max(abs(M[3, 3] - 2 * h / 3), abs(M[3, 4] - h / 6), abs(A[3, 3] - 2 / h), abs(A[3, 4] + 1 / h))
    sq = build_unit_square_mesh(4)
    area = assemble_mass(sq).sum()
    ok = bool(err < 1e-12 and abs(area - 1.0) < 1e-12)
    return "fem matrices", ok, f"entry error {err:.1e}, total mass {area:.15f}"


def check_mittag_leffler():
    # E_{1,1}(z) = exp(z) and E_{1/2,1}(-x) = erfcx(x)
    cases = [((1.0, 1.0, -2.0), math.exp(-2.0)),
             ((0.5, 1.0, -1.0), float(erfcx(1.0))),
             ((0.5, 1.0, -30.0), float(erfcx(30.0)))]
    worst = max(abs(mittag_leffler(a, b, z) - ref) / abs(ref) for (a, b, z), ref in cases)
    return "mittag-leffler", worst < 1e-10, f"max rel error {worst:.1e}"


def check_adjoint(seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for mesh, K in ((build_interval_mesh(40), 50), (build_unit_square_mesh(8), 10)):
        op = SubdiffusionOperator(mesh, TimeGrid(1.0, K), 0.6, lambda t: np.sin(2 * np.pi * t))
        for _ in range(5):
            z = rng.standard_normal(mesh.n_nodes)
            r = rng.standard_normal(mesh.n_nodes)
            r[mesh.boundary_nodes] = 0.0
            lhs = op.inner(op.forward_final(z), r)
            rhs = op.inner(z, op.adjoint_final(r))
            worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    return "exact adjoint", worst <= 1e-10, f"max dot-product mismatch {worst:.1e}"


def check_direct_vs_spectral():
    alpha, T = 0.5, 1.0
    mesh = build_interval_mesh(64)
    x = mesh.nodes[:, 0]
    op = SubdiffusionOperator(mesh, TimeGrid(T, 256), alpha, 1.0)
    u = op.forward_final(np.sin(np.pi * x))
    exact = np.sin(np.pi * x) * T**alpha * mittag_leffler(alpha, alpha + 1, -np.pi**2 * T**alpha)
    err = op.norm(u - exact) / op.norm(exact)
    return "direct vs spectral", err <= 1e-2, f"relative L2 error {err:.2e}"


def check_tv_duality(seed=0):
    rng = np.random.default_rng(seed)
    worst_gap = 0.0
    ok = True
    for mesh in (build_interval_mesh(30), build_unit_square_mesh(6)):
        for _ in range(10):
            f = rng.standard_normal(mesh.n_nodes)
            rho = project_ball(rng.standard_normal((mesh.n_elements, mesh.dim)) * 2)
            tv = tv_value(mesh, f)
            ok &= dual_pairing(mesh, f, rho) <= tv * (1 + 1e-14)
            worst_gap = max(worst_gap, abs(dual_pairing(mesh, f, canonical_dual(mesh, f)) - tv) / tv)
    return "tv duality", ok and worst_gap <= 1e-12, f"max canonical gap {worst_gap:.1e}"


CHECKS = [check_l1_weights, check_fem_matrices, check_mittag_leffler, check_adjoint,
          check_direct_vs_spectral, check_tv_duality]


def run_checks(checks=CHECKS):
    results = []
    for check in checks:
        try:
            results.append(check())
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            results.append((check.__name__, False, f"{type(exc).__name__}: {exc}"))
    return results
