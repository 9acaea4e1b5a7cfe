import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracinv.experiments import source_preset
from fracinv.fem import build_interval_mesh, build_unit_square_mesh
from fracinv.tv import canonical_dual, dual_pairing, in_dual_ball, project_ball, tv_value


def test_constant_has_zero_tv():
    for mesh in (build_interval_mesh(9), build_unit_square_mesh(5)):
        f = np.full(mesh.n_nodes, 2.5)
        assert tv_value(mesh, f) == pytest.approx(0.0, abs=1e-13)
        assert dual_pairing(mesh, f, np.full((mesh.n_elements, mesh.dim), 0.5)) == pytest.approx(0.0, abs=1e-13)


def test_identity_has_unit_tv():
    mesh = build_interval_mesh(13)
    assert tv_value(mesh, mesh.nodes[:, 0]) == pytest.approx(1.0, rel=1e-14)
    sq = build_unit_square_mesh(6)
    assert tv_value(sq, sq.nodes[:, 0]) == pytest.approx(1.0, rel=1e-13)


def test_example3_interpolant_tv():
    mesh = build_interval_mesh(40)
    f3 = source_preset("example3", mesh)
    assert tv_value(mesh, f3) == pytest.approx(0.5, abs=1e-12)


def test_projection_examples():
    np.testing.assert_allclose(project_ball(np.array([[3.0, 4.0]])), [[0.6, 0.8]], rtol=1e-15)
    inside = np.array([[0.3, -0.4], [0.0, 0.0], [1.0, 0.0]])
    np.testing.assert_array_equal(project_ball(inside), inside)
    np.testing.assert_allclose(project_ball(np.array([[-7.0]])), [[-1.0]])


def test_zero_rho_pairing():
    mesh = build_unit_square_mesh(4)
    f = np.random.default_rng(0).standard_normal(mesh.n_nodes)
    assert dual_pairing(mesh, f, np.zeros((mesh.n_elements, 2))) == 0.0


def test_canonical_dual_tie_break():
    mesh = build_interval_mesh(4)
    f = np.array([0.0, 1.0, 1.0, 0.0, 0.0])
    rho = canonical_dual(mesh, f)
    np.testing.assert_array_equal(rho[:, 0], [1.0, 0.0, -1.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.01, 100.0))
def test_projection_idempotent_and_feasible(seed, scale):
    rho = np.random.default_rng(seed).standard_normal((50, 2)) * scale
    p = project_ball(rho)
    assert in_dual_ball(p)
    np.testing.assert_array_equal(project_ball(p), p)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_projection_non_expansive(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((2, 40, 2)) * 3
    lhs = np.linalg.norm(project_ball(a) - project_ball(b), axis=1)
    rhs = np.linalg.norm(a - b, axis=1)
    assert np.all(lhs <= rhs + 1e-15)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), two_d=st.booleans())
def test_duality(seed, two_d):
    rng = np.random.default_rng(seed)
    mesh = build_unit_square_mesh(5) if two_d else build_interval_mesh(20)
    f = rng.standard_normal(mesh.n_nodes)
    tv = tv_value(mesh, f)
    rho = project_ball(rng.standard_normal((mesh.n_elements, mesh.dim)) * 2)
    assert dual_pairing(mesh, f, rho) <= tv + 1e-12
    assert abs(dual_pairing(mesh, f, canonical_dual(mesh, f)) - tv) <= 1e-12 * max(1.0, tv)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(-1e3, 1e3))
def test_one_homogeneous(seed, c):
    mesh = build_unit_square_mesh(4)
    f = np.random.default_rng(seed).standard_normal(mesh.n_nodes)
    tv = tv_value(mesh, f)
    assert abs(tv_value(mesh, c * f) - abs(c) * tv) <= 1e-12 * max(1.0, abs(c) * tv)
