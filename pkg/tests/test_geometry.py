import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from instanton import jsonio
from instanton.errors import NotDisjoint, QuadratureBudgetExceeded, WidthTooLarge
from instanton.geometry import (PoincareDual, R4QuadratureSpec, SubmanifoldSpec, check_disjoint,
                                exterior_derivative_fd, form_basis, integrate_r4, integrate_submanifold,
                                min_distance, point, point_dual_primitive, volume_form_integrand, wedge)


def gaussian(x):
    return np.exp(-np.sum(x ** 2, axis=1))


def random_isometry(rng):
    q, r = np.linalg.qr(rng.normal(size=(4, 4)))
    return q * np.sign(np.diag(r)), rng.normal(size=4)


def test_gaussian_product_and_mc():
    val, err = integrate_r4(gaussian)
    assert abs(val - np.pi ** 2) <= 1e-8
    mc, mc_err = integrate_r4(gaussian, R4QuadratureSpec(scheme="mc", seed=3))
    assert abs(mc - np.pi ** 2) <= 4 * mc_err


@pytest.mark.parametrize("rho", [0.01, 0.3, 1.0, 7.0])
def test_delta_family_mass(rho):
    f = lambda y: rho ** 4 / (rho ** 2 + np.sum(y ** 2, axis=1)) ** 4
    val, _ = integrate_r4(f, R4QuadratureSpec(scale=rho))
    assert val == pytest.approx(np.pi ** 2 / 6, rel=1e-10)


def test_sphere_volume_from_radial_profile():
    # int_0^inf 2 exp(-r^2) r^3 dr = 1, so the integral is vol S^3
    val, err = integrate_r4(lambda x: 2 * gaussian(x))
    assert val == pytest.approx(2 * np.pi ** 2, rel=1e-8)


def test_budget_enforced():
    with pytest.raises(QuadratureBudgetExceeded):
        integrate_r4(gaussian, R4QuadratureSpec(budget=100))


def test_parallel_reduction_is_deterministic(monkeypatch):
    quad = R4QuadratureSpec(scheme="mc", seed=5, n_samples=60000)
    monkeypatch.setenv("INSTANTON_THREADS", "1")
    a = integrate_r4(gaussian, quad)
    monkeypatch.setenv("INSTANTON_THREADS", "4")
    b = integrate_r4(gaussian, quad)
    assert a == b


@pytest.mark.parametrize("spec,expected", [
    (SubmanifoldSpec("sphere3", 1.0), 2 * np.pi ** 2),
    (SubmanifoldSpec("circle", 1.5), 3 * np.pi),
    (SubmanifoldSpec("sphere2", 2.0), 16 * np.pi),
    (SubmanifoldSpec("torus2", 1.0, radius2=0.5), 4 * np.pi ** 2 * 0.5),
])
def test_submanifold_volumes(spec, expected):
    val, err = integrate_submanifold(volume_form_integrand, spec)
    assert val == pytest.approx(expected, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from(["circle", "sphere2", "sphere3", "torus2"]))
def test_isometry_invariance(seed, kind):
    rng = np.random.default_rng(seed)
    s = SubmanifoldSpec(kind, 1.2, radius2=0.7 if kind == "torus2" else None)
    c = rng.normal(size=4)
    f = lambda p, t, c=c: np.exp(-np.sum((p - c) ** 2, axis=1)) * volume_form_integrand(p, t)
    Q, b = random_isometry(rng)
    g = lambda p, t, c=Q @ c + b: np.exp(-np.sum((p - c) ** 2, axis=1)) * volume_form_integrand(p, t)
    a = integrate_submanifold(f, s)[0]
    moved = integrate_submanifold(g, s.moved(Q, b))[0]
    assert abs(a - moved) <= 1e-8


def test_orientation_of_sphere3():
    pts, tang, _ = SubmanifoldSpec("sphere3", 1.0).sample(6)
    det = np.linalg.det(np.concatenate([tang, pts[:, None, :]], axis=1))
    assert np.all(det > 0)


def test_point_dual_pairing():
    p = np.array([0.3, -0.1, 0.2, 0.0])
    f = lambda x, t: np.cos(np.sum(x, axis=1))
    for width in (0.2, 0.1):
        val = PoincareDual(point(p), width).pair(f)
        assert abs(val - np.cos(p.sum())) <= 2 * width ** 2


def test_sphere3_dual_pairs_to_one():
    s = SubmanifoldSpec("sphere3", 1.0)
    pd = PoincareDual(s, 0.2)
    beta = lambda x, t: volume_form_integrand(x, t) / (2 * np.pi ** 2 * np.linalg.norm(x, axis=1) ** 3)
    assert pd.pair(beta, n_normal=64) == pytest.approx(1.0, abs=1e-6)


def test_intersection_of_sphere3_and_centre():
    pd = PoincareDual(SubmanifoldSpec("sphere3", 1.0), 0.2)
    gamma = point_dual_primitive(np.zeros(4), 0.2)
    val, _ = integrate_r4(lambda x: wedge(pd.components(x), 1, gamma(x), 3)[:, 0],
                          R4QuadratureSpec(n_radial=200))
    assert abs(val - 1) <= 1e-3


@pytest.mark.parametrize("kind,m", [("sphere3", 1), ("circle", 3), ("sphere2", 2)])
def test_dual_forms_are_closed(kind, m):
    s = SubmanifoldSpec(kind, 1.0)
    pd = PoincareDual(s, 0.3)
    rng = np.random.default_rng(1)
    pts = s.points(6)
    x = pts[:10] + 0.1 * rng.normal(size=(len(pts[:10]), 4))
    scale = np.max(np.abs(pd.components(x)))
    res = exterior_derivative_fd(pd.components, m, x, h=1e-4)
    if m == 3:
        assert res.shape[1] == 1
    assert np.max(np.abs(res)) <= 1e-4 * max(scale, 1.0) / 0.3


def test_width_and_disjointness_errors():
    s = SubmanifoldSpec("sphere3", 1.0)
    with pytest.raises(WidthTooLarge):
        PoincareDual(s, 1.5)
    with pytest.raises(WidthTooLarge):
        PoincareDual(s, 0.4, others=[point([1.5, 0, 0, 0])])
    with pytest.raises(NotDisjoint):
        check_disjoint([s, point([1.0, 0, 0, 0])])
    with pytest.raises(NotDisjoint):
        check_disjoint([s, point([0.5, 0.5, 0.5, -0.5])])
    check_disjoint([s, point([0.3, 0.2, 0.1, 0.7])])
    assert min_distance(s, point([3.0, 0, 0, 0])) == pytest.approx(2.0)
    assert min_distance(s, point([0.3, 0.2, 0.1, 0.7])) == pytest.approx(1 - np.sqrt(0.63), abs=1e-8)


def test_spec_json_round_trip():
    rng = np.random.default_rng(4)
    Q, b = random_isometry(rng)
    s = SubmanifoldSpec("torus2", 1.3, radius2=0.4, order=20).moved(Q, b)
    t = SubmanifoldSpec.from_json(jsonio.loads(jsonio.dumps(s.to_json())))
    assert np.array_equal(t.frame_matrix, s.frame_matrix)
    assert np.array_equal(t.offset_vector, s.offset_vector)
    assert (t.kind, t.radius, t.radius2, t.order) == (s.kind, s.radius, s.radius2, s.order)


def test_wedge_signs():
    dx = np.eye(4)
    a = wedge(dx[0], 1, dx[1], 1)
    b = wedge(dx[1], 1, dx[0], 1)
    assert np.allclose(a, -b)
    top = wedge(wedge(dx[0], 1, dx[1], 1), 2, wedge(dx[2], 1, dx[3], 1), 2)
    assert top.shape == (1,) and top[0] == 1
    assert len(form_basis(2)) == 6
