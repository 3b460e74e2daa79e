import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from instanton.errors import DimensionBudgetViolated, DimensionMismatch, NotDisjoint
from instanton.geometry import SubmanifoldSpec, point
from instanton.invariants import (BumpWeight, c2_kernel_mass, c_form_evaluate, default_weight,
                                  delta_family_mass, don1, f_profile, gauss_link,
                                  lagrange_weights_at_zero, moduli_exterior_derivative, mu_form_k1,
                                  smooth_step)

S3 = SubmanifoldSpec("sphere3", 1.0)
# circle of radius 1 in the (x1, x2) plane threaded by a small S^2 in (x1, x3, x4) around (1, 0, 0, 0)
CIRCLE = SubmanifoldSpec("circle", 1.0)
SMALL_S2 = SubmanifoldSpec("sphere2", 0.5, frame=tuple(map(tuple, np.eye(4)[:, [0, 2, 3, 1]])),
                           offset=(1.0, 0, 0, 0))


def random_isometry(rng):
    q, r = np.linalg.qr(rng.normal(size=(4, 4)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q, rng.normal(size=4)


def test_point_and_sphere():
    assert gauss_link(point([0.1, 0.2, 0, 0]), S3).value == pytest.approx(1.0, abs=1e-10)
    assert gauss_link(S3, point([0.1, 0.2, 0, 0])).value == pytest.approx(1.0, abs=1e-10)
    assert abs(gauss_link(point([2.0, 0, 0, 0]), S3).value) <= 1e-10


def test_linked_circle_and_sphere():
    a = gauss_link(CIRCLE, SMALL_S2)
    b = gauss_link(SMALL_S2, CIRCLE)
    assert abs(a.value) == pytest.approx(1.0, abs=1e-3)
    assert a.nearest_integer == b.nearest_integer
    far = SMALL_S2.moved(np.eye(4), [0, 0, 3.0, 0])
    assert abs(gauss_link(CIRCLE, far).value) <= 1e-3


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_linking_invariant_under_rotations(seed):
    rng = np.random.default_rng(seed)
    Q, b = random_isometry(rng)
    base = gauss_link(CIRCLE, SMALL_S2).value
    moved = gauss_link(CIRCLE.moved(Q, b), SMALL_S2.moved(Q, b)).value
    assert moved == pytest.approx(base, abs=1e-8)


def test_linking_errors():
    with pytest.raises(DimensionMismatch):
        gauss_link(CIRCLE, S3)
    with pytest.raises(NotDisjoint):
        gauss_link(point([0.6, 0.8, 0, 0]), S3)


def test_c_form_top_coefficient():
    rng = np.random.default_rng(0)
    x, T, rho = rng.normal(size=4), rng.normal(size=4), 0.7
    V = np.zeros((4, 9))
    V[:, :4] = np.eye(4)
    D2 = rho ** 2 + np.sum((x - T) ** 2)
    assert c_form_evaluate(x, T, rho, V) == pytest.approx(6 * rho ** 4 / (np.pi ** 2 * D2 ** 4))


@pytest.mark.parametrize("R,rho", [(1.3, 0.4), (0.8, 1.1)])
def test_mu_form_rho_component(R, rho):
    # mu(d rho) over a centred S^3 equals 2 pi^2 R^4 times the rho-derivative of f at r = R
    mu = mu_form_k1(SubmanifoldSpec("sphere3", R))
    val = mu.evaluate(np.zeros(4), rho, [[0, 0, 0, 0, 1]])
    h = 1e-5
    oracle = 2 * np.pi ** 2 * R ** 4 * (f_profile(R, rho + h) - f_profile(R, rho - h)) / (2 * h)
    assert val == pytest.approx(oracle, rel=1e-6)


def test_mu_forms_are_closed():
    T = np.array([0.2, 0.1, 0.0, 0.1])
    for s in (S3, point([0.3, 0.1, 0, 0]), CIRCLE):
        mu = mu_form_k1(s)
        d = moduli_exterior_derivative(mu, T, 0.5)
        assert np.max(np.abs(d)) <= 1e-4


def test_point_form_concentrates():
    mu = mu_form_k1(point([1.0, 0, 0, 0]))
    vals = [abs(mu.evaluate(np.zeros(4), rho, [np.eye(5)[i] for i in range(4)])) for rho in (0.3, 0.1, 0.03)]
    assert vals[0] > vals[1] > vals[2]


def test_smooth_step_and_weight():
    s = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    assert np.allclose(smooth_step(s), [1, 1, 0.5, 0, 0])
    w = BumpWeight((0, 0, 0, 0), 2.0, 1.0)
    assert w(np.zeros(4), 1.0) == 1.0 and w(np.zeros(4), 3.5) == 0.0
    assert default_weight([S3]).inner == pytest.approx(21.0, abs=0.1)


def test_lagrange_weights_reproduce_quadratics():
    w = lagrange_weights_at_zero([0.2, 0.1, 0.05])
    for p in (lambda e: 1 + 0 * e, lambda e: e, lambda e: 3 - e + 2 * e ** 2):
        assert np.dot(w, p(np.array([0.2, 0.1, 0.05]))) == pytest.approx(p(0.0), abs=1e-12)


def test_don1_point_inside_sphere():
    r = don1([point([0.0, 0, 0, 0]), S3], n_samples=300_000, seed=2)
    assert abs(abs(r.value) - 1) <= 4 * r.error + 0.01
    assert r.value < 0


def test_don1_unlinked_vanishes():
    r = don1([point([3.0, 0, 0, 0]), S3], n_samples=300_000, seed=3)
    assert abs(r.value) <= 4 * r.error + 1e-3


def test_don1_is_seeded():
    a = don1([point([0.0, 0, 0, 0]), S3], n_samples=50_000, seed=4)
    b = don1([point([0.0, 0, 0, 0]), S3], n_samples=50_000, seed=4)
    assert a.value == b.value and a.by_eps == b.by_eps


def test_don1_dimension_budget():
    with pytest.raises(DimensionBudgetViolated):
        don1([CIRCLE, S3], n_samples=10)
    with pytest.raises(NotDisjoint):
        don1([point([1.0, 0, 0, 0]), S3], n_samples=10)


def radial_oracle(n, rho, g):
    """Same integral reduced to one radial dimension for a radial test function g(r)."""
    h = lambda r: rho ** 4 * r ** 3 * g(r) / (rho ** 2 + r ** 2) ** n
    cuts = [0, rho, 10 * rho, 1.0, 12.0]
    val = sum(quad(h, a, b, limit=400, epsabs=0, epsrel=1e-12)[0] for a, b in zip(cuts, cuts[1:]))
    return 2 * np.pi ** 2 * val


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("rho", [0.1, 0.01])
def test_delta_family_masses(n, rho):
    f = lambda y: np.exp(-np.sum(y ** 2, axis=1))
    val, err = delta_family_mass(n, rho, f)
    assert val == pytest.approx(radial_oracle(n, rho, lambda r: np.exp(-r ** 2)), rel=1e-7)


def test_delta_family_limits():
    f = lambda y: np.exp(-np.sum(y ** 2, axis=1))
    # n = 4 keeps mass pi^2/6 at the origin, n = 3 scales like rho^2, n = 2 faster
    m4 = [delta_family_mass(4, rho, f)[0] for rho in (0.1, 0.01, 0.001)]
    m3 = [delta_family_mass(3, rho, f)[0] for rho in (0.1, 0.01, 0.001)]
    assert abs(m4[-1] / (np.pi ** 2 / 6) - 1) <= 1e-5
    assert m3[-1] / 1e-6 == pytest.approx(np.pi ** 2 / 2, rel=1e-3)
    assert delta_family_mass(2, 0.001, f)[0] / 0.001 ** 2 <= 1e-3
    assert c2_kernel_mass(0.001, f)[0] == pytest.approx(1.0, abs=1e-5)
    with pytest.raises(ValueError):
        delta_family_mass(5, 0.1, f)
