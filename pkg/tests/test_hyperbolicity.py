import math

import numpy as np
import pytest

from coneflow.decomposition import FrequencyLattice
from coneflow.hyperbolicity import (ConeHyperbolicityError, NoSplittingError, OrbitEscapeError,
                                    R_pqt, R_pqt_limit, check_cone_hyperbolicity,
                                    cone_expansion_norms, estimate_splitting, hook_structure,
                                    hooks, iterate_derivative, jacobian_det_iterate, lambda_mt,
                                    local_exponents, periodic_points, sample_invariant_set,
                                    weight_product)
from coneflow.maps import GOLDEN, TWO_PI, WeightField, cat_cones, cat_map, eigen_axes, identity_map
from coneflow.partition import ChartSystem
from coneflow.symbols import SIGNS, ConeSystem

A = np.array([[2, 1], [1, 1]])
PTS = np.random.default_rng(0).uniform(0, TWO_PI, (2, 30))
ONE = WeightField.constant(1.0)


def test_iterate_derivative():
    D = iterate_derivative(cat_map(), PTS[:, 0], 3)
    assert np.array_equal(D, np.linalg.matrix_power(A, 3))
    assert np.array_equal(D, [[13, 8], [8, 5]])
    assert np.array_equal(iterate_derivative(identity_map(), PTS[:, 0], 1), np.eye(2))
    with pytest.raises(ValueError):
        iterate_derivative(cat_map(), PTS[:, 0], 0)
    with pytest.raises(OrbitEscapeError):
        iterate_derivative(cat_map(), PTS[:, 0], 5, neighborhood=lambda y: y[0] < 100)


def test_iterate_derivative_finite_difference():
    T = cat_map(0.05)
    x = PTS[:, 1]
    h = 1e-5
    D = iterate_derivative(T, x, 2)
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (T(T(x + e)) - T(T(x - e))) / (2 * h)
        assert np.abs(D[:, j] - fd).max() < 1e-7


def test_splitting_of_cat_map():
    sp = estimate_splitting(cat_map(), PTS)
    s, u = eigen_axes(A)
    assert np.abs(np.abs(s @ sp.stable) - 1).max() < 1e-14
    assert np.abs(np.abs(u @ sp.unstable) - 1).max() < 1e-14
    assert sp.residual.max() < 1e-12
    assert len(sp) == 30
    assert sp.index_of(sp.points[:, 4]) == 4
    with pytest.raises(KeyError):
        sp.index_of(sp.points[:, 4] + 0.1)


def test_identity_has_no_splitting():
    with pytest.raises(NoSplittingError):
        estimate_splitting(identity_map(), PTS)


def test_splitting_small_perturbation():
    sp = estimate_splitting(cat_map(1e-3), PTS)
    s, u = eigen_axes(A)
    assert np.arccos(np.abs(s @ sp.stable).min()) < 1e-2
    assert np.arccos(np.abs(u @ sp.unstable).min()) < 1e-2
    assert sp.residual.max() < 1e-12


def test_cat_exponents_closed_form():
    sp = estimate_splitting(cat_map(), PTS)
    lam, nu = local_exponents(cat_map(), sp, m=5)
    assert np.allclose(lam, GOLDEN**-5, rtol=1e-12)
    assert np.allclose(nu, GOLDEN**5, rtol=1e-12)
    assert GOLDEN**-5 == pytest.approx(0.008131, abs=1e-6)
    assert GOLDEN**5 == pytest.approx(122.99, abs=1e-2)
    assert local_exponents(cat_map(), sp, index=0, m=0) == (1.0, 1.0)


def test_exponent_cocycle():
    T = cat_map(0.05)
    sp = estimate_splitting(T, PTS)
    m, k = 3, 4
    lam_mk, nu_mk = local_exponents(T, sp, m=m + k)
    lam_m, nu_m = local_exponents(T, sp, m=m)
    y = PTS
    for _ in range(m):
        y = T.wrap(T(y))
    lam_k, nu_k = local_exponents(T, estimate_splitting(T, y), m=k)
    assert np.all(lam_mk <= lam_m * lam_k * (1 + 1e-9))
    assert np.all(nu_mk >= nu_m * nu_k * (1 - 1e-9))


def test_weight_products():
    x = PTS[:, :5]
    assert np.allclose(weight_product(ONE, cat_map(), x, 7), 1)
    assert np.allclose(weight_product(WeightField.constant(1.5), cat_map(), x, 4), 1.5**4)
    T = cat_map(0.05, k=(1, 0))
    inv_det = WeightField.from_callable(lambda y: 1 / np.abs(T.jacobian_det(y)))
    direct = weight_product(inv_det, T, x, 3) * jacobian_det_iterate(T, x, 3)
    assert np.allclose(direct, 1, atol=1e-13)
    lin = WeightField.from_callable(lambda y: 1 / np.abs(cat_map().jacobian_det(y)))
    assert np.allclose(weight_product(lin, cat_map(), x, 3), 1)


def test_periodic_point_counts():
    # |det(A^n - I)| = tr(A^n) - 2 points of period dividing n
    T = cat_map()
    for n in range(1, 5):
        P = periodic_points(T, n)
        assert P.shape[1] == round(np.trace(np.linalg.matrix_power(A, n))) - 2
        y = P
        for _ in range(n):
            y = T(y)
        diff = np.mod(y - P + np.pi, TWO_PI) - np.pi
        assert np.abs(diff).max() < 1e-9


def test_perturbed_periodic_points():
    T = cat_map(0.05)
    P = periodic_points(T, 2)
    assert P.shape[1] == 5
    diff = np.mod(T(T(P)) - P + np.pi, TWO_PI) - np.pi
    assert np.abs(diff).max() < 1e-10


@pytest.fixture(scope="module")
def omega_split():
    T = cat_map()
    return T, estimate_splitting(T, sample_invariant_set(T, count=64, rng=0))


@pytest.mark.parametrize("p,q,t", [(2, -1, math.inf), (1, -1, math.inf), (1, -1, 4 / 3),
                                   (1, -1, 2), (1, -1, 4)])
def test_R_closed_form(omega_split, p, q, t):
    T, sp = omega_split
    R, roots = R_pqt_limit(T, ONE, sp, p, q, t, 12)
    assert R == pytest.approx(1 / GOLDEN, abs=1e-10)
    assert np.allclose(roots, 1 / GOLDEN, atol=1e-10)
    assert R == pytest.approx(0.3819660113, abs=1e-9)


def test_R_weight_dominates(omega_split):
    T, sp = omega_split
    assert R_pqt(T, WeightField.constant(2.0), sp, 0, 0, math.inf, 3) == pytest.approx(8.0)
    assert R_pqt_limit(T, WeightField.constant(2.0), sp, 0, 0, math.inf, 5)[0] == pytest.approx(2)
    with pytest.raises(ValueError):
        R_pqt(T, ONE, sp, -1, -1, math.inf, 1)
    with pytest.raises(ValueError):
        R_pqt(T, ONE, sp, 1, -1, 1.0, 1)


def test_R_volume_factor():
    # a non-conservative map: the 1/t root of the Jacobian enters
    T = cat_map(0.05, k=(1, 0))
    sp = estimate_splitting(T, PTS)
    r_inf = R_pqt(T, ONE, sp, 0, 0, math.inf, 1)
    r_2 = R_pqt(T, ONE, sp, 0, 0, 2, 1)
    assert r_inf == 1.0
    assert r_2 == pytest.approx(float(np.max(np.abs(T.jacobian_det(sp.points)) ** -0.5)))


def _narrow_complements(a):
    s, u = eigen_axes(A.T)
    src = ConeSystem([s], [u], math.pi / 2 - a, a / 2)
    tgt = ConeSystem([s], [u], a / 2, math.pi / 2 - a)
    return src, tgt


def test_cone_norms_approach_eigenvalues():
    src, tgt = _narrow_complements(0.1)
    plus, minus = cone_expansion_norms(cat_map(), src, tgt, PTS)
    assert plus == pytest.approx(1 / GOLDEN, rel=0.1)
    assert minus == pytest.approx(GOLDEN, rel=0.1)
    src, tgt = _narrow_complements(0.01)
    plus2, minus2 = cone_expansion_norms(cat_map(), src, tgt, PTS)
    assert abs(plus2 - 1 / GOLDEN) < abs(plus - 1 / GOLDEN)
    assert abs(minus2 - GOLDEN) < abs(minus - GOLDEN)


def test_swapped_cones_fail():
    s, u = eigen_axes(A.T)
    swapped = ConeSystem([u], [s], 0.6, 0.6)
    with pytest.raises(ConeHyperbolicityError) as info:
        check_cone_hyperbolicity(cat_map(), swapped, swapped, PTS)
    assert info.value.xi.shape == (2,)


@pytest.fixture(scope="module")
def cat_hooks():
    th = cat_cones(0.6, 0.6)
    return hook_structure(cat_map(), th, th, PTS)


def test_hook_integers(cat_hooks):
    hs = cat_hooks
    assert (hs.h_min, hs.h_max) == (-6, 6)
    # strict inequalities 2^(h_min+4) < 1/gamma and gamma < 2^(h_max-4)
    assert 2.0 ** (hs.h_min + 4) < 1 / GOLDEN <= 2.0 ** (hs.h_min + 5)
    assert 2.0 ** (hs.h_max - 5) <= GOLDEN < 2.0 ** (hs.h_max - 4)
    assert (hs.h_min_minus, hs.h_max_plus) == (-4, 4)
    assert 2.0 ** (hs.h_min_minus + 4) < hs.norm_minus
    assert hs.norm_plus < 2.0 ** (hs.h_max_plus - 4)
    assert hs.NT >= 3
    assert hs.enlarged_plus_aperture < 0.6


def test_hook_relation(cat_hooks):
    hs = cat_hooks
    for ell in range(8):
        for n in range(8):
            assert not hooks(hs, ell, "-", n, "+")
            assert hs.hooks(ell, "+", n, "+") == (n <= ell + hs.h_max_plus)
            assert hooks(hs, ell, "-", n, "-") == (ell + hs.h_min_minus <= n)
    with pytest.raises(ValueError):
        hooks(hs, 0, "x", 0, "+")
    assert set(hs.to_dict()) >= {"h_min", "h_max", "NT"}


def test_lambda_sandwich():
    th = cat_cones(0.6, 0.6)
    charts = ChartSystem.trivial(th, FrequencyLattice(16))
    lam8 = lambda_mt(cat_map(), ONE, charts, 8, math.inf, 1, -1, PTS)
    assert lam8 ** (1 / 8) == pytest.approx(1 / GOLDEN, rel=0.15)
    assert lambda_mt(cat_map(), WeightField.constant(0.0), charts, 3, math.inf, 1, -1, PTS) == 0
    plus, minus = cone_expansion_norms(cat_map(), th, th, PTS)
    lam1 = lambda_mt(cat_map(), WeightField.constant(1.5), charts, 1, math.inf, 1, -1, PTS)
    assert lam1 == pytest.approx(1.5 * max(plus, 1 / minus), rel=1e-12)


def test_signs_constant():
    assert SIGNS == ("+", "-")


@pytest.mark.parametrize("amp", [0.0, 0.05])
def test_R_submultiplicative(amp):
    T = cat_map(amp)
    sp = estimate_splitting(T, sample_invariant_set(T, count=64, rng=0))
    R = {m: R_pqt(T, ONE, sp, 1, -1, math.inf, m) for m in range(1, 9)}
    for a in range(1, 5):
        for b in range(1, 5):
            assert R[a + b] <= R[a] * R[b] * (1 + 1e-9)


@pytest.mark.parametrize("amp", [0.0, 0.05])
def test_lambda_R_ratio_bounded(amp):
    T = cat_map(amp)
    sp = estimate_splitting(T, sample_invariant_set(T, count=64, rng=0))
    charts = ChartSystem.trivial(cat_cones(0.6, 0.6), FrequencyLattice(16))
    pts = sp.points[:, :30]
    ratios = [lambda_mt(T, ONE, charts, m, math.inf, 1, -1, pts)
              / R_pqt(T, ONE, sp, 1, -1, math.inf, m) for m in range(2, 11)]
    assert max(ratios) / min(ratios) < 10


def test_derivative_cocycle():
    T = cat_map(0.05)
    x = PTS[:, 2]
    y = x
    for _ in range(3):
        y = T.wrap(T(y))
    D = iterate_derivative(T, x, 7)
    chained = iterate_derivative(T, y, 4) @ iterate_derivative(T, x, 3)
    assert np.abs(D - chained).max() < 1e-10 * np.abs(D).max()


def test_cat_exponents_all_m():
    sp = estimate_splitting(cat_map(), PTS)
    for m in (1, 7, 13, 20):
        lam, nu = local_exponents(cat_map(), sp, m=m)
        assert np.allclose(lam, GOLDEN**-m, rtol=1e-10, atol=0)
        assert np.allclose(nu, GOLDEN**m, rtol=1e-10, atol=0)
