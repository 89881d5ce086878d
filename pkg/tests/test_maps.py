import math

import numpy as np
import pytest

from coneflow.maps import (GOLDEN, TWO_PI, MapModel, PerturbationTerm, WeightField, cat_cones,
                           cat_map, eigen_axes, identity_map)


def test_golden_ratio_is_cat_eigenvalue():
    w = np.linalg.eigvalsh(np.array([[2.0, 1.0], [1.0, 1.0]]))
    assert w.max() == pytest.approx(GOLDEN, abs=1e-14)
    assert GOLDEN**2 - 3 * GOLDEN + 1 == pytest.approx(0.0, abs=1e-14)


def test_map_validation():
    with pytest.raises(ValueError):
        MapModel([[2, 0], [0, 1]])
    with pytest.raises(ValueError):
        MapModel([[1.5, 0], [0, 1]])
    with pytest.raises(ValueError):
        MapModel([[1, 0, 0]])
    with pytest.raises(ValueError):
        MapModel([[2, 1], [1, 1]], [PerturbationTerm(3, (1, 1), 0.1)])
    with pytest.raises(ValueError):
        MapModel([[2, 1], [1, 1]], r=1.0)


def test_evaluation_and_derivative_finite_difference():
    T = cat_map(0.05, k=(1, 1))
    x = np.random.default_rng(0).uniform(0, TWO_PI, (2, 7))
    h = 1e-6
    J = T.derivative(x)
    for j in range(2):
        e = np.zeros((2, 1))
        e[j] = h
        fd = (T(x + e) - T(x - e)) / (2 * h)
        assert np.abs(J[:, j] - fd).max() < 1e-8
    # a (1, 1) term on the first component keeps det = 1; a (1, 0) term gives 1 + c
    assert np.allclose(T.jacobian_det(x), 1.0, atol=1e-14)
    U = cat_map(0.05, k=(1, 0))
    assert np.allclose(U.jacobian_det(x), 1 + 0.05 * np.cos(x[0]), atol=1e-14)


def test_inverse_roundtrip():
    T = cat_map(0.05, k=(1, 1))
    x = np.random.default_rng(1).uniform(0, TWO_PI, (2, 50))
    assert np.abs(T.inverse(T(x)) - x).max() < 1e-11
    inv = T.inverse_map()
    J = np.einsum("ijm,jkm->ikm", inv.derivative(T(x)), T.derivative(x))
    assert np.abs(J - np.eye(2)[..., None]).max() < 1e-10
    assert np.allclose(inv.jacobian_det(T(x)) * T.jacobian_det(x), 1.0)


def test_dict_roundtrip():
    T = cat_map(0.05, r=3, phase=0.3)
    U = MapModel.from_dict(T.to_dict())
    x = np.random.default_rng(2).uniform(0, TWO_PI, (2, 5))
    assert np.array_equal(T(x), U(x))
    assert U.r == 3
    assert MapModel.from_dict(cat_map().to_dict()).r == math.inf


def test_linear_flags():
    assert cat_map().is_linear and identity_map().is_linear
    assert not cat_map(0.01).is_linear
    assert cat_map(0.05).derivative_bound() == pytest.approx(0.05 * math.sqrt(2))
    assert cat_map(0.05).check_diffeomorphism() > 0.9


def test_weight_field():
    g = WeightField(2, terms={(0, 0): 1.0, (1, 0): 0.05, (-1, 0): 0.05})
    x = np.random.default_rng(3).uniform(0, TWO_PI, (2, 9))
    assert g.is_real
    assert np.allclose(g(x), 1 + 0.1 * np.cos(x[0]))
    assert g.constant_value is None
    assert WeightField.constant(2.5).constant_value == 2.5
    assert WeightField.constant(-3.0).sup_norm() == 3.0
    h = WeightField.from_callable(lambda x: np.sin(x[0]))
    assert h.sup_norm(n=64) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        WeightField(2)


def test_eigen_axes_and_cones():
    s, u = eigen_axes([[2, 1], [1, 1]])
    A = np.array([[2.0, 1.0], [1.0, 1.0]])
    assert np.allclose(A @ s, s / GOLDEN) and np.allclose(A @ u, u * GOLDEN)
    with pytest.raises(ValueError):
        eigen_axes([[0, -1], [1, 0]])
    th = cat_cones(0.6, 0.5)
    assert th.plus_aperture == 0.6 and th.minus_aperture == 0.5
    # C- carries the expanding direction of the transpose
    xi = th.minus_axes[0]
    assert np.linalg.norm(A.T @ xi) == pytest.approx(GOLDEN)
