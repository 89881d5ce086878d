import json
import math

import numpy as np
import pytest
import scipy.sparse as sps

from coneflow.decomposition import FrequencyLattice, GridFunction
from coneflow.maps import GOLDEN, WeightField, cat_cones, cat_map, identity_map
from coneflow.norms import NormParams
from coneflow.spectra import (RefinementError, SetupError, assemble, correlation_sequence,
                              eigensolve, essential_bound, fit_rate, match_eigenvalues,
                              mode_weights, refinement_stable, resonance_report,
                              srb_and_correlations, stability_experiment)
from coneflow.transfer import TransferOperator

TH = cat_cones(0.6, 0.6)
P = NormParams(2, -1, math.inf, TH)


def pull_back(T, g=None):
    return TransferOperator(T, g, TH, TH)


def test_mode_weights():
    w, n, s = mode_weights(TH, P, [(0, 0), 8 * TH.plus_axes[0], 8 * TH.minus_axes[0]])
    assert list(n) == [0, 3, 3]
    assert list(s) == ["+", "+", "-"]
    assert w[1] == 2.0**6 and w[2] == 2.0**-3


def test_cat_column_is_one_mode():
    G = assemble(pull_back(cat_map()), P, 8)
    j, i = G.index((1, 0)), G.index((2, 1))
    col = G.entries[:, j]
    assert np.count_nonzero(col) == 1
    assert col[i] == pytest.approx(G.weights[i] / G.weights[j], rel=1e-15)
    # modes whose image leaves the truncation give zero columns
    assert np.count_nonzero(G.entries[:, G.index((8, 0))]) == 0


def test_identity_assembles_to_identity():
    G = assemble(pull_back(identity_map()), P, 6)
    assert np.array_equal(G.entries, np.eye(G.dim))


def test_weight_convolution_entries():
    g = WeightField(2, terms={(0, 0): 1.0, (1, 0): 0.05, (-1, 0): 0.05})
    G = assemble(pull_back(cat_map(), g), P, 8)
    j = G.index((1, 1))
    raw = G.raw.toarray()[:, j]
    expect = {(3, 2): 1.0, (4, 2): 0.05, (2, 2): 0.05}
    assert np.count_nonzero(raw) == 3
    for k, c in expect.items():
        assert raw[G.index(k)] == pytest.approx(c, abs=1e-15)


def test_sampled_assembly_matches_modes():
    op = pull_back(cat_map(0.05))
    a, b = assemble(op, P, 8, "modes"), assemble(op, P, 8, "sampled")
    assert abs(a.raw - b.raw).max() < 1e-13
    with pytest.raises(ValueError):
        assemble(op, P, 8, "sampled", N=32)
    with pytest.raises(ValueError):
        assemble(op, P, 8, "bogus")


def test_eigensolve_small_cases():
    e = eigensolve(np.diag([1.0, 3.0, 2.0]))
    assert np.array_equal(e.values, [3, 2, 1]) and e.method == "dense"
    assert np.all(e.residuals < 1e-14)
    assert np.all(eigensolve(np.eye(5)).values == 1)
    with pytest.raises(ValueError):
        eigensolve(np.eye(3), count=4)


def test_eigensolve_arpack_agrees_with_dense():
    M = sps.random(300, 300, density=0.05, random_state=1) + sps.diags(np.linspace(0, 5, 300))
    dense = eigensolve(M, 6, dense_limit=1000)
    it = eigensolve(M, 6, dense_limit=100)
    assert it.method == "arpack" and it.converged
    assert np.abs(np.abs(dense.values) - np.abs(it.values)).max() < 1e-9
    assert np.all(it.residuals < 1e-8)


def test_cat_leading_eigenvalue():
    e = eigensolve(assemble(pull_back(cat_map()), P, 8))
    assert e.values[0] == pytest.approx(1.0, abs=1e-14)
    assert np.abs(e.values[1:]).max() < 1e-10


def test_weight_similarity_invariance():
    op = pull_back(cat_map(0.05))
    G = assemble(op, P, 8)
    base = eigensolve(G, 6).values
    assert np.abs(eigensolve(G.rescaled(7.5), 6).values - base).max() < 1e-10
    w = np.random.default_rng(0).uniform(0.5, 2.0, G.dim)
    other = eigensolve(assemble(op, P, 8, weights=w), 6).values
    assert np.abs(other - base).max() < 1e-10


def test_perron_frobenius_duality():
    T = cat_map(0.05)
    G = assemble(pull_back(T), P, 8)
    H = assemble(TransferOperator.perron_frobenius(T, source_theta=TH, target_theta=TH), P, 8)
    assert H.method == "sampled"
    assert np.abs(H.raw.toarray() - G.raw.toarray().conj().T).max() < 1e-12
    a, b = eigensolve(G, 3).values, eigensolve(H, 3).values
    assert np.abs(a - np.conj(b)).max() < 1e-8


def test_match_eigenvalues():
    pairs, flags = match_eigenvalues([1.0, 0.5, 0.2], [0.50001, 1.0, 0.9])
    assert list(pairs) == [1, 0, -1] and list(flags) == [True, True, False]
    pairs, flags = match_eigenvalues([1.0, 1.0], [1.0])
    assert list(flags) == [True, False]


def test_resonance_report_cat(tmp_path):
    rep = resonance_report(pull_back(cat_map()), P, 8)
    assert rep.eigenvalues[0] == pytest.approx(1.0, abs=1e-12)
    assert rep.stableFlags[0]
    assert rep.boundRpqt == pytest.approx(1 / GOLDEN, abs=1e-9)
    assert len(rep.resonances) == 1
    assert rep.leadingEigvector[rep.modes.tolist().index([0, 0])] == 1
    data = json.loads(rep.to_json(tmp_path / "r.json"))
    assert data["eigenvalues"][0] == [1.0, 0.0] and data["params"]["t"] == "inf"
    svg = rep.to_svg(tmp_path / "r.svg")
    assert svg.startswith("<svg") and "circle" in svg


def test_refinement_error():
    # multiplication by 0.4 + 0.3 cos x_1 + 0.3 cos x_2 has continuous spectrum, so the top
    # eigenvalue of its truncations keeps moving
    g = WeightField(2, terms={(0, 0): 0.4, (1, 0): 0.15, (-1, 0): 0.15, (0, 1): 0.15,
                              (0, -1): 0.15})
    with pytest.raises(RefinementError):
        resonance_report(pull_back(identity_map(), g), P, 3, tol=1e-6)


def test_essential_bound():
    assert essential_bound(cat_map(), WeightField.constant(1.0), 2, -1) == \
        pytest.approx(1 / GOLDEN, abs=1e-9)
    assert essential_bound(identity_map(), WeightField.constant(1.0), 2, -1) is None


def test_refinement_stable_set():
    vals, spectra = refinement_stable(pull_back(cat_map(0.05)), P, (8, 16), min_modulus=0.01)
    assert vals[0] == pytest.approx(1.0, abs=1e-12)
    assert len(spectra) == 2
    assert np.all(np.abs(vals) > 0.01)


def test_srb_of_cat_map_is_lebesgue():
    lat = FrequencyLattice(32)
    u = GridFunction.from_callable(lat, lambda x: np.cos(x[0]))
    table = srb_and_correlations(cat_map(), (u, u), 6, P, Xi=8, grid=256)
    assert table.srb_deviation < 1e-8
    assert table.fixed_eigenvalue == pytest.approx(1.0, abs=1e-8)
    assert table.correlations[0] == pytest.approx(0.5, abs=1e-14)
    assert np.abs(table.correlations[1:]).max() < 1e-13
    assert set(table.to_dict()) >= {"rate", "lambda2", "srb_deviation"}


def test_single_mode_correlations_vanish():
    cos = lambda k: (lambda x: np.cos(k[0] * x[0] + k[1] * x[1]))  # noqa: E731
    C = correlation_sequence(cat_map(), cos((1, 2)), cos((3, -1)), 8, N=128)
    assert np.abs(C).max() < 1e-13
    # v = u o T: the correlation peaks at m = 1 and then vanishes
    C = correlation_sequence(cat_map(), cos((1, 0)), cos((2, 1)), 5, N=128)
    assert C[1] == pytest.approx(0.5, abs=1e-13)
    assert np.abs(np.delete(C, 1)).max() < 1e-13


def test_fit_rate():
    C = 0.3 ** np.arange(12)
    rate, window = fit_rate(C)
    assert rate == pytest.approx(0.3, rel=1e-12)
    assert window[0] == 1
    assert fit_rate(np.array([1.0, 0.0, 0.0]))[0] == 0.0


def test_srb_setup_error():
    with pytest.raises(SetupError):
        srb_and_correlations(cat_map(), (np.cos, np.cos), 2, P, Xi=4, N=64,
                             h=WeightField.constant(0.5))


def test_stability_zero_perturbation():
    rows = stability_experiment(cat_map(), P, [0.0], Xis=(8, 16), min_modulus=0.01)
    assert rows[0]["displacement"] == 0.0
    assert rows[0]["leading"][0] == pytest.approx(1.0, abs=1e-12)
