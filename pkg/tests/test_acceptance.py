"""Acceptance suite at full size; every test prints one pass/fail line."""

import math
import time

import numpy as np
import pytest

from coneflow.decomposition import (FrequencyLattice, GridFunction, decompose,
                                    fit_decay_exponent, pseudolocal_profile, random_band_limited,
                                    reconstruct, torus_distance)
from coneflow.hyperbolicity import (R_pqt_limit, estimate_splitting, hook_structure,
                                    local_exponents, sample_invariant_set)
from coneflow.maps import GOLDEN, TWO_PI, WeightField, cat_cones, cat_map
from coneflow.norms import (NormParams, aniso_sobolev_norm, dagger_norms,
                            embedding_singular_values, function_suite)
from coneflow.selftest import symbol_partition_error
from coneflow.spectra import (assemble, eigensolve, match_eigenvalues, perturbation_term,
                              refinement_stable, resonance_report, srb_and_correlations)
from coneflow.symbols import SIGNS
from coneflow.transfer import (TransferOperator, apply_transfer, fit_block_decay, growth_rate,
                               lasota_yorke_measure, ly_probe_suite, s1_block_norm_scan)

pytestmark = pytest.mark.slow

TH = cat_cones(0.6, 0.6)
ONE = WeightField.constant(1.0)
INV_GAMMA = 1 / GOLDEN


def test_c01_partition_of_unity(accept):
    t0 = time.perf_counter()
    err = symbol_partition_error(TH, FrequencyLattice(256))
    dt = time.perf_counter() - t0
    ok = err <= 1e-12 and dt < 5
    assert accept(1, "partition of unity", ok, f"max deviation {err:.2e} <= 1e-12", dt)


def test_c02_reconstruction(accept):
    t0 = time.perf_counter()
    lat = FrequencyLattice(256)
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(20):
        u = random_band_limited(lat, rng, rng.uniform(10, 120))
        worst = max(worst, (reconstruct(decompose(TH, u)) - u).norm_lt(2) / u.norm_lt(2))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 10
    assert accept(2, "reconstruction", ok, f"worst relative error {worst:.2e} <= 1e-10", dt)


def test_c03_cat_exponents(accept):
    t0 = time.perf_counter()
    T = cat_map()
    split = estimate_splitting(T, np.random.default_rng(3).uniform(0, TWO_PI, (2, 50)))
    err = 0.0
    for m in range(1, 21):
        lam, nu = local_exponents(T, split, m=m)
        err = max(err, np.abs(lam / GOLDEN**-m - 1).max(), np.abs(nu / GOLDEN**m - 1).max())
    dt = time.perf_counter() - t0
    ok = err <= 1e-10 and dt < 5
    assert accept(3, "cat-map exponents", ok, f"worst relative error {err:.2e} <= 1e-10", dt)


def test_c04_essential_radius_bound(accept):
    t0 = time.perf_counter()
    T = cat_map()
    split = estimate_splitting(T, sample_invariant_set(T, count=256, rng=0))
    values = {t: R_pqt_limit(T, ONE, split, 1, -1, t, 12)[0] for t in (math.inf, 4 / 3, 2, 4)}
    dt = time.perf_counter() - t0
    err = max(abs(v - 0.3819660113) for v in values.values())
    ok = err <= 1e-6 and dt < 5
    detail = ", ".join(f"t={t:.4g}: {v:.10f}" for t, v in values.items())
    assert accept(4, "R^{1,-1,t} = 1/gamma", ok, f"{detail}; max error {err:.1e}", dt)


def test_c05_transfer_exactness(accept):
    t0 = time.perf_counter()
    lat = FrequencyLattice(512)
    A = np.array([[2, 1], [1, 1]])
    rng = np.random.default_rng(5)
    modes = []
    while len(modes) < 200:
        k = rng.integers(-32, 33, 2)
        if np.hypot(*k) <= 32:
            modes.append(k)
    exact = TransferOperator(cat_map())
    coef_err = 0.0
    for k in modes:
        c = apply_transfer(exact, GridFunction.mode(lat, k)).spectrum()
        target = tuple(np.mod(A.T @ k, 512))
        c[target] -= 1
        coef_err = max(coef_err, float(np.abs(c).max()))
    interp = TransferOperator(cat_map(), mode="interpolation")
    x = lat.points()
    interp_err = 0.0
    for group in np.array_split(np.array(modes), 4):
        a = rng.standard_normal(len(group)) + 1j * rng.standard_normal(len(group))
        a /= np.abs(a).sum()
        u = GridFunction(lat, sum(c * np.exp(1j * (k[0] * x[0] + k[1] * x[1]))
                                  for c, k in zip(a, group)))
        ref = apply_transfer(exact, u)
        interp_err = max(interp_err, float(np.abs(apply_transfer(interp, u).values
                                                  - ref.values).max()))
    dt = time.perf_counter() - t0
    ok = coef_err <= 1e-12 and interp_err <= 1e-8 and dt < 30
    assert accept(5, "transfer exactness", ok,
                  f"exact coefficient error {coef_err:.1e} <= 1e-12, interpolation error "
                  f"{interp_err:.1e} <= 1e-8 on 512^2", dt)


def test_c06_lasota_yorke(accept):
    t0 = time.perf_counter()
    lat = FrequencyLattice(256)
    params = NormParams(1, -1, math.inf, TH)
    high, mixed = ly_probe_suite(lat, params, rng=0)
    op = TransferOperator(cat_map(), None, TH, TH)
    rate, _ = growth_rate(op, params, high, range(1, 9))
    rep = lasota_yorke_measure(op, 1, -1, 0, -2, math.inf, high + mixed, m=6)
    dt = time.perf_counter() - t0
    ok = rate <= INV_GAMMA + 0.1 and rep.residual_ratio > 10 and dt < 120
    assert accept(6, "Lasota-Yorke", ok,
                  f"growth rate {rate:.4f} <= {INV_GAMMA + 0.1:.4f}, weak-term residual ratio "
                  f"{rep.residual_ratio:.1f} > 10 (A={rep.A_est:.3g}, B={rep.B_est:.3g})", dt)


def test_c07_unhooked_block_decay(accept):
    t0 = time.perf_counter()
    T = cat_map(0.05, r=3)
    hs = hook_structure(T, TH, TH, sample_invariant_set(T, count=256, rng=0))
    op = TransferOperator(T, None, hs.source, hs.target)
    rows = s1_block_norm_scan(op, hs, 7, t=2, rng=0)
    slope, levels, _ = fit_block_decay(rows, floor=1e-14)
    dt = time.perf_counter() - t0
    bound = -(3 - 1) + 0.25
    ok = slope <= bound and dt < 180
    assert accept(7, "unhooked block decay", ok,
                  f"slope {slope:.3f} <= {bound} over levels {levels.tolist()}", dt)


def test_c08_pseudolocal_decay(accept):
    t0 = time.perf_counter()
    L, N, rho = 96.0, 4096, 0.5
    lat = FrequencyLattice(N, box_length=L)
    x = lat.points() - L / 2
    R = np.hypot(x[0], x[1])
    del x
    inside = R < rho
    u = GridFunction(lat, np.where(inside, np.exp(-1 / np.maximum(1 - (R / rho) ** 2, 1e-300)),
                                   0.0))
    del R
    blocks = decompose(cat_cones(0.45, 0.45), u, cache=False)
    dist = torus_distance(inside, lat)
    floor = 1e-13 * float(u.values.max())
    fits = {}
    for n in range(7):
        for s in SIGNS:
            c, peak = pseudolocal_profile(blocks, inside, n, s, L / 8, distance=dist)
            fits[(n, s)] = fit_decay_exponent(c, peak, floor)
    dt = time.perf_counter() - t0
    worst = min(fits, key=fits.get)
    ok = fits[worst] >= 4 and dt < 60
    assert accept(8, "pseudolocal decay", ok,
                  f"smallest exponent {fits[worst]:.2f} >= 4 at block {worst}", dt)


def test_c09_compact_embedding(accept):
    t0 = time.perf_counter()
    P = NormParams(1, -1, 2, TH)
    emb = embedding_singular_values(P, P.replace(p=0, q=-2), 12)
    err = max(abs(emb.shell_value(n) - 2.0**-n) for n in range(13))
    dt = time.perf_counter() - t0
    ok = err <= 1e-12 and dt < 10
    assert accept(9, "compact embedding", ok, f"max |s_n - 2^-n| = {err:.1e} <= 1e-12", dt)


def test_c10_spectral_gap(accept):
    t0 = time.perf_counter()
    P = NormParams(2, -1, math.inf, TH)
    op = TransferOperator(cat_map(), None, TH, TH)
    a = eigensolve(assemble(op, P, 32), 24).values
    b = eigensolve(assemble(op, P, 64), 24).values
    _, flags = match_eigenvalues(a, b, 1e-3)
    stable = a[flags]
    lead_err = max(abs(a[0] - 1), abs(b[0] - 1))
    gap = stable[(np.abs(stable) > INV_GAMMA + 0.05) & (np.abs(stable) < 0.95)]
    dt = time.perf_counter() - t0
    ok = lead_err <= 1e-8 and len(gap) == 0 and dt < 120
    assert accept(10, "spectral gap", ok,
                  f"leading eigenvalue error {lead_err:.1e} <= 1e-8, {len(gap)} stable eigenvalues "
                  f"in ({INV_GAMMA + 0.05:.3f}, 0.95)", dt)


@pytest.fixture(scope="module")
def perturbed_stable():
    P = NormParams(2, -1, math.inf, TH)
    t0 = time.perf_counter()
    vals, spectra = refinement_stable(TransferOperator(cat_map(0.05), None, TH, TH), P,
                                      (16, 32, 64), tol=1e-3, min_modulus=0.45)
    return P, vals, spectra, time.perf_counter() - t0


def test_c11_resonance_stability(accept, perturbed_stable):
    P, vals, spectra, dt0 = perturbed_stable
    t0 = time.perf_counter()
    above = [s[np.abs(s) > 0.45] for s in spectra]
    agree = all(len(s) == len(vals) for s in above) and \
        all(np.abs(np.sort_complex(s) - np.sort_complex(vals)).max() <= 1e-3 for s in above)
    T = cat_map(0.05, r=3)
    lam2 = resonance_report(TransferOperator(T, None, TH, TH), P, 16).eigenvalues[1]

    def obs(x):
        return np.cos(x[0]) + 0.5 * np.sin(x[0] + 2 * x[1])

    tab = srb_and_correlations(T, (obs, obs), 8, P, Xi=16, N=256, grid=1024, lambda2=lam2,
                               theta=TH)
    dt = dt0 + time.perf_counter() - t0
    ok = agree and tab.log_gap <= 0.1 and dt < 300
    assert accept(11, "resonance stability", ok,
                  f"{len(vals)} stable eigenvalue(s) above 0.45 agree across Xi 16/32/64: {agree}; "
                  f"correlation rate {tab.rate:.5f} vs |lambda_2| {abs(lam2):.5f}, log gap "
                  f"{tab.log_gap:.3f} <= 0.1", dt)


def test_c12_appendix_equivalence(accept):
    t0 = time.perf_counter()
    lat = FrequencyLattice(128)
    P = NormParams(1, -1, 2, TH)
    ratios, ordered = [], True
    for u in function_suite(lat, TH, count=50, rng=0):
        d = dagger_norms(u, P, normalized=True)
        ratios.append(d.dagger / aniso_sobolev_norm(u, P, normalized=True))
        ordered &= d.double_dagger <= d.dagger
    spread = max(ratios) / min(ratios)
    dt = time.perf_counter() - t0
    ok = spread <= 100 and ordered and dt < 60
    assert accept(12, "dagger norm equivalence", ok,
                  f"ratio spread {spread:.2f} <= 100, double dagger <= dagger on all 50: "
                  f"{ordered}", dt)


def test_c13_spectral_stability(accept, perturbed_stable):
    P, base, _, dt0 = perturbed_stable
    t0 = time.perf_counter()
    T = cat_map(0.05).with_terms([perturbation_term(1e-3)])
    vals, _ = refinement_stable(TransferOperator(T, None, TH, TH), P, (16, 32, 64), tol=1e-3,
                                min_modulus=0.45)
    disp = max((float(np.abs(vals - z).min()) if len(vals) else math.inf) for z in base)
    dt = dt0 + time.perf_counter() - t0
    ok = disp < 1e-2 and dt < 300
    assert accept(13, "spectral stability", ok,
                  f"matched displacement {disp:.2e} < 1e-2 at eps = 1e-3 over {len(base)} "
                  f"stable eigenvalue(s)", dt)
