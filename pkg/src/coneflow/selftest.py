"""Fast invariant suite behind ``coneflow selftest``."""

from __future__ import annotations

import math

import numpy as np

from .decomposition import (FrequencyLattice, GridFunction, decompose, random_band_limited,
                            reconstruct)
from .hyperbolicity import (R_pqt_limit, estimate_splitting, local_exponents,
                            sample_invariant_set)
from .maps import GOLDEN, WeightField, cat_cones, cat_map
from .norms import NormParams, dagger_norms, embedding_singular_values
from .spectra import assemble, eigensolve
from .symbols import DEFAULT_PROFILE, SIGNS, eval_directional
from .transfer import TransferOperator, apply_transfer, lattice_modes


def _check(name, value, threshold, below=True):
    ok = value <= threshold if below else value >= threshold
    return {"name": name, "value": float(value), "threshold": float(threshold), "pass": bool(ok)}


def symbol_partition_error(theta, lattice, n_max=None):
    """``max |sum_{n,sigma} psi_{Theta,n,sigma} - 1|`` over the lattice frequencies."""
    n_max = lattice.default_n_max() if n_max is None else n_max
    xi = np.asarray(lattice.frequencies(sparse=False))
    total = sum(eval_directional(theta, DEFAULT_PROFILE, n, s, xi)
                for n in range(n_max + 1) for s in SIGNS)
    return float(np.abs(total - 1).max())


def run_selftest(log=None):
    rows = []
    say = log or (lambda msg: None)
    theta = cat_cones(0.6, 0.6)
    lat = FrequencyLattice(128)
    rng = np.random.default_rng(0)

    rows.append(_check("partition_of_unity", symbol_partition_error(theta, lat), 1e-12))
    worst = 0.0
    for _ in range(5):
        u = random_band_limited(lat, rng, 60)
        worst = max(worst, (reconstruct(decompose(theta, u)) - u).norm_lt(2) / u.norm_lt(2))
    rows.append(_check("reconstruction", worst, 1e-10))
    say("decomposition checks done")

    T = cat_map()
    pts = rng.uniform(0, 2 * math.pi, (2, 20))
    split = estimate_splitting(T, pts)
    err = 0.0
    for m in (1, 10, 20):
        lam, nu = local_exponents(T, split, m=m)
        err = max(err, np.abs(lam * GOLDEN**m - 1).max(), np.abs(nu / GOLDEN**m - 1).max())
    rows.append(_check("cat_exponents", err, 1e-10))
    om = sample_invariant_set(T, count=64, rng=0)
    R = R_pqt_limit(T, WeightField.constant(1.0), estimate_splitting(T, om), 1, -1, math.inf,
                    12)[0]
    rows.append(_check("R_limit", abs(R - 1 / GOLDEN), 1e-6))
    say("hyperbolicity checks done")

    op = TransferOperator(T, None, theta, theta)
    K = lattice_modes(20)[rng.choice(len(lattice_modes(20)), 32, replace=False)]
    err = 0.0
    for k in K:
        v = apply_transfer(op, GridFunction.mode(lat, k))
        err = max(err, np.abs(v.values - GridFunction.mode(lat, T.A.T @ k).values).max())
    rows.append(_check("transfer_exact", err, 1e-12))

    P = NormParams(1, -1, 2, theta)
    emb = embedding_singular_values(P, P.replace(p=0, q=-2), 8)
    rows.append(_check("embedding", max(abs(emb.shell_value(n) - 2.0**-n) for n in range(9)),
                       1e-12))
    worst = -math.inf
    for _ in range(5):
        dn = dagger_norms(random_band_limited(lat, rng, 40), P)
        worst = max(worst, dn.double_dagger - dn.dagger)
    rows.append(_check("dagger_order", worst, 1e-12 * max(1.0, dn.dagger)))
    G = assemble(op, NormParams(2, -1, math.inf, theta), 8)
    lead = eigensolve(G, 4).values[0]
    rows.append(_check("galerkin_leading", abs(lead - 1), 1e-8))
    say("transfer and spectral checks done")
    return rows
