"""Galerkin truncations of transfer operators, their spectra and related experiments."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sps
import scipy.sparse.linalg as sla

from .decomposition import GridFunction, shell_index
from .hyperbolicity import (NoSplittingError, R_pqt_limit, check_cone_hyperbolicity,
                            estimate_splitting, sample_invariant_set)
from .maps import TWO_PI, MapModel, PerturbationTerm
from .svg import spectrum_svg
from .transfer import TransferOperator, lattice_modes, mode_images

DENSE_LIMIT = 4000
MATCH_TOL = 1e-4


class RefinementError(RuntimeError):
    """The leading eigenvalue changes under refinement of the truncation."""


class SetupError(RuntimeError):
    """The operator does not have the expected eigenvalue 1."""


def mode_weights(theta, params, modes):
    """Diagonal weights ``2^{p n}`` or ``2^{q n}`` per mode.

    ``n`` is the shell whose ``psi_n`` is largest at the mode; the sign is
    the cone with the larger ``phi`` value, ties going to ``+``.
    """
    K = np.asarray(modes, dtype=float)
    r = np.linalg.norm(K, axis=1)
    n = shell_index(r)
    xi = K.T
    plus = theta.phi("+", xi)
    minus = theta.phi("-", xi)
    expo = np.where(plus >= minus, params.p, params.q)
    return 2.0 ** (expo * n), n, np.where(plus >= minus, "+", "-")


@dataclass
class GalerkinMatrix:
    """Compression of a transfer operator to modes ``|k| <= Xi``.

    ``matrix`` holds the weighted entries ``w(k')/w(k) <e_k', L e_k>`` and
    ``raw`` the unweighted ones; both are sparse over the mode list.
    """

    modes: np.ndarray
    weights: np.ndarray
    raw: sps.csr_matrix
    Xi: float
    method: str = "modes"
    info: dict = field(default_factory=dict)

    @property
    def matrix(self):
        w = self.weights
        return sps.csr_matrix(sps.diags(w) @ self.raw @ sps.diags(1.0 / w))

    @property
    def entries(self):
        return self.matrix.toarray()

    @property
    def dim(self):
        return len(self.modes)

    def index(self, k):
        hits = np.flatnonzero(np.all(self.modes == np.asarray(k), axis=1))
        return int(hits[0]) if hits.size else None

    def rescaled(self, c):
        """Same operator with all weights multiplied by ``c``."""
        return GalerkinMatrix(self.modes, self.weights * c, self.raw, self.Xi, self.method,
                              dict(self.info))


def _mode_lookup(modes, R):
    size = 2 * R + 1
    table = -np.ones((size,) * modes.shape[1], dtype=np.int64)
    table[tuple((modes + R).T)] = np.arange(len(modes))
    return table


def _find(table, R, K):
    inside = np.all(np.abs(K) <= R, axis=1)
    out = -np.ones(len(K), dtype=np.int64)
    out[inside] = table[tuple((K[inside] + R).T)]
    return out


def assemble(op, params, Xi, method="auto", N=None, weights=None):
    """Galerkin matrix of ``op`` on the modes ``|k| <= Xi``.

    ``method="modes"`` uses exact plane-wave images (maps with a
    trigonometric perturbation and weight); ``"sampled"`` evaluates
    ``g(x) e_k(T x)`` on an ``N^d`` grid and reads off Fourier
    coefficients, which works for any operator, including Perron-Frobenius
    operators of perturbed maps.
    """
    if method == "auto":
        method = "modes" if op.supports_mode_images else "sampled"
    if N is not None and Xi > N / 8:
        raise ValueError(f"Xi = {Xi} exceeds a quarter of the Nyquist frequency {N // 2}")
    modes = lattice_modes(Xi, op.d)
    R = int(math.floor(Xi))
    table = _mode_lookup(modes, R)
    if method == "modes":
        src, out, coef = mode_images(op, modes)
        rows = _find(table, R, out)
        keep = rows >= 0
        raw = sps.csr_matrix((coef[keep], (rows[keep], src[keep])), shape=(len(modes),) * 2)
        info = {}
    elif method == "sampled":
        raw, info = _assemble_sampled(op, modes, table, R, N)
    else:
        raise ValueError("method must be 'auto', 'modes' or 'sampled'")
    raw.sum_duplicates()
    raw.eliminate_zeros()
    if weights is None:
        weights = mode_weights(op.target_theta, params, modes)[0] if op.target_theta else \
            np.ones(len(modes))
    return GalerkinMatrix(modes, np.asarray(weights, float), raw.tocsr(), Xi, method, info)


def _assemble_sampled(op, modes, table, R, N, batch=64, alias_tol=1e-12):
    d = op.d
    if N is None:
        N = 1 << int(math.ceil(math.log2(16 * R)))
    x = np.stack(np.meshgrid(*[np.arange(N) * TWO_PI / N] * d, indexing="ij"))
    y = op.map(x)
    g = np.asarray(op.weight(x), dtype=complex) * np.ones(x.shape[1:])
    k1 = np.fft.fftfreq(N, 1.0 / N).astype(int)
    grid_k = np.stack(np.meshgrid(*[k1] * d, indexing="ij")).reshape(d, -1).T
    rows_of = _find(table, R, grid_k)
    sel = np.flatnonzero(rows_of >= 0)
    edge = np.flatnonzero(np.max(np.abs(grid_k), axis=1) > 3 * N // 8)
    data, ri, ci = [], [], []
    alias = 0.0
    for a in range(0, len(modes), batch):
        K = modes[a:a + batch]
        phase = np.tensordot(K.astype(float), y, axes=(1, 0))
        vals = g[None] * np.exp(1j * phase)
        coef = sfft.fftn(vals, axes=tuple(range(1, d + 1))).reshape(len(K), -1) / N**d
        alias = max(alias, float(np.abs(coef[:, edge]).max()))
        blk = coef[:, sel]
        nz = np.abs(blk) > 1e-15
        j, i = np.nonzero(nz)
        data.append(blk[j, i])
        ri.append(rows_of[sel[i]])
        ci.append(a + j)
    if alias > alias_tol:
        warnings.warn(f"sampled Galerkin assembly: coefficients of size {alias:.2e} near the "
                      f"Nyquist frequency of a {N}^{d} grid", RuntimeWarning, stacklevel=3)
    raw = sps.csr_matrix((np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))),
                         shape=(len(modes),) * 2)
    return raw, {"grid": N, "edge_coefficient": alias}


@dataclass
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    converged: bool
    method: str


def eigensolve(matrix, count=None, dense_limit=DENSE_LIMIT, tol=1e-12, maxiter=None):
    """Eigenpairs sorted by decreasing modulus.

    Dense LAPACK below ``dense_limit``, ARPACK (implicitly restarted
    Arnoldi) above. A non-converged ARPACK run returns the converged pairs
    with ``converged=False``. Residuals are ``|Mv - lambda v| / |v|``.
    """
    M = matrix.matrix if isinstance(matrix, GalerkinMatrix) else matrix
    dim = M.shape[0]
    count = dim if count is None else int(count)
    if not 0 < count <= dim:
        raise ValueError("count must lie in 1..dimension")
    converged = True
    if dim < dense_limit or count >= dim - 1:
        dense = M.toarray() if sps.issparse(M) else np.asarray(M)
        vals, vecs = np.linalg.eig(dense)
        method = "dense"
    else:
        Ms = sps.csr_matrix(M)
        try:
            vals, vecs = sla.eigs(Ms, k=count, which="LM", tol=tol,
                                  maxiter=maxiter or 50 * dim, ncv=min(dim, max(4 * count, 40)))
        except sla.ArpackNoConvergence as err:
            vals, vecs = err.eigenvalues, err.eigenvectors
            converged = False
        method = "arpack"
    order = np.argsort(-np.abs(vals), kind="stable")[:count]
    vals, vecs = vals[order], vecs[:, order]
    res = np.linalg.norm(M @ vecs - vecs * vals, axis=0) / np.linalg.norm(vecs, axis=0)
    return EigenResult(vals, vecs, res, converged, method)


def match_eigenvalues(a, b, tol=MATCH_TOL):
    """Greedy modulus-ordered matching of ``a`` into ``b``.

    Returns ``(pairs, flags)``: ``pairs[i]`` is the index in ``b`` matched to
    ``a[i]`` (or -1) and ``flags[i]`` is True when the distance is below ``tol``.
    """
    a, b = np.asarray(a, complex), np.asarray(b, complex)
    free = np.ones(len(b), bool)
    pairs = -np.ones(len(a), dtype=int)
    flags = np.zeros(len(a), bool)
    for i in np.argsort(-np.abs(a), kind="stable"):
        if not free.any():
            break
        dist = np.where(free, np.abs(b - a[i]), np.inf)
        j = int(np.argmin(dist))
        if dist[j] < tol:
            pairs[i], flags[i] = j, True
            free[j] = False
    return pairs, flags


@dataclass
class ResonanceReport:
    """Spectrum of a Galerkin truncation with refinement-stability flags."""

    eigenvalues: np.ndarray
    boundRpqt: float | None
    stableFlags: np.ndarray
    leadingEigvector: np.ndarray
    modes: np.ndarray
    refined: np.ndarray
    residuals: np.ndarray
    Xi: float
    params: dict
    converged: bool = True

    @property
    def stable(self):
        return self.eigenvalues[self.stableFlags]

    @property
    def resonances(self):
        if self.boundRpqt is None:
            return self.stable
        return self.stable[np.abs(self.stable) >= self.boundRpqt]

    @property
    def artifacts(self):
        return self.eigenvalues[~self.stableFlags]

    def to_dict(self):
        pair = lambda z: [float(z.real), float(z.imag)]  # noqa: E731
        return {
            "Xi": self.Xi,
            "params": self.params,
            "bound": self.boundRpqt,
            "eigenvalues": [pair(z) for z in self.eigenvalues],
            "stable": [bool(f) for f in self.stableFlags],
            "refined": [pair(z) for z in self.refined],
            "residuals": [float(r) for r in self.residuals],
            "resonances": [pair(z) for z in self.resonances],
            "converged": self.converged,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def to_svg(self, path=None, title=""):
        text = spectrum_svg(self.eigenvalues, self.boundRpqt, self.stableFlags, title)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def essential_bound(map, weight, p, q, t=math.inf, m_max=12, points=None, rng=0):
    """``R^{p,q,t}`` limit on a sampled invariant set, or ``None`` if not hyperbolic."""
    if not isinstance(map, MapModel):
        return None
    try:
        pts = sample_invariant_set(map, rng=rng) if points is None else points
        split = estimate_splitting(map, pts)
    except (ValueError, NoSplittingError):
        return None
    return float(R_pqt_limit(map, weight, split, p, q, t, m_max)[0])


def resonance_report(op, params, Xi, refinement=2, count=24, tol=MATCH_TOL, bound=None,
                     method="auto", N=None, dense_limit=DENSE_LIMIT):
    """Eigenvalues at ``Xi`` flagged stable when reproduced at ``refinement * Xi``.

    ``bound`` defaults to the sub-additive limit of ``R^{p,q,inf}`` for the
    underlying map. Raises :class:`RefinementError` when the leading
    eigenvalue is not reproduced.
    """
    G = assemble(op, params, Xi, method, N)
    G2 = assemble(op, params, refinement * Xi, method,
                  None if N is None else N * refinement)
    count = min(count, G.dim, G2.dim - 2)
    e1 = eigensolve(G, count, dense_limit)
    e2 = eigensolve(G2, count, dense_limit)
    _, flags = match_eigenvalues(e1.values, e2.values, tol)
    if not flags[0]:
        raise RefinementError(f"leading eigenvalue {e1.values[0]:.10g} not reproduced at "
                              f"Xi = {refinement * Xi} (nearest "
                              f"{e2.values[np.argmin(np.abs(e2.values - e1.values[0]))]:.10g})")
    if bound is None:
        bound = essential_bound(op.map, op.weight, params.p, params.q, params.t)
    lead = e1.vectors[:, 0] / G.weights
    k0 = int(np.argmax(np.abs(lead)))
    lead = lead / lead[k0]
    return ResonanceReport(e1.values, bound, flags, lead, G.modes, e2.values, e1.residuals, Xi,
                           {"p": params.p, "q": params.q,
                            "t": "inf" if math.isinf(params.t) else params.t},
                           e1.converged and e2.converged)


def refinement_stable(op, params, Xis, count=24, tol=1e-3, min_modulus=0.0, method="auto"):
    """Eigenvalues above ``min_modulus`` that agree to ``tol`` at every ``Xi`` in ``Xis``.

    Returns ``(values, spectra)`` where ``values`` come from the finest
    truncation and ``spectra`` lists the leading eigenvalues per ``Xi``.
    """
    spectra = []
    for Xi in Xis:
        G = assemble(op, params, Xi, method)
        spectra.append(eigensolve(G, min(count, G.dim - 2)).values)
    ref = spectra[-1][np.abs(spectra[-1]) > min_modulus]
    keep = np.ones(len(ref), bool)
    for other in spectra[:-1]:
        _, flags = match_eigenvalues(ref, other[np.abs(other) > min_modulus - tol], tol)
        keep &= flags
    return ref[keep], spectra


def _callable(u):
    if not isinstance(u, GridFunction):
        return u
    coef = u.spectrum()
    idx = np.argwhere(np.abs(coef) > 1e-14 * np.abs(coef).max())
    lat = u.lattice
    ks = np.array([[lat.wavenumbers(a)[i[a]] for a in range(lat.d)] for i in idx])
    cs = np.array([coef[tuple(i)] for i in idx])
    real = u.is_real

    def f(x):
        x = np.asarray(x)
        out = np.zeros(x.shape[1:], complex)
        for k, c in zip(ks, cs):
            out += c * np.exp(1j * np.tensordot(k, x, axes=(0, 0)))
        return out.real if real else out

    return f


@dataclass
class CorrelationTable:
    m: np.ndarray
    correlations: np.ndarray
    rate: float
    lambda2: complex | None
    srb_deviation: float
    fixed_eigenvalue: complex
    window: np.ndarray

    @property
    def log_gap(self):
        if self.lambda2 is None or not self.rate > 0:
            return math.inf
        return abs(math.log(self.rate) - math.log(abs(self.lambda2)))

    def to_dict(self):
        return {"m": self.m.tolist(), "C": [float(c) for c in self.correlations],
                "rate": self.rate,
                "lambda2": None if self.lambda2 is None else [self.lambda2.real, self.lambda2.imag],
                "log_gap": self.log_gap, "srb_deviation": self.srb_deviation,
                "fixed_eigenvalue": [self.fixed_eigenvalue.real, self.fixed_eigenvalue.imag]}


def correlation_sequence(map, u, v, m_max, N=1024, density=None):
    """``C(m) = int (u o T^m) v dmu - int u dmu int v dmu`` by grid orbit simulation."""
    u, v = _callable(u), _callable(v)
    x = np.stack(np.meshgrid(*[np.arange(N) * TWO_PI / N] * map.d, indexing="ij"))
    rho = np.ones(x.shape[1:]) if density is None else np.asarray(density(x)).real
    rho = rho / rho.mean()
    vx = v(x) * rho
    mu_u = float(np.mean(u(x) * rho))
    mu_v = float(np.mean(vx))
    y = x
    out = []
    for _ in range(m_max + 1):
        out.append(float(np.mean(u(y) * vx)) - mu_u * mu_v)
        y = map.wrap(map(y))
    return np.array(out)


def fit_rate(C, floor_rel=1e-10, m_min=1):
    """Geometric decay rate from a log-linear fit of ``|C(m)|`` above a floor."""
    C = np.abs(np.asarray(C, float))
    m = np.arange(len(C))
    floor = floor_rel * C[0] if C[0] > 0 else floor_rel
    ok = (m >= m_min) & (C > floor)
    # stop at the first sample under the floor
    window = []
    for i in m[m >= m_min]:
        if not ok[i]:
            break
        window.append(i)
    window = np.array(window, dtype=int)
    if len(window) < 2:
        return 0.0, window
    slope = np.polyfit(window, np.log(C[window]), 1)[0]
    return float(math.exp(slope)), window


def srb_and_correlations(map, observables, m_max, params, Xi=16, N=256, h=None,
                         grid=1024, lambda2=None, theta=None):
    """SRB density from the Perron-Frobenius Galerkin matrix and correlation decay.

    The fixed vector at eigenvalue 1 is normalised to mode 0 equal to one;
    ``srb_deviation`` is the largest other coefficient (zero for Lebesgue).
    ``lambda2`` defaults to the second eigenvalue of the pull-back matrix.
    """
    P = TransferOperator.perron_frobenius(map, h, source_theta=theta, target_theta=theta)
    G = assemble(P, params, Xi, "sampled", N)
    eig = eigensolve(G, min(8, G.dim - 2))
    i1 = int(np.argmin(np.abs(eig.values - 1)))
    if abs(eig.values[i1] - 1) > 1e-6:
        raise SetupError(f"Perron-Frobenius matrix has no eigenvalue 1 (closest "
                         f"{eig.values[i1]:.10g})")
    vec = eig.vectors[:, i1] / G.weights
    k0 = G.index((0,) * map.d)
    vec = vec / vec[k0]
    dev = float(np.abs(np.delete(vec, k0)).max()) if G.dim > 1 else 0.0
    modes = G.modes

    def density(x):
        return np.real(sum(c * np.exp(1j * np.tensordot(k, x, axes=(0, 0)))
                           for k, c in zip(modes, vec) if abs(c) > 1e-12))

    if lambda2 is None:
        L = TransferOperator(map, h, theta, theta)
        vals = eigensolve(assemble(L, params, Xi), min(8, G.dim - 2)).values
        lambda2 = complex(vals[1]) if len(vals) > 1 else None
    u, v = observables
    C = correlation_sequence(map, u, v, m_max, grid, density if dev > 1e-8 else None)
    rate, window = fit_rate(C)
    return CorrelationTable(np.arange(m_max + 1), C, rate, lambda2, dev,
                            complex(eig.values[i1]), window)


def perturbation_term(eps, d=2):
    """The ``eps cos(x_1 + x_2)`` term added to the first component."""
    return PerturbationTerm(0, (1,) * d, eps, math.pi / 2)


def stability_experiment(map, params, eps_values, Xis=(16, 32), theta=None, points=None,
                         min_modulus=0.0, tol=1e-3, count=24):
    """Displacement of refinement-stable eigenvalues under ``T + eps cos(x_1 + x_2) e_1``.

    Returns rows ``{"eps", "displacement", "leading", "matched"}``; every
    eigenvalue of the unperturbed stable set is matched to the nearest
    stable eigenvalue of the perturbed operator.
    """
    theta = theta if theta is not None else params.theta
    base_op = TransferOperator(map, None, theta, theta)
    base, _ = refinement_stable(base_op, params, Xis, count, tol, min_modulus)
    rows = []
    for eps in eps_values:
        m_eps = map.with_terms([perturbation_term(eps, map.d)]) if eps else map
        if points is not None:
            check_cone_hyperbolicity(m_eps, theta, theta, points)
        vals, _ = refinement_stable(TransferOperator(m_eps, None, theta, theta), params, Xis,
                                    count, tol, min_modulus)
        disp = 0.0
        for z in base:
            dist = np.abs(vals - z) if len(vals) else np.array([math.inf])
            disp = max(disp, float(dist.min()))
        lead = complex(vals[0]) if len(vals) else complex("nan")
        rows.append({"eps": float(eps), "displacement": disp,
                     "leading": [lead.real, lead.imag], "matched": int(len(base))})
    return rows
