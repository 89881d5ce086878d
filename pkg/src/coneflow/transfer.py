"""Transfer operators ``L u = g * (u o T)`` and their block structure."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sps
import scipy.sparse.linalg as sla
from scipy import ndimage, special
from scipy.optimize import nnls

from .decomposition import GridFunction, SpectralBlocks, apply_symbol, lt_norm, random_band_limited
from .hyperbolicity import (_as_points, _expansion_inf_outside, _expansion_sup_outside,
                            hooks as _hooks)
from .maps import TWO_PI, MapModel, WeightField
from .norms import NormParams, aniso_norm
from .symbols import (DEFAULT_PROFILE, SIGNS, Symbol, directional_symbol, eval_directional,
                      shell_symbol)

MODES = ("exact", "interpolation")


class AliasingWarning(UserWarning):
    """Image modes fell outside the lattice and were dropped."""


class InterpolationAccuracyWarning(UserWarning):
    """Composition by interpolation misses the accuracy target."""


class TransferOperator:
    """``L u(x) = g(x) u(T(x))`` on the standard torus.

    Parameters
    ----------
    map : MapModel or InverseMap
    weight : WeightField, optional
        Defaults to ``g = 1``.
    source_theta, target_theta : ConeSystem, optional
        Cones indexing the input and output blocks.
    mode : {"exact", "interpolation"}, optional
        ``exact`` permutes Fourier modes and needs a linear map; the default
        picks it whenever possible.
    oversample, order : int
        FFT oversampling factor and spline order of the interpolation mode.
    """

    def __init__(self, map, weight=None, source_theta=None, target_theta=None, mode=None,
                 oversample=4, order=5, accuracy=1e-8):
        self.map = map
        self.weight = weight if weight is not None else WeightField.constant(1.0, map.d)
        self.source_theta = source_theta
        self.target_theta = target_theta if target_theta is not None else source_theta
        linear = isinstance(map, MapModel) and map.is_linear
        if mode is None:
            mode = "exact" if linear else "interpolation"
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if mode == "exact" and not linear:
            raise ValueError("exact Fourier mode needs a map without perturbation")
        if order < 5:
            raise ValueError("interpolation order must be at least 5")
        self.mode = mode
        self.oversample = int(oversample)
        self.order = int(order)
        self.accuracy = accuracy
        self._checked = set()

    def __repr__(self):
        return f"TransferOperator({self.map!r}, {self.weight!r}, mode={self.mode!r})"

    @property
    def d(self):
        return self.map.d

    @classmethod
    def pull_back(cls, map, h=None, **kw):
        """``T*_h u = h * (u o T)``."""
        return cls(map, h, **kw)

    @classmethod
    def perron_frobenius(cls, map, h=None, **kw):
        """``P u = |det DT^-1| * h * (u o T^-1)``."""
        inv = map.inverse_map()

        def weight(x):
            w = np.abs(inv.jacobian_det(x))
            return w * h(x) if h is not None else w

        return cls(inv, WeightField.from_callable(weight, map.d), mode="interpolation", **kw)

    def replace(self, **kw):
        data = dict(map=self.map, weight=self.weight, source_theta=self.source_theta,
                    target_theta=self.target_theta, mode=None, oversample=self.oversample,
                    order=self.order, accuracy=self.accuracy)
        data.update(kw)
        if "map" in kw and "mode" not in kw:
            data["mode"] = None
        return TransferOperator(**data)

    @property
    def supports_mode_images(self):
        return isinstance(self.map, MapModel) and self.weight.terms is not None


def _wavenumber_grid(lat):
    return np.stack(np.meshgrid(*[lat.wavenumbers(i) for i in range(lat.d)], indexing="ij"))


def _compose_exact(A, u):
    lat = u.lattice
    K = _wavenumber_grid(lat)
    Kp = np.tensordot(A.T, K, axes=(1, 0))
    N = np.array(lat.N).reshape((-1,) + (1,) * lat.d)
    inside = np.all((Kp > -N // 2) & (Kp <= N // 2), axis=0)
    coef = u.spectrum()
    lost = np.abs(coef[~inside])
    # blocks of band-limited data carry round-off at every mode; ignore it
    if lost.size and lost.max() > max(1e-14 * np.abs(coef).max(), 1e-13):
        warnings.warn(f"{int((lost > 0).sum())} image modes fall outside the lattice",
                      AliasingWarning, stacklevel=3)
    out = np.zeros_like(coef)
    idx = tuple(np.mod(Kp[i][inside], lat.N[i]) for i in range(lat.d))
    out[idx] = coef[inside]
    res = GridFunction.from_spectrum(lat, out)
    return GridFunction(lat, res.values.real, copy=False) if u.is_real else res


def _pad_axis(coef, axis, big):
    n = coef.shape[axis]
    h = n // 2
    c = np.moveaxis(coef, axis, -1)
    out = np.zeros(c.shape[:-1] + (big,), dtype=complex)
    out[..., :h] = c[..., :h]
    out[..., big - h + 1:] = c[..., h + 1:]
    # split the Nyquist coefficient so real data stay real
    out[..., h] = 0.5 * c[..., h]
    out[..., big - h] = 0.5 * c[..., h]
    return np.moveaxis(out, -1, axis)


def _upsample(values, factor):
    """Trigonometric interpolation onto a grid ``factor`` times finer."""
    if factor == 1:
        return values
    coef = sfft.fftn(values, workers=-1)
    for axis, n in enumerate(values.shape):
        coef = _pad_axis(coef, axis, factor * n)
    return sfft.ifftn(coef, workers=-1) * factor**values.ndim


def _interpolate(values, lat, pts, oversample, order):
    fine = _upsample(values, oversample)
    coords = np.stack([np.mod(pts[i], TWO_PI) / TWO_PI * fine.shape[i] for i in range(lat.d)])
    flat = coords.reshape(lat.d, -1)

    def run(a):
        return ndimage.map_coordinates(a, flat, order=order, mode="grid-wrap").reshape(lat.shape)

    if np.iscomplexobj(values):
        return run(fine.real) + 1j * run(fine.imag)
    return run(fine.real)


def apply_transfer(op, u):
    """``g * (u o T)`` sampled on ``u``'s lattice."""
    lat = u.lattice
    if not lat.is_torus:
        raise ValueError("transfer operators act on the 2 pi torus lattice")
    if op.mode == "exact":
        comp = _compose_exact(op.map.A, u)
    else:
        if lat not in op._checked:
            op._checked.add(lat)
            err = interpolation_error(op, lat)
            if err > op.accuracy:
                warnings.warn(f"interpolation error {err:.2e} exceeds {op.accuracy:.0e}",
                              InterpolationAccuracyWarning, stacklevel=2)
        pts = op.map(lat.points())
        vals = _interpolate(u.values, lat, pts, op.oversample, op.order)
        comp = GridFunction(lat, vals, copy=False)
    c = op.weight.constant_value
    if c is not None:
        return comp if c == 1 else comp * c
    g = op.weight(lat.points())
    return comp * g


def interpolation_error(op, lat, rng=0, probes=3):
    """Max relative error of interpolated ``e_k o T`` for random ``|k| <= N/8``."""
    rng = np.random.default_rng(rng)
    x = lat.points()
    Tx = op.map(x)
    kmax = max(1, min(lat.N) // 8)
    worst = 0.0
    for _ in range(probes):
        k = rng.integers(-kmax, kmax + 1, lat.d)
        u = GridFunction.mode(lat, k)
        got = _interpolate(u.values, lat, Tx, op.oversample, op.order)
        exact = np.exp(1j * np.tensordot(k, Tx, axes=(0, 0)))
        worst = max(worst, float(np.abs(got - exact).max()))
    return worst


# exact images of plane waves for trigonometric maps

BESSEL_TOL = 1e-30


def _bessel_table(beta, tol=BESSEL_TOL):
    """``J_m(beta)`` for ``|m| <= M`` with ``M`` the last order above ``tol``."""
    beta = np.asarray(beta, dtype=float)
    bmax = float(np.abs(beta).max()) if beta.size else 0.0
    M = int(math.ceil(bmax)) + 10
    while True:
        m = np.arange(-M, M + 1)
        J = special.jv(m[None, :], beta[:, None])
        if np.abs(J[:, [0, -1]]).max() < tol or M > 4000:
            break
        M *= 2
    keep = np.abs(J).max(axis=0) >= tol
    lo, hi = np.argmax(keep), len(m) - np.argmax(keep[::-1])
    return m[lo:hi], J[:, lo:hi]


def mode_images(op, K, tol=BESSEL_TOL):
    """Exact Fourier expansion of ``L e_k`` for integer wavenumbers ``K`` (rows).

    With ``T(x) = A x + sum_j a_j sin(k_j . x + phi_j) e_{c_j}``,

        e^{i k.T(x)} = e_{A^tr k} prod_j sum_m J_m(k_{c_j} a_j) e^{i m phi_j} e_{m k_j},

    followed by convolution with the Fourier modes of ``g``. Series are
    truncated where ``|J_m| < tol``.

    Returns
    -------
    src : ndarray of int, shape (E,)
        Row of ``K`` each entry comes from.
    out : ndarray of int, shape (E, d)
        Image wavenumbers.
    coef : ndarray of complex, shape (E,)
    """
    if not op.supports_mode_images:
        raise ValueError("mode images need a MapModel and a trigonometric weight")
    mp = op.map
    K = np.atleast_2d(np.asarray(K, dtype=np.int64))
    src = np.arange(len(K))
    out = K @ mp.A  # (A^tr k) as a row vector
    coef = np.ones(len(K), dtype=complex)
    for t in mp.terms:
        if t.amplitude == 0:
            continue
        kc = K[src, t.component]
        uniq, inv = np.unique(kc, return_inverse=True)
        m, J = _bessel_table(uniq * t.amplitude, tol)
        vals = J[inv] * np.exp(1j * m * t.phase)[None, :]
        keep = np.abs(vals) > 0
        rows, cols = np.nonzero(keep)
        src = src[rows]
        out = out[rows] + np.outer(m[cols], np.asarray(t.k, dtype=np.int64))
        coef = coef[rows] * vals[rows, cols]
    w = op.weight.terms
    if not (len(w) == 1 and (0,) * mp.d in w and w[(0,) * mp.d] == 1):
        ks = np.array(list(w.keys()), dtype=np.int64)
        cs = np.array(list(w.values()), dtype=complex)
        E = len(src)
        src = np.repeat(src, len(ks))
        out = (out[:, None, :] + ks[None, :, :]).reshape(-1, mp.d)
        coef = (coef[:, None] * cs[None, :]).reshape(-1)
        if E and len(ks) > 1:
            out, src, coef = _merge(out, src, coef)
    return src, out, coef


def _merge(out, src, coef):
    key = np.concatenate([src[:, None], out], axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    c = np.zeros(len(uniq), dtype=complex)
    np.add.at(c, inv.ravel(), coef)
    return uniq[:, 1:], uniq[:, 0], c


def lattice_modes(radius, d=2, inner=0.0):
    """Integer wavenumbers with ``inner <= |k| <= radius``, sorted by norm then by value."""
    R = int(math.floor(radius))
    ax = np.arange(-R, R + 1)
    K = np.stack(np.meshgrid(*[ax] * d, indexing="ij"), axis=-1).reshape(-1, d)
    r2 = np.sum(K.astype(float) ** 2, axis=1)
    K = K[(r2 <= radius**2 + 1e-9) & (r2 >= inner**2 - 1e-9)]
    order = np.lexsort(tuple(K[:, i] for i in reversed(range(d))) + (np.sum(K**2, axis=1),))
    return K[order]


# block operators

def _target_symbol(op, n, sigma):
    return directional_symbol(op.target_theta, n, sigma)


def block_operator(op, blocks, lt, ns, hooks=None, enlarged=None):
    """``S^{ell,tau}_{n,sigma}`` applied to the ``(ell, tau)`` block.

    The enlarged symbol of the source cones is inserted exactly when the
    pair is not hooked (or when ``enlarged`` is forced).
    """
    ell, tau = lt
    n, sigma = ns
    if not (0 <= ell <= blocks.n_max and 0 <= n) or tau not in SIGNS or sigma not in SIGNS:
        raise IndexError("block index out of range")
    if enlarged is None:
        enlarged = hooks is not None and not _hooks(hooks, ell, tau, n, sigma)
    v = blocks[(ell, tau)]
    if enlarged:
        theta = hooks.source if hooks is not None else op.source_theta
        v = apply_symbol(directional_symbol(theta, ell, tau, enlarged=True), v)
    return apply_symbol(_target_symbol(op, n, sigma), apply_transfer(op, v))


def s0_apply(op, blocks, hooks, ns):
    """``Phi(D) Psi L`` at output ``(n, sigma)``: sum over hooked inputs, then the output symbol."""
    n, sigma = ns
    acc = None
    for ell, tau in blocks:
        if _hooks(hooks, ell, tau, n, sigma):
            w = apply_transfer(op, blocks[(ell, tau)])
            acc = w if acc is None else acc + w
    if acc is None:
        return GridFunction(blocks.lattice, np.zeros(blocks.lattice.shape))
    return apply_symbol(_target_symbol(op, n, sigma), acc)


def psi_weight_sums(hooks, p, q, n_max):
    """Row and column sums of ``2^{c(sigma) n - c(tau) ell}`` over hooked pairs.

    Returns the larger of ``sup_n sum_ell`` and ``sup_ell sum_n`` divided by
    ``2^{max(p h+_max, q h-_min)}``.
    """
    c = {"+": p, "-": q}
    idx = [(n, s) for n in range(n_max + 1) for s in SIGNS]
    W = np.zeros((len(idx), len(idx)))
    for i, (n, s) in enumerate(idx):
        for j, (ell, t) in enumerate(idx):
            if _hooks(hooks, ell, t, n, s):
                W[i, j] = 2.0 ** (c[s] * n - c[t] * ell)
    scale = 2.0 ** max(p * hooks.h_max_plus, q * hooks.h_min_minus)
    return float(max(W.sum(axis=1).max(), W.sum(axis=0).max()) / scale)


@dataclass
class BlockNorm:
    ell: int
    tau: str
    n: int
    sigma: str
    value: float


def _band_modes(theta, ell, tau):
    K = lattice_modes(2.0 if ell == 0 else 2.0 ** (ell + 1), 2,
                      0.0 if ell == 0 else 2.0 ** (ell - 1))
    w = eval_directional(theta, DEFAULT_PROFILE, ell, tau, K.T.astype(float))
    keep = w > 0
    return K[keep], w[keep]


def s1_block_norm_scan(op, hooks, n_max, t=2, probes=8, rng=0, method="modes", lattice=None,
                       include_hooked=False):
    """Operator-norm estimates of unhooked blocks ``S^{ell,tau}_{n,sigma}``.

    ``method="modes"`` uses exact plane-wave images. For ``t = 2`` the
    norm on functions with spectrum in the ``(ell, tau)`` band is the
    largest singular value of the sparse block; for ``t = inf`` it is the
    largest ratio over ``probes`` random band-limited functions.
    ``method="grid"`` applies :func:`block_operator` to the same kind of
    probes on ``lattice`` (operator-norm lower estimate).
    """
    if t not in (2, math.inf):
        raise ValueError("t must be 2 or inf")
    rng = np.random.default_rng(rng)
    rows = []
    if method == "grid":
        return _scan_grid(op, hooks, n_max, t, probes, rng, lattice, include_hooked)
    if method != "modes":
        raise ValueError("method must be 'modes' or 'grid'")
    src_theta = hooks.source
    out_radius = 2.0 ** (n_max + 1)
    for ell in range(n_max + 1):
        for tau in SIGNS:
            outs = [(n, s) for n in range(n_max + 1) for s in SIGNS
                    if include_hooked or not _hooks(hooks, ell, tau, n, s)]
            if not outs:
                continue
            K, _ = _band_modes(op.source_theta, ell, tau)
            wt = eval_directional(src_theta, DEFAULT_PROFILE, ell, tau, K.T.astype(float),
                                  enlarged=True)
            src, img, coef = _images_within(op, K, out_radius)
            for n, s in outs:
                psi = eval_directional(op.target_theta, DEFAULT_PROFILE, n, s,
                                       img.T.astype(float)) if len(img) else np.zeros(0)
                sel = psi > 0
                if not sel.any():
                    rows.append(BlockNorm(ell, tau, n, s, 0.0))
                    continue
                val = coef[sel] * psi[sel] * wt[src[sel]]
                if t == 2:
                    est = _sparse_norm(img[sel], src[sel], val, len(K))
                else:
                    est = _probe_sup_ratio(img[sel], src[sel], val, K, probes, rng, n, ell)
                rows.append(BlockNorm(ell, tau, n, s, est))
    return rows


def _images_within(op, K, radius, chunk=20000):
    srcs, imgs, coefs = [], [], []
    for a in range(0, len(K), chunk):
        s, o, c = mode_images(op, K[a:a + chunk])
        keep = np.sum(o.astype(float) ** 2, axis=1) <= (radius * 1.0000001) ** 2
        srcs.append(s[keep] + a)
        imgs.append(o[keep])
        coefs.append(c[keep])
    if not srcs:
        return np.zeros(0, int), np.zeros((0, 2), int), np.zeros(0, complex)
    return np.concatenate(srcs), np.concatenate(imgs), np.concatenate(coefs)


def _sparse_norm(img, src, val, ncols):
    uniq, rows = np.unique(img, axis=0, return_inverse=True)
    M = sps.csr_matrix((val, (rows.ravel(), src)), shape=(len(uniq), ncols))
    M.sum_duplicates()
    M.eliminate_zeros()
    if M.nnz == 0:
        return 0.0
    used = np.unique(M.indices)
    M = M[:, used]
    if min(M.shape) <= 1500:
        return float(np.linalg.norm(M.toarray(), 2))
    return float(sla.svds(M, k=1, return_singular_vectors=False, tol=1e-10)[0])


def _sup_on_grid(modes, coef, N):
    arr = np.zeros((N, N), dtype=complex)
    np.add.at(arr, (np.mod(modes[:, 0], N), np.mod(modes[:, 1], N)), coef)
    return float(np.abs(sfft.ifft2(arr, workers=-1)).max() * N * N)


def _probe_sup_ratio(img, src, val, K, probes, rng, n, ell):
    N = 4 * int(2 ** (max(n, ell) + 1))
    N = max(N, 64)
    uniq, rows = np.unique(img, axis=0, return_inverse=True)
    M = sps.csr_matrix((val, (rows.ravel(), src)), shape=(len(uniq), len(K)))
    best = 0.0
    for _ in range(probes):
        c = rng.standard_normal(len(K)) + 1j * rng.standard_normal(len(K))
        out = M @ c
        best = max(best, _sup_on_grid(uniq, out, N) / _sup_on_grid(K, c, N))
    return best


def _scan_grid(op, hooks, n_max, t, probes, rng, lattice, include_hooked):
    if lattice is None:
        raise ValueError("grid scans need a lattice")
    rows = []
    xi = lattice.frequencies(sparse=False)
    for ell in range(n_max + 1):
        for tau in SIGNS:
            outs = [(n, s) for n in range(n_max + 1) for s in SIGNS
                    if include_hooked or not _hooks(hooks, ell, tau, n, s)]
            if not outs:
                continue
            sym = eval_directional(op.source_theta, DEFAULT_PROFILE, ell, tau, xi)
            best = {o: 0.0 for o in outs}
            for _ in range(probes):
                c = (rng.standard_normal(lattice.shape) + 1j * rng.standard_normal(lattice.shape))
                u = GridFunction.from_spectrum(lattice, c * (sym > 0))
                u_norm = lt_norm(u.values, lattice, t, True)
                blocks = SpectralBlocks(op.source_theta, max(n_max, ell), lattice,
                                        explicit={(ell, tau): u})
                for n, s in outs:
                    v = block_operator(op, blocks, (ell, tau), (n, s), hooks,
                                       enlarged=not _hooks(hooks, ell, tau, n, s))
                    best[(n, s)] = max(best[(n, s)], lt_norm(v.values, lattice, t, True) / u_norm)
            rows.extend(BlockNorm(ell, tau, n, s, best[(n, s)]) for n, s in outs)
    return rows


def fit_block_decay(rows, floor=0.0, min_level=1):
    """Least-squares slope of ``log2`` of the per-level maximum versus ``max(n, ell)``.

    Levels whose maximum is at or below ``floor`` carry no information (below
    resolution) and are excluded; returns ``(slope, levels, envelope)``.
    """
    env = {}
    for r in rows:
        lev = max(r.n, r.ell)
        env[lev] = max(env.get(lev, 0.0), r.value)
    levels = np.array(sorted(l for l in env if l >= min_level and env[l] > floor))
    vals = np.array([env[l] for l in levels])
    if len(levels) < 2:
        return -math.inf, levels, vals
    slope = np.polyfit(levels, np.log2(vals), 1)[0]
    return float(slope), levels, vals


# norms of iterates and Lasota-Yorke measurements

def _pulled_symbol(theta, n, sigma, B):
    # psi(B^tr xi), so that psi(D)(u o B) = [(psi o B^tr)(D) u] o B
    Bt = np.asarray(B, dtype=float).T

    def f(xi):
        xi = np.asarray(xi, dtype=float)
        return eval_directional(theta, DEFAULT_PROFILE, n, sigma, np.tensordot(Bt, xi, axes=(1, 0)))

    return Symbol(f, even=True)


def iterate_norm(op, u, params, m, family="C", n_max=None, normalized=True):
    """Norm of ``L^m u`` in the target cones of ``op``.

    For linear maps with constant weight the blocks of ``u o A^m`` are
    obtained by pulling the symbols back through ``(A^m)^tr``; composition
    with ``A^m`` permutes grid points and preserves volume, so no
    resolution is lost however large ``m`` is.
    """
    theta = op.target_theta if m > 0 else op.source_theta
    target = params.replace(theta=theta)
    if m == 0:
        return aniso_norm(u, target, family, n_max=n_max, normalized=normalized)
    c = op.weight.constant_value
    if isinstance(op.map, MapModel) and op.map.is_linear and c is not None:
        B = np.linalg.matrix_power(op.map.A, m)
        lat = u.lattice
        n_max = n_max if n_max is not None else _covering_n_max(lat, B)
        real = u.is_real
        spec = u.spectrum(real)
        blocks = {}
        for n in range(n_max + 1):
            for s in SIGNS:
                sym = _pulled_symbol(theta, n, s, B)
                mult = np.asarray(sym(lat.frequencies(real=real)))
                if not mult.any():
                    continue
                blocks[(n, s)] = GridFunction.from_spectrum(lat, mult * spec, real)
        sb = SpectralBlocks(theta, n_max, lat, explicit=blocks)
        return abs(c) ** m * aniso_norm(u, target, family, blocks=sb, normalized=normalized)
    v = u
    for _ in range(m):
        v = apply_transfer(op, v)
    return aniso_norm(v, target, family, n_max=n_max, normalized=normalized)


def _covering_n_max(lat, B):
    top = lat.max_frequency * np.linalg.norm(np.asarray(B, float).T, 2)
    return max(lat.default_n_max(), int(math.ceil(math.log2(top))) + 1)


def iterate_cone_norms(map, source, target, points, m, samples=2048):
    """``(|T^m|_+, |T^m|_-)`` and ``inf |det DT^m|`` over sample points."""
    x, _ = _as_points(points, map.d)
    x = map.wrap(x)
    D = np.broadcast_to(np.eye(map.d)[..., None], (map.d, map.d, x.shape[1])).copy()
    y = x
    for _ in range(m):
        D = np.einsum("ijm,jkm->ikm", map.derivative(y), D)
        y = map.wrap(map(y))
    Mt = np.moveaxis(D, (0, 1), (-1, -2))
    plus = float(_expansion_sup_outside(Mt, target, samples).max())
    minus = float(_expansion_inf_outside(Mt, source, samples).min())
    det = float(np.abs(np.linalg.det(np.moveaxis(D, (0, 1), (-2, -1)))).min())
    return plus, minus, det


@dataclass
class LYReport:
    p: float
    q: float
    p_weak: float
    q_weak: float
    t: float
    m: int
    family: str
    A_est: float
    B_est: float
    boundRHS: float
    calibration: float
    residual_with: float
    residual_without: float
    passed: bool

    @property
    def residual_ratio(self):
        if self.residual_with == 0:
            return math.inf
        return self.residual_without / self.residual_with

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        d["residual_ratio"] = self.residual_ratio
        for k in ("t",):
            if math.isinf(d[k]):
                d[k] = "inf"
        return d


def ly_data(op, params, params_weak, probes, m, family="C"):
    """Strong norms, weak norms and strong norms of ``L^m u`` for each probe."""
    strong = np.array([aniso_norm(u, params.replace(theta=op.source_theta), family,
                                  normalized=True) for u in probes])
    weak = np.array([aniso_norm(u, params_weak.replace(theta=op.source_theta), family,
                                normalized=True) for u in probes])
    image = np.array([iterate_norm(op, u, params, m, family) for u in probes])
    return strong, weak, image


def fit_ly(strong, weak, image):
    """Fit ``|L^m u| ~ A |u| + B |u|_weak`` on ratios to the strong norm.

    Returns ``(A, B, rms_with, rms_without)``; the second residual is for the
    best fit with ``B = 0``.
    """
    y = image / strong
    X = np.stack([np.ones_like(y), weak / strong], axis=1)
    coef, _ = nnls(X, y)
    rms_with = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    A0 = float(np.mean(y))
    rms_without = float(np.sqrt(np.mean((A0 - y) ** 2)))
    return float(coef[0]), float(coef[1]), rms_with, rms_without


def lasota_yorke_measure(op, p, q, p_weak, q_weak, t, probes, m=1, family="C", points=None,
                         calibration=None):
    """Measure the two constants of a Lasota-Yorke inequality for ``L^m``.

    ``boundRHS = C |g|_inf^m max(|T^m|_+^p, |T^m|_-^q)`` (divided by
    ``inf |det DT^m|^(1/t)`` for the Sobolev family), where ``C`` is the
    strong coefficient measured for the identity map on the same probes.
    """
    r = op.map.r
    if not (0 <= p_weak < p and q_weak < q and p - q_weak < r - 1):
        raise ValueError("Lasota-Yorke hypotheses need 0 <= p' < p, q' < q and p - q' < r - 1")
    params = NormParams(p, q, t, op.source_theta)
    weak_params = NormParams(p_weak, q_weak, t, op.source_theta)
    strong, weak, image = ly_data(op, params, weak_params, probes, m, family)
    A, B, rw, r0 = fit_ly(strong, weak, image)
    if calibration is None:
        from .maps import identity_map

        ident = TransferOperator(identity_map(op.d), None, op.source_theta, op.source_theta)
        s2, w2, i2 = ly_data(ident, params, weak_params, probes, 1, family)
        calibration = fit_ly(s2, w2, i2)[0]
    if points is None:
        g1d = np.arange(8) * TWO_PI / 8
        points = np.stack(np.meshgrid(g1d, g1d, indexing="ij")).reshape(2, -1)
    plus, minus, det = iterate_cone_norms(op.map, op.source_theta, op.target_theta, points, m)
    bound = calibration * op.weight.sup_norm() ** m * max(plus**p, minus**q)
    if family == "W" and not math.isinf(t):
        bound /= det ** (1.0 / t)
    return LYReport(p, q, p_weak, q_weak, t, m, family, A, B, float(bound), float(calibration),
                    rw, r0, bool(A <= bound * (1 + 1e-9)))


def ly_probe_suite(lattice, params, rng=0, bands=(5, 6), per_band=3,
                   offsets=(0.25, 0.5, 1.0, 1.5, 2.0, 3.0), family="C"):
    """High-band probes plus constant-shifted copies.

    High-band probes are ``psi_ell(D)`` applied to random band-limited
    functions, scaled to unit strong norm. The shifted copies ``c + u``
    carry a low-band part that the transfer operator does not contract,
    which is what the weak term of a Lasota-Yorke inequality has to absorb.
    Returns ``(high, mixed)``.
    """
    rng = np.random.default_rng(rng)
    kmax = min(lattice.N) // 2 - 1
    high = []
    for ell in bands:
        for _ in range(per_band):
            u = apply_symbol(shell_symbol("psi", ell), random_band_limited(lattice, rng, kmax))
            high.append(u * (1.0 / aniso_norm(u, params, family, normalized=True)))
    mixed = [c + u for c in offsets for u in high[::per_band]]
    return high, mixed


def growth_rate(op, params, probes, m_values, family="C"):
    """Geometric mean over ``m`` of ``(max_u |L^m u| / |u|)^(1/m)``."""
    strong = np.array([aniso_norm(u, params.replace(theta=op.source_theta), family,
                                  normalized=True) for u in probes])
    rates = []
    for m in m_values:
        img = np.array([iterate_norm(op, u, params, m, family) for u in probes])
        rates.append(float(np.max(img / strong)) ** (1.0 / m))
    return float(np.exp(np.mean(np.log(rates)))), rates
