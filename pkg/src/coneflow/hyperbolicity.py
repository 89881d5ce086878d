"""Hyperbolic splittings, local exponents, the bounds R^{p,q,t}, cone norms and hooks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .maps import TWO_PI
from .symbols import SIGNS, ConeSystem, _sphere_samples


class NoSplittingError(RuntimeError):
    """Power iteration did not single out a splitting."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3g})")
        self.residual = residual


class ConeHyperbolicityError(ValueError):
    """Raised with a witness ``(x, xi)`` escaping the target cone."""

    def __init__(self, x, xi):
        super().__init__(f"cone-hyperbolicity fails at x={np.round(x, 6).tolist()}, "
                         f"xi={np.round(xi, 6).tolist()}")
        self.x, self.xi = np.asarray(x), np.asarray(xi)


class OrbitEscapeError(RuntimeError):
    pass


def _as_points(x, d):
    """Return a ``(d, M)`` array and whether the input was a single point."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x.reshape(d, 1), True
    if x.shape[0] != d and x.shape[-1] == d:
        x = x.T
    return x.reshape(d, -1), False


def _matvec(J, v):
    # J: (d, d, M), v: (d, M)
    return np.einsum("ijm,jm->im", J, v)


def _normalise(v):
    return v / np.linalg.norm(v, axis=0)


def iterate_derivative(map, x, m, neighborhood=None):
    """``DT^m_x = DT_{T^{m-1}x} ... DT_x`` for a single point ``x``.

    ``neighborhood`` is an optional predicate on points; leaving it raises
    :class:`OrbitEscapeError`.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    y = np.asarray(x, dtype=float).reshape(map.d)
    D = np.eye(map.d)
    for _ in range(m):
        if neighborhood is not None and not neighborhood(y):
            raise OrbitEscapeError(f"orbit leaves the neighbourhood at {y}")
        D = map.derivative(y) @ D
        y = map(y)
    return D


def orbit(map, x, m, wrap=True):
    """Points ``x, T x, ..., T^m x`` as an array of shape ``(m + 1, d, ...)``."""
    pts = [np.asarray(x, dtype=float)]
    for _ in range(m):
        y = map(pts[-1])
        pts.append(map.wrap(y) if wrap else y)
    return np.stack(pts)


@dataclass
class SplittingSample:
    """Unit vectors spanning ``E^s`` and ``E^u`` at sample points (columns)."""

    points: np.ndarray
    stable: np.ndarray
    unstable: np.ndarray
    residual: np.ndarray

    def __len__(self):
        return self.points.shape[1]

    def index_of(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float).reshape(-1, 1)
        diff = np.mod(self.points - x + np.pi, TWO_PI) - np.pi
        dist = np.linalg.norm(diff, axis=0)
        i = int(np.argmin(dist))
        if dist[i] > tol:
            raise KeyError("point is not in the splitting sample")
        return i


def _unstable_dirs(map, x, iterations, tol):
    """Push two independent vectors forward from ``T^-K x`` to ``x``."""
    back = [x]
    for _ in range(iterations):
        back.append(map.wrap(map.inverse(back[-1])))
    k = x.shape[1]
    v1 = np.tile(np.eye(map.d)[:, :1], (1, k))
    v2 = np.tile(np.eye(map.d)[:, 1:2], (1, k))
    for y in reversed(back[1:]):
        J = map.derivative(y)
        v1, v2 = _normalise(_matvec(J, v1)), _normalise(_matvec(J, v2))
    return v1, _line_gap(v1, v2)


def _stable_dirs(map, x, iterations, tol):
    """Pull two independent vectors back from ``T^K x`` to ``x``."""
    fwd = [x]
    for _ in range(iterations):
        fwd.append(map.wrap(map(fwd[-1])))
    k = x.shape[1]
    v1 = np.tile(np.eye(map.d)[:, :1], (1, k))
    v2 = np.tile(np.eye(map.d)[:, 1:2], (1, k))
    for y in reversed(fwd[:-1]):
        Ji = np.moveaxis(np.linalg.inv(np.moveaxis(map.derivative(y), (0, 1), (-2, -1))),
                         (-2, -1), (0, 1))
        v1, v2 = _normalise(_matvec(Ji, v1)), _normalise(_matvec(Ji, v2))
    return v1, _line_gap(v1, v2)


def _line_gap(a, b):
    # sine of the angle between the lines spanned by the (unit) columns, via the
    # orthogonal component, which stays accurate for nearly parallel lines
    a = _normalise(a)
    b = _normalise(b)
    return np.linalg.norm(b - np.sum(a * b, axis=0) * a, axis=0)


def estimate_splitting(map, points, iterations=60, tol=1e-10):
    """Invariant splitting at ``points`` by power iteration (planar case).

    ``E^u(x)`` comes from pushing two independent directions forward along
    the backward orbit, ``E^s(x)`` from pulling them back along the forward
    orbit. Both must collapse onto one line to within ``tol``; the invariance
    residual ``|DT_x E(x) - E(Tx)|`` is recorded per point.
    """
    if map.d != 2:
        raise NotImplementedError("splitting estimation handles planar maps only")
    x, _ = _as_points(points, map.d)
    x = map.wrap(x)
    eu, gap_u = _unstable_dirs(map, x, iterations, tol)
    es, gap_s = _stable_dirs(map, x, iterations, tol)
    worst = float(max(gap_u.max(), gap_s.max()))
    if worst > tol:
        raise NoSplittingError("no hyperbolic splitting: directions do not converge", worst)
    sep = _line_gap(eu, es)
    if sep.min() < 1e-6:
        raise NoSplittingError("stable and unstable directions coincide", float(sep.min()))
    tx = map.wrap(map(x))
    eu1, _ = _unstable_dirs(map, tx, iterations, tol)
    es1, _ = _stable_dirs(map, tx, iterations, tol)
    J = map.derivative(x)
    res = np.maximum(_line_gap(_normalise(_matvec(J, eu)), eu1),
                     _line_gap(_normalise(_matvec(J, es)), es1))
    return SplittingSample(x, es, eu, res)


def local_exponents(map, splitting, index=None, m=1, iterations=60):
    """``(lambda_x(T^m), nu_x(T^m))`` for sample points.

    The exponents are products of one-step factors ``|DT e(x_j)|`` along the
    orbit, with ``e`` the splitting recomputed at each orbit point. For
    one-dimensional bundles this equals ``|DT^m_x v|`` but avoids the
    cancellation of pushing a stable vector through ``DT^m``.

    ``index`` selects sample columns (int, array, or ``None`` for all).
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    idx = np.arange(len(splitting)) if index is None else np.atleast_1d(index)
    x = splitting.points[:, idx]
    lam = np.ones(x.shape[1])
    nu = np.ones(x.shape[1])
    es, eu = splitting.stable[:, idx], splitting.unstable[:, idx]
    for j in range(m):
        J = map.derivative(x)
        lam *= np.linalg.norm(_matvec(J, es), axis=0)
        nu *= np.linalg.norm(_matvec(J, eu), axis=0)
        x = map.wrap(map(x))
        if j + 1 < m:
            eu = _normalise(_matvec(J, eu))
            es, _ = _stable_dirs(map, x, iterations, 1.0)
    if np.ndim(index) == 0 and index is not None:
        return float(lam[0]), float(nu[0])
    return lam, nu


def weight_product(g, map, x, m):
    """``g^(m)(x) = prod_{k<m} g(T^k x)`` for points ``x`` of shape ``(d, ...)``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    c = g.constant_value
    x = np.asarray(x, dtype=float)
    if c is not None:
        return np.full(x.shape[1:], complex(c) ** m) if x.ndim > 1 else complex(c) ** m
    out = np.ones(x.shape[1:], dtype=complex)
    y = x
    for _ in range(m):
        out = out * g(y)
        y = map.wrap(map(y))
    return out


def jacobian_det_iterate(map, x, m):
    """``det DT^m_x`` as a product of one-step determinants."""
    out = np.ones(np.asarray(x).shape[1:])
    y = np.asarray(x, dtype=float)
    for _ in range(m):
        out = out * map.jacobian_det(y)
        y = map.wrap(map(y))
    return out


def periodic_points(map, period, newton_tol=1e-12):
    """Periodic points of exact period dividing ``period``.

    Linear maps: the rational points solving ``(A^n - I) y in Z^d``.
    Perturbed maps: Newton continuation from the linear solutions; points
    that do not converge are dropped.
    """
    A = map.A
    d = map.d
    B = np.linalg.matrix_power(A, period) - np.eye(d, dtype=int)
    det = int(round(np.linalg.det(B)))
    if det == 0:
        raise ValueError("A^n - I is singular; linear part is not hyperbolic")
    corners = np.array(list(itertools.product((0, 1), repeat=d))).T
    img = B @ corners
    lo, hi = img.min(axis=1), img.max(axis=1)
    grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo, hi)], indexing="ij")
    m = np.stack([g.ravel() for g in grids])
    y = np.linalg.solve(B.astype(float), m.astype(float))
    y = np.mod(np.round(y * abs(det)) / abs(det), 1.0)
    y = np.unique(np.round(y * abs(det)).astype(np.int64), axis=1) / abs(det)
    x = TWO_PI * y
    if map.is_linear:
        return x
    keep = []
    for col in x.T:
        z = col.copy()
        for _ in range(50):
            Tz, D = z.copy(), np.eye(d)
            for _ in range(period):
                D = map.derivative(Tz) @ D
                Tz = map(Tz)
            F = Tz - z
            F = F - TWO_PI * np.round(F / TWO_PI)
            if np.abs(F).max() < newton_tol:
                keep.append(np.mod(z, TWO_PI))
                break
            z = z - np.linalg.solve(D - np.eye(d), F)
    return np.array(keep).T if keep else np.zeros((d, 0))


def sample_invariant_set(map, count=256, period_bound=4, rng=None, max_periodic=512):
    """Approximation of ``Omega``: periodic points up to ``period_bound`` plus a long orbit."""
    rng = np.random.default_rng(rng)
    parts = []
    for n in range(1, period_bound + 1):
        p = periodic_points(map, n)
        if p.shape[1]:
            parts.append(p)
    pts = np.concatenate(parts, axis=1) if parts else np.zeros((map.d, 0))
    if pts.shape[1] > max_periodic:
        pts = pts[:, rng.choice(pts.shape[1], max_periodic, replace=False)]
    x = rng.uniform(0, TWO_PI, map.d)
    traj = orbit(map, x, max(count - 1, 0))
    return np.concatenate([pts, traj.T], axis=1)


def R_pqt(map, g, splitting, p, q, t, m):
    """``sup_x |det DT^m_x|^(-1/t) |g^(m)(x)| max(lambda^p, nu^q)`` over the sample."""
    if not q <= 0 <= p:
        raise ValueError("need q <= 0 <= p")
    if not t > 1:
        raise ValueError("need t in (1, inf]")
    if len(splitting) == 0:
        raise ValueError("empty sample")
    x = splitting.points
    lam, nu = local_exponents(map, splitting, None, m)
    gm = np.abs(weight_product(g, map, x, m)) if m > 0 else np.ones(x.shape[1])
    val = gm * np.maximum(lam**p, nu**q)
    if not math.isinf(t):
        val = val * np.abs(jacobian_det_iterate(map, x, m)) ** (-1.0 / t)
    return float(np.max(val))


def R_pqt_limit(map, g, splitting, p, q, t, m_max):
    """``min_{m <= m_max} R(m)^(1/m)`` and the sequence of roots."""
    roots = np.array([R_pqt(map, g, splitting, p, q, t, m) ** (1.0 / m)
                      for m in range(1, m_max + 1)])
    return float(roots.min()), roots


def _cotangent(map, x):
    # DT_x^tr for points x of shape (d, M) -> (M, d, d)
    return np.moveaxis(map.derivative(x), (0, 1), (-1, -2))


def _region_directions(theta, sigma, outside, samples, inner=False):
    """Unit directions with angle to the ``C_sigma`` core ``>=`` (or ``<=``) its aperture.

    Planar systems get the exact boundary rays on top of uniform samples.
    """
    dirs = _sphere_samples(theta.d, samples)
    a = theta.aperture(sigma, inner)
    if theta._planar:
        axis = theta.plus_axes[0] if sigma == "+" else theta.minus_axes[0]
        a0 = math.atan2(axis[1], axis[0])
        extra = np.array([a0 + a, a0 - a])
        dirs = np.concatenate([dirs, np.stack([np.cos(extra), np.sin(extra)])], axis=1)
    ang = theta.angle(sigma, dirs)
    sel = ang >= a - 1e-14 if outside else ang <= a + 1e-14
    return dirs[:, sel]


def check_cone_hyperbolicity(map, source, target, points, samples=2048, inner_plus=False):
    """Raise :class:`ConeHyperbolicityError` unless ``DT^tr`` maps the closed
    complement of ``int C+`` into ``int C'-``."""
    x, _ = _as_points(points, map.d)
    M = _cotangent(map, x)
    dirs = _region_directions(source, "+", True, samples, inner=inner_plus)
    img = np.einsum("mij,jk->mik", M, dirs)
    ang = target.angle("-", np.moveaxis(img, 1, 0))
    bad = np.argwhere(ang >= target.minus_aperture)
    if len(bad):
        i, k = bad[0]
        raise ConeHyperbolicityError(x[:, i], dirs[:, k])


def _expansion_sup_outside(M, target, samples, inner=False):
    # sup |M xi| / |xi| over xi with M xi outside C'- (closure): parametrise by the image
    eta = _region_directions(target, "-", True, samples, inner=inner)
    pre = np.linalg.solve(M, np.broadcast_to(eta, (M.shape[0],) + eta.shape))
    return 1.0 / np.linalg.norm(pre, axis=1).min(axis=1)


def _expansion_inf_outside(M, source, samples, inner=False):
    xi = _region_directions(source, "+", True, samples, inner=inner)
    img = np.einsum("mij,jk->mik", M, xi)
    return np.linalg.norm(img, axis=1).min(axis=1)


def cone_expansion_norms(map, source, target, points, samples=2048, check=True):
    """``(|T|_+, |T|_-)`` over sample points.

    ``|T|_+`` is the sup of ``|DT^tr xi|`` over unit ``xi`` with
    ``DT^tr xi`` outside ``C'-``; ``|T|_-`` is the inf over unit ``xi``
    outside ``C+``. Boundary rays are included (the values are limits).
    """
    if check:
        check_cone_hyperbolicity(map, source, target, points, samples)
    x, _ = _as_points(points, map.d)
    M = _cotangent(map, x)
    return (float(_expansion_sup_outside(M, target, samples).max()),
            float(_expansion_inf_outside(M, source, samples).min()))


@dataclass
class HookStructure:
    """Integers singling out the non-compact part of the block operator matrix."""

    h_min: int
    h_max: int
    h_min_minus: int
    h_max_plus: int
    source: ConeSystem
    target: ConeSystem
    norm_plus: float
    norm_minus: float
    NT: int
    margins: dict = field(default_factory=dict)

    @property
    def enlarged_plus_aperture(self):
        return self.source.inner_plus_aperture

    @property
    def enlarged_minus_aperture(self):
        return self.target.inner_minus_aperture

    def hooks(self, ell, tau, n, sigma):
        return hooks(self, ell, tau, n, sigma)

    def to_dict(self):
        return {"h_min": self.h_min, "h_max": self.h_max, "h_min_minus": self.h_min_minus,
                "h_max_plus": self.h_max_plus, "NT": self.NT, "norm_plus": self.norm_plus,
                "norm_minus": self.norm_minus,
                "inner_plus_aperture": self.source.inner_plus_aperture,
                "inner_minus_aperture": self.target.inner_minus_aperture}


def hooks(hs, ell, tau, n, sigma):
    """The relation ``(ell, tau) -> (n, sigma)``."""
    if tau not in SIGNS or sigma not in SIGNS:
        raise ValueError("signs must be '+' or '-'")
    if tau == "+" and sigma == "+":
        return n <= ell + hs.h_max_plus
    if tau == "-" and sigma == "-":
        return ell + hs.h_min_minus <= n
    if tau == "+" and sigma == "-":
        return n >= hs.h_min_minus or ell >= -hs.h_max_plus
    return False


SLACK = 1e-6


def _largest_below(value):
    # largest h with 2^(h+4) < value, with relative slack
    h = math.floor(math.log2(value)) - 4
    while 2.0 ** (h + 4) >= value * (1 - SLACK):
        h -= 1
    while 2.0 ** (h + 5) < value * (1 - SLACK):
        h += 1
    return h


def _smallest_above(value):
    # smallest h with value < 2^(h-4)
    h = math.ceil(math.log2(value)) + 4
    while value * (1 + SLACK) >= 2.0 ** (h - 4):
        h += 1
    while value * (1 + SLACK) < 2.0 ** (h - 5):
        h -= 1
    return h


INNER_FRACTIONS = (0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99)


def hook_structure(map, source, target, points, samples=2048, max_NT=40, check_levels=4,
                   separation_points=48):
    """Hook integers, modified inner cones and ``N(T)`` for a cone-hyperbolic map.

    The inner apertures of ``C~+`` (source) and ``C~'-`` (target) start at
    half the outer apertures and grow in fixed 10% steps until the
    ``h``-inequalities against ``|T|_+-`` admit integers. ``N(T)`` starts at
    the lower bound from the case analysis and is raised until the support
    separation of unhooked pairs holds on the sample.
    """
    x, _ = _as_points(points, map.d)
    M = _cotangent(map, x)
    sv = np.linalg.svd(M, compute_uv=False)
    h_min, h_max = _largest_below(sv.min()), _smallest_above(sv.max())
    norm_plus, norm_minus = cone_expansion_norms(map, source, target, x, samples)
    chosen = None
    for f in INNER_FRACTIONS:
        src = source.with_inner(plus=f * source.plus_aperture)
        tgt = target.with_inner(minus=f * target.minus_aperture)
        try:
            check_cone_hyperbolicity(map, src, target, x, samples, inner_plus=True)
        except ConeHyperbolicityError:
            continue
        sup_plus = float(_expansion_sup_outside(M, tgt, samples, inner=True).max())
        inf_minus = float(_expansion_inf_outside(M, src, samples, inner=True).min())
        hmp, hmm = _smallest_above(sup_plus), _largest_below(inf_minus)
        if 2.0**hmm > 2.0**-5 * norm_minus and 2.0**hmp < 2.0**5 * norm_plus:
            chosen = (src, tgt, hmp, hmm)
            break
    if chosen is None:
        raise ValueError("no inner cones admit hook integers; widen the cones or the sampling")
    src, tgt, hmp, hmm = chosen
    NT = max(3, hmm + 3, -hmp + 3, hmm, -hmp)
    hs = HookStructure(h_min, h_max, hmm, hmp, src, tgt, norm_plus, norm_minus, NT)
    # the separation test is the costly part; an evenly spaced subset suffices
    stride = max(1, -(-M.shape[0] // separation_points))
    while not _separation_holds(hs, M[::stride], check_levels):
        hs.NT += 1
        if hs.NT > max_NT:
            raise ValueError("support separation fails up to max_NT; widen sampling")
    hs.margins = {"sv_min": float(sv.min()), "sv_max": float(sv.max())}
    return hs


def _sector_geometry(theta, kind, level, sigma):
    """Radial range and angular constraint of a symbol support."""
    if kind == "plain":
        lo, hi = (0.0, 2.0) if level == 0 else (2.0 ** (level - 1), 2.0 ** (level + 1))
    else:
        lo, hi = (0.0, 4.0) if level == 0 else (2.0 ** (level - 2), 2.0 ** (level + 2))
    if level == 0:
        return lo, hi, None, None
    # supp phi_+ is the closed complement of the open cone C- (inner C- when enlarged)
    other = "-" if sigma == "+" else "+"
    return lo, hi, other, theta.aperture(other, inner=kind != "plain")


def _in_sector(theta, geom, pts, tol=1e-12):
    lo, hi, other, ap = geom
    r = np.linalg.norm(pts, axis=0)
    ok = (r >= lo - tol) & (r <= hi + tol)
    if other is not None:
        ok &= theta.angle(other, pts) >= ap - tol
    return ok


def _sector_boundary(theta, geom, count=512):
    """Boundary samples of a planar annular sector and the sample spacing."""
    lo, hi, other, ap = geom
    if other is None:
        t = np.linspace(0, 2 * np.pi, 4 * count, endpoint=False)
        pts = hi * np.stack([np.cos(t), np.sin(t)])
        return pts, hi * 2 * np.pi / (4 * count)
    axis = (theta.plus_axes if other == "+" else theta.minus_axes)[0]
    phi = math.atan2(axis[1], axis[0])
    r = np.linspace(lo, hi, count)
    parts = []
    for start in (phi + ap, phi + np.pi + ap):
        t = np.linspace(start, start + np.pi - 2 * ap, count)
        for rad in (lo, hi):
            parts.append(rad * np.stack([np.cos(t), np.sin(t)]))
        for edge in (t[0], t[-1]):
            parts.append(r * np.array([[math.cos(edge)], [math.sin(edge)]]))
    mesh = max((hi - lo) / (count - 1), hi * (np.pi - 2 * ap) / (count - 1))
    return np.concatenate(parts, axis=1), mesh


def _separation_holds(hs, M, levels):
    """Check the distance bound for unhooked pairs with ``max(n, ell) >= NT``.

    Shells with positive index are dilations of each other, so levels up to
    ``NT + levels`` cover all pairs up to scaling. Two planar sectors are
    disjoint when their boundaries are apart and neither contains a boundary
    point of the other; the distance is then attained on the boundaries.
    """
    if not hs.source._planar:
        raise NotImplementedError("support separation is implemented for planar cones")
    M = np.unique(np.round(M, 12), axis=0)
    Minv = np.linalg.inv(M)
    stretch = np.linalg.norm(M, ord=2, axis=(1, 2)).max()
    top = hs.NT + levels
    targets = {}
    for n in range(top + 1):
        for s in SIGNS:
            geom = _sector_geometry(hs.target, "plain", n, s)
            pts, mesh = _sector_boundary(hs.target, geom)
            targets[(n, s)] = [geom, pts, mesh, None]
    for ell in range(top + 1):
        for tau in SIGNS:
            sgeom = _sector_geometry(hs.source, "enlarged", ell, tau)
            src, mesh_s = _sector_boundary(hs.source, sgeom)
            imgs = np.einsum("mij,jk->imk", M, src).reshape(2, -1)
            rad = np.linalg.norm(imgs, axis=0)
            r_lo, r_hi = rad.min(), rad.max()
            if sgeom[0] > 0:
                r_lo = min(r_lo, sgeom[0] * np.linalg.svd(M, compute_uv=False).min())
            else:
                r_lo = 0.0
            for n in range(top + 1):
                for sigma in SIGNS:
                    if max(n, ell) < hs.NT or hooks(hs, ell, tau, n, sigma):
                        continue
                    entry = targets[(n, sigma)]
                    geom, pts, mesh_t, tree = entry
                    need = 2.0 ** (max(n, ell) - hs.NT)
                    if max(geom[0] - r_hi, r_lo - geom[1]) >= need:
                        continue
                    if _in_sector(hs.target, geom, imgs).any():
                        return False
                    back = np.einsum("mij,jk->mik", Minv, pts)
                    if any(_in_sector(hs.source, sgeom, b).any() for b in back):
                        return False
                    if tree is None:
                        tree = entry[3] = cKDTree(pts.T)
                    slack = need + mesh_t + stretch * mesh_s
                    dist, _ = tree.query(imgs.T, k=1, distance_upper_bound=slack)
                    if dist.min() < slack:
                        return False
    return True


def lambda_mt(map, g, charts, m, t, p, q, points, samples=1024):
    """``Lambda_{m,t}``: chart-pair maximum of weighted cone norms of ``T^m``.

    For every chart pair ``(j, k)`` and sample ``x`` in ``V_j`` with
    ``T^m x`` in ``V_k``, evaluates ``|g^(m)(x)| max(|T^m_jk|_+^p,
    |T^m_jk|_-^q) / |det DT^m_x|^(1/t)`` where the cone norms use ``C_{k,-}``
    on the image side and ``C_{j,+}`` on the source side.
    """
    x, _ = _as_points(points, map.d)
    x = map.wrap(x)
    y = x.copy()
    D = np.broadcast_to(np.eye(map.d)[..., None], (map.d, map.d, x.shape[1])).copy()
    for _ in range(m):
        D = np.einsum("ijm,jkm->ikm", map.derivative(y), D)
        y = map.wrap(map(y))
    gm = np.abs(weight_product(g, map, x, m)) * np.ones(x.shape[1])
    det = np.abs(np.linalg.det(np.moveaxis(D, (0, 1), (-2, -1))))
    best, found = 0.0, False
    for j, cj in enumerate(charts.charts):
        for k, ck in enumerate(charts.charts):
            sel = cj.contains(x) & ck.contains(y)
            if not sel.any():
                continue
            found = True
            # chart derivative of T^m_jk = kappa_k T^m kappa_j^-1
            Djk = np.einsum("ab,bcm,cd->mad", ck.linear, D[:, :, sel], np.linalg.inv(cj.linear))
            Mt = np.swapaxes(Djk, 1, 2)
            plus = _expansion_sup_outside(Mt, ck.theta, samples)
            minus = _expansion_inf_outside(Mt, cj.theta, samples)
            val = gm[sel] * np.maximum(plus**p, minus**q)
            if not math.isinf(t):
                val = val / det[sel] ** (1.0 / t)
            best = max(best, float(val.max()))
    if not found:
        raise ValueError("no sample point lies in any chart intersection set")
    return best
