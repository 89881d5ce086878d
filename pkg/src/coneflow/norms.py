"""Anisotropic dyadic norms, their sequence-space versions and classical norms."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .decomposition import GridFunction, apply_symbol, decompose, lt_norm, random_band_limited
from .symbols import (SIGNS, ConeSystem, Symbol, directional_symbol, shell_symbol,
                      weight_symbol)


@dataclass(frozen=True)
class NormParams:
    """Exponents ``p`` (on ``C+`` blocks) and ``q`` (on ``C-`` blocks), integrability ``t``."""

    p: float
    q: float
    t: float
    theta: ConeSystem = field(compare=False)

    def __post_init__(self):
        if not (self.t >= 1):
            raise ValueError("t must be >= 1 (use math.inf for the sup norm)")

    def exponent(self, sigma):
        return self.p if sigma == "+" else self.q

    def weight(self, n, sigma):
        return 2.0 ** (self.exponent(sigma) * n)

    def replace(self, **kw):
        data = {"p": self.p, "q": self.q, "t": self.t, "theta": self.theta}
        data.update(kw)
        return NormParams(**data)


@dataclass
class GammaSequence:
    """Finitely supported sequence indexed by ``(n, sigma)``."""

    entries: dict

    def __post_init__(self):
        for n, s in self.entries:
            if s not in SIGNS or int(n) != n or n < 0:
                raise ValueError(f"malformed index {(n, s)!r}")

    @classmethod
    def from_blocks(cls, blocks, point):
        """Block values at a grid index ``point``."""
        return cls({k: complex(blocks[k].values[point]) for k in blocks})


def gamma_norm(f, params, kind):
    """``C`` (weighted sup) or ``W`` (weighted l^2) norm of a sequence.

    ``f`` may hold scalars or equally shaped arrays, in which case the norm
    is taken pointwise.
    """
    entries = f.entries if isinstance(f, GammaSequence) else f
    if kind not in ("C", "W"):
        raise ValueError("kind must be 'C' or 'W'")
    out = 0.0
    for (n, s), v in entries.items():
        a = params.weight(n, s) * np.abs(v)
        out = np.maximum(out, a) if kind == "C" else out + a**2
    return out if kind == "C" else np.sqrt(out)


def _blocks_for(u, theta, blocks, n_max):
    if blocks is None:
        return decompose(theta, u, n_max, cache=False)
    return blocks


def aniso_holder_norm(u, params, blocks=None, n_max=None):
    """``max_{n,sigma} 2^{c(sigma) n} sup |u_{n,sigma}|``."""
    b = _blocks_for(u, params.theta, blocks, n_max)
    return float(max(params.weight(n, s) * np.abs(b[(n, s)].values).max() for n, s in b))


def aniso_sobolev_norm(u, params, blocks=None, n_max=None, normalized=False):
    """``L^t`` norm of ``(sum 4^{c n} |u_{n,sigma}|^2)^(1/2)``."""
    b = _blocks_for(u, params.theta, blocks, n_max)
    acc = np.zeros(b.lattice.shape)
    for n, s in b:
        acc += params.weight(n, s) ** 2 * np.abs(b[(n, s)].values) ** 2
    return lt_norm(np.sqrt(acc), b.lattice, params.t, normalized)


def aniso_norm(u, params, family, blocks=None, n_max=None, normalized=False):
    """Dispatch to the Hölder (``"C"``) or Sobolev (``"W"``) family."""
    if family == "C":
        return aniso_holder_norm(u, params, blocks, n_max)
    if family == "W":
        return aniso_sobolev_norm(u, params, blocks, n_max, normalized)
    raise ValueError("family must be 'C' or 'W'")


@dataclass
class ClassicalNorms:
    dyadic: float
    bessel: float
    holder: float | None = None


def classical_norms(u, s, t, n_max=None, normalized=False, holder=False):
    """Isotropic dyadic norm, Bessel-potential norm and (optionally) Hölder norm.

    The dyadic norm is ``sup_n 2^{sn} |u_n|_inf`` for ``t = inf`` and
    ``|(sum 4^{sn}|u_n|^2)^(1/2)|_t`` otherwise. The Bessel norm is
    ``|(1 + |D|^2)^(s/2) u|_t``. The Hölder norm needs ``t = inf`` and
    non-integer ``s > 0``.
    """
    lat = u.lattice
    if n_max is None:
        n_max = lat.default_n_max()
    shells = [apply_symbol(shell_symbol("psi", n), u).values for n in range(n_max + 1)]
    if math.isinf(t):
        dyadic = max(2.0 ** (s * n) * np.abs(v).max() for n, v in enumerate(shells))
    else:
        acc = sum(4.0 ** (s * n) * np.abs(v) ** 2 for n, v in enumerate(shells))
        dyadic = lt_norm(np.sqrt(acc), lat, t, normalized)
    bes = apply_symbol(Symbol(lambda xi: (1 + np.sum(np.asarray(xi) ** 2, axis=0)) ** (s / 2),
                              even=True), u)
    out = ClassicalNorms(float(dyadic), lt_norm(bes.values, lat, t, normalized))
    if holder:
        out.holder = holder_norm(u, s)
    return out


def _derivative(u, alpha):
    lat = u.lattice

    def sym(xi):
        xi = np.asarray(xi)
        out = np.ones(xi.shape[1:], dtype=complex)
        for i, a in enumerate(alpha):
            out = out * (1j * xi[i]) ** a
        return out

    coef = u.spectrum() * sym(lat.frequencies(sparse=False))
    vals = GridFunction.from_spectrum(lat, coef).values
    return vals.real if u.is_real else vals


def holder_norm(u, s, max_shift=None):
    """Classical ``C^s`` norm for non-integer ``s`` via finite-difference quotients.

    Derivatives are spectral. The quotient ``|D^a u(x+y) - D^a u(x)| / |y|^f``
    is maximised over grid shifts ``y`` along the axes and diagonals.
    """
    if s <= 0 or float(s).is_integer():
        raise ValueError("Hölder quotient needs non-integer s > 0")
    lat = u.lattice
    k, frac = int(math.floor(s)), s - math.floor(s)
    alphas = [a for a in np.ndindex(*(k + 1,) * lat.d) if sum(a) <= k]
    sup_part = max(np.abs(_derivative(u, a)).max() for a in alphas)
    top = [a for a in alphas if sum(a) == k]
    dirs = [np.eye(lat.d, dtype=int)[i] for i in range(lat.d)]
    if lat.d == 2:
        dirs += [np.array([1, 1]), np.array([1, -1])]
    max_shift = max_shift or min(lat.N) // 2
    quot = 0.0
    h = np.array(lat.spacing)
    for a in top:
        v = _derivative(u, a)
        for e in dirs:
            for j in range(1, max_shift + 1):
                y = float(np.linalg.norm(j * e * h))
                diff = np.roll(v, tuple(-j * e), axis=tuple(range(lat.d))) - v
                quot = max(quot, np.abs(diff).max() / y**frac)
    return float(max(sup_part, quot))


def function_suite(lattice, theta, count=50, rng=0, kmax=None):
    """Mixed test functions for norm comparisons.

    Cycles through five kinds: random band-limited up to a random cutoff,
    random annuli, power-law tapered spectra, and single ``(n, +)`` or
    ``(n, -)`` directional blocks of noise.
    """
    rng = np.random.default_rng(rng)
    kmax = 0.45 * lattice.nyquist if kmax is None else kmax
    top = max(1, min(5, int(math.log2(kmax)) - 1))
    out = []
    for i in range(count):
        kind = i % 5
        if kind == 0:
            u = random_band_limited(lattice, rng, rng.uniform(2, kmax))
        elif kind == 1:
            lo = rng.uniform(0, 2 * kmax / 3)
            u = random_band_limited(lattice, rng, lo + rng.uniform(4, kmax / 3), kmin=lo)
        elif kind == 2:
            u = random_band_limited(lattice, rng, kmax, decay=rng.uniform(0, 3))
        else:
            n = int(rng.integers(1, top + 1))
            sym = directional_symbol(theta, n, "+" if kind == 3 else "-")
            u = apply_symbol(sym, random_band_limited(lattice, rng, kmax))
        out.append(u)
    return out


@dataclass
class DaggerNorms:
    dagger: float
    double_dagger: float


def dagger_norms(u, params, normalized=False):
    """Weighted-symbol norms ``|Psi+ u|_t + |Psi- u|_t`` and ``|(Psi+ + Psi-) u|_t``.

    ``Psi+ = (1+|xi|^2)^(p/2) phi+`` and ``Psi- = (1+|xi|^2)^(q/2) phi-``.
    """
    th = params.theta
    lat = u.lattice
    plus = apply_symbol(weight_symbol(th, params.p, "+"), u)
    minus = apply_symbol(weight_symbol(th, params.q, "-"), u)
    t = params.t
    dag = lt_norm(plus.values, lat, t, normalized) + lt_norm(minus.values, lat, t, normalized)
    ddag = lt_norm(plus.values + minus.values, lat, t, normalized)
    return DaggerNorms(float(dag), float(ddag))


@dataclass
class EmbeddingSpectrum:
    """Singular values of the identity between two weighted block spaces."""

    values: np.ndarray
    shells: np.ndarray
    signs: list

    def shell_value(self, n):
        """Largest singular value attached to shell ``n``."""
        return float(self.values[self.shells == n].max())


def embedding_singular_values(params, params_weaker, n_max, sample_dim=None, rng=None):
    """Singular values of the inclusion of the ``(p,q)`` block space into the ``(p',q')`` one.

    In the orthonormal block basis the inclusion is diagonal with entries
    ``2^{-(p-p')n}`` on ``C+`` blocks and ``2^{-(q-q')n}`` on ``C-`` blocks.
    With ``sample_dim`` the map is restricted to a random subspace of that
    dimension (singular values then interlace with the diagonal ones).
    """
    if params_weaker.p > params.p or params_weaker.q > params.q:
        raise ValueError("target exponents must not exceed the source ones")
    keys = [(n, s) for n in range(n_max + 1) for s in SIGNS]
    diag = np.array([params_weaker.weight(n, s) / params.weight(n, s) for n, s in keys])
    shells = np.array([n for n, _ in keys])
    signs = [s for _, s in keys]
    if sample_dim is None:
        order = np.argsort(-diag, kind="stable")
        return EmbeddingSpectrum(diag[order], shells[order], [signs[i] for i in order])
    if not 0 < sample_dim <= len(keys):
        raise ValueError("sample_dim out of range")
    rng = np.random.default_rng(rng)
    q, _ = np.linalg.qr(rng.standard_normal((len(keys), sample_dim)))
    sv = np.linalg.svd(diag[:, None] * q, compute_uv=False)
    # restricted maps are not diagonal, so no shell is attached
    return EmbeddingSpectrum(sv, np.full(sv.shape, -1), ["?"] * len(sv))


def write_norm_csv(path, rows):
    """Rows of ``(function_id, family, p, q, t, value)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["function_id", "family", "p", "q", "t", "value"])
        for r in rows:
            w.writerow([r[0], r[1], repr(float(r[2])), repr(float(r[3])), repr(float(r[4])),
                        repr(float(r[5]))])
