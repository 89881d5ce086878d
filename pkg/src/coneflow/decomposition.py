"""Periodic lattices, grid functions and cone-adapted dyadic decompositions."""

from __future__ import annotations

import math
from collections.abc import Mapping

import numpy as np
import scipy.fft as sfft
from scipy import ndimage

from .symbols import DEFAULT_PROFILE, SIGNS, directional_symbol, shell_radial

TWO_PI = 2.0 * np.pi


class TruncationError(ValueError):
    """Raised when the dyadic range does not cover the lattice spectrum."""


class FrequencyLattice:
    """Uniform periodic grid on the box ``prod [0, L_i)``.

    Parameters
    ----------
    N : int or sequence of int
        Points per axis (even).
    box_length : float or sequence of float
        Period per axis; defaults to ``2 pi`` (the standard torus).
    d : int, optional
        Dimension, needed only when ``N`` is a scalar (default 2).
    """

    def __init__(self, N, box_length=TWO_PI, d=None):
        if np.isscalar(N):
            N = (int(N),) * (d or (len(box_length) if np.ndim(box_length) else 2))
        self.N = tuple(int(n) for n in N)
        self.d = len(self.N)
        if np.isscalar(box_length):
            box_length = (float(box_length),) * self.d
        self.box_length = tuple(float(b) for b in box_length)
        if len(self.box_length) != self.d:
            raise ValueError("box_length does not match the dimension")
        if any(n < 2 or n % 2 for n in self.N):
            raise ValueError("grid sizes must be even and >= 2")
        if any(b <= 0 for b in self.box_length):
            raise ValueError("box lengths must be positive")

    def __repr__(self):
        return f"FrequencyLattice(N={self.N}, box_length={self.box_length})"

    def __eq__(self, other):
        return (isinstance(other, FrequencyLattice) and self.N == other.N
                and np.allclose(self.box_length, other.box_length, rtol=1e-14, atol=0))

    def __hash__(self):
        return hash((self.N, self.box_length))

    @property
    def shape(self):
        return self.N

    @property
    def spacing(self):
        return tuple(b / n for b, n in zip(self.box_length, self.N))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def volume(self):
        return float(np.prod(self.box_length))

    @property
    def is_torus(self):
        return np.allclose(self.box_length, TWO_PI, rtol=1e-14, atol=0)

    @property
    def nyquist(self):
        """Smallest per-axis Nyquist frequency."""
        return min(np.pi * n / b for n, b in zip(self.N, self.box_length))

    @property
    def max_frequency(self):
        """Largest ``|xi|`` on the lattice."""
        return math.sqrt(sum((np.pi * n / b) ** 2 for n, b in zip(self.N, self.box_length)))

    def wavenumbers(self, axis, real=False):
        """Integer wavenumbers along ``axis``; the Nyquist index is positive."""
        n = self.N[axis]
        if real and axis == self.d - 1:
            return np.arange(n // 2 + 1)
        k = np.fft.fftfreq(n, 1.0 / n).astype(int)
        k[n // 2] = n // 2
        return k

    def frequencies(self, real=False, sparse=True):
        """Frequencies ``2 pi k / L`` as a component-first array.

        With ``real=True`` the last axis is the half-range used by ``rfftn``.
        With ``sparse=True`` the components broadcast instead of being full.
        """
        axes = [TWO_PI * self.wavenumbers(i, real) / self.box_length[i] for i in range(self.d)]
        grids = np.meshgrid(*axes, indexing="ij", sparse=sparse)
        if sparse:
            return _Broadcast(grids)
        return np.stack(grids)

    def points(self, sparse=False):
        axes = [np.arange(n) * h for n, h in zip(self.N, self.spacing)]
        grids = np.meshgrid(*axes, indexing="ij", sparse=sparse)
        return grids if sparse else np.stack(grids)

    def spectral_shape(self, real=False):
        if real:
            return self.N[:-1] + (self.N[-1] // 2 + 1,)
        return self.N

    def default_n_max(self):
        """Smallest ``n`` with ``2^(n-1) > Nyquist`` that also covers the corners."""
        n = 0
        while 2.0 ** (n - 1) <= self.nyquist or 2.0**n < self.max_frequency:
            n += 1
        return n


class _Broadcast:
    """Component-first frequency array backed by broadcastable 1-D slices."""

    def __init__(self, grids):
        self.grids = grids
        self.shape = (len(grids),) + np.broadcast_shapes(*[g.shape for g in grids])
        self.ndim = len(self.shape)

    def __getitem__(self, i):
        return self.grids[i]

    def __len__(self):
        return len(self.grids)

    def __array__(self, dtype=None, copy=None):
        out = np.stack(np.broadcast_arrays(*self.grids))
        return out if dtype is None else out.astype(dtype)


class GridFunction:
    """Samples of a function on a periodic lattice.

    Values are stored read-only; operations return new objects.
    """

    def __init__(self, lattice, values, support=None, copy=True):
        values = np.array(values, copy=copy) if copy else np.asarray(values)
        if values.shape != lattice.shape:
            raise ValueError(f"values of shape {values.shape} do not match lattice {lattice.shape}")
        if not np.iscomplexobj(values):
            values = values.astype(float, copy=False)
        values.flags.writeable = False
        self.lattice = lattice
        self.values = values
        self.support = support

    def __repr__(self):
        return f"GridFunction({self.lattice!r}, dtype={self.values.dtype})"

    @classmethod
    def from_callable(cls, lattice, func):
        """Sample ``func(x)`` where ``x`` has shape ``(d, *N)``."""
        return cls(lattice, func(lattice.points()))

    @classmethod
    def mode(cls, lattice, k):
        """Plane wave ``exp(i k.x)`` for integer wavenumber ``k`` (in units of ``2 pi / L``)."""
        x = lattice.points()
        phase = sum(TWO_PI * k[i] * x[i] / lattice.box_length[i] for i in range(lattice.d))
        return cls(lattice, np.exp(1j * phase), copy=False)

    @property
    def is_real(self):
        return not np.iscomplexobj(self.values)

    def _binary(self, other, op):
        if isinstance(other, GridFunction):
            if other.lattice != self.lattice:
                raise ValueError("grid functions live on different lattices")
            other = other.values
        return GridFunction(self.lattice, op(self.values, other), copy=False)

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.lattice, -self.values, copy=False)

    def conj(self):
        return GridFunction(self.lattice, np.conj(self.values), copy=False)

    def inner(self, other):
        """Normalised pairing ``<self, other> = mean(self * conj(other))``."""
        return complex(np.mean(self.values * np.conj(other.values)))

    def spectrum(self, real=False):
        """Fourier coefficients normalised so that ``exp(i k.x)`` has coefficient 1."""
        n = int(np.prod(self.lattice.N))
        if real:
            return sfft.rfftn(self.values, workers=-1) / n
        return sfft.fftn(self.values, workers=-1) / n

    @classmethod
    def from_spectrum(cls, lattice, coef, real=False):
        n = int(np.prod(lattice.N))
        if real:
            return cls(lattice, sfft.irfftn(coef * n, s=lattice.N, workers=-1), copy=False)
        return cls(lattice, sfft.ifftn(coef * n, workers=-1), copy=False)

    def norm_lt(self, t, normalized=False):
        return lt_norm(self.values, self.lattice, t, normalized)


def lt_norm(values, lattice, t, normalized=False):
    """Riemann-sum ``L^t`` norm of grid samples (``t = inf`` gives the sup)."""
    a = np.abs(values)
    if math.isinf(t):
        return float(a.max())
    w = 1.0 / np.prod(lattice.N) if normalized else lattice.cell_volume
    if t == 2:
        return float(math.sqrt(w * np.vdot(a, a).real))
    return float((w * np.sum(a**t)) ** (1.0 / t))


def _symbol_values(symbol, lattice, real):
    if callable(symbol):
        return np.asarray(symbol(lattice.frequencies(real=real)), dtype=float)
    arr = np.asarray(symbol, dtype=float)
    want = lattice.spectral_shape(real)
    if arr.shape != want:
        raise ValueError(f"symbol array shape {arr.shape} does not match spectrum {want}")
    return arr


def apply_symbol(symbol, u):
    """Fourier multiplier ``symbol(D) u`` on the lattice.

    ``symbol`` is a callable of the component-first frequency array or a
    precomputed array on the full spectrum. Real input with an even symbol
    uses real transforms and returns a real function.
    """
    real = u.is_real and getattr(symbol, "even", False) and callable(symbol)
    mult = _symbol_values(symbol, u.lattice, real)
    return GridFunction.from_spectrum(u.lattice, mult * u.spectrum(real), real)


class SpectralBlocks(Mapping):
    """Blocks ``u_{n,sigma}`` keyed by ``(n, sigma)``.

    Built by :func:`decompose`, blocks are computed lazily from the stored
    spectrum (and cached if ``cache`` is set), so large grids only ever hold
    the blocks actually requested. Explicit blocks can be given instead.
    """

    def __init__(self, theta, n_max, lattice, explicit=None, spectrum=None, real=False,
                 profile=DEFAULT_PROFILE, cache=True):
        self.theta = theta
        self.n_max = int(n_max)
        self.lattice = lattice
        self.profile = profile
        self._spectrum = spectrum
        self._real = real
        self._cache = cache
        self._blocks = dict(explicit or {})
        self._angular = None
        for key, b in self._blocks.items():
            self._check_key(key)
            if b.lattice != lattice:
                raise ValueError("block lives on a different lattice")
        if spectrum is None and explicit is None:
            raise ValueError("need either explicit blocks or a spectrum")

    def _check_key(self, key):
        n, s = key
        if s not in SIGNS or not 0 <= n <= self.n_max:
            raise KeyError(key)

    def keys_all(self):
        return [(n, s) for n in range(self.n_max + 1) for s in SIGNS]

    def __iter__(self):
        if self._spectrum is None:
            return iter(sorted(self._blocks, key=lambda k: (k[0], k[1] == "-")))
        return iter(self.keys_all())

    def __len__(self):
        return len(self._blocks) if self._spectrum is None else 2 * (self.n_max + 1)

    def __getitem__(self, key):
        self._check_key(key)
        if key in self._blocks:
            return self._blocks[key]
        if self._spectrum is None:
            return GridFunction(self.lattice, np.zeros(self.lattice.shape))
        n, s = key
        r, plus = self._polar()
        if n == 0:
            mult = 0.5 * self.profile(r)
        else:
            mult = shell_radial(self.profile, "psi", n, r) * (plus if s == "+" else 1.0 - plus)
        b = GridFunction.from_spectrum(self.lattice, mult * self._spectrum, self._real)
        if self._cache:
            self._blocks[key] = b
        return b

    def _polar(self):
        # radius and phi_+ do not depend on the shell, so they are shared by all blocks
        if self._angular is None:
            xi = self.lattice.frequencies(real=self._real)
            r = np.sqrt(sum(c**2 for c in xi.grids))
            self._angular = (r, self.theta.phi("+", np.asarray(xi)))
        return self._angular

    def energies(self, normalized=True):
        """``L^2`` norm of every block."""
        return {k: lt_norm(self[k].values, self.lattice, 2, normalized) for k in self}

    def parseval_energies(self, u, normalized=True):
        """``Re <u_{n,sigma}, u>`` per block, the spectral mass ``sum psi |u^|^2``.

        The symbols are non-negative and sum to one, so these are
        non-negative and add up to ``|u|_2^2``.
        """
        scale = 1.0 if normalized else u.lattice.volume
        return {k: float(np.real(np.vdot(u.values, self[k].values))) / u.values.size * scale
                for k in self}

    @classmethod
    def combine(cls, a, b):
        """Blockwise sum of two decompositions with the same parameters."""
        if a.n_max != b.n_max or a.lattice != b.lattice:
            raise ValueError("incompatible block families")
        keys = set(a) | set(b)
        return cls(a.theta, a.n_max, a.lattice, {k: a[k] + b[k] for k in keys})


def decompose(theta, u, n_max=None, profile=DEFAULT_PROFILE, cache=True):
    """Cone-adapted dyadic decomposition of ``u``.

    Raises
    ------
    TruncationError
        If ``2^n_max`` does not exceed the largest lattice frequency, in
        which case the blocks would not sum to ``u``.
    """
    lat = u.lattice
    if n_max is None:
        n_max = lat.default_n_max()
    if 2.0**n_max < lat.max_frequency:
        raise TruncationError(
            f"n_max={n_max} leaves frequencies up to {lat.max_frequency:.4g} uncovered")
    real = u.is_real
    return SpectralBlocks(theta, n_max, lat, spectrum=u.spectrum(real), real=real,
                          profile=profile, cache=cache)


def reconstruct(blocks):
    """Sum of all blocks."""
    out = None
    for k in blocks:
        v = blocks[k].values
        out = v.copy() if out is None else out + v
    if out is None:
        return GridFunction(blocks.lattice, np.zeros(blocks.lattice.shape))
    return GridFunction(blocks.lattice, out, copy=False)


def block(theta, u, n, sigma, profile=DEFAULT_PROFILE):
    """Single block ``psi_{Theta,n,sigma}(D) u``."""
    return apply_symbol(directional_symbol(theta, n, sigma, profile), u)


def torus_distance(mask, lattice):
    """Periodic Euclidean distance from every grid point to ``mask``.

    Non-periodic distance transforms of the grid rolled by half periods are
    combined with a minimum. Any segment shorter than half a period along
    each axis avoids at least one of the two cut positions, so the result
    is exact.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("support mask is empty")
    best = None
    d = lattice.d
    for corner in np.ndindex(*(2,) * d):
        shift = tuple(c * n // 2 for c, n in zip(corner, lattice.N))
        rolled = np.roll(mask, shift, axis=tuple(range(d)))
        dist = ndimage.distance_transform_edt(~rolled, sampling=lattice.spacing)
        dist = np.roll(dist, tuple(-s for s in shift), axis=tuple(range(d)))
        best = dist if best is None else np.minimum(best, dist)
        del dist, rolled
    return best


def pseudolocal_profile(blocks, support, n, sigma, eps, bins=16, distance=None):
    """Decay of a block away from the support of the decomposed function.

    For logarithmic distance bins between ``eps`` and half the box size,
    returns the bin centres and the maximum of ``|u_{n,sigma}|`` in each bin.

    Parameters
    ----------
    blocks : SpectralBlocks
    support : GridFunction or ndarray of bool
        Support mask of the original function.
    eps : float
        Inner radius of the first bin.
    distance : ndarray, optional
        Precomputed :func:`torus_distance` of ``support``.
    """
    mask = support.values.astype(bool) if isinstance(support, GridFunction) else support
    lat = blocks.lattice
    if distance is None:
        distance = torus_distance(mask, lat)
    half = 0.5 * min(lat.box_length)
    if not 0 < eps < half:
        raise ValueError("eps must lie between 0 and half the box size")
    edges = np.geomspace(eps, half, bins + 1)
    vals = np.abs(blocks[(n, sigma)].values)
    idx = np.digitize(distance.ravel(), edges) - 1
    ok = (idx >= 0) & (idx < bins)
    peak = np.zeros(bins)
    np.maximum.at(peak, idx[ok], vals.ravel()[ok])
    centres = np.sqrt(edges[:-1] * edges[1:])
    return centres, peak


def fit_decay_exponent(distances, values, floor):
    """Exponent ``b`` in ``values ~ distances^-b`` from bins above ``floor``.

    Returns ``inf`` when fewer than two bins rise above the floor (the
    profile is below resolution, i.e. faster than any measurable power).
    """
    distances, values = np.asarray(distances, float), np.asarray(values, float)
    ok = values > floor
    if ok.sum() < 2:
        return math.inf
    slope = np.polyfit(np.log(distances[ok]), np.log(values[ok]), 1)[0]
    return float(-slope)


def random_band_limited(lattice, rng, kmax, real=True, kmin=0.0, decay=0.0):
    """Random function with Fourier support in ``kmin <= |xi| <= kmax``.

    Coefficients are Gaussian, optionally tapered by ``(1 + |xi|)^-decay``.
    ``rng`` is a generator or a seed.
    """
    rng = np.random.default_rng(rng)
    xi = lattice.frequencies(real=False, sparse=False)
    r = np.sqrt(np.sum(xi**2, axis=0))
    shape = lattice.shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    c *= ((r <= kmax) & (r >= kmin)) * (1.0 + r) ** -decay
    u = GridFunction.from_spectrum(lattice, c)
    if real:
        u = GridFunction(lattice, u.values.real.copy())
    return u


def shell_index(r, n_max=64):
    """Shell ``n`` where ``psi_n(r)`` is largest (vectorised in ``r``).

    Neighbouring shells cross where ``chi = 1/2``, i.e. at ``r = 1.5 * 2^n``.
    """
    r = np.asarray(r, dtype=float)
    n = np.zeros(r.shape, dtype=int)
    big = r > 1.5
    n[big] = np.floor(np.log2(r[big] / 1.5)).astype(int) + 1
    return np.minimum(n, n_max)
