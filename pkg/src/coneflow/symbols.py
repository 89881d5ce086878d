"""Smooth cutoffs, dyadic shells and cone-adapted directional symbols.

All symbols are real, even functions of the frequency variable. Frequencies
are passed component-first, i.e. ``xi`` has shape ``(d, ...)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIGNS = ("+", "-")
SHELL_KINDS = ("psi", "chi", "psi_tilde")


def _check_sign(sigma):
    if sigma not in SIGNS:
        raise ValueError(f"sign must be '+' or '-', got {sigma!r}")


def smooth_step(x, steepness=1.0):
    """C-infinity step: 0 for ``x <= 0``, 1 for ``x >= 1``.

    Built from ``f(x) = exp(-steepness / x)`` as ``f(x) / (f(x) + f(1 - x))``,
    so every derivative vanishes at both ends.
    """
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    a = _flat(x, steepness)
    b = _flat(1.0 - x, steepness)
    return a / (a + b)


def _flat(x, steepness):
    pos = x > 0
    safe = np.where(pos, x, 1.0)
    with np.errstate(over="ignore"):
        return np.where(pos, np.exp(-steepness / safe), 0.0)


@dataclass(frozen=True)
class ChiProfile:
    """Radial cutoff ``chi`` with ``chi = 1`` on ``[0, 1]`` and ``0`` on ``[2, inf)``.

    On ``(1, 2)`` the profile is ``smooth_step(2 - s)``; its derivative is a
    normalised smooth bump supported in ``[1, 2]``.

    Parameters
    ----------
    steepness : float
        Parameter ``a`` of the flat function ``exp(-a / x)``.
    """

    steepness: float = 1.0

    def __post_init__(self):
        if not self.steepness > 0:
            raise ValueError("steepness must be positive")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("chi is defined for s >= 0 only")
        return smooth_step(2.0 - s, self.steepness)

    def derivative(self, s):
        """Analytic derivative ``chi'(s)`` (non-positive, supported in [1, 2])."""
        s = np.asarray(s, dtype=float)
        x = np.clip(2.0 - s, 0.0, 1.0)
        a = self.steepness
        inside = (x > 0) & (x < 1)
        xs = np.where(inside, x, 0.5)
        f, g = np.exp(-a / xs), np.exp(-a / (1 - xs))
        df, dg = f * a / xs**2, g * a / (1 - xs) ** 2
        # d/dx [f/(f+g)] = (df g + f dg)/(f+g)^2, and dx/ds = -1
        out = -(df * g + f * dg) / (f + g) ** 2
        return np.where(inside, out, 0.0)


DEFAULT_PROFILE = ChiProfile()


def eval_chi(profile, s):
    """Evaluate ``chi(s)``; returns a float for scalar input."""
    out = profile(s)
    return float(out) if np.ndim(out) == 0 else out


def shell_radial(profile, kind, n, r):
    """Radial dyadic shells as functions of ``r = |xi|``.

    ``psi``: ``chi_n - chi_{n-1}`` with ``chi_{-1} = 0``; ``chi``: ``chi_n``;
    ``psi_tilde``: the enlarged shell, equal to 1 on the support of ``psi_n``.
    """
    if kind not in SHELL_KINDS:
        raise ValueError(f"unknown shell kind {kind!r}")
    if int(n) != n or n < 0:
        raise ValueError("shell index must be a non-negative integer")
    n = int(n)
    r = np.asarray(r, dtype=float)
    if kind == "chi":
        return profile(r * 2.0**-n)
    if kind == "psi":
        out = profile(r * 2.0**-n)
        if n > 0:
            out = out - profile(r * 2.0 ** -(n - 1))
        return out
    if n == 0:
        return profile(r / 2.0)
    return profile(r * 2.0 ** -(n + 1)) - profile(r * 2.0 ** -(n - 2))


def eval_shell(profile, kind, n, xi):
    """Dyadic shell evaluated at frequency ``xi`` of shape ``(d, ...)``."""
    xi = np.asarray(xi, dtype=float)
    out = shell_radial(profile, kind, n, np.sqrt(np.sum(xi**2, axis=0)))
    return float(out) if np.ndim(out) == 0 else out


def _orthonormal_rows(axes, d=None):
    a = np.atleast_2d(np.asarray(axes, dtype=float))
    if d is not None and a.shape[1] != d:
        raise ValueError("cone axes have the wrong dimension")
    q, r = np.linalg.qr(a.T)
    if np.min(np.abs(np.diag(r))) < 1e-12:
        raise ValueError("cone axes are linearly dependent")
    return q.T


def _line_angle_2d(xi, axis):
    # angle in [0, pi/2] between xi and the line spanned by ``axis``
    ang = np.arctan2(xi[1], xi[0]) - np.arctan2(axis[1], axis[0])
    return np.abs(np.mod(ang + np.pi / 2, np.pi) - np.pi / 2)


def _subspace_angle(xi, axes):
    coef = np.tensordot(axes, xi, axes=(1, 0))
    resid = xi - np.tensordot(axes.T, coef, axes=(1, 0))
    return np.arctan2(np.sqrt(np.sum(resid**2, axis=0)), np.sqrt(np.sum(coef**2, axis=0)))


class ConeSystem:
    """Pair of closed cones ``C+`` and ``C-`` meeting only at the origin.

    Each cone is the set of vectors within an angular aperture of a core
    subspace. ``C+`` plays the role of the contracted (stable) cone of the
    transposed derivative and carries the regularity exponent ``p``.

    Parameters
    ----------
    plus_axes, minus_axes : array_like, shape (k, d)
        Rows spanning the core subspaces (orthonormalised internally).
    plus_aperture, minus_aperture : float
        Apertures in radians.
    inner_plus_aperture, inner_minus_aperture : float, optional
        Apertures of the smaller cones used by the enlarged angular
        cutoffs. Must be strictly smaller than the outer apertures.
        Default to half of them.
    """

    def __init__(self, plus_axes, minus_axes, plus_aperture, minus_aperture,
                 inner_plus_aperture=None, inner_minus_aperture=None):
        plus = np.atleast_2d(np.asarray(plus_axes, dtype=float))
        self.d = plus.shape[1]
        if self.d < 2:
            raise ValueError("cone systems need d >= 2")
        self.plus_axes = _orthonormal_rows(plus, self.d)
        self.minus_axes = _orthonormal_rows(minus_axes, self.d)
        self.plus_aperture = float(plus_aperture)
        self.minus_aperture = float(minus_aperture)
        for a in (self.plus_aperture, self.minus_aperture):
            if not 0 < a < np.pi / 2:
                raise ValueError("apertures must lie in (0, pi/2)")
        self.inner_plus_aperture = (0.5 * self.plus_aperture if inner_plus_aperture is None
                                    else float(inner_plus_aperture))
        self.inner_minus_aperture = (0.5 * self.minus_aperture if inner_minus_aperture is None
                                     else float(inner_minus_aperture))
        if not 0 < self.inner_plus_aperture < self.plus_aperture:
            raise ValueError("inner plus aperture must lie in (0, plus aperture)")
        if not 0 < self.inner_minus_aperture < self.minus_aperture:
            raise ValueError("inner minus aperture must lie in (0, minus aperture)")
        s = np.linalg.svd(self.plus_axes @ self.minus_axes.T, compute_uv=False)
        self.core_angle = float(np.arccos(np.clip(s.max(), 0.0, 1.0)))
        if self.core_angle <= self.plus_aperture + self.minus_aperture:
            raise ValueError("cones overlap: apertures exceed the angle between the cores")
        self._planar = self.d == 2 and len(self.plus_axes) == 1 and len(self.minus_axes) == 1

    def __repr__(self):
        return (f"ConeSystem(d={self.d}, plus_aperture={self.plus_aperture:.4g}, "
                f"minus_aperture={self.minus_aperture:.4g})")

    @classmethod
    def planar(cls, plus_angle, minus_angle, plus_aperture, minus_aperture, **inner):
        """Planar cones around the lines at the given polar angles."""
        ax = lambda t: [[np.cos(t), np.sin(t)]]
        return cls(ax(plus_angle), ax(minus_angle), plus_aperture, minus_aperture, **inner)

    def with_inner(self, plus=None, minus=None):
        """Copy with new inner apertures (``None`` keeps the current one)."""
        return ConeSystem(self.plus_axes, self.minus_axes, self.plus_aperture, self.minus_aperture,
                          self.inner_plus_aperture if plus is None else plus,
                          self.inner_minus_aperture if minus is None else minus)

    def to_dict(self):
        return {"plus_axes": self.plus_axes.tolist(), "minus_axes": self.minus_axes.tolist(),
                "plus_aperture": self.plus_aperture, "minus_aperture": self.minus_aperture,
                "inner_plus_aperture": self.inner_plus_aperture,
                "inner_minus_aperture": self.inner_minus_aperture}

    @classmethod
    def from_dict(cls, data):
        return cls(data["plus_axes"], data["minus_axes"], data["plus_aperture"],
                   data["minus_aperture"], data.get("inner_plus_aperture"),
                   data.get("inner_minus_aperture"))

    def angle(self, sigma, xi):
        """Angle between ``xi`` and the core of ``C_sigma`` (0 at the origin)."""
        _check_sign(sigma)
        xi = np.asarray(xi, dtype=float)
        axes = self.plus_axes if sigma == "+" else self.minus_axes
        if self._planar:
            return _line_angle_2d(xi, axes[0])
        return _subspace_angle(xi, axes)

    def aperture(self, sigma, inner=False):
        _check_sign(sigma)
        if sigma == "+":
            return self.inner_plus_aperture if inner else self.plus_aperture
        return self.inner_minus_aperture if inner else self.minus_aperture

    def contains(self, sigma, xi, inner=False, interior=False):
        """Membership of ``xi`` in the closed (or open) cone ``C_sigma``."""
        th = self.angle(sigma, xi)
        a = self.aperture(sigma, inner)
        return th < a if interior else th <= a

    def phi(self, sigma, xi):
        """Angular partition ``phi_sigma``: 1 on ``C_sigma``, 0 on the other cone.

        ``phi_+ = S(lam)`` with ``lam = alpha / (alpha + beta)``, where
        ``alpha`` and ``beta`` are the angular distances from ``xi`` to ``C-``
        and ``C+``. ``S`` is flat at both ends, so the result is smooth on the
        sphere; ``phi_+ + phi_- = 1``. At the origin both equal 1/2.
        """
        _check_sign(sigma)
        xi = np.asarray(xi, dtype=float)
        alpha = np.maximum(self.angle("-", xi) - self.minus_aperture, 0.0)
        beta = np.maximum(self.angle("+", xi) - self.plus_aperture, 0.0)
        den = alpha + beta
        lam = np.where(den > 0, alpha / np.where(den > 0, den, 1.0), 0.5)
        plus = smooth_step(lam)
        plus = np.where(np.sum(xi**2, axis=0) > 0, plus, 0.5)
        return plus if sigma == "+" else 1.0 - plus

    def phi_enlarged(self, sigma, xi):
        """Enlarged angular cutoff, equal to 1 on the support of ``phi_sigma``.

        ``phi~_+`` is 1 off ``C-`` and 0 on the inner minus cone; ``phi~_-``
        is 1 off ``C+`` and 0 on the inner plus cone.
        """
        _check_sign(sigma)
        other = "-" if sigma == "+" else "+"
        a, ai = self.aperture(other), self.aperture(other, inner=True)
        return smooth_step((self.angle(other, xi) - ai) / (a - ai))


def refines(theta_prime, theta, samples=8192, seed=0):
    """True iff the closure of the complement of ``C+`` lies in ``int C'-`` plus the origin.

    For planar one-dimensional cores the supremum of the ``C'-`` angle over
    the complement arc is taken over dense samples plus its exact
    candidates (arc endpoints and the normal of the ``C'-`` core). In higher
    dimension random sphere samples are used.
    """
    if theta.d != theta_prime.d:
        raise ValueError("cone systems live in different dimensions")
    dirs = _sphere_samples(theta.d, samples, seed)
    if theta._planar and theta_prime._planar:
        a0 = np.arctan2(theta.plus_axes[0, 1], theta.plus_axes[0, 0])
        m0 = np.arctan2(theta_prime.minus_axes[0, 1], theta_prime.minus_axes[0, 0])
        extra = np.array([a0 + theta.plus_aperture, a0 - theta.plus_aperture, m0 + np.pi / 2])
        dirs = np.concatenate([dirs, np.stack([np.cos(extra), np.sin(extra)])], axis=1)
    outside = theta.angle("+", dirs) >= theta.plus_aperture - 1e-15
    if not np.any(outside):
        return True
    return bool(np.max(theta_prime.angle("-", dirs[:, outside])) < theta_prime.minus_aperture)


def _sphere_samples(d, count, seed=0):
    if d == 2:
        t = np.linspace(0.0, np.pi, count, endpoint=False)
        return np.stack([np.cos(t), np.sin(t)])
    v = np.random.default_rng(seed).standard_normal((d, count))
    return v / np.linalg.norm(v, axis=0)


def eval_directional(theta, profile, n, sigma, xi, enlarged=False):
    """Cone-adapted dyadic symbol ``psi_{Theta,n,sigma}`` (or its enlargement).

    For ``n > 0`` this is the radial shell times the angular cutoff; for
    ``n = 0`` it is ``chi_0 / 2`` (``chi(|xi|/2)`` when enlarged) for both
    signs, so the plain symbols sum to one.
    """
    _check_sign(sigma)
    xi = np.asarray(xi, dtype=float)
    r = np.sqrt(np.sum(xi**2, axis=0))
    if enlarged:
        rad = shell_radial(profile, "psi_tilde", n, r)
        if n == 0:
            return rad
        return rad * theta.phi_enlarged(sigma, xi)
    if n == 0:
        return 0.5 * profile(r)
    return shell_radial(profile, "psi", n, r) * theta.phi(sigma, xi)


def eval_weight_symbol(theta, exponent, sigma, xi):
    """Weight ``(1 + |xi|^2)^(exponent/2) * phi_sigma(xi)``."""
    xi = np.asarray(xi, dtype=float)
    r2 = np.sum(xi**2, axis=0)
    return (1.0 + r2) ** (0.5 * exponent) * theta.phi(sigma, xi)


class Symbol:
    """Callable frequency multiplier with metadata used by the FFT routines.

    Parameters
    ----------
    func : callable
        Maps ``xi`` of shape ``(d, ...)`` to a real array of shape ``(...)``.
    even : bool
        Declares ``func(-xi) == func(xi)``, which enables real transforms.
    """

    def __init__(self, func, even=False, name=""):
        self.func = func
        self.even = bool(even)
        self.name = name

    def __call__(self, xi):
        return self.func(xi)

    def __repr__(self):
        return f"Symbol({self.name or self.func!r})"


def directional_symbol(theta, n, sigma, profile=DEFAULT_PROFILE, enlarged=False):
    return Symbol(lambda xi: eval_directional(theta, profile, n, sigma, xi, enlarged),
                  even=True, name=f"psi{'~' if enlarged else ''}[{n},{sigma}]")


def shell_symbol(kind, n, profile=DEFAULT_PROFILE):
    return Symbol(lambda xi: eval_shell(profile, kind, n, xi), even=True, name=f"{kind}[{n}]")


def weight_symbol(theta, exponent, sigma):
    return Symbol(lambda xi: eval_weight_symbol(theta, exponent, sigma, xi), even=True,
                  name=f"Psi[{exponent},{sigma}]")
