"""Smooth maps of the torus ``R^d / 2 pi Z^d`` and weight functions.

A :class:`MapModel` is an integer linear part plus trigonometric terms,

    T(x) = A x + sum_j a_j sin(k_j . x + phase_j) e_{c_j},

which is exactly the class for which composition with plane waves has a
closed-form Fourier expansion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi
GOLDEN = (3.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class PerturbationTerm:
    """Term ``amplitude * sin(k . x + phase)`` added to component ``component``."""

    component: int
    k: tuple
    amplitude: float
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))

    def to_dict(self):
        return {"component": self.component, "k": list(self.k), "amplitude": self.amplitude,
                "phase": self.phase}


class MapModel:
    """Toral map with integer linear part and trigonometric perturbation.

    Points are component-first arrays of shape ``(d, ...)``. Evaluation
    returns the lift (not reduced mod ``2 pi``); use :meth:`wrap` when needed.

    Parameters
    ----------
    linear : array_like of int, shape (d, d)
        Linear part; must be unimodular for the map to be a torus
        diffeomorphism.
    perturbation : sequence of PerturbationTerm or dict
    r : float
        Declared smoothness class, used by hypothesis checks.
    """

    def __init__(self, linear, perturbation=(), r=math.inf):
        A = np.asarray(linear)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("linear part must be square")
        if not np.allclose(A, np.rint(A)):
            raise ValueError("linear part must be an integer matrix")
        self.A = np.rint(A).astype(int)
        self.d = self.A.shape[0]
        det = int(round(np.linalg.det(self.A)))
        if abs(det) != 1:
            raise ValueError(f"linear part has determinant {det}; a torus diffeomorphism "
                             "needs determinant +-1")
        self.A_inv = np.rint(np.linalg.inv(self.A)).astype(int)
        terms = []
        for t in perturbation:
            t = t if isinstance(t, PerturbationTerm) else PerturbationTerm(**t)
            if not 0 <= t.component < self.d or len(t.k) != self.d:
                raise ValueError(f"malformed perturbation term {t}")
            terms.append(t)
        self.terms = tuple(terms)
        self.r = float(r)
        if not self.r > 1:
            raise ValueError("smoothness r must exceed 1")

    def __repr__(self):
        return f"MapModel(linear={self.A.tolist()}, terms={len(self.terms)}, r={self.r})"

    @property
    def is_linear(self):
        return all(t.amplitude == 0 for t in self.terms)

    def to_dict(self):
        return {"linear": self.A.tolist(), "perturbation": [t.to_dict() for t in self.terms],
                "r": self.r if math.isfinite(self.r) else "inf"}

    @classmethod
    def from_dict(cls, data):
        r = data.get("r", math.inf)
        return cls(data["linear"], data.get("perturbation", ()), math.inf if r == "inf" else r)

    def with_terms(self, extra):
        """Copy with additional perturbation terms."""
        return MapModel(self.A, self.terms + tuple(extra), self.r)

    @staticmethod
    def wrap(x):
        return np.mod(x, TWO_PI)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y = np.tensordot(self.A.astype(float), x, axes=(1, 0))
        for t in self.terms:
            y[t.component] += t.amplitude * np.sin(_dot(t.k, x) + t.phase)
        return y

    def derivative(self, x):
        """Jacobian ``DT(x)`` with shape ``(d, d, ...)``."""
        x = np.asarray(x, dtype=float)
        J = np.broadcast_to(self.A.astype(float).reshape(self.A.shape + (1,) * (x.ndim - 1)),
                            (self.d, self.d) + x.shape[1:]).copy()
        for t in self.terms:
            c = t.amplitude * np.cos(_dot(t.k, x) + t.phase)
            for j in range(self.d):
                J[t.component, j] += c * t.k[j]
        return J

    def jacobian_det(self, x):
        J = np.moveaxis(self.derivative(x), (0, 1), (-2, -1))
        return np.linalg.det(J)

    def inverse(self, y, tol=1e-13, max_iter=200):
        """Solve ``T(x) = y`` by the fixed point ``x = A^-1 (y - P(x))``.

        Converges when the perturbation is small compared with ``A``.
        """
        y = np.asarray(y, dtype=float)
        Ai = self.A_inv.astype(float)
        x = np.tensordot(Ai, y, axes=(1, 0))
        if not self.terms:
            return x
        for _ in range(max_iter):
            p = np.zeros_like(y)
            for t in self.terms:
                p[t.component] += t.amplitude * np.sin(_dot(t.k, x) + t.phase)
            x_new = np.tensordot(Ai, y - p, axes=(1, 0))
            err = np.abs(x_new - x).max()
            x = x_new
            if err < tol:
                return x
        raise RuntimeError("inverse iteration did not converge; perturbation too large")

    def check_diffeomorphism(self, n=64):
        """Minimum of ``|det DT|`` on an ``n^d`` grid; raises if it vanishes."""
        g = np.stack(np.meshgrid(*[np.arange(n) * TWO_PI / n] * self.d, indexing="ij"))
        m = float(np.abs(self.jacobian_det(g)).min())
        if m <= 0:
            raise ValueError("map is not a local diffeomorphism: det DT vanishes")
        return m

    def derivative_bound(self):
        """Upper bound on ``|DT - A|`` (operator 2-norm)."""
        return sum(abs(t.amplitude) * float(np.linalg.norm(t.k)) for t in self.terms)

    def inverse_map(self):
        return InverseMap(self)


class InverseMap:
    """``T^-1`` for a :class:`MapModel`, evaluated by fixed-point iteration."""

    def __init__(self, base):
        self.base = base
        self.d = base.d
        self.r = base.r

    @property
    def is_linear(self):
        return self.base.is_linear

    def __call__(self, y):
        return self.base.inverse(y)

    def derivative(self, y):
        x = self.base.inverse(y)
        J = np.moveaxis(self.base.derivative(x), (0, 1), (-2, -1))
        return np.moveaxis(np.linalg.inv(J), (-2, -1), (0, 1))

    def jacobian_det(self, y):
        return 1.0 / self.base.jacobian_det(self.base.inverse(y))

    wrap = staticmethod(MapModel.wrap)


def _dot(k, x):
    return sum(kj * x[j] for j, kj in enumerate(k) if kj)


class WeightField:
    """Weight ``g`` multiplying the composition in a transfer operator.

    Either a trigonometric polynomial (``terms`` maps integer wavenumbers to
    coefficients, which enables exact mode-space images) or an arbitrary
    callable of points.
    """

    def __init__(self, d, terms=None, func=None, support=None, r=math.inf):
        if (terms is None) == (func is None):
            raise ValueError("give exactly one of terms or func")
        self.d = d
        self.terms = None if terms is None else {tuple(int(v) for v in k): complex(c)
                                                 for k, c in terms.items()}
        self._func = func
        self.support = support
        self.r = r

    def __repr__(self):
        kind = f"{len(self.terms)} modes" if self.terms is not None else "callable"
        return f"WeightField(d={self.d}, {kind})"

    @classmethod
    def constant(cls, c, d=2):
        return cls(d, terms={(0,) * d: c})

    @classmethod
    def from_callable(cls, func, d=2, support=None):
        return cls(d, func=func, support=support)

    @property
    def constant_value(self):
        """The constant if ``g`` is constant, else ``None``."""
        if self.terms is not None and set(self.terms) <= {(0,) * self.d}:
            return self.terms.get((0,) * self.d, 0.0)
        return None

    @property
    def is_real(self):
        if self.terms is None:
            return True
        return all(abs(c - np.conj(self.terms.get(tuple(-v for v in k), 0))) < 1e-15
                   for k, c in self.terms.items())

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self._func is not None:
            return self._func(x)
        out = np.zeros(x.shape[1:], dtype=complex)
        for k, c in self.terms.items():
            out += c * np.exp(1j * _dot(k, x))
        return out.real if self.is_real else out

    def sup_norm(self, n=128):
        if self.terms is not None and self.constant_value is not None:
            return abs(self.constant_value)
        g = np.stack(np.meshgrid(*[np.arange(n) * TWO_PI / n] * self.d, indexing="ij"))
        return float(np.abs(self(g)).max())


def cat_map(perturbation=0.0, r=math.inf, component=0, k=(1, 1), phase=0.0):
    """Arnold cat map ``[[2,1],[1,1]]``, optionally with one sine term."""
    terms = [PerturbationTerm(component, k, perturbation, phase)] if perturbation else []
    return MapModel([[2, 1], [1, 1]], terms, r)


def identity_map(d=2):
    return MapModel(np.eye(d, dtype=int))


def eigen_axes(A):
    """Unit stable and unstable eigenvectors of a hyperbolic real 2x2 matrix."""
    w, v = np.linalg.eig(np.asarray(A, dtype=float))
    if np.iscomplexobj(w) and np.abs(w.imag).max() > 0:
        raise ValueError("matrix has complex eigenvalues")
    w, v = w.real, v.real
    order = np.argsort(np.abs(w))
    if not abs(w[order[0]]) < 1 < abs(w[order[1]]):
        raise ValueError("matrix is not hyperbolic")
    s, u = v[:, order[0]], v[:, order[1]]
    return s / np.linalg.norm(s), u / np.linalg.norm(u)


def cat_cones(plus_aperture=0.6, minus_aperture=0.6, A=((2, 1), (1, 1)), **inner):
    """Cones of the transposed linear part: ``C+`` around its stable axis."""
    from .symbols import ConeSystem

    s, u = eigen_axes(np.asarray(A, dtype=float).T)
    return ConeSystem([s], [u], plus_aperture, minus_aperture, **inner)
