"""Partitions of unity, affine chart systems and chart-patched norms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .decomposition import GridFunction
from .hyperbolicity import check_cone_hyperbolicity
from .norms import aniso_norm
from .symbols import smooth_step


class PartitionOfUnity:
    """Smooth non-negative pieces ``g_i`` with ``sum g_i = 1`` on ``K``.

    Parameters
    ----------
    pieces : list of GridFunction
    K : ndarray of bool, optional
        Region where the pieces must sum to one (default: everywhere).
    r : float
        Declared smoothness.
    """

    def __init__(self, pieces, K=None, r=math.inf, tol=1e-10):
        if not pieces:
            raise ValueError("a partition needs at least one piece")
        lat = pieces[0].lattice
        vals = np.stack([np.real(p.values) for p in pieces])
        if any(p.lattice != lat for p in pieces):
            raise ValueError("pieces live on different lattices")
        if np.any(vals < -tol):
            raise ValueError("partition pieces must be non-negative")
        total = vals.sum(axis=0)
        if np.any(total > 1 + tol):
            raise ValueError("partition pieces sum to more than one")
        K = np.ones(lat.shape, bool) if K is None else np.asarray(K, bool)
        if np.any(np.abs(total[K] - 1) > tol):
            raise ValueError("partition pieces do not sum to one on K")
        self.pieces = list(pieces)
        self.lattice = lat
        self.K = K
        self.r = r
        self.multiplicity = int((vals > 0).sum(axis=0).max())

    def __len__(self):
        return len(self.pieces)

    def split(self, u):
        return [p * u for p in self.pieces]

    @classmethod
    def trivial(cls, lattice):
        return cls([GridFunction(lattice, np.ones(lattice.shape))])

    @classmethod
    def two_strips(cls, lattice, axis=0, width=0.5):
        """Two smooth periodic pieces ``s`` and ``1 - s`` of ``sin(x_axis)``.

        ``s = 1`` where ``sin x >= width`` and ``0`` where ``sin x <= -width``,
        so the supports overlap in two strips and the multiplicity is 2.
        """
        x = lattice.points()[axis]
        s = smooth_step((np.sin(x) + width) / (2 * width))
        return cls([GridFunction(lattice, s), GridFunction(lattice, 1.0 - s)])


@dataclass
class Chart:
    """Affine chart ``kappa(x) = L x + shift`` on the torus.

    ``linear`` must be an integer unimodular matrix and ``shift`` a vector of
    grid steps, so pushing grid functions forward is an exact permutation.
    ``region`` is a predicate on points (``(d, ...)`` arrays) describing
    ``V_j``.
    """

    theta: object
    linear: np.ndarray = None
    shift: tuple = None
    region: object = None

    def __post_init__(self):
        d = self.theta.d
        self.linear = np.eye(d, dtype=int) if self.linear is None else np.asarray(self.linear)
        if not np.allclose(self.linear, np.rint(self.linear)) or \
                abs(round(np.linalg.det(self.linear))) != 1:
            raise ValueError("chart linear part must be integer and unimodular")
        self.linear = np.rint(self.linear).astype(int)
        self.shift = tuple([0] * d if self.shift is None else (int(s) for s in self.shift))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if self.region is None:
            return np.ones(x.shape[1:], bool)
        return np.asarray(self.region(x), bool)

    def mask(self, lattice):
        return self.contains(lattice.points())

    def push_forward(self, u):
        """``u o kappa^-1`` as a grid function (exact index permutation)."""
        lat = u.lattice
        idx = np.stack(np.meshgrid(*[np.arange(n) for n in lat.N], indexing="ij"))
        N = np.array(lat.N).reshape((-1,) + (1,) * lat.d)
        shifted = idx - np.array(self.shift).reshape((-1,) + (1,) * lat.d)
        inv = np.rint(np.linalg.inv(self.linear)).astype(int)
        if any(n != lat.N[0] for n in lat.N) and not np.array_equal(self.linear, np.eye(lat.d)):
            raise ValueError("non-diagonal chart maps need a square grid")
        src = np.mod(np.tensordot(inv, shifted, axes=(1, 0)), N)
        return GridFunction(lat, u.values[tuple(src)], copy=False)


@dataclass
class ChartSystem:
    charts: list
    partition: PartitionOfUnity
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.charts) != len(self.partition):
            raise ValueError("need one partition piece per chart")
        lat = self.partition.lattice
        for c, piece in zip(self.charts, self.partition.pieces):
            if np.any(np.abs(piece.values[~c.mask(lat)]) > 1e-12):
                raise ValueError("partition piece escapes its chart region")

    @classmethod
    def trivial(cls, theta, lattice):
        return cls([Chart(theta)], PartitionOfUnity.trivial(lattice))

    def check(self, map=None, points=None):
        """Sampled chart conditions: valid cones and cone-hyperbolicity in charts."""
        for c in self.charts:
            if c.theta.core_angle <= c.theta.plus_aperture + c.theta.minus_aperture:
                raise ValueError("chart cones are not transversal")
        if map is not None and points is not None:
            for cj in self.charts:
                for ck in self.charts:
                    check_cone_hyperbolicity(map, cj.theta, ck.theta, points)
        return True


def patched_norm(u, charts, params, family="C", normalized=True):
    """``max_j |(phi_j u) o kappa_j^-1|`` with the cones of chart ``j``."""
    best = 0.0
    for c, piece in zip(charts.charts, charts.partition.pieces):
        v = c.push_forward(piece * u)
        best = max(best, aniso_norm(v, params.replace(theta=c.theta), family,
                                    normalized=normalized))
    return best


@dataclass
class SplitReport:
    """Measured constants of the two partition inequalities over a probe suite."""

    multiplicity: int
    lemma_C: float
    prop_C0: float
    prop_C: float
    lemma_lhs: np.ndarray
    lemma_main: np.ndarray
    lemma_weak: np.ndarray
    prop_lhs: np.ndarray
    prop_main: np.ndarray
    prop_weak: np.ndarray

    def to_dict(self):
        return {"multiplicity": self.multiplicity, "lemma_C": self.lemma_C,
                "prop_C0": self.prop_C0, "prop_C": self.prop_C}


def partition_split_compare(probes, pu, params, params_weak, family="C", theta_refined=None,
                            normalized=True):
    """Compare a norm with the norms of its partition pieces.

    Lemma direction: ``|u| <= nu * agg_i |u_i| + C * sum_i |u_i|_weak`` with
    ``agg`` the maximum (Hölder family) or the ``l^t`` sum (Sobolev family);
    the smallest ``C`` valid on all probes is reported.

    Opposite direction: ``max_i |u_i|_{Theta'} <= C0 |u| + C |u|_weak``; the
    pair is fitted as the tightest non-negative least-squares majorant.
    """
    if isinstance(probes, GridFunction):
        probes = [probes]
    nu = pu.multiplicity
    t = params.t
    refined = params.replace(theta=theta_refined) if theta_refined is not None else params
    rows = []
    for u in probes:
        pieces = pu.split(u)
        full = aniso_norm(u, params, family, normalized=normalized)
        strong = [aniso_norm(v, params, family, normalized=normalized) for v in pieces]
        weak = [aniso_norm(v, params_weak, family, normalized=normalized) for v in pieces]
        if family == "C" or math.isinf(t):
            agg = max(strong)
        else:
            agg = float(np.sum(np.array(strong) ** t) ** (1.0 / t))
        ref = [aniso_norm(v, refined, family, normalized=normalized) for v in pieces]
        rows.append((full, nu * agg, sum(weak), max(ref),
                     aniso_norm(u, params_weak, family, normalized=normalized)))
    r = np.array(rows)
    lemma_C = float(np.max(np.maximum(r[:, 0] - r[:, 1], 0.0) / r[:, 2]))
    X = np.stack([r[:, 0], r[:, 4]], axis=1) / r[:, :1]
    coef, _ = nnls(X, r[:, 3] / r[:, 0])
    # shift the fit up until it majorises every probe
    C0 = float(coef[0] + np.max(r[:, 3] / r[:, 0] - X @ coef))
    return SplitReport(nu, lemma_C, C0, float(coef[1]), r[:, 0], r[:, 1], r[:, 2], r[:, 3],
                       r[:, 0], r[:, 4])
