"""Exact laws of the fast chain without sampling.

Continuous-time laws are Poisson mixtures of discrete-time laws: if the clock
has fired ``k`` times the state has the law of ``k`` chain steps.  Total
variation is the sum of absolute differences (no factor 1/2), so disjoint
point masses are at distance 2.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import (
    BallViolation,
    DimensionMismatch,
    SequenceTooShort,
    TruncationInsufficient,
    ValidationError,
)
from .markov import TransitionFamily, _entries, certify_assumptions
from .tolerances import DEFAULT


@dataclass(frozen=True, eq=False)
class DiscreteLawTrajectory:
    laws: np.ndarray   # (k_max + 1, S), row k = law after k jumps

    def __post_init__(self):
        laws = np.array(self.laws, dtype=float)
        laws.setflags(write=False)
        object.__setattr__(self, "laws", laws)
        dev = np.abs(laws.sum(axis=1) - 1.0).max()
        if dev > 1e-12 * max(1, laws.shape[0]):
            raise ValidationError(f"law trajectory loses mass ({dev:.3g})")

    @property
    def k_max(self):
        return self.laws.shape[0] - 1


@dataclass(frozen=True)
class JumpSequence:
    points: tuple
    ball_center: tuple
    ball_radius: float

    def __post_init__(self):
        pts = tuple(tuple(float(c) for c in p) for p in self.points)
        center = tuple(float(c) for c in self.ball_center)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ball_center", center)
        if self.ball_radius < 0:
            raise ValidationError("ball_radius must be non-negative")
        c = np.array(center)
        for p in pts:
            if len(p) != len(c):
                raise DimensionMismatch("sequence points and ball centre differ in dimension")
            if np.abs(np.array(p) - c).sum() > self.ball_radius * (1 + 1e-12):
                raise BallViolation(f"point {p} lies outside the 1-norm ball of radius "
                                    f"{self.ball_radius:g} around {center}")

    def __len__(self):
        return len(self.points)

    @property
    def sup_distance(self):
        c = np.array(self.ball_center)
        if not self.points:
            return 0.0
        return float(max(np.abs(np.array(p) - c).sum() for p in self.points))

    @classmethod
    def shifted(cls, center, offset, length, radius=None):
        """``length`` copies of ``center + offset``."""
        center = np.asarray(center, dtype=float)
        p = tuple(center + np.asarray(offset, dtype=float))
        r = float(np.abs(np.asarray(offset, dtype=float)).sum()) if radius is None else radius
        return cls((p,) * length, tuple(center), r)

    @classmethod
    def from_points(cls, center, points):
        center = np.asarray(center, dtype=float)
        r = max((float(np.abs(np.asarray(p) - center).sum()) for p in points), default=0.0)
        return cls(tuple(map(tuple, points)), tuple(center), r)


def _start(v0, size):
    mu = np.zeros(size)
    mu[int(v0)] = 1.0
    return mu


def discrete_law(source, v0, k_max, family: TransitionFamily = None) -> DiscreteLawTrajectory:
    """Laws after ``0..k_max`` jumps.

    ``source`` is either a fixed matrix (frozen chain) or a
    :class:`JumpSequence`, in which case the ``k``-th jump uses
    ``family.evaluate(points[k - 1])``.
    """
    if k_max < 0:
        raise ValidationError("k_max must be >= 0")
    if isinstance(source, JumpSequence):
        if family is None:
            raise ValidationError("a sequence-driven law needs the transition family")
        if k_max > len(source):
            raise SequenceTooShort(f"need {k_max} sequence points, have {len(source)}")
        mu = _start(v0, family.size)
        laws = [mu]
        for k in range(k_max):
            mu = mu @ family.matrix(source.points[k]).entries
            laws.append(mu)
        return DiscreteLawTrajectory(np.array(laws))
    P = _entries(source)
    mu = _start(v0, P.shape[0])
    laws = np.empty((k_max + 1, P.shape[0]))
    laws[0] = mu
    for k in range(k_max):
        mu = mu @ P
        laws[k + 1] = mu
    return DiscreteLawTrajectory(laws)


def poisson_cutoff(mean, tail_tol=DEFAULT.poisson_tail):
    """Smallest ``K`` with ``P[Poisson(mean) > K] < tail_tol``."""
    if tail_tol <= 0:
        raise ValidationError("tail_tol must be positive")
    if mean == 0:
        return 0
    K = max(int(stats.poisson.isf(tail_tol, mean)), 0)
    while K > 0 and stats.poisson.sf(K - 1, mean) < tail_tol:
        K -= 1
    while stats.poisson.sf(K, mean) >= tail_tol:
        K += 1
    return K


@dataclass(frozen=True, eq=False)
class PoissonizedLaw:
    law: np.ndarray
    truncation_index: int
    tail_mass: float

    def __array__(self, dtype=None, copy=None):
        return self.law if dtype is None else self.law.astype(dtype)


def poissonize(traj: DiscreteLawTrajectory, rate, t, tail_tol=DEFAULT.poisson_tail) -> PoissonizedLaw:
    """Law at time ``t`` of the chain whose jumps follow a rate-``rate`` clock.

    The Poisson sum stops at the first index beyond which the remaining
    Poisson mass is below ``tail_tol``; the result is renormalised.
    """
    if t < 0 or rate < 0:
        raise ValidationError("rate and t must be non-negative")
    mean = rate * t
    K = poisson_cutoff(mean, tail_tol)
    if K > traj.k_max:
        raise TruncationInsufficient(
            f"Poisson({mean:g}) needs {K} jumps for tail < {tail_tol:g}; trajectory has {traj.k_max}")
    w = stats.poisson.pmf(np.arange(K + 1), mean) if mean > 0 else np.eye(1, K + 1)[0]
    law = w @ traj.laws[: K + 1]
    tail = float(1.0 - w.sum())
    law = law / law.sum()
    return PoissonizedLaw(law, K, tail)


def frozen_law(P, v0, rate, t, tail_tol=DEFAULT.poisson_tail) -> PoissonizedLaw:
    """Time-``t`` law of the frozen chain (trajectory length chosen automatically)."""
    K = poisson_cutoff(rate * t, tail_tol)
    return poissonize(discrete_law(P, v0, K), rate, t, tail_tol)


def tv_distance(mu, nu) -> float:
    mu, nu = np.asarray(mu, dtype=float), np.asarray(nu, dtype=float)
    if mu.shape != nu.shape:
        raise DimensionMismatch(f"laws have shapes {mu.shape} and {nu.shape}")
    return float(np.abs(mu - nu).sum())


@dataclass(frozen=True)
class SequenceGap:
    gap: float
    sup_distance: float
    truncation_index: int

    @property
    def ratio(self):
        return self.gap / self.sup_distance if self.sup_distance > 0 else 0.0


def perturbation_ball_radius(family: TransitionFamily, grid: Sequence, max_steps=64):
    return certify_assumptions(family, grid, max_steps).ball_radius


def frozen_vs_sequence_gap(family: TransitionFamily, x, v0, seq: JumpSequence, rate, t,
                           tail_tol=DEFAULT.poisson_tail, radius=None, max_steps=64) -> SequenceGap:
    """TV distance between the frozen law at ``x`` and the ``seq``-driven law.

    The sequence must stay in the 1-norm ball of radius ``(1 - z0)/(2 K0 n)``
    around ``x``; the radius is certified on ``x`` and the sequence points
    unless passed explicitly.
    """
    x = np.asarray(x, dtype=float)
    if not np.array_equal(np.asarray(seq.ball_center), x):
        raise ValidationError("sequence ball must be centred on x")
    if radius is None:
        pts = [x] + [np.array(p) for p in dict.fromkeys(seq.points)]
        radius = perturbation_ball_radius(family, pts, max_steps)
    if seq.sup_distance > radius:
        raise BallViolation(f"sequence reaches distance {seq.sup_distance:g} > radius {radius:g}")
    K = poisson_cutoff(rate * t, tail_tol)
    if K > len(seq):
        raise SequenceTooShort(f"need {K} sequence points, have {len(seq)}")
    frozen = poissonize(discrete_law(family.matrix(x), v0, K), rate, t, tail_tol)
    driven = poissonize(discrete_law(seq, v0, K, family), rate, t, tail_tol)
    return SequenceGap(tv_distance(frozen.law, driven.law), seq.sup_distance, K)
