"""Finite Markov chains: structure, absorption, stationary laws, certificates.

Matrices act on row vectors: ``P[v, w]`` is the probability of jumping from
``v`` to ``w`` and a law evolves as ``mu @ P``.  Classes are returned ordered
by their smallest state index, so class ``i`` means the same set of states for
every matrix with the same positive pattern.
"""

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.csgraph import connected_components

from .errors import (
    AnchorMismatch,
    ClassStructureVaries,
    DimensionMismatch,
    NoAbsorptionBound,
    NotIrreducible,
    SingularSystem,
    ValidationError,
)
from .tolerances import DEFAULT


# ---------------------------------------------------------------------------
# state spaces and matrices

@dataclass(frozen=True)
class StateSpace:
    labels: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        if not labels:
            raise ValidationError("state space must contain at least one state")
        if len(set(labels)) != len(labels):
            raise ValidationError("state labels must be unique")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(labels)})

    @property
    def size(self):
        return len(self.labels)

    def index(self, state):
        """Index of ``state``; integers in range are passed through."""
        if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
            if 0 <= state < self.size:
                return int(state)
        try:
            return self._index[_hashable(state)]
        except (KeyError, TypeError):
            raise ValidationError(f"unknown state {state!r}") from None

    def format(self, i):
        return format_label(self.labels[i])

    @classmethod
    def sign_vectors(cls, n):
        """``{+1, -1}**n`` with ``(+1, ..., +1)`` first and ``(-1, ..., -1)`` last."""
        return cls(tuple(product((1, -1), repeat=n)))


def _hashable(state):
    if isinstance(state, np.ndarray):
        return tuple(int(s) for s in state)
    if isinstance(state, list):
        return tuple(state)
    return state


def format_label(label):
    """Compact, comma-free text form of a label (``(1, -1)`` -> ``+-``)."""
    if isinstance(label, tuple) and label and all(s in (1, -1) for s in label):
        return "".join("+" if s > 0 else "-" for s in label)
    return str(label).replace(",", ";").replace(" ", "")


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Row-stochastic matrix (entries copied and frozen)."""

    entries: np.ndarray

    def __post_init__(self):
        P = np.array(self.entries, dtype=float)
        check_stochastic(P)
        P.setflags(write=False)
        object.__setattr__(self, "entries", P)

    @property
    def size(self):
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def check_stochastic(P, tol=DEFAULT.construction):
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise ValidationError(f"transition matrix must be square and non-empty, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ValidationError("transition matrix has non-finite entries")
    if P.min() < 0.0 or P.max() > 1.0:
        raise ValidationError("transition probabilities must lie in [0, 1]")
    dev = np.abs(P.sum(axis=1) - 1.0).max()
    if dev > tol:
        raise ValidationError(f"row sums deviate from 1 by {dev:.3g} (> {tol:g})")


def _entries(P):
    if isinstance(P, StochasticMatrix):
        return P.entries
    P = np.asarray(P, dtype=float)
    check_stochastic(P)
    return P


class TransitionFamily:
    """The map ``x -> P_x`` together with its declared Lipschitz modulus.

    ``evaluate(x)`` returns an ``(S, S)`` array.  ``rows(x, v)``, when given,
    must return ``P_{x[j]}[v[j], :]`` for a batch ``x`` of shape ``(M, N)``
    and ``v`` of shape ``(M,)``; the simulators rely on it for speed.
    ``absorbing`` lists states with ``P_x[v, v] == 1`` for every ``x``.
    """

    def __init__(self, evaluate: Callable, size: int, lipschitz_bound: float = 0.0,
                 constant_in_x: bool = False, rows: Optional[Callable] = None,
                 absorbing: Sequence[int] = ()):
        if lipschitz_bound < 0:
            raise ValidationError("lipschitz_bound must be non-negative")
        self._evaluate = evaluate
        self.size = int(size)
        self.lipschitz_bound = float(lipschitz_bound)
        self.constant_in_x = bool(constant_in_x)
        self._rows = rows
        self.absorbing = tuple(sorted(int(a) for a in absorbing))

    @classmethod
    def constant(cls, P, absorbing=None):
        P = np.array(_entries(P))
        P.setflags(write=False)
        if absorbing is None:
            absorbing = np.flatnonzero(np.diag(P) == 1.0)
        return cls(lambda x: P, P.shape[0], 0.0, True,
                   rows=lambda x, v: P[v], absorbing=absorbing)

    def evaluate(self, x):
        P = np.asarray(self._evaluate(np.asarray(x, dtype=float)), dtype=float)
        if P.shape != (self.size, self.size):
            raise DimensionMismatch(f"family returned shape {P.shape}, expected {(self.size,) * 2}")
        return P

    __call__ = evaluate

    def matrix(self, x):
        """Validated :class:`StochasticMatrix` at ``x``."""
        return StochasticMatrix(self.evaluate(x))

    def rows(self, x, v):
        if self._rows is not None:
            return self._rows(x, v)
        x = np.atleast_2d(x)
        return np.stack([self.evaluate(xi)[vi] for xi, vi in zip(x, v)])


# ---------------------------------------------------------------------------
# decomposition

@dataclass(frozen=True)
class ChainDecomposition:
    ergodic_classes: tuple
    transient_set: tuple
    size: int

    @property
    def class_count(self):
        return len(self.ergodic_classes)

    @property
    def class_of(self):
        """Array mapping state -> class index (``-1`` for transient states)."""
        out = np.full(self.size, -1, dtype=np.int64)
        for i, cls in enumerate(self.ergodic_classes):
            out[list(cls)] = i
        return out

    @property
    def recurrent_states(self):
        return tuple(sorted(s for cls in self.ergodic_classes for s in cls))


def _scc(pattern):
    graph = scipy.sparse.csr_matrix(pattern)
    n_comp, comp = connected_components(graph, directed=True, connection="strong")
    src, dst = graph.nonzero()
    leaving = np.zeros(n_comp, dtype=bool)
    leaving[comp[src[comp[src] != comp[dst]]]] = True
    return comp, ~leaving


def decompose(P) -> ChainDecomposition:
    """Split the states of ``P`` into closed irreducible classes and transients.

    Edges are the strictly positive entries.  Terminal strongly connected
    components of the condensation are exactly the closed classes.
    """
    P = _entries(P)
    comp, terminal = _scc(P > 0.0)
    classes = []
    for c in np.flatnonzero(terminal):
        classes.append(tuple(int(s) for s in np.flatnonzero(comp == c)))
    classes.sort(key=lambda cls: cls[0])
    recurrent = {s for cls in classes for s in cls}
    transient = tuple(s for s in range(P.shape[0]) if s not in recurrent)
    return ChainDecomposition(tuple(classes), transient, P.shape[0])


# ---------------------------------------------------------------------------
# absorption and stationary laws

def _same_anchor(a, b):
    if a is None or b is None:
        return a is None and b is None
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return a.shape == b.shape and bool(np.all(a == b))


def _freeze(x):
    if x is None:
        return None
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    return x


@dataclass(frozen=True, eq=False)
class AbsorptionProfile:
    probabilities: np.ndarray
    anchor_x: Optional[np.ndarray] = None
    decomposition: Optional[ChainDecomposition] = field(default=None, repr=False)

    def __post_init__(self):
        q = np.array(self.probabilities, dtype=float)
        q.setflags(write=False)
        object.__setattr__(self, "probabilities", q)
        object.__setattr__(self, "anchor_x", _freeze(self.anchor_x))
        dev = np.abs(q.sum(axis=1) - 1.0).max(initial=0.0)
        if dev > DEFAULT.profile_rows:
            raise ValidationError(f"absorption profile rows deviate from 1 by {dev:.3g}")

    def __getitem__(self, key):
        return self.probabilities[key]


def absorption_probabilities(P, d: Optional[ChainDecomposition] = None, anchor_x=None,
                             tol=DEFAULT) -> AbsorptionProfile:
    """Probability ``q[v, i]`` that the chain started at ``v`` ends in class ``i``.

    Solves ``(I - P_TT) q_T = P_TC`` with a dense LU factorisation, where ``T``
    is the transient set and ``P_TC[:, i]`` the one-step mass into class ``i``.
    The system counts as singular when the expected number of steps before
    absorption exceeds ``tol.singular_cond``.
    """
    P = _entries(P)
    if d is None:
        d = decompose(P)
    S, L = P.shape[0], d.class_count
    q = np.zeros((S, L))
    for i, cls in enumerate(d.ergodic_classes):
        q[list(cls), i] = 1.0
    T = list(d.transient_set)
    if T:
        A = np.eye(len(T)) - P[np.ix_(T, T)]
        B = np.stack([P[np.ix_(T, list(cls))].sum(axis=1) for cls in d.ergodic_classes], axis=1)
        # (I - P_TT)^-1 counts expected visits, so its row sums are expected
        # absorption times; an astronomically large one means numerically singular
        with np.errstate(all="ignore"):
            lu = scipy.linalg.lu_factor(A, check_finite=False)
            visits = np.abs(scipy.linalg.lu_solve(lu, np.eye(len(T)))).sum(axis=1).max()
        if not np.isfinite(visits) or visits > tol.singular_cond:
            raise SingularSystem(
                f"I - P restricted to the transient set is singular (expected absorption "
                f"time {visits:.3g} steps); some 'transient' states never reach a closed class")
        qT = scipy.linalg.lu_solve(lu, B)
        resid = np.abs(A @ qT - B).max()
        if resid > tol.solver:
            raise SingularSystem(f"absorption solve residual {resid:.3g} exceeds {tol.solver:g}")
        q[T] = qT
    return AbsorptionProfile(q, anchor_x, d)


@dataclass(frozen=True, eq=False)
class ClassStationaryLaw:
    class_index: Optional[int]
    states: tuple
    weights: np.ndarray
    anchor_x: Optional[np.ndarray] = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "states", tuple(int(s) for s in self.states))
        object.__setattr__(self, "anchor_x", _freeze(self.anchor_x))
        if w.shape != (len(self.states),):
            raise DimensionMismatch("weights and states differ in length")
        if w.min() < 0 or abs(w.sum() - 1.0) > DEFAULT.construction:
            raise ValidationError("stationary weights must be a probability vector")

    def full(self, size):
        """Weights embedded in a length-``size`` vector (zero off the class)."""
        out = np.zeros(size)
        out[list(self.states)] = self.weights
        return out


def stationary_law(P, cls, anchor_x=None, class_index=None, tol=DEFAULT) -> ClassStationaryLaw:
    """Invariant law of ``P`` restricted to the closed class ``cls``.

    The balance equations ``mu (R - I) = 0`` with one of them replaced by
    ``sum(mu) = 1`` are solved directly.
    """
    P = _entries(P)
    cls = tuple(int(s) for s in cls)
    if not cls:
        raise ValidationError("class must be non-empty")
    R = P[np.ix_(cls, cls)]
    leak = np.abs(R.sum(axis=1) - 1.0).max()
    if leak > tol.construction:
        raise ValidationError(f"states {cls} do not form a closed class (mass leak {leak:.3g})")
    _, terminal = _scc(R > 0.0)
    if terminal.sum() > 1:
        raise NotIrreducible(f"restriction to {cls} has {int(terminal.sum())} closed sub-classes")
    m = len(cls)
    A = R.T - np.eye(m)
    A[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    mu = np.linalg.solve(A, b)
    if mu.min() < -tol.solver:
        raise NotIrreducible("stationary solve produced negative mass")
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    resid = np.abs(mu @ R - mu).sum()
    if resid > tol.solver:
        raise SingularSystem(f"stationary residual {resid:.3g} exceeds {tol.solver:g}")
    return ClassStationaryLaw(class_index, cls, mu, anchor_x)


def class_laws(P, d: Optional[ChainDecomposition] = None, anchor_x=None):
    P = _entries(P)
    if d is None:
        d = decompose(P)
    return [stationary_law(P, cls, anchor_x, i) for i, cls in enumerate(d.ergodic_classes)]


@dataclass(frozen=True, eq=False)
class LimitLaw:
    measure: np.ndarray
    anchor: tuple

    def __post_init__(self):
        m = np.array(self.measure, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "measure", m)
        if abs(m.sum() - 1.0) > DEFAULT.profile_rows:
            raise ValidationError(f"limit law has mass {m.sum():.15g}")


def limit_law(profile: AbsorptionProfile, laws, v) -> LimitLaw:
    """Long-time law of the frozen chain started at state index ``v``."""
    for law in laws:
        if not _same_anchor(profile.anchor_x, law.anchor_x):
            raise AnchorMismatch("absorption profile and class laws were computed at different x")
    q = profile.probabilities
    S, L = q.shape
    if len(laws) != L:
        raise DimensionMismatch(f"profile has {L} classes but {len(laws)} class laws were given")
    v = int(v)
    if not 0 <= v < S:
        raise ValidationError(f"state index {v} out of range")
    order = sorted(laws, key=lambda law: law.class_index if law.class_index is not None else 0)
    measure = np.zeros(S)
    for i, law in enumerate(order):
        measure[list(law.states)] += q[v, i] * law.weights
    return LimitLaw(measure, (profile.anchor_x, v))


def frozen_limit_law(P, v, anchor_x=None) -> LimitLaw:
    """Shortcut: decomposition, absorption and class laws in one call."""
    P = _entries(P)
    d = decompose(P)
    return limit_law(absorption_probabilities(P, d, anchor_x), class_laws(P, d, anchor_x), v)


# ---------------------------------------------------------------------------
# unabsorbed mass and certificates

def survival_by_step(P, d: ChainDecomposition, k_max):
    """``out[k, j]``: probability that the chain started at transient ``T[j]``
    is still transient after ``k`` steps, ``k = 0..k_max``."""
    P = _entries(P)
    T = list(d.transient_set)
    out = np.ones((k_max + 1, len(T)))
    if not T:
        return out
    NA = P[np.ix_(T, T)]
    M = np.eye(len(T))
    for k in range(1, k_max + 1):
        M = M @ NA
        out[k] = M.sum(axis=1)
    return out


def primitive(R):
    """Whether some power of ``R`` is entrywise positive (Wielandt bound)."""
    m = R.shape[0]
    B = (R > 0).astype(np.int64)
    A = B.copy()
    for _ in range((m - 1) ** 2 + 1):
        if A.all():
            return True
        A = ((A @ B) > 0).astype(np.int64)
    return bool(A.all())


@dataclass(frozen=True, eq=False)
class AssumptionCertificate:
    n_tilde: int
    z0: float
    lipschitz_estimate: float
    classes_stable: bool
    sample_grid: tuple
    decomposition: ChainDecomposition
    lipschitz_declared: float = 0.0
    classes_primitive: bool = True

    def __post_init__(self):
        if not self.z0 < 1.0:
            raise ValidationError("certified z0 must be < 1")

    @property
    def lipschitz_consistent(self):
        return self.lipschitz_estimate <= self.lipschitz_declared * (1 + 1e-9) + 1e-12

    @property
    def ball_radius(self):
        """Radius ``(1 - z0) / (2 K0 n_tilde)`` with the declared ``K0``."""
        if self.lipschitz_declared == 0.0:
            return np.inf
        return (1.0 - self.z0) / (2.0 * self.lipschitz_declared * self.n_tilde)


def certify_assumptions(family: TransitionFamily, grid, max_steps=64, tol=DEFAULT) -> AssumptionCertificate:
    """Check the class structure, absorption bound and Lipschitz modulus on a grid.

    Raises :class:`ClassStructureVaries` if the decomposition differs between
    grid points and :class:`NoAbsorptionBound` if no ``n <= max_steps`` makes
    the worst-case unabsorbed probability drop below one.
    """
    grid = [np.array(x, dtype=float) for x in grid]
    if not grid:
        raise ValidationError("grid must be non-empty")
    if max_steps < 1:
        raise ValidationError("max_steps must be >= 1")
    mats = [family.matrix(x).entries for x in grid]
    decs = [decompose(P) for P in mats]
    ref = decs[0]
    for x, d in zip(grid, decs):
        if d.ergodic_classes != ref.ergodic_classes:
            raise ClassStructureVaries(
                f"classes at x={x.tolist()} are {d.ergodic_classes}, "
                f"but {ref.ergodic_classes} at x={grid[0].tolist()}")
    worst = np.zeros(max_steps + 1)
    for P in mats:
        surv = survival_by_step(P, ref, max_steps)
        if surv.shape[1]:
            worst = np.maximum(worst, surv.max(axis=1))
    hits = np.flatnonzero(worst[1:] < 1.0 - tol.construction)
    if hits.size == 0:
        raise NoAbsorptionBound(f"no n <= {max_steps} gives unabsorbed probability below 1")
    n_tilde = int(hits[0]) + 1
    z0 = float(worst[n_tilde])

    k0 = 0.0
    for a in range(len(grid)):
        for b in range(a + 1, len(grid)):
            dist = np.abs(grid[a] - grid[b]).sum()
            if dist > 0:
                k0 = max(k0, np.abs(mats[a] - mats[b]).sum(axis=1).max() / dist)
    prim = all(primitive(P[np.ix_(cls, cls)]) for P in mats for cls in ref.ergodic_classes)
    return AssumptionCertificate(n_tilde, z0, float(k0), True, tuple(tuple(x) for x in grid),
                                 ref, family.lipschitz_bound, prim)
