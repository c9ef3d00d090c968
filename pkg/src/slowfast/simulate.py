"""Event-driven simulation of slow-fast systems and of their averaged limit.

The fast state jumps when a Poisson clock of rate ``model.rate`` fires; the
``k``-th jump of replica ``r`` uses the ``k``-th Philox draw of stream
``(seed, r)``: the first uniform sets the exponential waiting time, the second
picks the new state by inverse CDF.  Between jumps the slow state follows
``dx/dt = a(x, v)`` integrated with classical RK4 at fixed step ``h`` plus a
final partial step that lands exactly on the next event.

Draw index 0 of each stream is reserved for the class index of the averaged
process.
"""

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import (
    ClassMissing,
    DimensionMismatch,
    ResourceLimit,
    SequenceTooShort,
    ValidationError,
)
from .laws import JumpSequence
from .markov import (
    StateSpace,
    TransitionFamily,
    absorption_probabilities,
    decompose,
    stationary_law,
)
import numba

from .rng import philox_pair, split_seed, uniform_pair

MAX_EXPECTED_JUMPS = 1e9
DEFAULT_STEPS = 10_000


# ---------------------------------------------------------------------------
# model description

class DriftField:
    """Slow drift ``a(x, v)``, evaluated on batches.

    ``evaluate(x, v)`` receives ``x`` of shape ``(M, N)`` and integer states
    ``v`` of shape ``(M,)`` and returns ``(M, N)``.
    """

    def __init__(self, evaluate: Callable, sup_bound: float, table=None):
        self._evaluate = evaluate
        self.sup_bound = float(sup_bound)
        self.table = None if table is None else np.asarray(table, dtype=float)

    @classmethod
    def from_table(cls, table):
        """Drift that depends on the fast state only: ``a(x, v) = table[v]``."""
        table = np.array(table, dtype=float)
        table.setflags(write=False)
        return cls(lambda x, v: table[v], float(np.abs(table).max()), table)

    def evaluate(self, x, v):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        v = np.broadcast_to(np.asarray(v, dtype=np.int64), (x.shape[0],))
        return np.asarray(self._evaluate(x, v), dtype=float)

    __call__ = evaluate


@dataclass(frozen=True, eq=False)
class SlowFastModel:
    drift: DriftField
    family: TransitionFamily
    lam: float
    state_space: StateSpace
    dim: int
    clock_multiplicity: int = 1
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValidationError(f"rate parameter must be positive, got {self.lam}")
        if self.family.size != self.state_space.size:
            raise DimensionMismatch("transition family and state space sizes differ")
        if self.drift.table is not None and self.drift.table.shape != (self.state_space.size, self.dim):
            raise DimensionMismatch("drift table must have shape (states, dim)")

    @property
    def rate(self):
        """Aggregated clock rate (``clock_multiplicity * lam``)."""
        return self.clock_multiplicity * self.lam

    def with_lambda(self, lam):
        params = dict(self.params)
        if "lam" in params:
            params["lam"] = lam
        return replace(self, lam=float(lam), params=params)

    def fingerprint(self):
        blob = json.dumps({"name": self.name, "params": self.params, "lam": self.lam},
                          sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# integrator

def rk4_step(drift, x, v, dt):
    """One classical RK4 step; ``dt`` is a scalar or a per-row array."""
    dt = np.asarray(dt, dtype=float)
    if dt.ndim:
        dt = dt[:, None]
    k1 = drift(x, v)
    k2 = drift(x + 0.5 * dt * k1, v)
    k3 = drift(x + 0.5 * dt * k2, v)
    k4 = drift(x + dt * k3, v)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def advance(drift, x, v, length, h):
    """Integrate each row of ``x`` over its own ``length`` with fixed state ``v``.

    A drift given by a table does not depend on ``x``; RK4 is exact for it and
    the whole segment collapses to one Euler move.
    """
    length = np.asarray(length, dtype=float)
    table = getattr(drift, "table", None)
    if table is not None:
        return x + table[v] * length[:, None]
    n_full = np.floor(length / h).astype(np.int64)
    rem = length - n_full * h
    neg = rem < 0
    n_full[neg] -= 1
    rem[neg] += h
    x = x.copy()
    for j in range(int(n_full.max(initial=0))):
        sel = np.flatnonzero(n_full > j)
        x[sel] = rk4_step(drift, x[sel], v[sel], h)
    sel = np.flatnonzero(rem > 0)
    if sel.size:
        x[sel] = rk4_step(drift, x[sel], v[sel], rem[sel])
    return x


def pick(rows, u):
    """Inverse-CDF choice per row: smallest ``j`` with ``cumsum(row)[j] > u``."""
    rows = np.atleast_2d(rows)
    cdf = np.cumsum(rows, axis=1)
    idx = (cdf <= np.asarray(u)[:, None]).sum(axis=1)
    last = rows.shape[1] - 1 - np.argmax(rows[:, ::-1] > 0, axis=1)
    return np.minimum(idx, last)


def _check_run(model, t_end, h):
    if not t_end > 0:
        raise ValidationError("t_end must be positive")
    if model.rate * t_end > MAX_EXPECTED_JUMPS:
        raise ResourceLimit(f"{model.rate * t_end:.3g} expected jumps exceeds {MAX_EXPECTED_JUMPS:.0e}")
    h = t_end / DEFAULT_STEPS if h is None else float(h)
    if not h > 0:
        raise ValidationError("step h must be positive")
    return h


def _report_grid(t_end, h, report_dt):
    if report_dt is None:
        report_dt = t_end
    ratio = report_dt / h
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
        raise ValidationError(f"step h={h:g} must divide the reporting interval {report_dt:g}")
    n = int(round(t_end / report_dt))
    if abs(n * report_dt - t_end) > 1e-9 * t_end:
        raise ValidationError(f"reporting interval {report_dt:g} must divide t_end={t_end:g}")
    grid = report_dt * np.arange(1, n + 1)
    grid[-1] = t_end
    return grid


# ---------------------------------------------------------------------------
# single trajectories

@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    slow_states: Optional[np.ndarray]
    fast_states: np.ndarray
    jumped: np.ndarray
    state_space: StateSpace = field(repr=False, default=None)

    @property
    def jump_times(self):
        return self.times[self.jumped]

    def to_csv(self):
        """CSV text with columns ``t, x_1..x_N, v_label, jumped``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = 0 if self.slow_states is None else self.slow_states.shape[1]
        w.writerow(["t"] + [f"x_{i + 1}" for i in range(n)] + ["v_label", "jumped"])
        for j, t in enumerate(self.times):
            xs = [] if n == 0 else [repr(float(c)) for c in self.slow_states[j]]
            lab = self.state_space.format(int(self.fast_states[j])) if self.state_space else str(int(self.fast_states[j]))
            w.writerow([repr(float(t))] + xs + [lab, int(self.jumped[j])])
        return buf.getvalue()


def _initial(model, x0, v0):
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (model.dim,):
        raise DimensionMismatch(f"x0 must have length {model.dim}")
    return x0, model.state_space.index(v0)


def simulate_coupled(model: SlowFastModel, x0, v0, t_end, seed, h=None, report_dt=None,
                     replica=0) -> Trajectory:
    """One path of the fully coupled process, recorded on a grid and at jumps."""
    h = _check_run(model, t_end, h)
    grid = _report_grid(t_end, h, report_dt)
    x0, v = _initial(model, x0, v0)
    drift, fam, rate = model.drift, model.family, model.rate
    x = x0[None, :].copy()
    vv = np.array([v])
    times, xs, vs, jumped = [0.0], [x0.copy()], [v], [False]
    s, k, g = 0.0, 0, 0
    while True:
        u_gap, u_move = uniform_pair(seed, replica, k + 1)
        t_next = s - np.log1p(-float(u_gap)) / rate
        stop = min(t_next, t_end)
        while g < len(grid) and grid[g] < stop:
            x = advance(drift, x, vv, [grid[g] - s], h)
            s = grid[g]
            times.append(s); xs.append(x[0].copy()); vs.append(int(vv[0])); jumped.append(False)
            g += 1
        x = advance(drift, x, vv, [stop - s], h)
        s = stop
        if t_next <= t_end:
            vv = pick(fam.rows(x, vv), np.array([u_move]))
            k += 1
            times.append(s); xs.append(x[0].copy()); vs.append(int(vv[0])); jumped.append(True)
            while g < len(grid) and grid[g] <= s:
                g += 1
        else:
            while g < len(grid):
                times.append(grid[g]); xs.append(x[0].copy()); vs.append(int(vv[0])); jumped.append(False)
                g += 1
            break
    return Trajectory(np.array(times), np.array(xs), np.array(vs), np.array(jumped, dtype=bool),
                      model.state_space)


def _fast_path(rate, t_end, seed, replica, v, matrix_at):
    times, vs, jumped = [0.0], [v], [False]
    s, k = 0.0, 0
    while True:
        u_gap, u_move = uniform_pair(seed, replica, k + 1)
        s = s - np.log1p(-float(u_gap)) / rate
        if s > t_end:
            break
        k += 1
        v = int(pick(matrix_at(k)[v][None, :], np.array([u_move]))[0])
        times.append(s); vs.append(v); jumped.append(True)
    return np.array(times), np.array(vs), np.array(jumped, dtype=bool)


def simulate_frozen(model: SlowFastModel, x_frozen, v0, t_end, seed, replica=0) -> Trajectory:
    """Fast path with the transition matrix frozen at ``P_{x_frozen}``."""
    _check_run(model, t_end, None)
    x_frozen, v = _initial(model, x_frozen, v0)
    P = model.family.matrix(x_frozen).entries
    t, vs, j = _fast_path(model.rate, t_end, seed, replica, v, lambda k: P)
    return Trajectory(t, None, vs, j, model.state_space)


def simulate_sequence_driven(model: SlowFastModel, x0, v0, seq: JumpSequence, t_end, seed,
                             replica=0) -> Trajectory:
    """Fast path whose ``k``-th jump uses ``P_{seq.points[k-1]}``."""
    _check_run(model, t_end, None)
    _, v = _initial(model, x0, v0)
    fam = model.family

    def matrix_at(k):
        if k > len(seq):
            raise SequenceTooShort(f"jump {k} needs a sequence point; only {len(seq)} given")
        return fam.evaluate(seq.points[k - 1])

    t, vs, j = _fast_path(model.rate, t_end, seed, replica, v, matrix_at)
    return Trajectory(t, None, vs, j, model.state_space)


# ---------------------------------------------------------------------------
# batched Monte Carlo kernels

@dataclass(frozen=True, eq=False)
class CoupledBatch:
    x: np.ndarray              # (M, N) slow state at t_end
    v: np.ndarray              # (M,) fast state at t_end
    jumps: np.ndarray          # (M,) simulated jumps (stops counting once absorbed if skipping)
    frozen_class: Optional[np.ndarray] = None  # (M,) eventual class of the coupled frozen chain


@numba.njit(cache=True)
def _table_kernel(key0, key1, replicas, x0, v0, t_end, rate, cdf, last, table,
                  absorbing, class_of, track, max_frozen, x, v, k, vf, stuck):
    # constant transition matrix and x-independent drift, one replica at a time
    n = x0.shape[0]
    for r in range(replicas.shape[0]):
        rep = replicas[r]
        s = 0.0
        kk = 0
        vv = v0
        for j in range(n):
            x[r, j] = x0[j]
        if absorbing[vv]:
            for j in range(n):
                x[r, j] = x[r, j] + table[vv, j] * (t_end - s)
        else:
            while True:
                u_gap, u_move = philox_pair(key0, key1, rep, np.uint64(kk + 1))
                t_next = s - np.log1p(-u_gap) / rate
                seg = min(t_next, t_end)
                for j in range(n):
                    x[r, j] = x[r, j] + table[vv, j] * (seg - s)
                s = seg
                if t_next > t_end:
                    break
                idx = 0
                for c in range(cdf.shape[1]):
                    if cdf[vv, c] <= u_move:
                        idx += 1
                vv = min(idx, last[vv])
                kk += 1
                if absorbing[vv]:
                    for j in range(n):
                        x[r, j] = x[r, j] + table[vv, j] * (t_end - s)
                    break
        v[r] = vv
        if track:
            steps = 0
            while class_of[vv] < 0:
                if steps > max_frozen:
                    stuck[r] = True
                    break
                u_gap, u_move = philox_pair(key0, key1, rep, np.uint64(kk + 1))
                idx = 0
                for c in range(cdf.shape[1]):
                    if cdf[vv, c] <= u_move:
                        idx += 1
                vv = min(idx, last[vv])
                kk += 1
                steps += 1
        vf[r] = vv
        k[r] = kk


def _coupled_table(model, x0, v0, t_end, seed, replicas, skip_absorbed, track_frozen, max_frozen_steps):
    P = model.family.evaluate(x0)
    S = P.shape[0]
    cdf = np.cumsum(P, axis=1)
    last = S - 1 - np.argmax(P[:, ::-1] > 0, axis=1)
    absorbing = np.zeros(S, dtype=np.bool_)
    if skip_absorbed:
        absorbing[list(model.family.absorbing)] = True
    class_of = decompose(P).class_of.astype(np.int64)
    M = replicas.shape[0]
    x = np.empty((M, model.dim))
    v = np.empty(M, dtype=np.int64)
    k = np.empty(M, dtype=np.int64)
    vf = np.empty(M, dtype=np.int64)
    stuck = np.zeros(M, dtype=np.bool_)
    _table_kernel(*split_seed(seed), replicas, x0, np.int64(v0), float(t_end), float(model.rate),
                       cdf, last.astype(np.int64), model.drift.table, absorbing, class_of,
                       bool(track_frozen), int(max_frozen_steps), x, v, k, vf, stuck)
    if stuck.any():
        raise ResourceLimit("frozen chain failed to reach a closed class")
    return CoupledBatch(x, v, k, class_of[vf] if track_frozen else None)


def coupled_batch(model: SlowFastModel, x0, v0, t_end, seed, replicas, h=None,
                  skip_absorbed=True, track_frozen=False, max_frozen_steps=1_000_000,
                  fast=True) -> CoupledBatch:
    """Final states of the coupled process for many replicas at once.

    With ``skip_absorbed`` a replica sitting in a state declared absorbing by
    the family is integrated straight to ``t_end`` (its remaining jumps are
    no-ops).  With ``track_frozen`` the chain with matrix frozen at ``x0`` is
    driven by the same uniforms and run to absorption; its eventual class has
    exactly the absorption law at ``(x0, v0)`` and serves as a control variate.

    Constant families with table drifts go through a compiled per-replica
    loop that consumes the same draws and returns the same numbers.
    """
    h = _check_run(model, t_end, h)
    x0, v0 = _initial(model, x0, v0)
    replicas = np.asarray(replicas, dtype=np.uint64)
    if model.family.constant_in_x and model.drift.table is not None and fast:
        return _coupled_table(model, x0, v0, t_end, seed, replicas, skip_absorbed,
                              track_frozen, max_frozen_steps)
    M = replicas.shape[0]
    drift, fam, rate = model.drift, model.family, model.rate
    S = model.state_space.size
    x = np.tile(x0, (M, 1))
    v = np.full(M, v0, dtype=np.int64)
    s = np.zeros(M)
    k = np.zeros(M, dtype=np.int64)
    absorbing = np.zeros(S, dtype=bool)
    if skip_absorbed:
        absorbing[list(fam.absorbing)] = True
    if track_frozen:
        P0 = fam.evaluate(x0)
        class_of = decompose(P0).class_of
        vf = v.copy()

    def finish(idx):
        x[idx] = advance(drift, x[idx], v[idx], t_end - s[idx], h)
        s[idx] = t_end

    active = np.arange(M)
    done = absorbing[v[active]]
    finish(active[done])
    active = active[~done]
    while active.size:
        u_gap, u_move = uniform_pair(seed, replicas[active], k[active] + 1)
        t_next = s[active] - np.log1p(-u_gap) / rate
        seg_end = np.minimum(t_next, t_end)
        x[active] = advance(drift, x[active], v[active], seg_end - s[active], h)
        s[active] = seg_end
        hit = t_next <= t_end
        J = active[hit]
        if J.size:
            v[J] = pick(fam.rows(x[J], v[J]), u_move[hit])
            if track_frozen:
                vf[J] = pick(P0[vf[J]], u_move[hit])
            k[J] += 1
        done = absorbing[v[J]]
        finish(J[done])
        active = J[~done]

    frozen_class = None
    if track_frozen:
        pending = np.flatnonzero(class_of[vf] < 0)
        steps = 0
        while pending.size:
            if steps > max_frozen_steps:
                raise ResourceLimit("frozen chain failed to reach a closed class")
            _, u_move = uniform_pair(seed, replicas[pending], k[pending] + 1)
            vf[pending] = pick(P0[vf[pending]], u_move)
            k[pending] += 1
            pending = pending[class_of[vf[pending]] < 0]
            steps += 1
        frozen_class = class_of[vf]
    return CoupledBatch(x, v, k, frozen_class)


@dataclass(frozen=True, eq=False)
class FastBatch:
    v: np.ndarray            # (M,) state at t_end
    jumps: np.ndarray        # (M,) clock events in [0, t_end]
    entry_time: np.ndarray   # (M,) first time in a closed class (inf if not by t_end)


def fast_batch(model: SlowFastModel, v0, t_end, seed, replicas, x_frozen=None,
               sequence: Optional[JumpSequence] = None) -> FastBatch:
    """Frozen (``x_frozen``) or sequence-driven fast chains for many replicas."""
    _check_run(model, t_end, None)
    if (x_frozen is None) == (sequence is None):
        raise ValidationError("give exactly one of x_frozen and sequence")
    fam = model.family
    replicas = np.asarray(replicas, dtype=np.uint64)
    M = replicas.shape[0]
    v0 = model.state_space.index(v0)
    if sequence is None:
        P = fam.evaluate(np.asarray(x_frozen, dtype=float))
        class_of = decompose(P).class_of
        matrix_at = lambda k: P
    else:
        class_of = decompose(fam.evaluate(sequence.ball_center)).class_of
        cache = {}

        def matrix_at(k):
            if k > len(sequence):
                raise SequenceTooShort(f"jump {k} needs a sequence point; only {len(sequence)} given")
            if k not in cache:
                cache.clear()
                cache[k] = fam.evaluate(sequence.points[k - 1])
            return cache[k]

    v = np.full(M, v0, dtype=np.int64)
    s = np.zeros(M)
    jumps = np.zeros(M, dtype=np.int64)
    entry = np.where(class_of[v] >= 0, 0.0, np.inf)
    active = np.arange(M)
    k = 0
    while active.size:
        u_gap, u_move = uniform_pair(seed, replicas[active], k + 1)
        t_next = s[active] - np.log1p(-u_gap) / model.rate
        hit = t_next <= t_end
        active, u_move, t_next = active[hit], u_move[hit], t_next[hit]
        if not active.size:
            break
        k += 1
        v[active] = pick(matrix_at(k)[v[active]], u_move)
        s[active] = t_next
        jumps[active] += 1
        new = np.isinf(entry[active]) & (class_of[v[active]] >= 0)
        entry[active[new]] = t_next[new]
    return FastBatch(v, jumps, entry)


# ---------------------------------------------------------------------------
# averaged (random ODE) limit

def averaged_drift(model: SlowFastModel, i, z, reference=None):
    """Class-``i`` averaged drift at ``z``: ``sum_v a(z, v) mu_i(z; v)``.

    The class law is recomputed at ``z``.  ``reference`` fixes which set of
    states class ``i`` denotes (default: the decomposition at ``z``).
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    P = model.family.evaluate(z)
    d = decompose(P)
    ref = d if reference is None else reference
    if not 0 <= i < ref.class_count:
        raise ClassMissing(f"class index {i} out of range ({ref.class_count} classes)")
    target = ref.ergodic_classes[i]
    if target not in d.ergodic_classes:
        raise ClassMissing(f"class {target} is not closed at z={z.tolist()}")
    law = stationary_law(P, target, z, i)
    states = np.array(law.states)
    vals = model.drift(np.tile(z, (len(states), 1)), states)
    return law.weights @ vals


class _AveragedField:
    """Averaged drift of one class, usable as an RK4 right-hand side."""

    def __init__(self, model, i, x0, reference, mode):
        if mode not in ("state_dependent", "anchored_at_x0"):
            raise ValidationError(f"unknown frozen_measure_mode {mode!r}")
        self.model, self.i, self.reference = model, i, reference
        cls = reference.ergodic_classes[i]
        self.states = np.array(cls)
        self.fixed = None
        if mode == "anchored_at_x0" or model.family.constant_in_x or len(cls) == 1:
            P0 = model.family.evaluate(x0)
            self.fixed = stationary_law(P0, cls, x0, i).weights

    def __call__(self, x, v=None):
        if self.fixed is None:
            return np.stack([averaged_drift(self.model, self.i, xr, self.reference) for xr in x])
        m = len(self.states)
        vals = self.model.drift(np.repeat(x, m, axis=0), np.tile(self.states, x.shape[0]))
        return np.einsum("m,rmn->rn", self.fixed, vals.reshape(x.shape[0], m, -1))


def integrate_ode(rhs, x0, t_end, h, grid=None):
    """Fixed-step RK4 for ``dx/dt = rhs(x)``; returns states at ``grid`` (default: ``t_end``)."""
    grid = np.array([t_end]) if grid is None else np.asarray(grid, dtype=float)
    x = np.asarray(x0, dtype=float)[None, :]
    dummy = np.zeros(1, dtype=np.int64)
    out, s = [], 0.0
    for g in grid:
        x = advance(rhs, x, dummy, [g - s], h)
        s = g
        out.append(x[0].copy())
    return np.array(out)


@dataclass(frozen=True, eq=False)
class AveragedRealization:
    zeta: int
    times: np.ndarray
    path: np.ndarray
    probabilities: np.ndarray   # law of zeta


def class_probabilities(model: SlowFastModel, x0, v0):
    """Decomposition at ``x0`` and the absorption law of ``v0``."""
    x0, v = _initial(model, x0, v0)
    P0 = model.family.evaluate(x0)
    d = decompose(P0)
    return d, absorption_probabilities(P0, d, x0).probabilities[v]


def averaged_branch(model, i, x0, t_end, h=None, grid=None, reference=None,
                    frozen_measure_mode="state_dependent"):
    """Deterministic averaged path given class ``i``."""
    h = t_end / DEFAULT_STEPS if h is None else h
    x0 = np.asarray(x0, dtype=float)
    if reference is None:
        reference = decompose(model.family.evaluate(x0))
    rhs = _AveragedField(model, i, x0, reference, frozen_measure_mode)
    return integrate_ode(rhs, x0, t_end, h, grid)


def simulate_averaged(model: SlowFastModel, x0, v0, t_end, seed, h=None, report_dt=None,
                      frozen_measure_mode="state_dependent", replica=0) -> AveragedRealization:
    """Draw the class index once from the absorption law, then solve its ODE."""
    h = t_end / DEFAULT_STEPS if h is None else float(h)
    grid = _report_grid(t_end, h, report_dt)
    d, q = class_probabilities(model, x0, v0)
    u, _ = uniform_pair(seed, replica, 0)
    zeta = int(pick(q[None, :], np.array([u]))[0])
    path = averaged_branch(model, zeta, x0, t_end, h, grid, d, frozen_measure_mode)
    x0 = np.asarray(x0, dtype=float)
    return AveragedRealization(zeta, np.concatenate([[0.0], grid]), np.vstack([x0, path]), q)


def averaged_expectation(model, x0, v0, t, f, h=None, frozen_measure_mode="state_dependent"):
    """``E f(Xbar_t)`` by summing over the classes: ``sum_i q_i f(y_i(t))``.

    Returns ``(expectation, q, branch_values)``.
    """
    d, q = class_probabilities(model, x0, v0)
    vals = np.zeros(d.class_count)
    for i in range(d.class_count):
        if q[i] > 0:
            y = averaged_branch(model, i, x0, t, h, None, d, frozen_measure_mode)[-1]
            vals[i] = float(np.asarray(f(y[None, :])).reshape(-1)[0])
    return float(q @ vals), q, vals
