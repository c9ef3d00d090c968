"""The acceptance suite: eight checks with fixed seeds and thresholds.

Every check returns a :class:`CriterionResult`; :func:`run_suite` writes one
``criterion_<k>.txt`` summary per check, CSV tables where useful and an
``acceptance.txt`` overview.  Wall-clock times go to ``timings.txt`` only, so
all other report files are byte-identical between runs with the same seed.
"""

import filecmp
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .harness import fast_decay_experiment, sequence_gap_experiment, tanh_coordinate, weak_error_experiment
from .laws import frozen_law
from .markov import StochasticMatrix, absorption_probabilities, decompose
from .models import build_coupled_navigation, build_ergodic_class_variant, build_toy
from .reports import atomic_write, csv_text, summary_text
from .simulate import averaged_drift, coupled_batch, fast_batch


@dataclass(frozen=True)
class Thresholds:
    sigma: float = 3.0              # Monte Carlo agreement, in standard errors
    r_squared: float = 0.95         # log-linear decay fit quality
    slope: float = -0.4             # weak-error slope must not exceed this
    gap_spread: float = 0.5         # allowed relative spread of gap / delta
    drift_tol: float = 1e-10        # averaged drift vs hand formula
    exact_tol: float = 1e-12        # linear solve vs exact rational value
    runtime_1: float = 5.0
    runtime_2: float = 30.0
    runtime_3: float = 5.0
    runtime_4: float = 10.0
    runtime_5: float = 600.0
    runtime_6: float = 600.0
    runtime_8: float = 60.0


@dataclass(frozen=True)
class Profile:
    name: str
    random_matrices: int
    absorb_M: int
    weak_M: int
    lambda_grid: tuple
    poisson_M: int


PROFILES = {
    "full": Profile("full", 200, 100_000, 100_000, (10.0, 100.0, 1000.0, 10000.0), 100_000),
    "quick": Profile("quick", 50, 20_000, 20_000, (10.0, 100.0, 1000.0), 20_000),
}


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    values: dict
    tables: dict = field(default_factory=dict)   # file name -> CSV text
    runtime: float = 0.0

    def line(self):
        return f"criterion {self.number} {self.title}: {'PASS' if self.passed else 'FAIL'}"


# ---------------------------------------------------------------------------
# oracles used only here

def reachability_classes(P):
    """Closed classes and transient states from the transitive closure.

    ``v`` is recurrent iff every state reachable from ``v`` reaches ``v`` back.
    """
    A = (np.asarray(P) > 0) | np.eye(len(P), dtype=bool)
    R = A.copy()
    while True:
        R2 = (R.astype(np.int64) @ R.astype(np.int64)) > 0
        if (R2 == R).all():
            break
        R = R2
    recurrent = [v for v in range(len(P)) if all(R[w, v] for w in np.flatnonzero(R[v]))]
    classes = {frozenset(np.flatnonzero(R[v]).tolist()) for v in recurrent}
    transient = frozenset(range(len(P))) - frozenset(recurrent)
    return classes, transient


def random_sparse_chain(rng, size=8):
    density = rng.uniform(0.1, 0.4)
    pattern = rng.random((size, size)) < density
    for r in np.flatnonzero(~pattern.any(axis=1)):
        pattern[r, rng.integers(size)] = True
    P = np.where(pattern, rng.random((size, size)) + 0.05, 0.0)
    return P / P.sum(axis=1, keepdims=True)


def toy3_exact_absorption():
    """``P(hit -e | start (1,1,-1))`` for the n = 3 toy, in exact arithmetic.

    Only the number ``k`` of ``+1`` entries matters.  Dropping self-loops, a
    flip from ``k`` ones goes down with probability ``k / 3``, so with ``h_k``
    the probability of reaching ``k = 0``: ``h1 = 1/3 + 2/3 h2`` and
    ``h2 = 2/3 h1``.
    """
    # embedded chain of the number of +1 coordinates (self-loops removed)
    down = {1: Fraction(1, 3), 2: Fraction(2, 3)}   # k -> k - 1
    up = {k: 1 - down[k] for k in down}             # k -> k + 1
    # h1 = down1 * 1 + up1 * h2,  h2 = down2 * h1 + up2 * 0
    h1 = down[1] / (1 - up[1] * down[2])
    return down[2] * h1


# ---------------------------------------------------------------------------
# criteria

def criterion_1(seed, profile, th):
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(profile.random_matrices):
        P = random_sparse_chain(rng)
        d = decompose(StochasticMatrix(P))
        classes, transient = reachability_classes(P)
        if {frozenset(c) for c in d.ergodic_classes} != classes or frozenset(d.transient_set) != transient:
            mismatches += 1
    return CriterionResult(1, "decomposition oracle equivalence", mismatches == 0,
                           {"matrices": profile.random_matrices, "mismatches": mismatches})


def criterion_2(seed, profile, th):
    model = build_toy(3, 1.0)
    P = model.family.evaluate(np.zeros(3))
    d = decompose(P)
    q = absorption_probabilities(P, d).probabilities
    minus = d.ergodic_classes.index((model.state_space.index((-1, -1, -1)),))
    M = profile.absorb_M
    rows, worst = [], 0.0
    for j, v in enumerate(d.transient_set):
        reps = np.arange(j * M, (j + 1) * M, dtype=np.uint64)
        b = coupled_batch(model, np.zeros(3), v, 1e-9, seed, reps, track_frozen=True)
        freq = float(np.mean(b.frozen_class == minus))
        p = q[v, minus]
        z = abs(freq - p) / np.sqrt(p * (1 - p) / M)
        worst = max(worst, z)
        rows.append((model.state_space.format(v), p, freq, z))
    exact = toy3_exact_absorption()
    solved = q[model.state_space.index((1, 1, -1)), minus]
    exact_ok = abs(solved - float(exact)) <= th.exact_tol
    values = {"replicas_per_state": M, "worst_z": worst, "q_minus_e_at_(1,1,-1)": solved,
              "independent_exact": str(exact), "contested_value": "1/4",
              "contested_value_matches": abs(solved - 0.25) <= th.exact_tol}
    table = csv_text(["state", "q_minus_e", "mc_frequency", "z"], rows)
    return CriterionResult(2, "absorption correctness", worst <= th.sigma and exact_ok, values,
                           {"criterion_2_absorption.csv": table})


def criterion_3(seed, profile, th):
    model = build_toy(2, 1.0)
    r = fast_decay_experiment(model, np.zeros(2), (1, -1), k_envelope=50)
    ok = r.r_squared >= th.r_squared and r.rate > 0 and r.discrete_envelope_holds and r.envelope_holds
    return CriterionResult(3, "fast-process exponential decay", ok,
                           {"c1_hat": r.rate, "K_hat": r.prefactor, "r_squared": r.r_squared,
                            "n_tilde": r.n_tilde, "z0": r.z0,
                            "discrete_envelope_holds": r.discrete_envelope_holds,
                            "poisson_envelope_holds": r.envelope_holds},
                           {"criterion_3_decay.csv": r.to_csv()})


def criterion_4(seed, profile, th):
    model = build_coupled_navigation(2, 10.0, 2.0)
    deltas = [1e-3, 1e-2, 1e-1]
    r = sequence_gap_experiment(model, [0.3, 0.1], (1, -1), deltas, 0.5, 10.0)
    inside = max(deltas) <= r.ball_radius
    ok = inside and r.ratio_spread < th.gap_spread
    return CriterionResult(4, "sequence gap linearity", ok,
                           {"ball_radius": r.ball_radius, "ratio_spread": r.ratio_spread,
                            "ratios": r.ratios, "linear_coefficient": r.linear_coefficient},
                           {"criterion_4_gap.csv": r.to_csv()})


def _weak(model, profile, seed, th, tag):
    r = weak_error_experiment(model, [0.5, 0.0], (1, -1), 1.0, tanh_coordinate(0),
                              profile.lambda_grid, profile.weak_M, seed)
    points = int((~r.dominated).sum())
    ok = r.decreasing() and points >= 2 and r.fitted_slope <= th.slope
    values = {f"{tag}.slope": r.fitted_slope, f"{tag}.fit_points": points,
              f"{tag}.decreasing": r.decreasing(), f"{tag}.errors": r.errors,
              f"{tag}.ci95": r.ci_half_width}
    return ok, values, r.to_csv()


def criterion_5(seed, profile, th):
    ok_a, va, ta = _weak(build_toy(2, 10.0), profile, seed, th, "toy")
    ok_b, vb, tb = _weak(build_coupled_navigation(2, 10.0, 2.0), profile, seed, th, "navigation")
    return CriterionResult(5, "weak error rate", ok_a and ok_b, {**va, **vb},
                           {"criterion_5_toy.csv": ta, "criterion_5_navigation.csv": tb})


def criterion_6(seed, profile, th):
    p = 0.5
    model = build_ergodic_class_variant(2, 10.0, p)
    table = model.drift.table
    B = 4
    worst = 0.0
    for z in ([0.0, 0.0], [0.5, -1.0], [2.0, 3.0]):
        for i, (e, mirror) in enumerate(((0, B), (B - 1, B + 1))):
            expected = (1 - p) * table[e] + p * table[mirror]
            worst = max(worst, float(np.abs(averaged_drift(model, i, z) - expected).max()))
    ok_w, vw, tw = _weak(model, profile, seed, th, "ergodic")
    return CriterionResult(6, "ergodic-class generalization", worst <= th.drift_tol and ok_w,
                           {"drift_max_deviation": worst, **vw}, {"criterion_6_ergodic.csv": tw})


POISSON_PAIRS = ((0.5, 1.0), (1.0, 1.0), (0.2, 10.0))


def criterion_8(seed, profile, th):
    model = build_toy(2, 1.0)
    P = model.family.evaluate(np.zeros(2))
    M = profile.poisson_M
    v0 = model.state_space.index((1, -1))
    rows, worst = [], 0.0
    for t, lam in POISSON_PAIRS:
        m = model.with_lambda(lam)
        exact = frozen_law(P, v0, m.rate, t).law
        b = fast_batch(m, v0, t, seed, np.arange(M, dtype=np.uint64), x_frozen=np.zeros(2))
        hist = np.bincount(b.v, minlength=len(exact)) / M
        for s, (pe, ph) in enumerate(zip(exact, hist)):
            sd = np.sqrt(pe * (1 - pe) / M)
            z = abs(ph - pe) / sd if sd > 0 else (0.0 if ph == pe else np.inf)
            worst = max(worst, z)
            rows.append((t, lam, model.state_space.format(s), pe, ph, z))
    return CriterionResult(8, "poissonization consistency", worst <= th.sigma,
                           {"replicas": M, "worst_z": worst},
                           {"criterion_8_poisson.csv": csv_text(["t", "lambda", "state", "exact", "empirical", "z"], rows)})


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
            5: criterion_5, 6: criterion_6, 8: criterion_8}


def _write(out, results, seed, profile, extra=None):
    out = Path(out)
    lines = [f"profile = {profile.name}", f"seed = {seed}"] + [r.line() for r in results]
    lines.append(f"overall: {'PASS' if all(r.passed for r in results) else 'FAIL'}")
    atomic_write(out / "acceptance.txt", "\n".join(lines) + "\n")
    for r in results:
        atomic_write(out / f"criterion_{r.number}.txt",
                     summary_text({"title": r.title, "passed": r.passed, **r.values}))
        for name, text in r.tables.items():
            atomic_write(out / name, text)


def run_criteria(out, seed=2024, profile="full", thresholds=None, only=None, log=print):
    """Run the data criteria (all but reproducibility) and write their reports."""
    prof = PROFILES[profile] if isinstance(profile, str) else profile
    th = thresholds or Thresholds()
    results = []
    for k, fn in CRITERIA.items():
        if only is not None and k not in only:
            continue
        t0 = time.perf_counter()
        r = fn(seed, prof, th)
        r.runtime = time.perf_counter() - t0
        limit = getattr(th, f"runtime_{k}")
        r.values["runtime_limit_s"] = limit
        r.values["runtime_within_limit"] = r.runtime <= limit
        r.passed = r.passed and r.runtime <= limit
        results.append(r)
        if log:
            log(f"{r.line()}  [{r.runtime:.2f} s]")
    _write(out, results, seed, prof)
    atomic_write(Path(out) / "timings.txt", "".join(f"criterion {r.number}: {r.runtime:.3f} s\n" for r in results))
    return results


def same_reports(a, b):
    """Names of report files that differ between two output directories."""
    a, b = Path(a), Path(b)
    names = sorted(({p.name for p in a.iterdir()} | {p.name for p in b.iterdir()}) - {"timings.txt"})
    return [n for n in names if not ((a / n).exists() and (b / n).exists()
                                     and filecmp.cmp(a / n, b / n, shallow=False))]


def criterion_7(seed, thresholds=None, profile="quick", runner=None):
    """Run the suite twice with one seed and compare every report byte for byte."""
    runner = runner or (lambda out: run_criteria(out, seed, profile, thresholds, log=None))
    with tempfile.TemporaryDirectory() as tmp:
        first, second = Path(tmp, "first"), Path(tmp, "second")
        runner(first)
        runner(second)
        differ = same_reports(first, second)
        count = len([p for p in first.iterdir() if p.name != "timings.txt"])
    return CriterionResult(7, "reproducibility", not differ,
                           {"profile": profile, "files_compared": count, "files_differing": differ})


def run_suite(out, seed=2024, profile="full", thresholds=None, log=print):
    """All eight criteria; reproducibility reruns the suite in the quick profile."""
    results = run_criteria(out, seed, profile, thresholds, log=log)
    t0 = time.perf_counter()
    r7 = criterion_7(seed, thresholds)
    r7.runtime = time.perf_counter() - t0
    if log:
        log(f"{r7.line()}  [{r7.runtime:.2f} s]")
    results = sorted(results + [r7], key=lambda r: r.number)
    prof = PROFILES[profile] if isinstance(profile, str) else profile
    _write(out, results, seed, prof)
    atomic_write(Path(out) / "timings.txt", "".join(f"criterion {r.number}: {r.runtime:.3f} s\n" for r in results))
    return results
