"""Experiments that measure the averaging rates and write reports.

Weak error
    ``|E f(X_t) - E f(Xbar_t)|`` over a grid of ``lam``.  The averaged side is
    exact: ``E f(Xbar_t) = sum_i q_i f(y_i(t))`` with one deterministic ODE
    solve per class.  The coupled side is Monte Carlo with a control variate:
    each replica also drives the chain frozen at ``x0`` with its own uniforms
    until that chain is absorbed, and ``f(y_c(t))`` for its class ``c`` is
    subtracted.  Since ``c`` has exactly the law ``q``, the mean of the
    difference is the weak error itself, while most of the class-to-class
    spread cancels.

Fast decay
    Exact total-variation distance of the frozen law at time ``t`` to the
    limit law as a function of the expected jump count ``rate * t``, with a
    log-linear fit and the geometric envelope from the certificate.

Sequence gap
    Distance between frozen and sequence-driven laws for sequences shifted by
    ``delta``, plus the coupled fast marginal at ``t0 = lam**-0.5``.
"""

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import MCErrorDominates, ValidationError
from .laws import JumpSequence, frozen_law, frozen_vs_sequence_gap, poisson_cutoff, tv_distance
from .markov import certify_assumptions, decompose, frozen_limit_law, survival_by_step
from .reports import csv_text, summary_text
from .simulate import SlowFastModel, averaged_expectation, coupled_batch
from .tolerances import DEFAULT

Z95 = float(stats.norm.ppf(0.975))


# ---------------------------------------------------------------------------
# observables

@dataclass(frozen=True)
class Observable:
    """Batch observable ``f(x)`` for ``x`` of shape ``(M, N)``.

    ``norm`` is ``sup|f| + sup|grad f|`` (infinite for the raw coordinate,
    which is only bounded on the reachable set ``|x - x0| <= |a|_inf t``).
    """
    name: str
    fn: Callable = field(repr=False)
    norm: float

    def __call__(self, x):
        return self.fn(np.atleast_2d(np.asarray(x, dtype=float)))


def coordinate(i=0):
    return Observable(f"coordinate[{i}]", lambda x: x[:, i], np.inf)


def tanh_coordinate(i=0):
    return Observable(f"tanh[{i}]", lambda x: np.tanh(x[:, i]), 2.0)


def gaussian_bump(center, width=1.0):
    c = np.asarray(center, dtype=float)
    w = float(width)
    if not w > 0:
        raise ValidationError("bump width must be positive")
    fn = lambda x: np.exp(-0.5 * ((x - c) ** 2).sum(axis=1) / w ** 2)
    return Observable(f"bump[{','.join(map(repr, c.tolist()))};{w!r}]", fn,
                      1.0 + 1.0 / (w * np.sqrt(np.e)))


OBSERVABLES = {"coordinate": coordinate, "tanh": tanh_coordinate, "bump": gaussian_bump}


def make_observable(name, **params) -> Observable:
    try:
        factory = OBSERVABLES[name]
    except KeyError:
        raise ValidationError(f"unknown observable {name!r}; known: {sorted(OBSERVABLES)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for observable {name!r}: {exc}") from None


# ---------------------------------------------------------------------------
# fitting

def ols(x, y):
    """Slope, intercept and R^2 of the least-squares line."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size < 2:
        return np.nan, np.nan, np.nan
    res = stats.linregress(x, y)
    return float(res.slope), float(res.intercept), float(res.rvalue ** 2)


# ---------------------------------------------------------------------------
# weak error

@dataclass(frozen=True, eq=False)
class WeakErrorReport:
    lambda_grid: np.ndarray
    errors: np.ndarray          # |estimated weak error|
    ci_half_width: np.ndarray   # 95% normal half-width
    signed: np.ndarray          # estimate of E f(X_t) - E f(Xbar_t)
    coupled_mean: np.ndarray    # plain sample mean of f(X_t)
    averaged_value: float
    class_probabilities: np.ndarray
    branch_values: np.ndarray
    fitted_slope: float
    fitted_intercept: float
    observable_name: str
    t: float
    sample_count: int
    provenance: dict

    @property
    def dominated(self):
        """Monte Carlo noise too large to trust the error at this ``lam``."""
        return self.ci_half_width > 0.5 * self.errors

    def decreasing(self):
        """Each error below the previous one, or their intervals overlap."""
        e, c = self.errors, self.ci_half_width
        return all(e[j + 1] < e[j] or e[j + 1] - c[j + 1] <= e[j] + c[j]
                   for j in range(len(e) - 1))

    def to_csv(self):
        rows = zip(self.lambda_grid, self.errors, self.ci_half_width, self.signed,
                   self.coupled_mean, self.dominated)
        return csv_text(["lambda", "error", "ci95", "signed_error", "coupled_mean", "mc_dominated"], rows)

    def summary(self):
        return summary_text({
            "observable": self.observable_name,
            "t": self.t,
            "M": self.sample_count,
            "lambda_grid": self.lambda_grid,
            "averaged_value": self.averaged_value,
            "class_probabilities": self.class_probabilities,
            "branch_values": self.branch_values,
            "fitted_slope": self.fitted_slope,
            "fitted_intercept": self.fitted_intercept,
            "fit_points": int((~self.dominated).sum()),
            "decreasing": self.decreasing(),
            **{f"provenance.{k}": v for k, v in self.provenance.items()},
        })


def _provenance(model, **extra):
    out = {"model": model.name, "model_params": model.params, "model_hash": model.fingerprint()}
    out.update(extra)
    out["tolerances"] = vars(DEFAULT)
    return out


def weak_error_experiment(model: SlowFastModel, x0, v0, t, f: Observable,
                          lambda_grid: Sequence[float], M: int, seed: int, h=None,
                          frozen_measure_mode="state_dependent",
                          control_variate=True) -> WeakErrorReport:
    """Weak error of the coupled process against the random-ODE limit, per ``lam``."""
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    if lambda_grid.size == 0:
        raise ValidationError("lambda grid is empty")
    if np.any(lambda_grid <= 0) or np.any(np.diff(lambda_grid) <= 0):
        raise ValidationError("lambda grid must be positive and increasing")
    if M < 1000:
        raise ValidationError(f"need at least 1000 replicas, got {M}")
    if not t > 0:
        raise ValidationError("t must be positive")
    x0 = np.asarray(x0, dtype=float)
    avg, q, branch = averaged_expectation(model, x0, v0, t, f, h, frozen_measure_mode)
    replicas = np.arange(M, dtype=np.uint64)
    signed, half, raw = [], [], []
    for lam in lambda_grid:
        batch = coupled_batch(model.with_lambda(lam), x0, v0, t, seed, replicas, h,
                              track_frozen=control_variate)
        fx = f(batch.x)
        y = fx - branch[batch.frozen_class] if control_variate else fx - avg
        signed.append(float(np.mean(y)))
        half.append(Z95 * float(np.std(y, ddof=1)) / np.sqrt(M))
        raw.append(float(np.mean(fx)))
    signed, half = np.array(signed), np.array(half)
    errors = np.abs(signed)
    ok = ~(half > 0.5 * errors)
    if not ok.all():
        warnings.warn(f"Monte Carlo error dominates at lambda = {lambda_grid[~ok].tolist()}",
                      MCErrorDominates, stacklevel=2)
    slope, icpt, _ = (ols(np.log(lambda_grid[ok]), np.log(errors[ok]))
                      if ok.sum() >= 2 and np.all(errors[ok] > 0) else (np.nan, np.nan, np.nan))
    prov = _provenance(model, seed=seed, x0=x0, v0=model.state_space.format(model.state_space.index(v0)),
                       h=h, frozen_measure_mode=frozen_measure_mode, control_variate=control_variate)
    return WeakErrorReport(lambda_grid, errors, half, signed, np.array(raw), avg, q, branch,
                           slope, icpt, f.name, float(t), int(M), prov)


# ---------------------------------------------------------------------------
# fast-process decay

@dataclass(frozen=True, eq=False)
class DecayReport:
    jump_means: np.ndarray      # rate * t
    times: np.ndarray
    tv_values: np.ndarray
    unabsorbed: np.ndarray      # transient mass at each time
    envelope: np.ndarray        # Poisson average of z0**floor(k / n_tilde)
    rate: float                 # fitted c1 (per unit rate * t)
    prefactor: float            # fitted K
    r_squared: float
    fit_mask: np.ndarray
    discrete_survival: np.ndarray   # worst unabsorbed mass after k steps, k = 0..k_env
    discrete_envelope: np.ndarray
    n_tilde: int
    z0: float
    provenance: dict

    @property
    def envelope_holds(self):
        return bool(np.all(self.unabsorbed <= self.envelope * (1 + 1e-9) + 1e-15))

    @property
    def discrete_envelope_holds(self):
        return bool(np.all(self.discrete_survival <= self.discrete_envelope * (1 + 1e-9) + 1e-15))

    def to_csv(self):
        rows = zip(self.jump_means, self.times, self.tv_values, self.unabsorbed, self.envelope, self.fit_mask)
        return csv_text(["rate_t", "t", "tv", "unabsorbed", "envelope", "in_fit"], rows)

    def summary(self):
        return summary_text({
            "c1_hat": self.rate, "K_hat": self.prefactor, "r_squared": self.r_squared,
            "n_tilde": self.n_tilde, "z0": self.z0,
            "envelope_holds": self.envelope_holds,
            "discrete_envelope_holds": self.discrete_envelope_holds,
            "discrete_steps": len(self.discrete_survival) - 1,
            **{f"provenance.{k}": v for k, v in self.provenance.items()},
        })


def fast_decay_experiment(model: SlowFastModel, x_frozen, v0, grid=None, k_envelope=50,
                          transient_points=1, tail_tol=DEFAULT.poisson_tail, floor=1e-13) -> DecayReport:
    """Exact decay of the frozen law towards its limit.

    ``grid`` holds expected jump counts ``rate * t`` (default ``1..20``).  The
    log-linear fit skips the first ``transient_points`` entries and values at
    or below ``floor`` (round-off level).
    """
    grid = np.arange(1.0, 21.0) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid < 0):
        raise ValidationError("decay grid must be non-empty and non-negative")
    x = np.asarray(x_frozen, dtype=float)
    P = model.family.evaluate(x)
    v = model.state_space.index(v0)
    limit = frozen_limit_law(P, v, x).measure
    cert = certify_assumptions(model.family, [x], max_steps=max(64, k_envelope))
    d = cert.decomposition
    transient = np.zeros(P.shape[0], dtype=bool)
    transient[list(d.transient_set)] = True
    rate = model.rate
    tv, unabs, env = [], [], []
    for m in grid:
        law = frozen_law(P, v, rate, m / rate, tail_tol).law
        tv.append(tv_distance(law, limit))
        unabs.append(float(law[transient].sum()))
        K = poisson_cutoff(m, tail_tol)
        k = np.arange(K + 1)
        w = stats.poisson.pmf(k, m) if m > 0 else (k == 0).astype(float)
        env.append(float(w @ cert.z0 ** (k // cert.n_tilde)) if transient[v] else 0.0)
    tv, unabs, env = map(np.array, (tv, unabs, env))
    surv = survival_by_step(P, d, k_envelope)
    worst = surv.max(axis=1) if surv.shape[1] else np.zeros(k_envelope + 1)
    kk = np.arange(k_envelope + 1)
    mask = (np.arange(grid.size) >= transient_points) & (tv > floor)
    slope, icpt, r2 = ols(grid[mask], np.log(tv[mask])) if mask.sum() >= 2 else (np.nan,) * 3
    prov = _provenance(model, x_frozen=x, v0=model.state_space.format(v), grid=grid,
                       tail_tol=tail_tol, floor=floor, transient_points=transient_points)
    return DecayReport(grid, grid / rate, tv, unabs, env, -slope, float(np.exp(icpt)), r2, mask,
                       worst, cert.z0 ** (kk // cert.n_tilde), cert.n_tilde, cert.z0, prov)


# ---------------------------------------------------------------------------
# sequence gap

@dataclass(frozen=True, eq=False)
class SequenceGapReport:
    deltas: np.ndarray
    gaps: np.ndarray
    ratios: np.ndarray
    linear_coefficient: float     # least-squares C in gap = C * delta
    loglog_slope: float
    ball_radius: float
    truncation_index: int
    t: float
    lam: float
    marginal_lambdas: np.ndarray
    marginal_times: np.ndarray
    marginal_tv: np.ndarray       # coupled fast marginal vs limit law at t0 = lam**-0.5
    marginal_noise: np.ndarray    # expected TV of an exact sample of the same size
    provenance: dict

    @property
    def ratio_spread(self):
        """``max(gap/delta) / min(gap/delta) - 1`` over positive deltas."""
        r = self.ratios[self.deltas > 0]
        if r.size == 0 or r.min() <= 0:
            return np.nan
        return float(r.max() / r.min() - 1.0)

    def to_csv(self):
        return csv_text(["delta", "gap", "gap_over_delta"], zip(self.deltas, self.gaps, self.ratios))

    def marginal_csv(self):
        return csv_text(["lambda", "t0", "tv", "noise_level"],
                        zip(self.marginal_lambdas, self.marginal_times, self.marginal_tv, self.marginal_noise))

    def summary(self):
        return summary_text({
            "t": self.t, "lambda": self.lam, "ball_radius": self.ball_radius,
            "truncation_index": self.truncation_index,
            "linear_coefficient": self.linear_coefficient,
            "loglog_slope": self.loglog_slope, "ratio_spread": self.ratio_spread,
            **{f"provenance.{k}": v for k, v in self.provenance.items()},
        })


def _noise_tv(p, M):
    # E sum|hat p - p| for a multinomial sample, normal approximation
    p = np.asarray(p)
    return float(np.sum(np.sqrt(2 * p * (1 - p) / (np.pi * M))))


def sequence_gap_experiment(model: SlowFastModel, x0, v0, delta_grid, t, lam, direction=None,
                            marginal_lambdas=(), M=10_000, seed=0,
                            tail_tol=DEFAULT.poisson_tail) -> SequenceGapReport:
    """Frozen vs sequence-driven gap for constant sequences at 1-norm distance ``delta``."""
    x0 = np.asarray(x0, dtype=float)
    deltas = np.asarray(delta_grid, dtype=float)
    if deltas.size == 0 or np.any(deltas < 0):
        raise ValidationError("delta grid must be non-empty and non-negative")
    u = np.ones(model.dim) if direction is None else np.asarray(direction, dtype=float)
    u = u / np.abs(u).sum()
    m = model.with_lambda(lam)
    v = m.state_space.index(v0)
    pts = [x0] + [x0 + dl * u for dl in deltas]
    cert = certify_assumptions(m.family, pts)
    radius = cert.ball_radius
    K = poisson_cutoff(m.rate * t, tail_tol)
    gaps = []
    for dl in deltas:
        seq = JumpSequence.shifted(x0, dl * u, K, radius=radius)
        gaps.append(frozen_vs_sequence_gap(m.family, x0, v, seq, m.rate, t, tail_tol, radius).gap)
    gaps = np.array(gaps)
    pos = deltas > 0
    ratios = np.where(pos, gaps / np.where(pos, deltas, 1.0), 0.0)
    coef = float(deltas @ gaps / (deltas @ deltas)) if np.any(pos) else np.nan
    ok = pos & (gaps > 0)
    slope = ols(np.log(deltas[ok]), np.log(gaps[ok]))[0] if ok.sum() >= 2 else np.nan

    lams = np.asarray(marginal_lambdas, dtype=float)
    t0s, mtv, noise = 1.0 / np.sqrt(lams), [], []
    limit = frozen_limit_law(m.family.evaluate(x0), v, x0).measure
    S = m.state_space.size
    for lm, t0 in zip(lams, t0s):
        batch = coupled_batch(m.with_lambda(lm), x0, v, t0, seed, np.arange(M, dtype=np.uint64))
        hist = np.bincount(batch.v, minlength=S) / M
        mtv.append(tv_distance(hist, limit))
        noise.append(_noise_tv(limit, M))
    prov = _provenance(m, x0=x0, v0=m.state_space.format(v), direction=u, seed=seed, M=M,
                       tail_tol=tail_tol)
    return SequenceGapReport(deltas, gaps, ratios, coef, slope, radius, K, float(t), float(lam),
                             lams, t0s, np.array(mtv), np.array(noise), prov)
