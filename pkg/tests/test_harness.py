import warnings

import numpy as np
import pytest

from slowfast.errors import MCErrorDominates, ValidationError
from slowfast.harness import (coordinate, fast_decay_experiment, gaussian_bump, make_observable, ols,
                              sequence_gap_experiment, tanh_coordinate, weak_error_experiment)
from slowfast.models import build_coupled_navigation, build_toy
from slowfast.simulate import DriftField, SlowFastModel


def v_blind_toy(lam):
    """Toy chain with a drift that ignores the fast state."""
    toy = build_toy(2, lam)
    drift = DriftField.from_table(np.tile([0.4, -0.2], (4, 1)))
    return SlowFastModel(drift, toy.family, lam, toy.state_space, 2, 2, "v_blind")


def test_fast_state_independent_drift_has_no_weak_error():
    r = weak_error_experiment(v_blind_toy(1.0), [0.0, 0.0], (1, -1), 1.0, tanh_coordinate(0),
                              [1.0, 10.0], 2000, seed=3)
    assert np.all(r.errors <= 1e-12)
    assert r.averaged_value == pytest.approx(np.tanh(0.4), abs=1e-12)


def test_toy_weak_error_shrinks():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MCErrorDominates)
        r = weak_error_experiment(build_toy(2, 1.0), [0.5, 0.0], (1, -1), 1.0, tanh_coordinate(0),
                                  [10.0, 100.0, 1000.0], 20_000, seed=1)
    assert r.decreasing()
    assert r.errors[0] > 5 * r.ci_half_width[0]
    assert -1.3 < r.fitted_slope < -0.7
    assert r.class_probabilities.tolist() == [0.5, 0.5]


def test_control_variate_and_plain_estimators_agree():
    kw = dict(model=build_toy(2, 1.0), x0=[0.5, 0.0], v0=(1, -1), t=1.0, f=tanh_coordinate(0),
              lambda_grid=[5.0], M=20_000, seed=2)
    a = weak_error_experiment(**kw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MCErrorDominates)
        b = weak_error_experiment(**kw, control_variate=False)
    assert a.ci_half_width[0] < b.ci_half_width[0]
    assert abs(a.signed[0] - b.signed[0]) <= a.ci_half_width[0] + b.ci_half_width[0]


def test_dominated_points_trigger_warning():
    with pytest.warns(MCErrorDominates):
        r = weak_error_experiment(build_toy(2, 1.0), [0.5, 0.0], (1, -1), 1.0, tanh_coordinate(0),
                                  [1e5], 1000, seed=0, control_variate=False)
    assert r.dominated.all()


def test_weak_error_report_is_reproducible():
    kw = dict(model=build_toy(2, 1.0), x0=[0.5, 0.0], v0=(1, -1), t=0.5, f=coordinate(1),
              lambda_grid=[3.0, 30.0], M=1000, seed=9)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MCErrorDominates)
        assert weak_error_experiment(**kw).to_csv() == weak_error_experiment(**kw).to_csv()


@pytest.mark.parametrize("kw", [
    dict(lambda_grid=[]),
    dict(lambda_grid=[10.0, 1.0]),
    dict(lambda_grid=[0.0, 1.0]),
    dict(M=999),
    dict(t=0.0),
])
def test_weak_error_validation(kw):
    args = dict(model=build_toy(2, 1.0), x0=[0.5, 0.0], v0=(1, -1), t=1.0, f=tanh_coordinate(0),
                lambda_grid=[1.0], M=1000, seed=0)
    args.update(kw)
    with pytest.raises(ValidationError):
        weak_error_experiment(**args)


# ---------------------------------------------------------------------------
# fast decay

def test_decay_from_absorbing_start_is_zero():
    r = fast_decay_experiment(build_toy(2, 1.0), [0.0, 0.0], (1, 1))
    assert np.all(r.tv_values == 0) and np.all(r.envelope == 0)


def test_decay_rate_independent_of_mixed_start():
    model = build_toy(3, 1.0)
    a = fast_decay_experiment(model, np.zeros(3), (1, 1, -1))
    b = fast_decay_experiment(model, np.zeros(3), (1, -1, -1))
    assert a.rate == pytest.approx(b.rate, rel=0.1)
    assert a.r_squared >= 0.95 and a.rate > 0


def test_decay_envelopes_hold():
    r = fast_decay_experiment(build_coupled_navigation(3, 1.0, 2.0), [0.2, 0.0, -0.1], (1, -1, 1))
    assert r.envelope_holds and r.discrete_envelope_holds
    assert np.all(np.diff(r.unabsorbed) <= 1e-15)


def test_decay_validation():
    with pytest.raises(ValidationError):
        fast_decay_experiment(build_toy(2, 1.0), [0.0, 0.0], (1, -1), grid=[])


# ---------------------------------------------------------------------------
# sequence gap

def test_sequence_gap_linear_in_distance():
    r = sequence_gap_experiment(build_coupled_navigation(2, 10.0, 2.0), [0.3, 0.1], (1, -1),
                                [0.0, 1e-3, 1e-2, 1e-1], 0.5, 10.0)
    assert r.gaps[0] == 0.0
    assert np.all(r.gaps[1:] > 0)
    assert r.ratio_spread < 0.5
    assert 0.9 < r.loglog_slope < 1.1


def test_coupled_marginal_approaches_limit():
    r = sequence_gap_experiment(build_coupled_navigation(2, 10.0, 2.0), [0.3, 0.1], (1, -1),
                                [1e-2], 0.5, 10.0, marginal_lambdas=(10.0, 1000.0), M=4000, seed=4)
    assert r.marginal_tv[1] < r.marginal_tv[0]
    assert r.marginal_tv[1] < 3 * r.marginal_noise[1]
    assert r.marginal_csv().splitlines()[0] == "lambda,t0,tv,noise_level"


def test_sequence_gap_validation():
    with pytest.raises(ValidationError):
        sequence_gap_experiment(build_coupled_navigation(2, 10.0, 2.0), [0.3, 0.1], (1, -1), [], 0.5, 10.0)


# ---------------------------------------------------------------------------
# observables and fitting

def test_observables():
    x = np.array([[0.0, 2.0], [1.0, -1.0]])
    assert np.array_equal(coordinate(1)(x), [2.0, -1.0])
    assert np.allclose(tanh_coordinate(0)(x), np.tanh([0.0, 1.0]))
    assert np.allclose(gaussian_bump([0.0, 2.0])(x), [1.0, np.exp(-5.0)])
    assert coordinate().norm == np.inf and tanh_coordinate().norm == 2.0
    assert gaussian_bump([0, 0], 2.0).norm == pytest.approx(1 + 1 / (2 * np.sqrt(np.e)))
    assert make_observable("tanh", i=1).name == "tanh[1]"
    for bad in (lambda: make_observable("cos"), lambda: make_observable("tanh", j=0),
                lambda: gaussian_bump([0.0], 0.0)):
        with pytest.raises(ValidationError):
            bad()


def test_ols_recovers_line():
    s, i, r2 = ols([1, 2, 3, 4], [3, 5, 7, 9])
    assert (s, i, r2) == pytest.approx((2.0, 1.0, 1.0))
    assert np.isnan(ols([1.0], [2.0])[0])
