import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from slowfast.errors import (BallViolation, DimensionMismatch, SequenceTooShort, TruncationInsufficient,
                             ValidationError)
from slowfast.laws import (JumpSequence, discrete_law, frozen_law, frozen_vs_sequence_gap, poisson_cutoff,
                           poissonize, tv_distance)
from slowfast.markov import decompose, frozen_limit_law
from slowfast.models import build_coupled_navigation, build_toy, toy_matrix
from slowfast.simulate import fast_batch


def test_absorbing_start_gives_constant_trajectory():
    laws = discrete_law(toy_matrix(2)[1], 0, 10).laws
    assert np.all(laws == np.eye(4)[0])


def test_one_step_law_by_enumeration():
    # from (1,-1): coordinate 1 or 2 picked w.p. 1/2 each, flip accepted w.p. 1/2
    #   flip coordinate 1 -> (-1,-1) w.p. 1/4, flip coordinate 2 -> (1,1) w.p. 1/4,
    #   rejected -> stay w.p. 1/2
    space, P = toy_matrix(2)
    law = discrete_law(P, space.index((1, -1)), 1).laws[1]
    expected = np.zeros(4)
    expected[space.index((1, 1))] = 0.25
    expected[space.index((-1, -1))] = 0.25
    expected[space.index((1, -1))] = 0.5
    assert np.array_equal(law, expected)


def test_constant_sequence_equals_frozen():
    fam = build_coupled_navigation(2, 1.0, 3.0).family
    x = np.array([0.2, -0.7])
    seq = JumpSequence.shifted(x, np.zeros(2), 12)
    a = discrete_law(seq, 1, 12, fam).laws
    b = discrete_law(fam.evaluate(x), 1, 12).laws
    assert np.allclose(a, b, atol=1e-15)


def test_sequence_too_short():
    fam = build_coupled_navigation(2, 1.0, 3.0).family
    with pytest.raises(SequenceTooShort):
        discrete_law(JumpSequence.shifted(np.zeros(2), np.zeros(2), 3), 1, 4, fam)


def test_sequence_ball_validation():
    with pytest.raises(BallViolation):
        JumpSequence(((0.5, 0.0),), (0.0, 0.0), 0.1)
    with pytest.raises(DimensionMismatch):
        JumpSequence(((0.0,),), (0.0, 0.0), 1.0)
    assert JumpSequence.from_points([0.0, 0.0], [[0.1, 0.1], [0.0, -0.3]]).sup_distance == pytest.approx(0.3)


# ---------------------------------------------------------------------------
# poissonization

def test_time_zero_is_point_mass():
    traj = discrete_law(toy_matrix(2)[1], 1, 5)
    r = poissonize(traj, 4.0, 0.0)
    assert np.array_equal(r.law, np.eye(4)[1]) and r.truncation_index == 0
    assert np.array_equal(poissonize(traj, 0.0, 3.0).law, traj.laws[0])


def toy2_closed_form(m):
    # every jump leaves a mixed state w.p. 1/2, to either consensus state
    stay = np.exp(-m / 2)
    return np.array([(1 - stay) / 2, stay, 0.0, (1 - stay) / 2])


def test_toy_law_at_three_expected_jumps():
    space, P = toy_matrix(2)
    law = frozen_law(P, 1, 3.0, 1.0).law
    assert np.allclose(law, toy2_closed_form(3.0), atol=1e-12)
    limit = frozen_limit_law(P, 1).measure
    assert tv_distance(law, limit) == pytest.approx(2 * np.exp(-1.5), abs=1e-12)


def test_toy_law_against_a_million_samples():
    model = build_toy(2, 1.5)           # rate 3, t = 1
    exact = frozen_law(model.family.evaluate(0), 1, model.rate, 1.0).law
    M = 1_000_000
    b = fast_batch(model, 1, 1.0, 99, np.arange(M, dtype=np.uint64), x_frozen=np.zeros(2))
    hist = np.bincount(b.v, minlength=4) / M
    se = np.sqrt(exact * (1 - exact) / M)
    assert np.all(np.abs(hist - exact) <= 3 * se + 1e-12)


def test_truncation_insufficient():
    traj = discrete_law(toy_matrix(2)[1], 1, 5)
    with pytest.raises(TruncationInsufficient):
        poissonize(traj, 10.0, 1.0)


def test_cutoff_is_minimal():
    for mean in (0.3, 3.0, 40.0):
        K = poisson_cutoff(mean, 1e-12)
        assert stats.poisson.sf(K, mean) < 1e-12 <= stats.poisson.sf(K - 1, mean)


@settings(max_examples=60, deadline=None)
@given(m=st.floats(0.0, 60.0), tail=st.sampled_from([1e-6, 1e-9, 1e-12]))
def test_poissonized_law_is_probability_vector(m, tail):
    P = build_toy(3, 1.0).family.evaluate(0)
    K = poisson_cutoff(m, tail)
    r = poissonize(discrete_law(P, 2, K), m, 1.0, tail)
    assert abs(r.law.sum() - 1) <= 1e-10 and r.tail_mass <= tail * (1 + 1e-9)
    assert np.all(r.law >= 0)


@settings(max_examples=40, deadline=None)
@given(t1=st.floats(0.0, 10.0), dt=st.floats(0.0, 10.0))
def test_class_mass_is_monotone_in_time(t1, dt):
    P = build_toy(3, 1.0).family.evaluate(0)
    d = decompose(P)
    rec = list(d.recurrent_states)
    a = frozen_law(P, 2, 1.0, t1).law[rec].sum()
    b = frozen_law(P, 2, 1.0, t1 + dt).law[rec].sum()
    assert b >= a - 1e-12


def test_exponential_decay_fit():
    P = build_toy(3, 1.0).family.evaluate(0)
    limit = frozen_limit_law(P, 2).measure
    m = np.arange(1.0, 21.0)
    tv = np.array([tv_distance(frozen_law(P, 2, 1.0, t).law, limit) for t in m])
    res = stats.linregress(m[1:], np.log(tv[1:]))
    assert res.slope < 0 and res.rvalue ** 2 >= 0.95


# ---------------------------------------------------------------------------
# total variation

def test_tv_conventions():
    assert tv_distance([0.2, 0.8], [0.2, 0.8]) == 0
    assert tv_distance([1, 0], [0, 1]) == 2
    with pytest.raises(DimensionMismatch):
        tv_distance([1, 0], [1, 0, 0])


# ---------------------------------------------------------------------------
# frozen vs sequence-driven

def nav_setup(beta=2.0):
    fam = build_coupled_navigation(2, 10.0, beta).family
    return fam, np.array([0.3, 0.1])


def test_gap_zero_for_constant_sequence():
    fam, x = nav_setup()
    g = frozen_vs_sequence_gap(fam, x, 1, JumpSequence.shifted(x, np.zeros(2), 40), 20.0, 0.5)
    assert g.gap == 0.0


def test_gap_zero_for_decoupled_family():
    fam = build_toy(2, 1.0).family
    x = np.zeros(2)
    seq = JumpSequence.shifted(x, [5.0, -3.0], 40)
    assert frozen_vs_sequence_gap(fam, x, 1, seq, 20.0, 0.5).gap == 0.0


def test_gap_requires_perturbation_ball():
    fam, x = nav_setup()
    seq = JumpSequence.shifted(x, [0.4, 0.4], 40)     # radius is 1/2
    with pytest.raises(BallViolation):
        frozen_vs_sequence_gap(fam, x, 1, seq, 20.0, 0.5)


def test_gap_requires_sequence_length():
    fam, x = nav_setup()
    with pytest.raises(SequenceTooShort):
        frozen_vs_sequence_gap(fam, x, 1, JumpSequence.shifted(x, [0.01, 0.0], 3), 20.0, 0.5)


def test_gap_centre_must_be_x():
    fam, x = nav_setup()
    with pytest.raises(ValidationError):
        frozen_vs_sequence_gap(fam, x, 1, JumpSequence.shifted(x + 0.1, [0.0, 0.0], 40), 20.0, 0.5)


def test_gap_is_linear_in_distance():
    fam, x = nav_setup()
    ratios = []
    for delta in (1e-3, 1e-2, 1e-1):
        seq = JumpSequence.shifted(x, [delta / 2, delta / 2], 60)
        g = frozen_vs_sequence_gap(fam, x, 1, seq, 20.0, 0.5)
        ratios.append(g.ratio)
    ratios = np.array(ratios)
    assert ratios.min() > 0 and ratios.max() / ratios.min() < 1.5
