import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from slowfast.errors import (AnchorMismatch, ClassStructureVaries, NoAbsorptionBound, NotIrreducible,
                             SingularSystem, ValidationError)
from slowfast.markov import (StateSpace, StochasticMatrix, TransitionFamily, absorption_probabilities,
                             certify_assumptions, class_laws, decompose, frozen_limit_law, limit_law,
                             stationary_law, survival_by_step)
from slowfast.models import build_toy, toy_matrix


def dfs_classes(P):
    """Oracle: closed classes via depth-first reachability from every state."""
    S = len(P)
    reach = []
    for s in range(S):
        seen, stack = {s}, [s]
        while stack:
            u = stack.pop()
            for w in np.flatnonzero(P[u] > 0):
                if w not in seen:
                    seen.add(int(w))
                    stack.append(int(w))
        reach.append(seen)
    closed = [s for s in range(S) if all(s in reach[w] for w in reach[s])]
    classes = {frozenset(reach[s]) for s in closed}
    return classes, frozenset(range(S)) - frozenset(closed)


@st.composite
def stochastic_matrices(draw, size=None):
    S = draw(st.integers(1, 9)) if size is None else size
    pattern = draw(arrays(bool, (S, S)))
    weights = draw(arrays(float, (S, S), elements=st.floats(0.05, 1.0)))
    for r in range(S):
        if not pattern[r].any():
            pattern[r, draw(st.integers(0, S - 1))] = True
    P = np.where(pattern, weights, 0.0)
    return P / P.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# types

def test_state_space_rules():
    with pytest.raises(ValidationError):
        StateSpace(())
    with pytest.raises(ValidationError):
        StateSpace(("a", "a"))
    sp = StateSpace.sign_vectors(2)
    assert sp.size == 4 and sp.labels[0] == (1, 1) and sp.labels[-1] == (-1, -1)
    assert sp.index([1, -1]) == sp.index(np.array([1, -1])) == sp.index(1) == 1
    assert sp.format(1) == "+-"
    with pytest.raises(ValidationError):
        sp.index((2, 2))


@pytest.mark.parametrize("bad", [
    [[0.5, 0.6], [0.0, 1.0]], [[-0.1, 1.1], [0.0, 1.0]], [[1.0, 0.0]], [[np.nan, 1.0], [0.0, 1.0]],
])
def test_stochastic_matrix_validation(bad):
    with pytest.raises(ValidationError):
        StochasticMatrix(bad)


def test_stochastic_matrix_is_read_only():
    P = StochasticMatrix(np.eye(2))
    with pytest.raises(ValueError):
        P.entries[0, 0] = 0.5


# ---------------------------------------------------------------------------
# decompose

def test_decompose_toy_n1():
    d = decompose(build_toy(1, 1.0).family.evaluate(0))
    assert d.ergodic_classes == ((0,), (1,)) and d.transient_set == ()


def test_decompose_identity():
    d = decompose(np.eye(4))
    assert d.class_count == 4 and d.transient_set == ()


def test_decompose_toy_n2_matches_brute_force():
    space, P = toy_matrix(2)
    d = decompose(P)
    classes, transient = dfs_classes(P)
    assert {frozenset(c) for c in d.ergodic_classes} == classes
    assert [space.labels[c[0]] for c in d.ergodic_classes] == [(1, 1), (-1, -1)]
    assert {space.labels[t] for t in d.transient_set} == {(1, -1), (-1, 1)}
    assert frozenset(d.transient_set) == transient


@settings(max_examples=200, deadline=None)
@given(P=stochastic_matrices())
def test_decompose_matches_reachability_oracle(P):
    d = decompose(P)
    classes, transient = dfs_classes(P)
    assert {frozenset(c) for c in d.ergodic_classes} == classes
    assert frozenset(d.transient_set) == transient
    assert sorted(d.recurrent_states + d.transient_set) == list(range(len(P)))


@settings(max_examples=100, deadline=None)
@given(P=stochastic_matrices(), seed=st.integers(0, 2 ** 32 - 1))
def test_decompose_is_relabeling_equivariant(P, seed):
    perm = np.random.default_rng(seed).permutation(len(P))
    Q = P[np.ix_(perm, perm)]            # new state j is old state perm[j]
    d, e = decompose(P), decompose(Q)
    assert {frozenset(perm[list(c)].tolist()) for c in e.ergodic_classes} == \
        {frozenset(c) for c in d.ergodic_classes}


# ---------------------------------------------------------------------------
# absorption

def birth_death():
    P = np.zeros((4, 4))
    P[0, 0] = P[3, 3] = 1.0
    P[1, 0] = P[1, 2] = P[2, 1] = P[2, 3] = 0.5
    return P


def test_birth_death_hand_solution():
    # q1 = 1/2 + q2/2 and q2 = q1/2  =>  q1 = 2/3, q2 = 1/3
    q = absorption_probabilities(birth_death()).probabilities
    assert q[1, 0] == pytest.approx(2 / 3, abs=1e-14)
    assert q[2, 0] == pytest.approx(1 / 3, abs=1e-14)


def test_toy_n2_symmetric_absorption():
    q = absorption_probabilities(toy_matrix(2)[1]).probabilities
    assert np.allclose(q[[1, 2]], 0.5, atol=1e-14)


def test_boundary_rows_are_indicators():
    P = birth_death()
    q = absorption_probabilities(P).probabilities
    assert np.array_equal(q[0], [1, 0]) and np.array_equal(q[3], [0, 1])


def test_nearly_closed_transient_set_is_singular():
    P = np.array([[1 - 1e-15, 1e-15], [0.0, 1.0]])
    with pytest.raises(SingularSystem):
        absorption_probabilities(P)


@settings(max_examples=100, deadline=None)
@given(P=stochastic_matrices())
def test_absorption_rows_are_probability_vectors(P):
    try:
        q = absorption_probabilities(P).probabilities
    except SingularSystem:
        return
    assert np.all(q >= -1e-12)
    assert np.abs(q.sum(axis=1) - 1).max() <= 1e-10


def simulate_absorption(P, v, d, n, rng):
    """Plain-numpy absorption sampler, independent of the library simulators."""
    cdf = np.cumsum(P, axis=1)
    class_of = d.class_of
    state = np.full(n, v)
    live = np.flatnonzero(class_of[state] < 0)
    while live.size:
        u = rng.random(live.size)
        state[live] = np.minimum((cdf[state[live]] <= u[:, None]).sum(axis=1), len(P) - 1)
        live = live[class_of[state[live]] < 0]
    return class_of[state]


def test_absorption_matches_monte_carlo_on_random_chains():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 5:
        P = np.where(rng.random((8, 8)) < 0.3, rng.random((8, 8)) + 0.05, 0.0)
        P[np.arange(8), rng.integers(0, 8, 8)] += 0.1
        P /= P.sum(axis=1, keepdims=True)
        d = decompose(P)
        if d.class_count < 2 or not d.transient_set:
            continue
        q = absorption_probabilities(P, d).probabilities
        v = d.transient_set[0]
        hits = simulate_absorption(P, v, d, 100_000, rng)
        for i in range(d.class_count):
            freq = np.mean(hits == i)
            se = np.sqrt(q[v, i] * (1 - q[v, i]) / 100_000)
            assert abs(freq - q[v, i]) <= 3 * se + 1e-12
        checked += 1


# ---------------------------------------------------------------------------
# stationary laws

def power_iteration(R, tol=1e-13):
    mu = np.full(len(R), 1.0 / len(R))
    lazy = 0.5 * (R + np.eye(len(R)))      # same fixed points, aperiodic
    for _ in range(1_000_000):
        nxt = mu @ lazy
        if np.abs(nxt - mu).sum() < tol:
            return nxt
        mu = nxt
    raise AssertionError("power iteration did not converge")


def test_singleton_class_is_point_mass():
    law = stationary_law(np.eye(2), (1,))
    assert law.weights.tolist() == [1.0]


def test_two_state_class():
    P = np.array([[0.7, 0.3], [0.1, 0.9]])
    law = stationary_law(P, (0, 1))
    assert np.allclose(law.weights, power_iteration(P), atol=1e-12)
    assert np.allclose(law.weights, [0.25, 0.75], atol=1e-12)


def test_doubly_stochastic_class():
    P = np.array([[0.2, 0.5, 0.3], [0.3, 0.2, 0.5], [0.5, 0.3, 0.2]])
    assert np.allclose(stationary_law(P, (0, 1, 2)).weights, 1 / 3, atol=1e-14)


def test_reducible_class_rejected():
    with pytest.raises(NotIrreducible):
        stationary_law(np.eye(3), (0, 1))


def test_open_class_rejected():
    with pytest.raises(ValidationError):
        stationary_law(birth_death(), (1, 2))


@settings(max_examples=100, deadline=None)
@given(W=arrays(float, (5, 5), elements=st.floats(0.0, 1.0)))
def test_stationary_law_on_random_irreducible_classes(W):
    P = W + 0.05 * np.roll(np.eye(5), 1, axis=1)   # a cycle keeps it irreducible
    P /= P.sum(axis=1, keepdims=True)
    law = stationary_law(P, range(5))
    assert np.abs(law.weights @ P - law.weights).sum() <= 1e-10
    assert np.allclose(law.weights, power_iteration(P), atol=1e-8)


# ---------------------------------------------------------------------------
# limit law

def test_toy_n2_limit_law():
    space, P = toy_matrix(2)
    mu = frozen_limit_law(P, space.index((1, -1))).measure
    assert np.allclose(mu, [0.5, 0.0, 0.0, 0.5], atol=1e-14)


def test_limit_law_from_absorbing_state():
    space, P = toy_matrix(2)
    assert np.array_equal(frozen_limit_law(P, 3).measure, [0, 0, 0, 1])


def test_single_class_limit_is_stationary_for_every_start():
    P = np.array([[0.0, 1.0, 0.0], [0.0, 0.7, 0.3], [0.0, 0.1, 0.9]])
    laws = [frozen_limit_law(P, v).measure for v in range(3)]
    assert all(np.allclose(m, [0, 0.25, 0.75], atol=1e-12) for m in laws)


def test_limit_law_support_and_mass():
    P = birth_death()
    mu = frozen_limit_law(P, 1).measure
    assert mu[[1, 2]].sum() == 0 and abs(mu.sum() - 1) < 1e-12


def test_anchor_mismatch():
    P = birth_death()
    prof = absorption_probabilities(P, anchor_x=[0.0])
    with pytest.raises(AnchorMismatch):
        limit_law(prof, class_laws(P, anchor_x=[1.0]), 1)


# ---------------------------------------------------------------------------
# certificates

def test_toy_n2_certificate():
    # from a mixed state one step leaves it with probability 1/2 per jump
    # (1/2 stay, 1/4 to each consensus state), so one step already bounds the
    # unabsorbed mass by 1/2
    cert = certify_assumptions(build_toy(2, 1.0).family, [np.zeros(2), np.ones(2)])
    assert cert.classes_stable and cert.n_tilde == 1 and cert.z0 == pytest.approx(0.5, abs=1e-15)
    assert cert.lipschitz_estimate == 0.0


def test_class_that_exists_only_for_positive_x():
    def evaluate(x):
        if x[0] > 0:
            return np.eye(2)
        return np.array([[0.5, 0.5], [0.0, 1.0]])
    fam = TransitionFamily(evaluate, 2, 1.0)
    with pytest.raises(ClassStructureVaries):
        certify_assumptions(fam, [[-1.0], [1.0]])


def test_no_absorption_bound_within_max_steps():
    P = np.zeros((3, 3))
    P[0, 1] = P[1, 2] = P[2, 2] = 1.0      # absorbed only at the second step
    with pytest.raises(NoAbsorptionBound):
        certify_assumptions(TransitionFamily.constant(P), [[0.0]], max_steps=1)
    assert certify_assumptions(TransitionFamily.constant(P), [[0.0]], max_steps=2).n_tilde == 2


@settings(max_examples=60, deadline=None)
@given(P=stochastic_matrices())
def test_geometric_absorption_envelope(P):
    d = decompose(P)
    try:
        cert = certify_assumptions(TransitionFamily.constant(P), [[0.0]], max_steps=32)
    except NoAbsorptionBound:
        return
    surv = survival_by_step(P, d, 60)
    if not surv.shape[1]:
        return
    k = np.arange(61)
    assert np.all(surv.max(axis=1) <= cert.z0 ** (k // cert.n_tilde) * (1 + 1e-9) + 1e-15)
