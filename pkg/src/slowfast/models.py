"""Concrete slow-fast models and a name -> builder registry.

All built-in models move ``n`` one-dimensional particles with velocities in
``{-1, +1}``; each particle carries its own rate-``lam`` clock, so the fast
chain jumps at the aggregated rate ``n * lam``.  At a jump one particle is
chosen uniformly and flips with some acceptance probability.
"""

from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .errors import ValidationError
from .markov import StateSpace, TransitionFamily
from .simulate import DriftField, SlowFastModel


def _flip_table(space):
    """``table[v, i]`` = index of ``v`` with coordinate ``i`` flipped."""
    n = len(space.labels[0])
    table = np.empty((space.size, n), dtype=np.int64)
    for s, lab in enumerate(space.labels):
        for i in range(n):
            flipped = list(lab)
            flipped[i] = -flipped[i]
            table[s, i] = space.index(tuple(flipped))
    return table


def _check_n(n, hi):
    if not (isinstance(n, (int, np.integer)) and 1 <= n <= hi):
        raise ValidationError(f"number of particles must be an integer in [1, {hi}], got {n!r}")
    return int(n)


def _check_lam(lam):
    if not (np.isfinite(lam) and lam > 0):
        raise ValidationError(f"lam must be positive, got {lam!r}")
    return float(lam)


def toy_matrix(n, switch_probability: Optional[Callable] = None, flip_acceptance=0.5):
    """Consensus chain on ``{-1, +1}**n``: only single flips, ``+-e`` absorbing.

    ``switch_probability(v, i)`` gives ``P(v, v_(i))`` for mixed ``v``;
    by default ``flip_acceptance / n``.
    """
    space = StateSpace.sign_vectors(n)
    flips = _flip_table(space)
    if switch_probability is None:
        if not 0 < flip_acceptance <= 1:
            raise ValidationError("flip_acceptance must lie in (0, 1]")
        switch_probability = lambda v, i: flip_acceptance / n
    S = space.size
    P = np.zeros((S, S))
    consensus = (0, S - 1)
    for s, lab in enumerate(space.labels):
        if s in consensus:
            P[s, s] = 1.0
            continue
        for i in range(n):
            p = float(switch_probability(lab, i))
            if not 0 < p <= 1:
                raise ValidationError(f"switch probability for {lab}, coordinate {i} must be in (0, 1]")
            P[s, flips[s, i]] += p
        stay = 1.0 - P[s].sum()
        if stay < -1e-12:
            raise ValidationError(f"switch probabilities out of {lab} sum above 1")
        P[s, s] = max(stay, 0.0)
    return space, P


def build_toy(n, lam, flip_acceptance=0.5, switch_probability=None) -> SlowFastModel:
    """Decoupled consensus toy model: ``dX = V dt``, fast chain independent of ``X``."""
    n = _check_n(n, 10)
    lam = _check_lam(lam)
    space, P = toy_matrix(n, switch_probability, flip_acceptance)
    family = TransitionFamily.constant(P, absorbing=(0, space.size - 1))
    drift = DriftField.from_table(np.array(space.labels, dtype=float))
    params = {"n": n, "lam": lam, "flip_acceptance": flip_acceptance}
    if switch_probability is not None:
        params["switch_probability"] = repr(switch_probability)
    return SlowFastModel(drift, family, lam, space, n, n, "toy", params)


def navigation_lipschitz(n, beta):
    """Row-wise 1-norm Lipschitz modulus of the navigation family: ``beta / (2 n)``."""
    return beta / (2.0 * n)


def build_coupled_navigation(n, lam, beta) -> SlowFastModel:
    """Toy model whose flips are biased towards the side the group is on.

    A chosen particle heading ``-1`` turns to ``+1`` with probability
    ``expit(beta * mean(x))`` and a particle heading ``+1`` turns with
    probability ``expit(-beta * mean(x))``; both are 1/2 when ``beta = 0``.
    Consensus states stay absorbing for every ``x``.  Each flip probability
    is ``beta / 4``-Lipschitz in ``mean(x)``, which is ``1/n``-Lipschitz in
    the 1-norm, giving the row modulus ``beta / (2 n)``.
    """
    n = _check_n(n, 8)
    lam = _check_lam(lam)
    if not (np.isfinite(beta) and beta >= 0):
        raise ValidationError(f"beta must be non-negative, got {beta!r}")
    beta = float(beta)
    space = StateSpace.sign_vectors(n)
    S = space.size
    flips = _flip_table(space)
    labels = np.array(space.labels, dtype=np.int64)
    mixed = np.ones(S, dtype=bool)
    mixed[[0, S - 1]] = False

    def rows(x, v):
        x = np.atleast_2d(x)
        v = np.asarray(v, dtype=np.int64)
        z = beta * x.mean(axis=1)
        up, down = expit(z), expit(-z)
        # probability that particle i of row j flips, per chosen coordinate
        p = np.where(labels[v] < 0, up[:, None], down[:, None]) / n
        p[~mixed[v]] = 0.0
        out = np.zeros((v.shape[0], S))
        r = np.arange(v.shape[0])
        for i in range(n):
            out[r, flips[v, i]] += p[:, i]
        out[r, v] += 1.0 - p.sum(axis=1)
        return out

    def evaluate(x):
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return rows(np.repeat(x, S, axis=0), np.arange(S))

    family = TransitionFamily(evaluate, S, navigation_lipschitz(n, beta), beta == 0.0,
                              rows=rows, absorbing=(0, S - 1))
    drift = DriftField.from_table(labels.astype(float))
    return SlowFastModel(drift, family, lam, space, n, n, "coupled_navigation",
                         {"n": n, "lam": lam, "beta": beta})


def build_ergodic_class_variant(n, lam, p, mirror_speed=0.5) -> SlowFastModel:
    """Toy model with each consensus state widened into a two-state class.

    Consensus ``+e`` gains a partner ``+e'`` (heading ``mirror_speed * e``):
    ``+e -> +e'`` with probability ``p`` and ``+e' -> +e`` with probability
    ``1 - p``, likewise for ``-e``.  The class law is ``(1 - p, p)`` on
    ``(e, e')``.
    """
    n = _check_n(n, 10)
    lam = _check_lam(lam)
    if not 0 < p < 1:
        raise ValidationError(f"intra-class mixing p must lie in (0, 1), got {p!r}")
    base_space, base = toy_matrix(n)
    B = base_space.size
    space = StateSpace(base_space.labels + ("+e'", "-e'"))
    S = space.size
    P = np.zeros((S, S))
    P[:B, :B] = base
    for e, mirror in ((0, B), (B - 1, B + 1)):
        P[e, e], P[e, mirror] = 1.0 - p, p
        P[mirror, e], P[mirror, mirror] = 1.0 - p, p
    table = np.zeros((S, n))
    table[:B] = np.array(base_space.labels, dtype=float)
    table[B] = mirror_speed
    table[B + 1] = -mirror_speed
    family = TransitionFamily.constant(P, absorbing=())
    return SlowFastModel(DriftField.from_table(table), family, lam, space, n, n,
                         "ergodic_class_variant",
                         {"n": n, "lam": lam, "p": float(p), "mirror_speed": float(mirror_speed)})


MODELS = {
    "toy": build_toy,
    "coupled_navigation": build_coupled_navigation,
    "ergodic_class_variant": build_ergodic_class_variant,
}


def register_model(name, builder):
    if name in MODELS:
        raise ValidationError(f"model {name!r} is already registered")
    MODELS[name] = builder


def build_model(name, **params) -> SlowFastModel:
    try:
        builder = MODELS[name]
    except KeyError:
        raise ValidationError(f"unknown model {name!r}; known: {sorted(MODELS)}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for model {name!r}: {exc}") from None
