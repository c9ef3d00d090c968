"""Numerical tolerances shared across the package."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    construction: float = 1e-12   # row sums, probability vectors
    solver: float = 1e-10         # residuals of linear solves
    profile_rows: float = 1e-10   # absorption profile / limit law mass
    singular_cond: float = 1e12   # expected absorption time (steps) treated as singular
    poisson_tail: float = 1e-12   # default Poisson truncation mass


DEFAULT = Tolerances()
