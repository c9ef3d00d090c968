"""Slow ODEs driven by fast Markov chains with several ergodic classes."""

from .errors import *  # noqa: F401,F403
from .laws import (DiscreteLawTrajectory, JumpSequence, discrete_law, frozen_law,
                   frozen_vs_sequence_gap, poissonize, tv_distance)
from .markov import (ChainDecomposition, StateSpace, StochasticMatrix, TransitionFamily,
                     absorption_probabilities, certify_assumptions, class_laws, decompose,
                     frozen_limit_law, limit_law, stationary_law)
from .models import (build_coupled_navigation, build_ergodic_class_variant, build_model,
                     build_toy, register_model)
from .simulate import (DriftField, SlowFastModel, averaged_drift, averaged_expectation,
                       coupled_batch, fast_batch, simulate_averaged, simulate_coupled,
                       simulate_frozen, simulate_sequence_driven)
from .tolerances import DEFAULT as TOLERANCES, Tolerances

__version__ = "0.1.0"
