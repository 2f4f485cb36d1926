"""Device-independent randomness certification for post-selected Bell data."""
from .behaviors import (ALICE, PAIR, STRATEGIES, Behavior, CollinsGisinTable, PostSelection, Scenario,
                        alice_detected, strategy_a, strategy_b, strategy_c, validate)
from .certify import RandomnessReport, guessing_probability, randomness_rate
from .relaxation import SolverConfig, build_guessing_sdp, solve

__version__ = "0.1.0"
