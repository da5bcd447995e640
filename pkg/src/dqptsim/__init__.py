"""Digital simulation of dynamical quantum phase transitions in the lattice
Schwinger model: model definitions, exact oracles, circuit builders, a
state-vector simulator, observables and randomized-measurement tomography.
"""
from .model import *  # noqa: F401,F403
from .simulator import NoiseParams, apply, circuit_unitary, probabilities  # noqa: F401
from . import circuit, dqpt, model, oracle, simulator, tomography  # noqa: F401

__version__ = "0.1.0"
