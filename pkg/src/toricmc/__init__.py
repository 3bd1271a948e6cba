"""Continuous-time quantum Monte Carlo for the toric code in a parallel field.

Worldline Monte Carlo on the links of square, triangular, honeycomb and
cubic lattices, with a full set of diagnostic and order-parameter
observables, exact-diagonalization cross-checks at small size, correlated
error analysis, and hierarchical text / GraphML outputs.
"""

from .errors import ConfigurationError, ConsistencyError, SignProblemError
from .lattice import FmLoopPair, Lattice, build_fm_loops, build_lattice
from .worldline import Kink, WorldlineConfig, new_config
from .updates import ChainRng, UpdateOutcome, mc_step
from .driver import (
    LatSpec,
    OutSpec,
    ParamSpec,
    RunConfig,
    RunResult,
    SimSpec,
    run_hysteresis,
    run_sample,
    run_sweep,
    run_thermalization,
    suggested_thermalization,
)
from .observables import OBSERVABLE_NAMES
from .stats import SeriesStats, autocorrelation, stationary_bootstrap, tau_int

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ConsistencyError",
    "SignProblemError",
    "Lattice",
    "FmLoopPair",
    "build_lattice",
    "build_fm_loops",
    "Kink",
    "WorldlineConfig",
    "new_config",
    "ChainRng",
    "UpdateOutcome",
    "mc_step",
    "SimSpec",
    "ParamSpec",
    "LatSpec",
    "OutSpec",
    "RunConfig",
    "RunResult",
    "run_thermalization",
    "run_sample",
    "run_hysteresis",
    "run_sweep",
    "suggested_thermalization",
    "OBSERVABLE_NAMES",
    "SeriesStats",
    "autocorrelation",
    "tau_int",
    "stationary_bootstrap",
    "__version__",
]
