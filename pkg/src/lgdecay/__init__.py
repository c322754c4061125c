"""Leggett-Garg correlators for unstable systems with non-exponential decay laws."""

__version__ = "0.1.0"

from .correlators import JointTable, K3Result, Ontology, correlator, joint_table, k3, k3_closed_form, k3_components, k3_exponential_regime
from .decay_models import (
    Custom,
    DecayModel,
    Exponential,
    PiecewisePowerTail,
    RegimeFit,
    Tabulated,
    ThreeRegime,
    Toy,
    Tunneling,
    decay_density,
    fit_effective_lifetime,
    fit_exponential_regime,
    make_model,
    survival,
)
from .errors import (
    ConfigParseError,
    ConfigurationError,
    DomainError,
    FitError,
    HorizonError,
    InvalidOntologyError,
    LGDecayError,
    NumericalFailure,
)
from .mc_oracle import McEstimate, McOntology, estimate_correlator, estimate_k3, run_trials, sample_decay_time
from .scanner import LineScan, ScanGrid, scan_grid, scan_line
from .tunneling import TunnelingParams, WTable, build_p_interpolant, build_w_table, eval_log_p, eval_W
