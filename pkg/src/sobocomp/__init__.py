"""Numerical verification of compact embeddings for degenerate Sobolev spaces."""

from .domain import GridDomain, Measure, build_grid, lebesgue, density_measure, power_weight, lp_norm, average
from .errors import (
    SobocompError,
    ConfigError,
    PreconditionError,
    HypothesisViolation,
    CertificateError,
    InvariantFailure,
)
from .geometry import Quasimetric, ball, build_cover, check_swallow, swallowing_gamma
from .forms import SobolevPair, QuadraticFormField, identity_form, sobolev_norm
from .engine import FamilyS, run_general, run_abstract, run_local, run_quasimetric, run_two_measure

__version__ = "0.1.0"
