"""Numerical laboratory for rearrangement-invariant norms, Sobolev conjugates,
Hardy-type reduction operators, K-functionals and periodic divergence-free fields."""
from .profile_core import (
    L_MAX, DomainError, IncompatibleDomainError, MeasureOverflowError, SampleCloud,
    StepProfile, double_star, pairing, rearrange,
)
from .young_calculus import (
    CappedInfinity, ExpPower, PowerLog, PowerLogLog, PreconditionError, Tabulated,
    equivalent, reduced_conjugate, sobolev_conjugate,
)
from .norm_engine import NormSpec, luxemburg, norm

__version__ = "0.1.0"
