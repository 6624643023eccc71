"""Distributed quickest detection and isolation of events in sensor networks."""

from .detection import RULES, CusumState, LocalRule, cusum_step, llr, local_decision
from .errors import (BoundNotApplicable, ConfigError, CoverageError, DomainError,
                     EstimationError, UnsupportedModelError)
from .geometry import (Deployment, DetectionPartition, ModelKind, RangeParams, Region,
                       SensingModel, build_partition, compute_ranges, rho)

__version__ = "0.1.0"
