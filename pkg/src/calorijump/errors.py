"""Exception hierarchy.

ConfigError maps to CLI exit code 2, NumericalError and its subclasses to 3.
Validation failures are reported by the CLI directly (exit 4) and do not use
exceptions.
"""

from __future__ import annotations


class CalorijumpError(Exception):
    """Base class for package errors."""


class ConfigError(CalorijumpError):
    """Invalid, missing, duplicate, or inconsistent configuration input."""


class GridAlignmentError(ConfigError):
    """Level-resolved grid spacing does not divide the temperature kicks."""


class NumericalError(CalorijumpError):
    """Numerical failure (degeneracy, instability, scheme breakdown...)."""


class DegenerateSpectrumError(NumericalError):
    """Quasi-energy spectrum too close to degenerate to label branches."""


class FrequencyCollisionError(NumericalError):
    """Two surviving jump channels share a transition frequency."""


class EmptyChannelError(NumericalError):
    """No jump channel survives the amplitude threshold."""


class TimeStepError(NumericalError):
    """Time step too large for the requested operation."""


class ImpossibleJumpError(NumericalError):
    """Jump operator annihilates the current state."""


class NoSteadyStateError(NumericalError):
    """Drift has no sign change on the coefficient grid."""


class InstabilityError(NumericalError):
    """Linearization requested around a non-attracting root."""


class SchemeFailureError(NumericalError):
    """Grid integrator produced an invalid (e.g. negative) density."""


class FitError(NumericalError):
    """Nonlinear fit failed to converge."""
