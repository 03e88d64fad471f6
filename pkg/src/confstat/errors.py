"""Exception hierarchy.

Errors that carry an offending event keep its chart coordinates in
``event`` so reports can point at it.
"""

from __future__ import annotations

import numpy as np


class ConfstatError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str, event=None):
        if event is not None:
            event = np.asarray(event, dtype=float).tolist()
            message = f"{message} at event {event}"
        super().__init__(message)
        self.event = event


class ConfigError(ConfstatError):
    """Malformed run configuration or model parameters."""


class GeometryError(ConfstatError):
    """Base for point-wise geometry failures."""


class DomainError(GeometryError):
    """A point lies outside the model's chart domain."""


class DegenerateMetricError(GeometryError):
    """``|det g|`` fell below the degeneracy tolerance."""


class SignatureError(GeometryError):
    """The metric is not of signature (-,+,+,+)."""


class NormalizationError(GeometryError):
    """The observer field violates ``g(V, V) = -1`` or is not future pointing."""


class SolverError(ConfstatError):
    """Numerical solver failure; ``best_residual`` holds the closest attempt."""

    def __init__(self, message: str, event=None, best_residual: float | None = None):
        if best_residual is not None:
            message = f"{message} (best residual {best_residual:.3e})"
        super().__init__(message, event)
        self.best_residual = best_residual


class StepSizeError(SolverError):
    """Adaptive integrator step size underflow."""


class NullDriftError(SolverError):
    """``|g(K, K)|`` drifted past ``tol_null`` during integration."""


class QuadratureError(SolverError):
    """Adaptive Gauss-Legendre quadrature did not converge."""


class ShootingError(SolverError):
    """The two-point light-signal problem did not converge."""


class ConjugatePointError(SolverError):
    """The infinitesimal-message linear system is singular (irregular signal)."""
