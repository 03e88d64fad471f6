"""Numerical tolerances shared by every module."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    """All thresholds in one immutable bundle; override with :meth:`replace`."""

    geom: float = 1e-8
    linalg: float = 1e-10
    degenerate: float = 1e-12
    norm: float = 1e-8
    # null-cone breach that aborts an integration, relative to the frame norm of K
    null: float = 1e-7
    ode_rtol: float = 1e-10
    ode_atol: float = 1e-12
    quad: float = 1e-12
    path: float = 1e-7
    phi: float = 1e-7
    shoot: float = 1e-10
    shoot_max_iter: int = 30
    stationarity: float = 1e-6
    residual: float = 1e-6
    redshift: float = 1e-6
    accel: float = 1e-8
    parallel: float = 1e-8
    theta: float = 1e-10
    conjugate_cond: float = 1e12

    def replace(self, **changes) -> "Tolerances":
        bad = [k for k in changes if k not in self.as_dict()]
        if bad:
            raise KeyError(f"unknown tolerance(s): {', '.join(bad)}")
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


DEFAULT = Tolerances()
