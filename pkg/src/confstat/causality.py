"""Sufficient conditions for stable causality of a conformally stationary model.

With ``d ln f = rho`` the gradient of the connecting function is known at
every event without integrating anything.  Two sufficient conditions are
checked:

* the gradient of ``ln f`` is parallel to ``V`` and nowhere zero, or
* ``Theta`` keeps one strict sign and ``g(A, A) < Theta^2 / 9``.

Either makes ``+ln f`` (for ``Theta > 0``) or ``-ln f`` (for ``Theta < 0``) a
time function.  Failing both is reported as ``criteria_not_met``, which is
not a statement that the model is acausal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conformal import _region, grid_points
from .errors import ConfigError
from .geometry import frame_norm
from .kinematics import KinematicsSample, kinematics_at
from .parallel import map_chunks
from .tolerances import DEFAULT, Tolerances

PARALLEL = "stably_causal_by_parallel_gradient"
EXPANSION = "stably_causal_by_expansion_bound"
NOT_MET = "criteria_not_met"


@dataclass
class CausalityScan:
    """Per-event evidence and the resulting verdict."""

    points: np.ndarray
    theta: np.ndarray
    accel_norm2: np.ndarray
    grad_lnf_norm2: np.ndarray
    margin: np.ndarray
    parallel_defect: np.ndarray
    identity_residual: np.ndarray
    time_function_sign: int
    past_pointing: bool
    sign_change: bool
    fired: list
    verdict: str
    thresholds: dict = field(default_factory=dict)

    @property
    def stably_causal(self) -> bool:
        return self.verdict != NOT_MET

    @property
    def margin_min(self) -> float:
        return float(np.min(self.margin))

    def as_dict(self) -> dict:
        return dict(
            verdict=self.verdict,
            fired=list(self.fired),
            stably_causal=self.stably_causal,
            note=None if self.stably_causal else "sufficient conditions not met; no claim of acausality",
            time_function_sign=self.time_function_sign,
            past_pointing=self.past_pointing,
            sign_change=self.sign_change,
            margin_min=self.margin_min,
            margin_max=float(np.max(self.margin)),
            theta_min=float(np.min(self.theta)),
            theta_max=float(np.max(self.theta)),
            grad_lnf_norm2_max=float(np.max(self.grad_lnf_norm2)),
            parallel_defect_max=float(np.max(self.parallel_defect)),
            identity_residual_max=float(np.max(self.identity_residual)),
            n_events=int(len(self.points)),
            thresholds=dict(self.thresholds),
        )

    def table(self) -> dict:
        return dict(
            theta=self.theta,
            accel_norm2=self.accel_norm2,
            grad_lnf_norm2=self.grad_lnf_norm2,
            margin=self.margin,
            parallel_defect=self.parallel_defect,
            identity_residual=self.identity_residual,
        )


def grad_lnf_identity_residual(sample: KinematicsSample, candidate) -> np.ndarray:
    """``max(|g(grad ln f, grad ln f) - (g(A,A) - Theta^2/9)|, |g(grad ln f, V) - Theta/3|)``.

    ``grad ln f`` comes from the candidate's own reconstruction, so the
    residual also tests the reconstruction against the local identities.
    """
    dl = candidate.grad_ln_f(sample.point)
    n2 = np.einsum("...a,...b,...ab->...", dl, dl, sample.g_inv)
    r1 = np.abs(n2 - (sample.accel_norm2 - sample.theta**2 / 9.0))
    r2 = np.abs(np.einsum("...a,...a->...", dl, sample.V) - sample.theta / 3.0)
    return np.maximum(r1, r2)


def _evidence(model, candidate, tol):
    def fn(p):
        s = kinematics_at(model, p, tol=tol)
        rho = s.rho
        rho_V = np.einsum("...a,...a->...", rho, s.V)
        h_rho = rho + rho_V[..., None] * s.V_flat
        rho_norm = frame_norm(rho, s.g_inv, s.V)
        return dict(
            theta=s.theta,
            a2=s.accel_norm2,
            n2=np.einsum("...a,...b,...ab->...", rho, rho, s.g_inv),
            rho_V=rho_V,
            rho_norm=rho_norm,
            defect=frame_norm(h_rho, s.g_inv, s.V) / np.where(rho_norm > 0, rho_norm, 1.0),
            ident=grad_lnf_identity_residual(s, candidate),
        )

    return fn


def causality_scan(
    model, candidate, region=None, grid=5, tol: Tolerances = DEFAULT, workers: int | None = None
) -> CausalityScan:
    """Evaluate both sufficient conditions on a grid.

    ``candidate`` is a certified :class:`~confstat.conformal.ConformalCandidate`;
    it supplies the identity residuals while the verdict uses ``d ln f = rho``.
    """
    if candidate is None:
        raise ConfigError("causality scan needs a connecting-function candidate")
    lo, hi = _region(model, region)
    pts = grid_points(lo, hi, grid)
    model.require_inside(pts)
    e = map_chunks(_evidence(model, candidate, tol), pts, workers)
    theta, a2, n2, rho_V, rho_norm, defect, ident = (
        e[k] for k in ("theta", "a2", "n2", "rho_V", "rho_norm", "defect", "ident")
    )
    margin = theta**2 / 9.0 - a2

    th_tol = tol.theta
    nonzero_theta = np.all(np.abs(theta) > th_tol)
    sign_change = bool(np.any(theta > th_tol) and np.any(theta < -th_tol))
    sign = int(np.sign(theta[np.argmax(np.abs(theta))])) if np.any(np.abs(theta) > th_tol) else 0
    # g(grad(sign * ln f), V) = sign * rho(V) must be positive (past pointing)
    past = bool(sign != 0 and np.all(sign * rho_V > 0))

    fired = []
    parallel = np.all(defect < tol.parallel) and np.all(rho_norm > th_tol) and np.all(n2 < 0)
    if parallel and past and not sign_change:
        fired.append(PARALLEL)
    if nonzero_theta and not sign_change and np.all(margin > 0) and past:
        fired.append(EXPANSION)
    verdict = fired[0] if fired else NOT_MET
    return CausalityScan(
        pts,
        theta,
        a2,
        n2,
        margin,
        defect,
        ident,
        sign,
        past,
        sign_change,
        fired,
        verdict,
        dict(theta=th_tol, parallel=tol.parallel),
    )
