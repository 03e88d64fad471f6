"""Conformal stationarity: certification, connecting function, conformal factor.

A congruence is conformally stationary when ``xi = f V`` is a conformal
vector field for some positive ``f``.  Locally this happens exactly when
the shear vanishes and ``rho = A_flat - Theta/3 V_flat`` is closed, and then
``d ln f = rho``.  This module scans for those conditions, reconstructs
``ln f`` by line integration of ``rho`` and checks the conformal Killing
equation with the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from . import dual
from .errors import GeometryError, QuadratureError, SolverError
from .geometry import _as_points, metric_components, observer_components
from .kinematics import _metric_scale, kinematics_at
from .parallel import map_chunks
from .quadrature import MAX_LEVEL, panel_rule
from .tolerances import DEFAULT, Tolerances



def grid_points(lo, hi, n) -> np.ndarray:
    """Tensor grid with ``n`` samples per axis (``n`` may be a 4-sequence)."""
    n = np.broadcast_to(np.asarray(n, dtype=int), (4,))
    if np.any(n < 2):
        raise ValueError("grid resolution must be at least 2 per axis")
    axes = [np.linspace(a, b, k) for a, b, k in zip(lo, hi, n)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 4)


def _region(model, region):
    if region is None:
        return model.reference_region
    lo, hi = (np.asarray(r, dtype=float) for r in region)
    return lo, hi


# -- line integrals of rho -----------------------------------------------------


def _rho_line(model, p0, targets, tol, grad):
    """``int_0^1 rho(p0 + u D)(D) du`` and its gradient in the target, ``D = x - p0``."""
    D = targets - p0

    def evaluate(level, idx):
        u, w = panel_rule(level)
        pts = p0 + u[:, None, None] * D[None, idx]
        s = kinematics_at(model, pts.reshape(-1, 4), tol=tol)
        rho = s.rho.reshape(len(u), len(idx), 4)
        val = np.einsum("u,una,na->n", w, rho, D[idx])
        if not grad:
            return val, None
        drho = s.jets["rho"].der.reshape(4, len(u), len(idx), 4)  # [b, u, n, a] = d_b rho_a
        g = np.einsum("u,unb->nb", w, rho) + np.einsum("u,u,buna,na->nb", w, u, drho, D[idx])
        return val, g

    n = len(targets)
    all_idx = np.arange(n)
    val, g = evaluate(0, all_idx)
    active = all_idx
    for level in range(1, MAX_LEVEL + 1):
        new_val, new_g = evaluate(level, active)
        err = np.abs(new_val - val[active])
        limit = tol.quad * np.maximum(1.0, np.abs(new_val))
        done = err <= limit
        if grad:
            gerr = np.max(np.abs(new_g - g[active]), axis=-1)
            done &= gerr <= tol.quad * np.maximum(1.0, np.max(np.abs(new_g), axis=-1))
            g[active] = new_g
        val[active] = new_val
        active = active[~done]
        if len(active) == 0:
            return val, g
    raise QuadratureError(
        f"line integral of rho did not converge with {2**MAX_LEVEL} panels",
        targets[active[0]],
        best_residual=float(np.max(err)),
    )


def line_integral_rho(model, a, b, tol: Tolerances = DEFAULT) -> np.ndarray:
    """``int rho`` along the coordinate straight line from ``a`` to each ``b``."""
    a = _as_points(a)
    b = _as_points(b)
    single = b.ndim == 1
    val, _ = _rho_line(model, a, np.atleast_2d(b), tol, grad=False)
    return val[0] if single else val


def reconstruct_ln_f(model, anchor, target, tol: Tolerances = DEFAULT, via=None):
    """``ln f(target)`` in the gauge ``ln f(anchor) = 0``.

    Integrates ``rho`` along the straight chart line, or along the two-leg
    path ``anchor -> via -> target`` when ``via`` is given.  Vectorized over
    a batch of targets.
    """
    if via is None:
        return line_integral_rho(model, anchor, target, tol)
    return line_integral_rho(model, anchor, via, tol) + line_integral_rho(model, via, target, tol)


# -- candidates ------------------------------------------------------------------


@dataclass(frozen=True)
class ConformalCandidate:
    """A connecting function ``f = scale * exp(L) + offset`` and ``xi = f V``.

    ``L`` is either the line integral of ``rho`` from ``anchor`` (a
    reconstruction, ``L(anchor) = 0``) or the logarithm of a closed-form
    function.  ``scale`` probes gauge invariance; a nonzero ``offset`` breaks
    the conformal property on purpose and exists for negative tests.
    """

    model: object
    anchor: np.ndarray | None = None
    function: Callable | None = field(default=None, repr=False)
    scale: float = 1.0
    offset: float = 0.0
    tol: Tolerances = DEFAULT

    def __post_init__(self):
        if (self.anchor is None) == (self.function is None):
            raise ValueError("give exactly one of anchor or function")
        if self.anchor is not None:
            anchor = _as_points(self.anchor)
            self.model.require_inside(anchor)
            object.__setattr__(self, "anchor", anchor)
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @classmethod
    def from_function(cls, model, f: Callable, **kw) -> "ConformalCandidate":
        """Candidate from a closed-form ``f(x)`` written with :mod:`confstat.dual`."""
        return cls(model, function=f, **kw)

    def with_gauge(self, scale: float = None, offset: float = None) -> "ConformalCandidate":
        return ConformalCandidate(
            self.model,
            self.anchor,
            self.function,
            self.scale if scale is None else scale,
            self.offset if offset is None else offset,
            self.tol,
        )

    def _raw(self, pts, grad=True):
        """``(L, dL)`` with ``dL`` covariant, batch over ``pts``."""
        if self.function is not None:
            x = dual.seed(pts, order=1)
            f = self.function(x)
            if not isinstance(f, dual.Jet):
                v = np.broadcast_to(np.asarray(f, dtype=float), pts.shape[:-1])
                return np.log(v), np.zeros(pts.shape)
            if np.any(f.v <= 0):
                raise GeometryError("connecting function is not positive")
            return np.log(f.v), f.d / f.v[..., None]
        flat = pts.reshape(-1, 4)
        val, g = _rho_line(self.model, self.anchor, flat, self.tol, grad=grad)
        return val.reshape(pts.shape[:-1]), None if g is None else g.reshape(pts.shape)

    def f(self, pts) -> np.ndarray:
        pts = _as_points(pts)
        L, _ = self._raw(pts, grad=False)
        out = self.scale * np.exp(L) + self.offset
        if np.any(out <= 0):
            raise GeometryError("connecting function is not positive")
        return out

    def ln_f(self, pts) -> np.ndarray:
        return np.log(self.f(pts))

    def df(self, pts):
        """``(f, df)`` at ``pts``."""
        pts = _as_points(pts)
        L, dL = self._raw(pts)
        e = self.scale * np.exp(L)
        f = e + self.offset
        if np.any(f <= 0):
            raise GeometryError("connecting function is not positive")
        return f, e[..., None] * dL

    def grad_ln_f(self, pts) -> np.ndarray:
        """Covariant components of ``d ln f``."""
        f, df = self.df(pts)
        return df / f[..., None]

    def xi(self, pts) -> np.ndarray:
        pts = _as_points(pts)
        V, _, _ = observer_components(self.model, pts, order=0)
        return self.f(pts)[..., None] * V

    def phi_from_df(self, pts) -> np.ndarray:
        """``Phi = 2 df(V)``."""
        pts = _as_points(pts)
        _, df = self.df(pts)
        V, _, _ = observer_components(self.model, pts, order=0)
        return 2.0 * np.einsum("...a,...a->...", df, V)

    def phi_from_theta(self, pts, theta=None) -> np.ndarray:
        """``Phi = (2/3) f Theta``."""
        pts = _as_points(pts)
        if theta is None:
            theta = kinematics_at(self.model, pts, tol=self.tol).theta
        return 2.0 / 3.0 * self.f(pts) * theta


def conformal_residual(candidate: ConformalCandidate, p, tol: Tolerances = None) -> np.ndarray:
    """Max-abs entry of ``L_xi g - Phi g`` with ``L_{fV} g = f L_V g + df v V_flat``.

    ``Phi`` is taken from ``(2/3) f Theta``; scaled by ``max(1, max|g_ab|)``.
    """
    tol = candidate.tol if tol is None else tol
    pts = _as_points(p)
    s = kinematics_at(candidate.model, pts, tol=tol)
    f, df = candidate.df(pts)
    T = s.nabla
    lie_V = T + np.swapaxes(T, -1, -2)
    dfV = df[..., :, None] * s.V_flat[..., None, :]
    lie_xi = f[..., None, None] * lie_V + dfV + np.swapaxes(dfV, -1, -2)
    phi = 2.0 / 3.0 * f * s.theta
    res = lie_xi - phi[..., None, None] * s.g
    return np.max(np.abs(res), axis=(-1, -2)) / _metric_scale(s.g)


def phi_consistency(candidate: ConformalCandidate, p) -> np.ndarray:
    """``|2 df(V) - (2/3) f Theta|`` at each event."""
    return np.abs(candidate.phi_from_df(p) - candidate.phi_from_theta(p))


# -- scans -----------------------------------------------------------------------------

VERDICTS = ("conformally_stationary", "not_stationary", "inconclusive")


@dataclass
class StationarityVerdict:
    """Sup-norms over a scan and the verdict they imply.

    ``conformal_residual_sup`` is NaN when no candidate was built because
    the scan already ruled stationarity out.
    """

    shear_sup: float
    drho_sup: float
    conformal_residual_sup: float
    verdict: str
    thresholds: dict
    n_events: int
    anchor: list | None = None
    worst_event: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return dict(
            shear_sup=self.shear_sup,
            drho_sup=self.drho_sup,
            conformal_residual_sup=self.conformal_residual_sup,
            verdict=self.verdict,
            thresholds=dict(self.thresholds),
            n_events=self.n_events,
            anchor=self.anchor,
            worst_event=dict(self.worst_event),
        )


def _classify(values, thresholds):
    """Three-way verdict with a factor-10 band of indecision around each threshold."""
    over = any(v > 10.0 * t for v, t in zip(values, thresholds) if np.isfinite(v))
    if over:
        return "not_stationary"
    under = all(np.isfinite(v) and v < t / 10.0 for v, t in zip(values, thresholds))
    return "conformally_stationary" if under else "inconclusive"


def stationarity_scan(
    model, region=None, grid=5, tol: Tolerances = DEFAULT, anchor=None, workers: int | None = None
) -> StationarityVerdict:
    """Certify (or refute) conformal stationarity of ``model`` on a coordinate box.

    ``sigma`` and ``d rho`` are evaluated on the grid.  Unless either is
    clearly nonzero a candidate is reconstructed from ``anchor`` (default:
    box centre) and the conformal Killing equation is checked on the same
    grid.
    """
    lo, hi = _region(model, region)
    pts = grid_points(lo, hi, grid)
    model.require_inside(pts)

    def norms(p):
        s = kinematics_at(model, p, tol=tol)
        return dict(shear=s.shear_norm, drho=s.d_rho_norm)

    vals = map_chunks(norms, pts, workers)
    shear, drho = vals["shear"], vals["drho"]
    thr = tol.stationarity
    worst = dict(
        shear=pts[int(np.argmax(shear))].tolist(),
        drho=pts[int(np.argmax(drho))].tolist(),
    )
    shear_sup, drho_sup = float(np.max(shear)), float(np.max(drho))
    residual_sup = float("nan")
    anchor_pt = None
    if _classify([shear_sup, drho_sup], [thr, thr]) != "not_stationary":
        anchor_pt = 0.5 * (lo + hi) if anchor is None else _as_points(anchor)
        cand = ConformalCandidate(model, anchor=anchor_pt, tol=tol)
        res = map_chunks(lambda p: dict(r=conformal_residual(cand, p, tol)), pts, workers)["r"]
        residual_sup = float(np.max(res))
        worst["conformal_residual"] = pts[int(np.argmax(res))].tolist()
        anchor_pt = np.asarray(anchor_pt).tolist()
    verdict = _classify([shear_sup, drho_sup, residual_sup], [thr, thr, tol.residual])
    return StationarityVerdict(
        shear_sup,
        drho_sup,
        residual_sup,
        verdict,
        dict(stationarity=thr, residual=tol.residual, band=10.0),
        len(pts),
        anchor_pt,
        worst,
    )


def equivalence_class_check(candidate_a, candidate_b, region=None, grid=3):
    """Mean and spread (max - min) of ``f_A / f_B`` on a grid.

    For two connecting functions of the same congruence the ratio is
    constant, so the spread measures how far two reconstructions are from
    lying in one equivalence class.
    """
    lo, hi = _region(candidate_a.model, region)
    pts = grid_points(lo, hi, grid)
    ratio = candidate_a.f(pts) / candidate_b.f(pts)
    return float(np.mean(ratio)), float(np.max(ratio) - np.min(ratio))


# -- angles along the flow of xi -----------------------------------------------------------


@dataclass
class AngleTransport:
    """Lie-transported pair along an integral curve of ``xi``."""

    params: np.ndarray
    points: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    cos_angle: np.ndarray

    @property
    def drift(self) -> float:
        return float(np.max(np.abs(self.cos_angle - self.cos_angle[0])))


def _cos_angle(g, X, Y, tol):
    gxx = np.einsum("...a,...b,...ab->...", X, X, g)
    gyy = np.einsum("...a,...b,...ab->...", Y, Y, g)
    gxy = np.einsum("...a,...b,...ab->...", X, Y, g)
    scale = np.einsum("...a,...a->...", X, X) * np.einsum("...a,...a->...", Y, Y)
    if np.any(np.abs(gxx * gyy) < tol.geom * np.maximum(scale, 1e-300)):
        raise GeometryError("transported vector became null; the angle is undefined")
    return gxy / np.sqrt(np.abs(gxx * gyy))


def transport_angle(candidate: ConformalCandidate, p, X0, Y0, span: float, n_samples: int = 41, tol=None):
    """Lie-transport ``X0, Y0`` along the integral curve of ``xi`` from ``p``.

    With ``L_xi X = 0`` the components obey ``dX^a/dl = X^b d_b xi^a``;
    conformal flows preserve the angle ``g(X,Y)/sqrt|g(X,X) g(Y,Y)|``.
    """
    tol = candidate.tol if tol is None else tol
    model = candidate.model
    p = _as_points(p)

    def rhs(_, y):
        x = y[:4]
        if not model.contains(x):
            raise GeometryError("flow line left the chart domain", x)
        V, dV, _ = observer_components(model, x[None], order=1)
        f, df = candidate.df(x[None])
        dxi = f[0] * dV[0] + V[0][:, None] * df[0][None, :]  # [a, b] = d_b xi^a
        X, Y = y[4:8], y[8:12]
        return np.concatenate([f[0] * V[0], dxi @ X, dxi @ Y])

    ls = np.linspace(0.0, span, n_samples)
    y0 = np.concatenate([p, np.asarray(X0, float), np.asarray(Y0, float)])
    sol = solve_ivp(rhs, (0.0, span), y0, method="RK45", t_eval=ls, rtol=tol.ode_rtol, atol=tol.ode_atol)
    if sol.status != 0:
        raise SolverError(f"flow integration failed: {sol.message}", p)
    pts = sol.y[:4].T
    X, Y = sol.y[4:8].T, sol.y[8:12].T
    g, _, _ = metric_components(model, pts, order=0)
    return AngleTransport(ls, pts, X, Y, _cos_angle(g, X, Y, tol))


def angle_preservation_check(candidate, p, X0, Y0, span: float, n_samples: int = 41) -> float:
    """``max |cos a(l) - cos a(0)|`` along the flow of ``xi`` (see :func:`transport_angle`)."""
    return transport_angle(candidate, p, X0, Y0, span, n_samples).drift
