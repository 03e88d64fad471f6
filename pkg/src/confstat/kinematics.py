"""Kinematical invariants of the observer congruence.

With ``T_ab = g(d_a, nabla_b V) = g_ac nabla_b V^c`` (first slot paired with
the metric, second slot the differentiation direction) the decomposition is

    T = Theta/3 h + sigma + omega - A_flat (x) V_flat,

``A = nabla_V V``.  Shear and rotation follow their displayed definitions
literally, with ``X v Y = X(x)Y + Y(x)X`` and ``X ^ Y = X(x)Y - Y(x)X`` (no
factor 1/2) but ``sym``/``antisym`` normalized by ``1/2``.  Exterior
derivatives use ``(d alpha)_ab = d_a alpha_b - d_b alpha_a``.

Every function accepts a single event ``(4,)`` or a batch ``(N, 4)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dual import TensorJet, jeinsum
from .errors import NormalizationError
from .geometry import (
    christoffel_jet,
    frame_norm,
    frame_vector_norm,
    inverse_jet,
    metric_components,
    metric_jets,
    observer_components,
    _as_points,
)
from .tolerances import DEFAULT, Tolerances


@dataclass
class Fields:
    """Jets of the metric, connection and observer field at a batch of events."""

    points: np.ndarray
    g: TensorJet
    g_inv: TensorJet
    gamma: TensorJet
    V: TensorJet  # V^a, der: d_c V^a
    dV: TensorJet  # val[..., a, b] = d_b V^a


def fields_at(model, p, check: bool = True, tol: Tolerances = DEFAULT) -> Fields:
    pts = _as_points(p)
    if check:
        model.require_inside(pts)
    g, dg, d2g = metric_components(model, pts, order=2)
    g_jet, dg_jet = metric_jets(g, dg, d2g)
    g_inv = inverse_jet(g_jet)
    gamma = christoffel_jet(g_inv, dg_jet)
    V, dV, d2V = observer_components(model, pts, order=2)
    V_jet = TensorJet(V, np.moveaxis(dV, -1, 0))
    dV_jet = TensorJet(dV, np.moveaxis(d2V, -1, 0))
    return Fields(pts, g_jet, g_inv, gamma, V_jet, dV_jet)


def _scalar_times(s: TensorJet, t: TensorJet, rank: int) -> TensorJet:
    for _ in range(rank):
        s = s.expand(-1)
    return s * t


@dataclass
class KinematicsSample:
    """Invariants at one event or a batch; tensor components are covariant."""

    point: np.ndarray
    theta: np.ndarray
    shear: np.ndarray
    rotation: np.ndarray
    accel: np.ndarray  # contravariant nabla_V V
    projector: np.ndarray
    rho: np.ndarray
    d_rho: np.ndarray
    nabla: np.ndarray  # T_ab
    g: np.ndarray
    g_inv: np.ndarray
    V: np.ndarray
    V_flat: np.ndarray
    residuals: dict = field(default_factory=dict)
    jets: dict = field(default_factory=dict, repr=False)

    @property
    def accel_flat(self) -> np.ndarray:
        return self.jets["accel_flat"].val

    @property
    def shear_norm(self) -> np.ndarray:
        return frame_norm(self.shear, self.g_inv, self.V)

    @property
    def rotation_norm(self) -> np.ndarray:
        return frame_norm(self.rotation, self.g_inv, self.V)

    @property
    def d_rho_norm(self) -> np.ndarray:
        return frame_norm(self.d_rho, self.g_inv, self.V)

    @property
    def accel_norm(self) -> np.ndarray:
        return frame_vector_norm(self.accel, self.g, self.V_flat)

    @property
    def accel_norm2(self) -> np.ndarray:
        """``g(nabla_V V, nabla_V V)``."""
        return np.einsum("...a,...b,...ab->...", self.accel, self.accel, self.g)


def _metric_scale(g):
    return np.maximum(1.0, np.max(np.abs(g), axis=(-1, -2)))


def nabla_V(model, p, tol: Tolerances = DEFAULT) -> np.ndarray:
    """``T_ab = g_ac (d_b V^c + Gamma^c_bd V^d)``."""
    return _nabla_jet(fields_at(model, p, tol=tol)).val


def _nabla_jet(f: Fields):
    cov = f.dV + jeinsum("...cbd,...d->...cb", f.gamma, f.V)  # nabla_b V^c at [c, b]
    return jeinsum("...ac,...cb->...ab", f.g, cov)


def _kinematics_from_fields(f: Fields, tol: Tolerances, check_norm: bool = True) -> KinematicsSample:
    T = _nabla_jet(f)
    V = f.V
    Vf = jeinsum("...ab,...b->...a", f.g, V)
    norm = np.einsum("...a,...a->...", Vf.val, V.val)
    if check_norm:
        bad = np.abs(norm + 1.0) > tol.norm
        if np.any(bad):
            where = f.points[bad][0] if f.points.ndim > 1 else f.points
            raise NormalizationError(f"g(V,V) = {np.atleast_1d(norm)[np.atleast_1d(bad)][0]:.6g}", where)

    theta = jeinsum("...ab,...ab->...", f.g_inv, T)
    A_flat = jeinsum("...ab,...b->...a", T, V)
    A = jeinsum("...ab,...b->...a", f.g_inv, A_flat)
    h = f.g + jeinsum("...a,...b->...ab", Vf, Vf)
    AV = jeinsum("...a,...b->...ab", A_flat, Vf)
    sym = 0.5 * (T + T.T)
    anti = 0.5 * (T - T.T)
    third = theta * (1.0 / 3.0)
    shear = sym + 0.5 * (AV + AV.T) - _scalar_times(third, h, 2)
    rotation = anti + 0.5 * (AV - AV.T)
    rho = A_flat - _scalar_times(third, Vf, 1)

    sample = KinematicsSample(
        point=f.points,
        theta=theta.val,
        shear=shear.val,
        rotation=rotation.val,
        accel=A.val,
        projector=h.val,
        rho=rho.val,
        d_rho=rho.exterior(),
        nabla=T.val,
        g=f.g.val,
        g_inv=f.g_inv.val,
        V=V.val,
        V_flat=Vf.val,
        jets=dict(
            theta=theta,
            accel_flat=A_flat,
            rotation=rotation,
            rho=rho,
            V_flat=Vf,
            V=V,
            nabla=T,
            h=h,
        ),
    )
    sample.residuals = _residuals(sample, norm)
    return sample


def _residuals(s: KinematicsSample, norm) -> dict:
    Vu = s.V
    perp = np.maximum.reduce(
        [
            np.max(np.abs(np.einsum("...ab,...a->...b", s.shear, Vu)), axis=-1),
            np.max(np.abs(np.einsum("...ab,...a->...b", s.rotation, Vu)), axis=-1),
            np.max(np.abs(np.einsum("...ab,...a->...b", s.projector, Vu)), axis=-1),
        ]
    )
    return dict(
        normalization=np.abs(norm + 1.0),
        trace_h=np.abs(np.einsum("...ab,...ab->...", s.g_inv, s.projector) - 3.0),
        perp=perp,
        accel_orth=np.abs(np.einsum("...a,...a->...", s.accel, s.V_flat)),
        decomposition=decomposition_residual(s),
    )


def kinematics_at(model, p, tol: Tolerances = DEFAULT) -> KinematicsSample:
    """Expansion, shear, rotation, acceleration, ``rho`` and ``d rho`` at ``p``.

    Raises :class:`~confstat.errors.NormalizationError` if ``|g(V,V) + 1|``
    exceeds ``tol.norm``; the congruence is never renormalized.
    """
    return _kinematics_from_fields(fields_at(model, p, tol=tol), tol)


def decomposition_residual(sample: KinematicsSample) -> np.ndarray:
    """Max-abs entry of ``T - (Theta/3 h + sigma + omega - A_flat (x) V_flat)``.

    Scaled by ``max(1, max|g_ab|)``.
    """
    th = np.asarray(sample.theta)[..., None, None]
    rhs = (
        th / 3.0 * sample.projector
        + sample.shear
        + sample.rotation
        - sample.accel_flat[..., :, None] * sample.V_flat[..., None, :]
    )
    return np.max(np.abs(sample.nabla - rhs), axis=(-1, -2)) / _metric_scale(sample.g)


def lie_V_metric_residual(model, p, tol: Tolerances = DEFAULT) -> np.ndarray:
    """``L_V g`` from first principles against ``2 sym(T)``."""
    f = fields_at(model, p, tol=tol)
    g = f.g.val
    dg = np.moveaxis(f.g.der, 0, -1)  # [a, b, c] = d_c g_ab
    V = f.V.val
    dV = f.dV.val  # [c, a] = d_a V^c
    lie = (
        np.einsum("...c,...abc->...ab", V, dg)
        + np.einsum("...cb,...ca->...ab", g, dV)
        + np.einsum("...ac,...cb->...ab", g, dV)
    )
    T = _nabla_jet(f).val
    return np.max(np.abs(lie - (T + np.swapaxes(T, -1, -2))), axis=(-1, -2)) / _metric_scale(g)


def _three_form(grad):
    """``(d w)_abc`` from ``grad[..., a, b, c] = d_a w_bc``."""
    return grad + np.einsum("...bca->...abc", grad) + np.einsum("...cab->...abc", grad)


def lie_two_form(V: TensorJet, w: TensorJet) -> np.ndarray:
    """``L_V w = V _| dw + d(V _| w)`` for a two-form jet (Cartan)."""
    dw = _three_form(np.moveaxis(w.der, 0, -3))
    inner = np.einsum("...a,...abc->...bc", V.val, dw)
    Vw = jeinsum("...a,...ac->...c", V, w)
    return inner + Vw.exterior()


def lie_one_form(V: TensorJet, a: TensorJet) -> np.ndarray:
    """``L_V a = V _| da + d(a(V))`` for a one-form jet (Cartan)."""
    inner = np.einsum("...a,...ab->...b", V.val, a.exterior())
    aV = jeinsum("...a,...a->...", a, V)
    return inner + aV.gradient()


INTEGRABILITY_FORMS = {
    # name: (coefficient of Theta * omega, coefficient of Theta * A_flat inside h(.))
    "stated": (1.0 / 6.0, -0.5),
    "derived": (1.0 / 3.0, 1.0),
}


def integrability_check(model, p, tol: Tolerances = DEFAULT, form: str = "stated"):
    """Residuals of the integrability conditions of a conformally stationary congruence.

    ``form="stated"`` checks ``L_V omega = Theta/6 omega`` and
    ``L_V A_flat = 1/3 h(d Theta - Theta/2 A_flat)``.  These hold whenever
    ``Theta = 0`` or ``omega = A = 0`` but not for a general conformally
    stationary congruence.  ``form="derived"`` checks the relations obtained
    from ``L_xi V_flat = (Phi/2) V_flat`` with ``xi = f V``:
    ``L_V omega = Theta/3 omega`` and ``L_V A_flat = 1/3 h(d Theta + Theta A_flat)``,
    which hold on every conformally stationary model.

    Meaningful only where the model is conformally stationary; evaluated
    unconditionally so the caller can threshold.  Returns ``(res_i, res_ii)``
    scaled by ``max(1, max|g_ab|)``.
    """
    try:
        k_omega, k_accel = INTEGRABILITY_FORMS[form]
    except KeyError:
        raise ValueError(f"unknown form {form!r}; use one of {sorted(INTEGRABILITY_FORMS)}") from None
    s = kinematics_at(model, p, tol=tol)
    V = s.jets["V"]
    th = s.theta
    lie_w = lie_two_form(V, s.jets["rotation"])
    res_i = np.max(np.abs(lie_w - k_omega * th[..., None, None] * s.rotation), axis=(-1, -2))

    A_flat = s.jets["accel_flat"]
    lie_a = lie_one_form(V, A_flat)
    alpha = s.jets["theta"].gradient() + k_accel * th[..., None] * A_flat.val
    h_alpha = alpha + s.V_flat * np.einsum("...a,...a->...", s.V, alpha)[..., None]
    res_ii = np.max(np.abs(lie_a - h_alpha / 3.0), axis=-1)
    scale = _metric_scale(s.g)
    return res_i / scale, res_ii / scale


@dataclass
class ExclusionCheck:
    """``|Theta| * ||omega||`` where the theorem's hypotheses hold, else NaN."""

    value: np.ndarray
    evaluated: np.ndarray
    status: np.ndarray
    accel_norm: np.ndarray


def expansion_rotation_exclusion(model, p, tol: Tolerances = DEFAULT) -> ExclusionCheck:
    """Evaluate ``|Theta| ||omega||_F`` for geodesic, locally certified congruences.

    ``||.||_F`` is the Frobenius norm in the observer's orthonormal frame.
    Events failing a hypothesis are reported with status ``"accelerating"``
    or ``"not_certified"`` (shear or ``d rho`` above ``tol.stationarity``).
    """
    s = kinematics_at(model, p, tol=tol)
    acc = s.accel_norm
    certified = (s.shear_norm < tol.stationarity) & (s.d_rho_norm < tol.stationarity)
    geodesic = acc < tol.accel
    status = np.where(geodesic, np.where(certified, "ok", "not_certified"), "accelerating")
    ok = status == "ok"
    value = np.where(ok, np.abs(s.theta) * s.rotation_norm, np.nan)
    return ExclusionCheck(value, ok, status, acc)
