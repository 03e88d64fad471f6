"""Point-wise Lorentzian tensor algebra.

Index conventions (chart components, batch axes leading):

* ``dg[..., a, b, c] = d_c g_ab`` and ``d2g[..., a, b, c, d] = d_d d_c g_ab``
* ``gamma[..., a, b, c] = Gamma^a_bc``
* ``riem[..., a, b, c, d] = R^a_bcd`` with
  ``R^a_bcd = d_c Gamma^a_db - d_d Gamma^a_cb + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb``,
  i.e. ``R(X, Y)Z = [nabla_X, nabla_Y]Z - nabla_[X,Y] Z`` with
  ``(R(X, Y)Z)^a = R^a_bcd Z^b X^c Y^d``.  In this convention the geodesic
  deviation equation reads ``nabla_K nabla_K J = R(K, J)K``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dual
from .dual import Jet, TensorJet
from .errors import DegenerateMetricError, GeometryError, SignatureError
from .tolerances import DEFAULT, Tolerances

DIM = 4


@dataclass(frozen=True)
class TangentVector:
    """Chart components ``comps`` of a vector at ``base``."""

    base: np.ndarray
    comps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "comps", np.asarray(self.comps, dtype=float))
        if not (np.all(np.isfinite(self.base)) and np.all(np.isfinite(self.comps))):
            raise ValueError("tangent vector has non-finite entries")


@dataclass(frozen=True)
class MetricEvaluation:
    point: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    dg: np.ndarray
    d2g: np.ndarray | None

    def residuals(self) -> dict:
        """Invariant residuals (max over the batch)."""
        eye = np.eye(DIM)
        out = {
            "symmetry": float(np.max(np.abs(self.g - np.swapaxes(self.g, -1, -2)))),
            "inverse": float(np.max(np.abs(self.g @ self.g_inv - eye))),
            "dg_symmetry": float(np.max(np.abs(self.dg - np.swapaxes(self.dg, -2, -3)))),
        }
        if self.d2g is not None:
            out["d2g_symmetry"] = float(
                max(
                    np.max(np.abs(self.d2g - np.swapaxes(self.d2g, -1, -2))),
                    np.max(np.abs(self.d2g - np.swapaxes(self.d2g, -3, -4))),
                )
            )
        return out


@dataclass(frozen=True)
class ConnectionCoefficients:
    gamma: np.ndarray
    compatibility: np.ndarray  # d_c g_ab - Gamma^d_ca g_db - Gamma^d_cb g_ad


@dataclass(frozen=True)
class RiemannEvaluation:
    riem: np.ndarray

    def antisymmetry_residual(self) -> float:
        return float(np.max(np.abs(self.riem + np.swapaxes(self.riem, -1, -2))))

    def bianchi_residual(self) -> float:
        r = self.riem
        cyc = r + np.einsum("...abcd->...acdb", r) + np.einsum("...abcd->...adbc", r)
        return float(np.max(np.abs(cyc)))


# -- component evaluation -----------------------------------------------------


def _pack(entries, shape, batch, order):
    """Stack nested component output into value/gradient/Hessian arrays."""
    val = np.zeros(batch + shape)
    d1 = np.zeros(batch + shape + (DIM,))
    d2 = np.zeros(batch + shape + (DIM, DIM)) if order >= 2 else None
    for idx in np.ndindex(*shape):
        e = entries
        for i in idx:
            e = e[i]
        sel = (Ellipsis,) + idx
        if isinstance(e, Jet):
            val[sel] = e.v
            d1[sel + (slice(None),)] = e.d
            if d2 is not None:
                d2[sel + (slice(None), slice(None))] = e.dd
        else:
            val[sel] = e
    return val, d1, d2


def _as_points(p):
    pts = np.asarray(p, dtype=float)
    if pts.shape[-1] != DIM:
        raise ValueError(f"points must have trailing dimension {DIM}, got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("non-finite coordinates")
    return pts


def metric_components(model, pts, order=2):
    """Raw ``(g, dg, d2g)`` for points already known to be in the domain."""
    batch = pts.shape[:-1]
    x = dual.seed(pts, order=order) if order > 0 else [pts[..., i] for i in range(DIM)]
    comps = model.metric(x)
    # symmetrize from the upper triangle so user metrics may leave the lower blank
    full = [[comps[min(a, b)][max(a, b)] for b in range(DIM)] for a in range(DIM)]
    if order == 0:
        val = np.zeros(batch + (DIM, DIM))
        for a in range(DIM):
            for b in range(DIM):
                val[..., a, b] = full[a][b]
        return val, None, None
    return _pack(full, (DIM, DIM), batch, order)


def observer_components(model, pts, order=2):
    """Observer field ``V^a`` with ``dV[..., a, c] = d_c V^a`` and second derivatives."""
    batch = pts.shape[:-1]
    x = dual.seed(pts, order=order) if order > 0 else [pts[..., i] for i in range(DIM)]
    comps = list(model.observer(x))
    if order == 0:
        val = np.zeros(batch + (DIM,))
        for a in range(DIM):
            val[..., a] = comps[a]
        return val, None, None
    return _pack(comps, (DIM,), batch, order)


def evaluate_metric(model, p, order: int = 2, tol: Tolerances = DEFAULT, check: bool = True):
    """Metric, inverse and exact derivative blocks at ``p``.

    ``p`` may be a single event ``(4,)`` or a batch ``(..., 4)``.  With
    ``check`` the chart domain, degeneracy and signature are verified.
    """
    pts = _as_points(p)
    if check:
        model.require_inside(pts)
    g, dg, d2g = metric_components(model, pts, order=max(order, 1))
    det = np.linalg.det(g)
    if check:
        bad = np.abs(det) < tol.degenerate
        if np.any(bad):
            raise DegenerateMetricError("metric degenerate", pts[bad][0] if pts.ndim > 1 else pts)
    g_inv = np.linalg.inv(g)
    if check:
        check_signature(g, pts)
    return MetricEvaluation(pts, g, g_inv, dg, d2g if order >= 2 else None)


def check_signature(g, pts=None) -> None:
    """Raise :class:`SignatureError` unless every metric has signature (-,+,+,+)."""
    eig = np.linalg.eigvalsh(g)
    nneg = np.sum(eig < 0, axis=-1)
    npos = np.sum(eig > 0, axis=-1)
    bad = (nneg != 1) | (npos != 3)
    if np.any(bad):
        where = None
        if pts is not None:
            where = pts[bad][0] if np.ndim(bad) else pts
        raise SignatureError("signature is not (-,+,+,+)", where)


def christoffel_from(g_inv, dg):
    """Levi-Civita symbols ``Gamma^a_bc = 1/2 g^ad (d_b g_dc + d_c g_db - d_d g_bc)``."""
    # dg[..., d, c, b] = d_b g_dc
    lower = 0.5 * (
        np.einsum("...dcb->...dbc", dg) + np.einsum("...dbc->...dbc", dg) - np.einsum("...bcd->...dbc", dg)
    )
    return np.einsum("...ad,...dbc->...abc", g_inv, lower)


def christoffel_at(model, p, tol: Tolerances = DEFAULT) -> ConnectionCoefficients:
    me = evaluate_metric(model, p, order=1, tol=tol)
    gamma = christoffel_from(me.g_inv, me.dg)
    compat = (
        me.dg
        - np.einsum("...dca,...db->...abc", gamma, me.g)
        - np.einsum("...dcb,...ad->...abc", gamma, me.g)
    )
    return ConnectionCoefficients(gamma, compat)


def metric_jets(g, dg, d2g):
    """Tensor jets of ``g`` and of ``dg`` (derivative index in front)."""
    g_jet = TensorJet(g, np.moveaxis(dg, -1, 0))
    dg_jet = TensorJet(dg, np.moveaxis(d2g, -1, 0))
    return g_jet, dg_jet


def inverse_jet(g_jet: TensorJet) -> TensorJet:
    inv = np.linalg.inv(g_jet.val)
    der = -np.einsum("...ab,k...bc,...cd->k...ad", inv, g_jet.der, inv)
    return TensorJet(inv, der)


def christoffel_jet(g_inv_jet: TensorJet, dg_jet: TensorJet) -> TensorJet:
    """Christoffel symbols together with their first partial derivatives."""
    lower_val = 0.5 * (
        np.einsum("...dcb->...dbc", dg_jet.val) + dg_jet.val - np.einsum("...bcd->...dbc", dg_jet.val)
    )
    lower_der = 0.5 * (
        np.einsum("k...dcb->k...dbc", dg_jet.der) + dg_jet.der - np.einsum("k...bcd->k...dbc", dg_jet.der)
    )
    return dual.jeinsum("...ad,...dbc->...abc", g_inv_jet, TensorJet(lower_val, lower_der))


def riemann_from_jet(gamma_jet: TensorJet) -> np.ndarray:
    G = gamma_jet.val
    dG = gamma_jet.der  # dG[c, ..., a, d, b] = d_c Gamma^a_db
    d_c = np.einsum("c...adb->...abcd", dG)
    d_d = np.einsum("d...acb->...abcd", dG)
    quad = np.einsum("...ace,...edb->...abcd", G, G) - np.einsum("...ade,...ecb->...abcd", G, G)
    return d_c - d_d + quad


def riemann_at(model, p, tol: Tolerances = DEFAULT) -> RiemannEvaluation:
    me = evaluate_metric(model, p, order=2, tol=tol)
    g_jet, dg_jet = metric_jets(me.g, me.dg, me.d2g)
    gamma = christoffel_jet(inverse_jet(g_jet), dg_jet)
    return RiemannEvaluation(riemann_from_jet(gamma))


def inner(me: MetricEvaluation, X: TangentVector, Y: TangentVector) -> float:
    """``g_ab X^a Y^b`` for vectors based at the evaluation point."""
    if not (np.allclose(X.base, me.point, rtol=0, atol=0) and np.allclose(Y.base, me.point, rtol=0, atol=0)):
        raise GeometryError("tangent vectors are not based at the evaluation point", me.point)
    return float(np.einsum("ab,a,b->", me.g, X.comps, Y.comps))


# -- observer-frame norms -------------------------------------------------------


def frame_metric_inv(g_inv, V):
    """Inverse of the Riemannian metric ``g + 2 V_flat (x) V_flat``."""
    return g_inv + 2.0 * V[..., :, None] * V[..., None, :]


def frame_norm2(T, g_inv, V):
    """Squared norm of a covariant tensor in the observer's orthonormal frame."""
    G = frame_metric_inv(g_inv, V)
    if T.ndim - G.ndim == -1:
        return np.einsum("...a,...b,...ab->...", T, T, G)
    return np.einsum("...ab,...cd,...ac,...bd->...", T, T, G, G)


def frame_norm(T, g_inv, V):
    return np.sqrt(np.maximum(frame_norm2(T, g_inv, V), 0.0))


def frame_vector_norm(X, g, V_flat):
    """Observer-frame Euclidean norm of a contravariant vector."""
    G = g + 2.0 * V_flat[..., :, None] * V_flat[..., None, :]
    return np.sqrt(np.maximum(np.einsum("...a,...b,...ab->...", X, X, G), 0.0))
