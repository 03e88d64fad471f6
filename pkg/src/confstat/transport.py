"""Light signals, redshift, infinitesimal messages and parallax.

Null geodesics are integrated in affine parametrization over ``s in [0, 1]``
(the initial tangent is scaled by the affine span), with an embedded
Runge-Kutta 5(4) pair and dense output.  The tangent is never renormalized:
``g(K, K)`` and ``H = 1/2 g^ab k_a k_b`` are recorded as telemetry and an
integration is aborted once the null-cone breach exceeds ``tol.null``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import (
    ConjugatePointError,
    DomainError,
    GeometryError,
    NullDriftError,
    ShootingError,
    SolverError,
    StepSizeError,
)
from .geometry import (
    _as_points,
    christoffel_from,
    christoffel_jet,
    inverse_jet,
    metric_components,
    metric_jets,
    observer_components,
    riemann_from_jet,
)
from .kinematics import kinematics_at
from .quadrature import adaptive_gauss_legendre
from .tolerances import DEFAULT, Tolerances

N_SAMPLES = 65


# -- helpers ---------------------------------------------------------------------


def _dot(g, X, Y):
    return np.einsum("...a,...b,...ab->...", X, Y, g)


def _frame_sq(g, V, X):
    """Observer-frame Euclidean square of a vector: ``g(X,X) + 2 g(X,V)^2``."""
    gv = _dot(g, X, V)
    return _dot(g, X, X) + 2.0 * gv * gv


def _metric_and_observer(model, x):
    g, _, _ = metric_components(model, x, order=0)
    V, _, _ = observer_components(model, x, order=0)
    return g, V


def _run(rhs, y0, tol, t_span=(0.0, 1.0), event=None, dense=True, **kw):
    try:
        sol = solve_ivp(
            rhs, t_span, y0, method="RK45", rtol=tol.ode_rtol, atol=tol.ode_atol, dense_output=dense, **kw
        )
    except FloatingPointError as exc:  # pragma: no cover - numpy default is to warn
        raise SolverError(str(exc), event) from exc
    if sol.status == -1:
        if "step size" in sol.message.lower():
            raise StepSizeError(f"adaptive step size underflow: {sol.message}", event)
        raise SolverError(sol.message, event)
    return sol


def null_project(model, x, k, future: bool = True, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Complete the spatial part of ``k`` to a null vector at ``x``.

    Solves ``g(K, K) = 0`` for ``K^0`` and keeps the root with
    ``g(K, V) < 0`` (future) or ``> 0`` (past).  Batched over a leading axis.
    """
    x = _as_points(x)
    k = np.asarray(k, dtype=float)
    model.require_inside(x)
    g, V = _metric_and_observer(model, x)
    sp = k[..., 1:]
    a = g[..., 0, 0]
    b = np.einsum("...i,...i->...", g[..., 0, 1:], sp)
    c = np.einsum("...i,...j,...ij->...", sp, sp, g[..., 1:, 1:])
    disc = b * b - a * c
    if np.any(disc < 0) or np.any(np.abs(a) < tol.degenerate):
        raise GeometryError("no null completion of the given spatial direction", x)
    sq = np.sqrt(disc)
    roots = np.stack([(-b + sq) / a, (-b - sq) / a], axis=-1)
    cand = np.concatenate([roots[..., :, None], np.broadcast_to(sp[..., None, :], roots.shape + (3,))], axis=-1)
    gkv = np.einsum("...ra,...b,...ab->...r", cand, V, g)
    pick = np.argmin(gkv, axis=-1) if future else np.argmax(gkv, axis=-1)
    K = np.take_along_axis(cand, pick[..., None, None], axis=-2)[..., 0, :]
    gkv = np.take_along_axis(gkv, pick[..., None], axis=-1)[..., 0]
    if np.any(gkv >= 0 if future else gkv <= 0) or np.any(np.all(sp == 0, axis=-1)):
        raise GeometryError("degenerate null direction (zero spatial part)", x)
    return K


def _geodesic_rhs(model, n):
    def rhs(_, y):
        Y = y.reshape(n, 8)
        x, K = Y[:, :4], Y[:, 4:]
        ok = model.contains(x)
        if not np.all(ok):
            raise DomainError("light ray left the chart domain", x[~ok][0])
        g, dg, _ = metric_components(model, x, order=1)
        gamma = christoffel_from(np.linalg.inv(g), dg)
        acc = -np.einsum("nabc,nb,nc->na", gamma, K, K)
        return np.concatenate([K, acc], axis=1).ravel()

    return rhs


# -- light signals --------------------------------------------------------------------


@dataclass
class _Dense:
    """Dense output of one ray inside a batched solve, optionally time-reversed."""

    sol: object
    index: int
    n: int
    reverse: bool = False

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        u = 1.0 - s if self.reverse else s
        y = self.sol(np.atleast_1d(u)).reshape(self.n, 8, -1)[self.index].T
        x, K = y[:, :4], y[:, 4:]
        if self.reverse:
            K = -K
        if s.ndim == 0:
            return x[0], K[0]
        return x, K


@dataclass
class LightSignal:
    """A light signal on ``[0, 1]``: emission at ``s = 0``, reception at ``s = 1``.

    ``g_KK`` and ``hamiltonian`` monitor the null constraint, ``g_KV`` the
    time orientation, ``nu = |g(V, K)|`` the observed frequency and
    ``conformal_frequency = g(xi, K)`` is filled when a candidate is attached.
    """

    model: object
    s: np.ndarray
    x: np.ndarray
    K: np.ndarray
    g_KK: np.ndarray
    hamiltonian: np.ndarray
    g_KV: np.ndarray
    nu: np.ndarray
    dense: _Dense = field(repr=False)
    affine_span: float = 1.0
    n_steps: int = 0
    null_scale: float = 1.0
    conformal_frequency: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def state(self, s):
        """``(x(s), K(s))`` from the dense output."""
        return self.dense(s)

    @property
    def emission(self) -> np.ndarray:
        return self.x[0]

    @property
    def reception(self) -> np.ndarray:
        return self.x[-1]

    @property
    def null_drift(self) -> float:
        """``max |g(K,K)|`` relative to the initial frame norm of ``K``."""
        return float(np.max(np.abs(self.g_KK)) / self.null_scale)

    @property
    def hamiltonian_drift(self) -> float:
        return float(np.max(np.abs(self.hamiltonian - self.hamiltonian[0])) / self.null_scale)

    def attach(self, candidate) -> "LightSignal":
        """Record ``g(xi, K)`` along the samples for ``candidate``."""
        f = candidate.f(self.x)
        g, V = _metric_and_observer(self.model, self.x)
        self.conformal_frequency = f * _dot(g, V, self.K)
        return self

    def summary(self) -> dict:
        return dict(
            emission=self.emission.tolist(),
            reception=self.reception.tolist(),
            K_emission=self.K[0].tolist(),
            K_reception=self.K[-1].tolist(),
            nu_emission=float(self.nu[0]),
            nu_reception=float(self.nu[-1]),
            null_drift=self.null_drift,
            hamiltonian_max=float(np.max(np.abs(self.hamiltonian)) / self.null_scale),
            n_steps=int(self.n_steps),
            affine_span=float(self.affine_span),
            **{k: v for k, v in self.meta.items() if isinstance(v, (int, float, str, list))},
        )


def _signal_from(model, sol, index, n, n_samples, tol, reverse=False, affine_span=1.0):
    dense = _Dense(sol.sol, index, n, reverse)
    s = np.linspace(0.0, 1.0, n_samples)
    x, K = dense(s)
    g, V = _metric_and_observer(model, x)
    gKK = _dot(g, K, K)
    gKV = _dot(g, K, V)
    k_low = np.einsum("nab,nb->na", g, K)
    H = 0.5 * np.einsum("na,nb,nab->n", k_low, k_low, np.linalg.inv(g))
    steps = sol.y.reshape(n, 8, -1)[index]
    sx, sK = steps[:4].T, steps[4:].T
    gs, Vs = _metric_and_observer(model, sx)
    scale = float(_frame_sq(g[0], V[0], K[0]))
    breach = np.abs(_dot(gs, sK, sK)) / scale
    if np.max(breach) > tol.null or np.max(np.abs(gKK)) / scale > tol.null:
        worst = int(np.argmax(breach))
        raise NullDriftError("null constraint breached", sx[worst], best_residual=float(np.max(breach)))
    if np.any(gKV >= 0):
        raise GeometryError("light signal is not future pointing", x[int(np.argmax(gKV))])
    return LightSignal(
        model=model,
        s=s,
        x=x,
        K=K,
        g_KK=gKK,
        hamiltonian=H,
        g_KV=gKV,
        nu=np.abs(gKV),
        dense=dense,
        affine_span=affine_span,
        n_steps=len(sol.t) - 1,
        null_scale=scale,
    )


def integrate_null_geodesics(
    model,
    x0,
    K0,
    affine_span=1.0,
    tol: Tolerances = DEFAULT,
    n_samples: int = N_SAMPLES,
    project: bool = True,
    future: bool = True,
) -> list[LightSignal]:
    """Integrate a batch of rays in one adaptive solve.

    ``x0`` and ``K0`` have shape ``(N, 4)``.  With ``project`` the time
    component of each ``K0`` is replaced by the null completion of its
    spatial part.  Past-directed batches (``future=False``) are returned
    reversed so that every signal runs from emission to reception.
    """
    x0 = np.atleast_2d(_as_points(x0))
    K0 = np.atleast_2d(np.asarray(K0, dtype=float))
    x0 = np.broadcast_to(x0, K0.shape).copy()
    model.require_inside(x0)
    if project:
        K0 = null_project(model, x0, K0, future=future, tol=tol)
    span = np.broadcast_to(np.asarray(affine_span, dtype=float), (len(K0),))
    K0 = K0 * span[:, None]
    n = len(x0)
    y0 = np.concatenate([x0, K0], axis=1).ravel()
    sol = _run(_geodesic_rhs(model, n), y0, tol, event=x0[0])
    return [
        _signal_from(model, sol, i, n, n_samples, tol, reverse=not future, affine_span=float(span[i]))
        for i in range(n)
    ]


def integrate_null_geodesic(model, x0, K0, affine_span=1.0, tol: Tolerances = DEFAULT, **kw) -> LightSignal:
    """Single-ray version of :func:`integrate_null_geodesics`."""
    return integrate_null_geodesics(model, np.asarray(x0)[None], np.asarray(K0)[None], affine_span, tol, **kw)[0]


def hamiltonian_check(signal: LightSignal) -> float:
    """``max |H|`` over the samples, relative to the frame norm of the initial ``K``."""
    return float(np.max(np.abs(signal.hamiltonian)) / signal.null_scale)


def conformal_frequency_drift(signal: LightSignal, candidate) -> float:
    """``max |g(xi,K)(s) - g(xi,K)(0)| / |g(xi,K)(0)|``."""
    q = signal.attach(candidate).conformal_frequency
    return float(np.max(np.abs(q - q[0])) / abs(q[0]))


# -- redshift ---------------------------------------------------------------------------


@dataclass
class RedshiftRecord:
    """Redshift of a light signal computed independently three ways.

    ``r_integral`` integrates ``-g(nabla_K V, K)/g(V, K)``; ``r_endpoint`` is
    ``ln(nu_emission / nu_reception)``; ``r_potential = ln f(reception) -
    ln f(emission)`` when a candidate is supplied.  ``z = exp(r_integral) - 1``.
    """

    r_integral: float
    r_endpoint: float
    z: float
    r_potential: float | None = None
    z_potential: float | None = None
    quadrature_level: int = 0

    @property
    def consistency(self) -> float:
        errs = [abs(self.r_integral - self.r_endpoint)]
        if self.r_potential is not None:
            errs.append(abs(self.r_integral - self.r_potential))
        return max(errs)

    def as_dict(self) -> dict:
        return dict(
            r_integral=self.r_integral,
            r_endpoint=self.r_endpoint,
            r_potential=self.r_potential,
            z=self.z,
            z_potential=self.z_potential,
            consistency=self.consistency,
        )


def redshift(signal: LightSignal, candidate=None, tol: Tolerances = DEFAULT) -> RedshiftRecord:
    """Redshift function of ``signal`` and, with a candidate, its potential form."""
    model = signal.model

    def integrand(u):
        x, K = signal.state(u)
        s = kinematics_at(model, x, tol=tol)
        return -np.einsum("nab,na,nb->n", s.nabla, K, K) / np.einsum("na,na->n", s.V_flat, K)

    r_int, level = adaptive_gauss_legendre(integrand, tol.quad)
    r_end = float(np.log(signal.nu[0] / signal.nu[-1]))
    rec = RedshiftRecord(float(r_int), r_end, float(np.expm1(r_int)), quadrature_level=level)
    if candidate is not None:
        lnf = candidate.ln_f(np.stack([signal.emission, signal.reception]))
        rec.r_potential = float(lnf[1] - lnf[0])
        rec.z_potential = float(np.expm1(rec.r_potential))
    return rec


# -- observers ----------------------------------------------------------------------------


@dataclass
class Worldline:
    """Integral curve of ``V`` through ``start``, parametrized by proper time.

    ``tau_range`` is the window ``(lo, hi)`` around ``tau = 0`` at ``start``.
    """

    model: object
    start: np.ndarray
    tau_range: tuple = (-1.0, 3.0)
    tol: Tolerances = DEFAULT

    def __post_init__(self):
        self.start = _as_points(self.start)
        lo, hi = map(float, self.tau_range)
        if not lo <= 0.0 <= hi or lo == hi:
            raise ValueError("tau_range must contain 0")
        self.tau_range = (lo, hi)
        self.model.require_inside(self.start)
        self._parts = self._integrate()

    def _integrate(self):
        model = self.model

        def rhs(_, x):
            if not model.contains(x):
                raise DomainError("worldline left the chart domain", x)
            V, _, _ = observer_components(model, x[None], order=0)
            return V[0]

        parts = []
        lo, hi = self.tau_range
        for end in (lo, hi):
            if end != 0.0:
                sol = _run(rhs, self.start, self.tol, t_span=(0.0, end), event=self.start)
                parts.append((min(0.0, end), max(0.0, end), sol.sol))
        return parts

    def at(self, tau):
        tau = np.asarray(tau, dtype=float)
        lo, hi = self.tau_range
        if np.any(tau < lo - 1e-12) or np.any(tau > hi + 1e-12):
            raise DomainError(f"proper time outside the window {self.tau_range}")
        flat = np.atleast_1d(tau)
        out = np.empty(flat.shape + (4,))
        for a, b, sol in self._parts:
            m = (flat >= a) & (flat <= b)
            if np.any(m):
                out[m] = sol(flat[m]).T
        return out if tau.ndim else out[0]

    def tau_at_time(self, t: float) -> float:
        """Proper time at which the worldline reaches chart time ``t``."""
        lo, hi = self.tau_range
        f = lambda s: float(self.at(s)[0]) - t  # noqa: E731
        flo, fhi = f(lo), f(hi)
        if flo * fhi > 0:
            raise DomainError(f"chart time {t:.6g} outside the worldline window")
        return brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


# -- two-point problem ------------------------------------------------------------------------


def connect_observers(
    model,
    event,
    worldline: Worldline,
    direction: str = "forward",
    guess=None,
    tol: Tolerances = DEFAULT,
    n_samples: int = N_SAMPLES,
) -> LightSignal:
    """Light signal between ``event`` and the observer ``worldline``.

    ``direction="forward"`` emits at ``event``; ``"backward"`` receives at
    ``event`` from ``worldline``.  The unknowns are the three spatial
    components of the scaled initial tangent (the time component follows
    from the null condition).  The miss is the spatial chart difference from
    the worldline at the ray's final chart time; Newton steps use a
    forward-difference Jacobian computed in one batched solve.
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    future = direction == "forward"
    event = _as_points(event)
    model.require_inside(event)

    if guess is None:
        try:
            q = worldline.at(worldline.tau_at_time(float(event[0])))
        except DomainError:
            q = worldline.start
        w = q[1:] - event[1:]
    else:
        w = np.asarray(guess, dtype=float)
    if np.allclose(w, 0.0):
        raise ShootingError("event lies on the target worldline", event)

    def ends(ws):
        K = np.concatenate([np.zeros((len(ws), 1)), ws], axis=1)
        K = null_project(model, np.broadcast_to(event, K.shape), K, future=future, tol=tol)
        y0 = np.concatenate([np.broadcast_to(event, K.shape), K], axis=1).ravel()
        sol = _run(_geodesic_rhs(model, len(ws)), y0, tol, event=event, t_eval=[1.0], dense=False)
        Y = sol.y[:, -1].reshape(len(ws), 8)
        out = []
        for x1 in Y[:, :4]:
            tau = worldline.tau_at_time(float(x1[0]))
            out.append((x1[1:] - worldline.at(tau)[1:], tau))
        return out

    scale = max(1.0, float(np.max(np.abs(w))))
    best = (np.inf, w)
    it = 0
    for it in range(1, tol.shoot_max_iter + 1):
        h = 1e-7 * np.maximum(1.0, np.abs(w))
        try:
            res = ends(np.vstack([w, w + np.diag(h)]))
        except (DomainError, GeometryError) as exc:
            raise ShootingError(f"shooting left the admissible set: {exc}", event, best[0]) from exc
        miss = res[0][0]
        err = float(np.max(np.abs(miss)))
        if err < best[0]:
            best = (err, w.copy())
        if err < tol.shoot * scale:
            break
        Jac = np.stack([(r[0] - miss) / hi for r, hi in zip(res[1:], h)], axis=1)
        try:
            step = np.linalg.solve(Jac, miss)
        except np.linalg.LinAlgError as exc:
            raise ShootingError("singular shooting Jacobian", event, err) from exc
        lam = 1.0
        for _ in range(12):
            trial = w - lam * step
            try:
                terr = float(np.max(np.abs(ends(trial[None])[0][0])))
            except (DomainError, GeometryError):
                terr = np.inf
            if terr < err or terr < tol.shoot * scale:
                break
            lam *= 0.5
        else:
            raise ShootingError("line search failed", event, best[0])
        w = trial
    else:
        raise ShootingError(f"no convergence in {tol.shoot_max_iter} iterations", event, best[0])

    sig = integrate_null_geodesics(
        model, event, np.concatenate([[0.0], w])[None], tol=tol, n_samples=n_samples, future=future
    )[0]
    sig.meta.update(tau=float(res[0][1]), miss=err, iterations=it, direction=direction, w=w.tolist())
    return sig


# -- infinitesimal messages --------------------------------------------------------------------


def _message_rhs(model, n_fields):
    def rhs(_, y):
        x, K = y[:4], y[4:8]
        if not model.contains(x):
            raise DomainError("light signal left the chart domain", x)
        g, dg, d2g = metric_components(model, x[None], order=2)
        gj, dgj = metric_jets(g, dg, d2g)
        gam = christoffel_jet(inverse_jet(gj), dgj)
        R = riemann_from_jet(gam)[0]
        G = gam.val[0]
        GK = np.einsum("abc,b->ac", G, K)  # Gamma^a_bc K^b
        RKK = np.einsum("abcd,b,c->ad", R, K, K)
        JP = y[8:].reshape(n_fields, 2, 4)
        J, P = JP[:, 0], JP[:, 1]
        dJ = P - J @ GK.T
        dP = J @ RKK.T - P @ GK.T
        return np.concatenate([K, -GK @ K, np.stack([dJ, dP], axis=1).ravel()])

    return rhs


@dataclass
class MessageSolution:
    """Infinitesimal message along a light signal.

    ``J`` and ``P = nabla_K J`` are sampled on ``signal.s``; ``J(1) = c V(1)``.
    ``parallax_residual`` is the screen norm of ``J - v V``.
    """

    signal: LightSignal
    s: np.ndarray
    J: np.ndarray
    P: np.ndarray
    c: float
    v: np.ndarray
    parallax_residual: np.ndarray
    g_KP: np.ndarray
    cvf_residual: np.ndarray
    endpoint_residual: float
    condition: float
    initial_residual: float

    @property
    def g_KP_drift(self) -> float:
        return float(np.max(np.abs(self.g_KP - self.g_KP[0])))

    @property
    def max_parallax_residual(self) -> float:
        return float(np.max(self.parallax_residual))

    def summary(self) -> dict:
        return dict(
            c=self.c,
            v_min=float(np.min(self.v)),
            v_max=float(np.max(self.v)),
            max_parallax_residual=self.max_parallax_residual,
            g_KP_max=float(np.max(np.abs(self.g_KP))),
            g_KP_drift=self.g_KP_drift,
            cvf_residual_max=float(np.max(self.cvf_residual)),
            endpoint_residual=self.endpoint_residual,
            condition=self.condition,
        )


def screen_projection(g, V, K, X):
    """Component of ``X`` orthogonal to ``span{K, V}``."""
    nu = -_dot(g, K, V)
    e = (K - nu[..., None] * V) / nu[..., None]
    return X + _dot(g, X, V)[..., None] * V - _dot(g, X, e)[..., None] * e


def solve_infinitesimal_message(model, signal: LightSignal, tol: Tolerances = DEFAULT) -> MessageSolution:
    """Jacobi field with ``J(0) = V``, ``J(1) = c V(1)`` and ``g(K, nabla_K J) = 0``.

    The Jacobi equation ``nabla_K nabla_K J = R(K, J) K`` is linear, so one
    particular solution (``J(0) = V``, ``P(0) = 0``) and four with
    ``J(0) = 0``, ``P(0) = e_i`` are integrated together with the ray; the
    five unknowns (``P(0)`` and ``c``) solve a 5x5 system.  A numerically
    singular system indicates conjugate endpoints.
    """
    x0, K0 = signal.x[0], signal.K[0]
    g0, V0 = _metric_and_observer(model, x0[None])
    g0, V0 = g0[0], V0[0]
    fields = np.zeros((5, 2, 4))
    fields[0, 0] = V0
    fields[1:, 1] = np.eye(4)
    y0 = np.concatenate([x0, K0, fields.ravel()])
    sol = _run(_message_rhs(model, 5), y0, tol, event=x0)
    Y = sol.sol(signal.s).T  # (n, 48)
    fs = Y[:, 8:].reshape(len(signal.s), 5, 2, 4)
    x1, K1 = Y[-1, :4], Y[-1, 4:8]
    g1, V1 = _metric_and_observer(model, x1[None])
    V1 = V1[0]

    M = np.zeros((5, 5))
    rhs = np.zeros(5)
    M[:4, :4] = fs[-1, 1:, 0].T
    M[:4, 4] = -V1
    M[4, :4] = g0 @ K0
    rhs[:4] = -fs[-1, 0, 0]
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > tol.conjugate_cond:
        raise ConjugatePointError(f"message system is singular (condition {cond:.3e})", x1)
    sol5 = np.linalg.solve(M, rhs)
    beta, c = sol5[:4], float(sol5[4])

    J = fs[:, 0, 0] + np.einsum("i,nia->na", beta, fs[:, 1:, 0])
    P = fs[:, 0, 1] + np.einsum("i,nia->na", beta, fs[:, 1:, 1])
    x, K = Y[:, :4], Y[:, 4:8]
    g, V = _metric_and_observer(model, x)
    gKV = _dot(g, K, V)
    v = _dot(g, K, J) / gKV
    Y_res = screen_projection(g, V, K, J - v[:, None] * V)
    par = np.sqrt(np.maximum(_dot(g, Y_res, Y_res), 0.0))
    gKP = _dot(g, K, P)
    # d/ds g(v V, K) = g(nabla_K J, K) for the message
    cvf = np.abs(gKP)
    Vscale = np.sqrt(_frame_sq(g[-1], V1, V1))
    end_res = float(np.sqrt(_frame_sq(g[-1], V1, J[-1] - c * V1)) / Vscale)
    init_res = float(np.max(np.abs(J[0] - V0)))
    return MessageSolution(signal, signal.s, J, P, c, v, par, gKP, cvf, end_res, cond, init_res)


# -- parallax ---------------------------------------------------------------------------------------


def screen_angle(g, V, K1, K2) -> float:
    """Angle between the spatial directions ``Y_i = K_i + g(K_i, V) V``."""
    Y1 = K1 + _dot(g, K1, V) * V
    Y2 = K2 + _dot(g, K2, V) * V
    g11, g22, g12 = _dot(g, Y1, Y1), _dot(g, Y2, Y2), _dot(g, Y1, Y2)
    return float(np.arctan2(np.sqrt(max(g11 * g22 - g12 * g12, 0.0)), g12))


@dataclass
class ParallaxReport:
    """Celestial-angle history and message residuals for one observer triple."""

    taus: np.ndarray
    angles: np.ndarray
    angle_drift: float
    max_parallax_residual: float
    messages: list
    signals: list
    verdict: str
    threshold: float

    def as_dict(self) -> dict:
        return dict(
            taus=self.taus.tolist(),
            angles=self.angles.tolist(),
            angle_drift=self.angle_drift,
            max_parallax_residual=self.max_parallax_residual,
            verdict=self.verdict,
            threshold=self.threshold,
            messages=[m.summary() for m in self.messages],
            signals=[s.summary() for s in self.signals],
        )


def parallax_verdict(
    model,
    receiver: Worldline,
    sources,
    taus,
    tol: Tolerances = DEFAULT,
    messages: bool = True,
    n_samples: int = 33,
) -> ParallaxReport:
    """Watch two sources from ``receiver`` at the reception proper times ``taus``.

    At each reception event both sources are connected by backward shooting,
    the angle between the screen directions is recorded and (optionally) the
    infinitesimal message along each signal is solved.
    """
    src1, src2 = sources
    taus = np.asarray(taus, dtype=float)
    angles, msgs, sigs = [], [], []
    guesses = [None, None]
    for tau in taus:
        p = receiver.at(tau)
        pair = []
        for i, src in enumerate((src1, src2)):
            sig = connect_observers(model, p, src, "backward", guess=guesses[i], tol=tol, n_samples=n_samples)
            guesses[i] = np.asarray(sig.meta["w"])
            pair.append(sig)
            sigs.append(sig)
            if messages:
                msgs.append(solve_infinitesimal_message(model, sig, tol))
        g, V = _metric_and_observer(model, p[None])
        angles.append(screen_angle(g[0], V[0], pair[0].K[-1], pair[1].K[-1]))
    angles = np.asarray(angles)
    drift = float(np.max(np.abs(angles - angles[0])))
    par = max((m.max_parallax_residual for m in msgs), default=float("nan"))
    thr = tol.residual
    free = drift < thr and (not messages or par < thr)
    return ParallaxReport(taus, angles, drift, par, msgs, sigs, "parallax_free" if free else "parallax_detected", thr)
