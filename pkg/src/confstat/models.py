"""Built-in world models and the registration point for custom ones.

A model is a metric together with its observer congruence.  Component
functions receive the four chart coordinates as jets (or plain arrays) and
must only use arithmetic and the functions in :mod:`confstat.dual`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import dual
from .errors import ConfigError, DomainError, NormalizationError
from .tolerances import DEFAULT, Tolerances

CARTESIAN = ("t", "x", "y", "z")


@dataclass(frozen=True)
class MetricModel:
    """A world model ``(g, V)`` on a chart box.

    ``metric(x)`` returns a nested 4x4 list (only the upper triangle is read);
    ``observer(x)`` returns the four components of ``V``.  ``inside`` is an
    optional extra domain predicate on point arrays.  ``region`` is the
    reference scan box used by fixtures and the CLI defaults.
    ``expectations`` documents analytic facts used as test fixtures.
    """

    family: str
    params: dict
    lo: np.ndarray
    hi: np.ndarray
    metric: Callable
    observer: Callable
    coords: tuple = CARTESIAN
    inside: Callable | None = None
    region: tuple | None = None
    expectations: dict = field(default_factory=dict)

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        ok = np.all((pts >= self.lo) & (pts <= self.hi), axis=-1)
        if self.inside is not None:
            ok = ok & np.asarray(self.inside(pts), dtype=bool)
        return ok

    def require_inside(self, pts) -> None:
        ok = self.contains(pts)
        if not np.all(ok):
            pts = np.asarray(pts, dtype=float)
            where = pts[~ok][0] if pts.ndim > 1 else pts
            raise DomainError(f"outside the chart domain of {self.family}", where)

    @property
    def reference_region(self) -> tuple[np.ndarray, np.ndarray]:
        if self.region is not None:
            return np.asarray(self.region[0], float), np.asarray(self.region[1], float)
        return self.lo, self.hi

    def axis(self, name: str) -> int:
        try:
            return self.coords.index(name)
        except ValueError:
            raise ConfigError(f"model {self.family} has no coordinate {name!r}") from None


def _diag(*entries):
    z = 0.0
    e0, e1, e2, e3 = entries
    return [[e0, z, z, z], [z, e1, z, z], [z, z, e2, z], [z, z, z, e3]]


def _box(lo, hi):
    return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)


# -- families -----------------------------------------------------------------


def _minkowski_static(params):
    lo, hi = _box([-10] * 4, [10] * 4)
    return MetricModel(
        "minkowski_static",
        {},
        lo,
        hi,
        metric=lambda x: _diag(-1.0, 1.0, 1.0, 1.0),
        observer=lambda x: [1.0, 0.0, 0.0, 0.0],
        region=_box([0, -1, -1, -1], [1, 1, 1, 1]),
        expectations=dict(
            theta=lambda p: 0.0,
            shear_vanishes=True,
            rotation_vanishes=True,
            accel_vanishes=True,
            conformally_stationary=True,
            killing=True,
            connecting_function=lambda p: np.ones(np.shape(p)[:-1]),
        ),
    )


def _minkowski_boosted(params):
    beta = float(params.get("beta", 0.3))
    if not -1.0 < beta < 1.0:
        raise ConfigError("minkowski_boosted needs |beta| < 1")
    gamma = 1.0 / np.sqrt(1.0 - beta * beta)
    lo, hi = _box([-10] * 4, [10] * 4)
    return MetricModel(
        "minkowski_boosted",
        {"beta": beta},
        lo,
        hi,
        metric=lambda x: _diag(-1.0, 1.0, 1.0, 1.0),
        observer=lambda x: [gamma, gamma * beta, 0.0, 0.0],
        region=_box([0, -1, -1, -1], [1, 1, 1, 1]),
        expectations=dict(
            theta=lambda p: 0.0,
            shear_vanishes=True,
            rotation_vanishes=True,
            accel_vanishes=True,
            conformally_stationary=True,
            killing=True,
            connecting_function=lambda p: np.ones(np.shape(p)[:-1]),
        ),
    )


def _minkowski_accelerated(params):
    """Uniformly accelerated (Rindler) observers in the wedge ``x > |t|``."""
    lo, hi = _box([-5, 0.0, -10, -10], [5, 10, 10, 10])

    def observer(x):
        t, X = x[0], x[1]
        rho = dual.sqrt(X * X - t * t)
        return [X / rho, t / rho, 0.0, 0.0]

    return MetricModel(
        "minkowski_accelerated",
        {},
        lo,
        hi,
        metric=lambda x: _diag(-1.0, 1.0, 1.0, 1.0),
        observer=observer,
        inside=lambda p: p[..., 1] > np.abs(p[..., 0]) + 1e-3,
        region=_box([-0.5, 1.5, -1, -1], [0.5, 3.0, 1, 1]),
        expectations=dict(
            theta=lambda p: 0.0,
            shear_vanishes=True,
            rotation_vanishes=True,
            accel_vanishes=False,
            conformally_stationary=True,
            killing=True,
            connecting_function=lambda p: np.sqrt(p[..., 1] ** 2 - p[..., 0] ** 2),
        ),
    )


def _minkowski_rotating(params):
    """Rigidly rotating observers ``V ~ d_t + Omega d_phi`` in Cartesian coordinates."""
    om = float(params.get("Omega", 0.5))
    if om <= 0:
        raise ConfigError("minkowski_rotating needs Omega > 0")
    r = 0.6 / om
    lo, hi = _box([-10, -r, -r, -10], [10, r, r, 10])

    def observer(x):
        X, Y = x[1], x[2]
        gam = 1.0 / dual.sqrt(1.0 - om * om * (X * X + Y * Y))
        return [gam, -om * Y * gam, om * X * gam, 0.0]

    half = 0.5 / om
    return MetricModel(
        "minkowski_rotating",
        {"Omega": om},
        lo,
        hi,
        metric=lambda x: _diag(-1.0, 1.0, 1.0, 1.0),
        observer=observer,
        inside=lambda p: om * om * (p[..., 1] ** 2 + p[..., 2] ** 2) < 1.0,
        region=_box([0, -half, -half, -1], [1, half, half, 1]),
        expectations=dict(
            theta=lambda p: 0.0,
            shear_vanishes=True,
            rotation_vanishes=False,
            accel_vanishes=False,
            conformally_stationary=True,
            killing=True,
            connecting_function=lambda p: np.sqrt(1.0 - om * om * (p[..., 1] ** 2 + p[..., 2] ** 2)),
        ),
    )


def _flrw_flat(params):
    """Spatially flat FLRW with ``a = exp(H t)`` or, given ``p``, ``a = t**p``."""
    if "p" in params:
        p = float(params["p"])
        if p <= 0:
            raise ConfigError("flrw_flat power law needs p > 0")

        def scale(t):
            return t**p

        def theta(pt):
            return 3.0 * p / pt[..., 0]

        lo, hi = _box([0.2, -20, -20, -20], [20, 20, 20, 20])
        region = _box([1, -1, -1, -1], [2, 1, 1, 1])
        used = {"p": p}
    else:
        H = float(params.get("H", 0.1))
        if H <= 0:
            raise ConfigError("flrw_flat needs H > 0 (expanding fixture)")

        def scale(t):
            return dual.exp(H * t)

        def theta(pt):
            return np.full(np.shape(pt)[:-1], 3.0 * H)

        lo, hi = _box([-20, -20, -20, -20], [20, 20, 20, 20])
        region = _box([0, -1, -1, -1], [1, 1, 1, 1])
        used = {"H": H}

    def metric(x):
        a = scale(x[0])
        a2 = a * a
        return _diag(-1.0, a2, a2, a2)

    return MetricModel(
        "flrw_flat",
        used,
        lo,
        hi,
        metric=metric,
        observer=lambda x: [1.0, 0.0, 0.0, 0.0],
        region=region,
        expectations=dict(
            theta=theta,
            shear_vanishes=True,
            rotation_vanishes=True,
            accel_vanishes=True,
            conformally_stationary=True,
            killing=False,
            connecting_function=lambda pt: np.asarray(scale(np.asarray(pt)[..., 0])),
        ),
    )


def _bianchi_I(params):
    """``diag(-1, e^{2 h1 t}, e^{2 h2 t}, e^{2 h3 t})`` with comoving observers."""
    h = [float(params.get(k, d)) for k, d in (("h1", 1.0), ("h2", 0.0), ("h3", 0.0))]
    lo, hi = _box([-10] * 4, [10] * 4)

    def metric(x):
        t = x[0]
        return _diag(-1.0, *[dual.exp(2.0 * hi_ * t) if hi_ != 0 else 1.0 for hi_ in h])

    iso = h[0] == h[1] == h[2]
    return MetricModel(
        "bianchi_I",
        {"h1": h[0], "h2": h[1], "h3": h[2]},
        lo,
        hi,
        metric=metric,
        observer=lambda x: [1.0, 0.0, 0.0, 0.0],
        region=_box([0, -1, -1, -1], [1, 1, 1, 1]),
        expectations=dict(
            theta=lambda p: np.full(np.shape(p)[:-1], sum(h)),
            shear_vanishes=iso,
            rotation_vanishes=True,
            accel_vanishes=True,
            conformally_stationary=iso,
            killing=iso and h[0] == 0.0,
        ),
    )


def _goedel(params):
    """Goedel's rotating dust, ``a^2 [-(dt + e^x dz)^2 + dx^2 + dy^2 + e^{2x} dz^2 / 2]``.

    The vorticity scalar is ``Omega = 1 / (sqrt(2) a)``.
    """
    om = float(params.get("Omega", 1.0))
    if om <= 0:
        raise ConfigError("goedel needs Omega > 0")
    a = 1.0 / (np.sqrt(2.0) * om)
    a2 = a * a
    lo, hi = _box([-10, -3, -10, -10], [10, 3, 10, 10])

    def metric(x):
        ex = dual.exp(x[1])
        z = 0.0
        return [
            [-a2, z, z, -a2 * ex],
            [z, a2, z, z],
            [z, z, a2, z],
            [z, z, z, -0.5 * a2 * ex * ex],
        ]

    return MetricModel(
        "goedel",
        {"Omega": om},
        lo,
        hi,
        metric=metric,
        observer=lambda x: [1.0 / a, 0.0, 0.0, 0.0],
        region=_box([0, -1, -1, -1], [1, 1, 1, 1]),
        expectations=dict(
            theta=lambda p: np.zeros(np.shape(p)[:-1]),
            shear_vanishes=True,
            rotation_vanishes=False,
            rotation_norm=np.sqrt(2.0) * om,
            accel_vanishes=True,
            conformally_stationary=True,
            killing=True,
            connecting_function=lambda p: np.ones(np.shape(p)[:-1]),
        ),
    )


def _einstein_static(params):
    """Einstein's static universe in hyperspherical coordinates ``(t, chi, theta, phi)``."""
    R = float(params.get("R", 1.0))
    if R <= 0:
        raise ConfigError("einstein_static needs R > 0")
    lo, hi = _box([-10, 0.2, 0.2, -10], [10, np.pi - 0.2, np.pi - 0.2, 10])

    def metric(x):
        s1 = dual.sin(x[1])
        s2 = dual.sin(x[2])
        return _diag(-1.0, R * R, R * R * s1 * s1, R * R * s1 * s1 * s2 * s2)

    return MetricModel(
        "einstein_static",
        {"R": R},
        lo,
        hi,
        metric=metric,
        observer=lambda x: [1.0, 0.0, 0.0, 0.0],
        coords=("t", "chi", "theta", "phi"),
        region=_box([0, 1.0, 1.0, -0.5], [1, 2.0, 2.0, 0.5]),
        expectations=dict(
            theta=lambda p: np.zeros(np.shape(p)[:-1]),
            shear_vanishes=True,
            rotation_vanishes=True,
            accel_vanishes=True,
            conformally_stationary=True,
            killing=True,
            connecting_function=lambda p: np.ones(np.shape(p)[:-1]),
        ),
    )


FAMILIES = {
    "minkowski_static": _minkowski_static,
    "minkowski_boosted": _minkowski_boosted,
    "minkowski_accelerated": _minkowski_accelerated,
    "minkowski_rotating": _minkowski_rotating,
    "flrw_flat": _flrw_flat,
    "bianchi_I": _bianchi_I,
    "goedel": _goedel,
    "einstein_static": _einstein_static,
}


def instantiate(family: str, params: dict | None = None, **kwargs) -> MetricModel:
    """Build a shipped model, e.g. ``instantiate("flrw_flat", H=0.1)``."""
    params = dict(params or {}, **kwargs)
    try:
        builder = FAMILIES[family]
    except KeyError:
        raise ConfigError(f"unknown model family {family!r}; known: {sorted(FAMILIES)}") from None
    return builder(params)


def _scan_points(lo, hi, n):
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 4)


def validate_model(model: MetricModel, n: int = 3, tol: Tolerances = DEFAULT) -> None:
    """Scan the reference region for signature and normalization violations."""
    from .geometry import check_signature, metric_components, observer_components

    lo, hi = model.reference_region
    pts = _scan_points(lo, hi, n)
    pts = pts[model.contains(pts)]
    if len(pts) == 0:
        raise ConfigError(f"reference region of {model.family} misses its domain")
    g, _, _ = metric_components(model, pts, order=0)
    check_signature(g, pts)
    V, _, _ = observer_components(model, pts, order=0)
    norm = np.einsum("...a,...b,...ab->...", V, V, g)
    bad = np.abs(norm + 1.0) > tol.norm
    if np.any(bad):
        raise NormalizationError(f"g(V,V) = {norm[bad][0]:.6g}, expected -1", pts[bad][0])
    bad = V[..., 0] <= 0
    if np.any(bad):
        raise NormalizationError("V is not future pointing (V^0 <= 0)", pts[bad][0])


def register_custom(
    metric: Callable,
    observer: Callable,
    lo,
    hi,
    name: str = "custom",
    params: dict | None = None,
    coords: tuple = CARTESIAN,
    inside: Callable | None = None,
    region: tuple | None = None,
    expectations: dict | None = None,
    scan: int = 3,
    tol: Tolerances = DEFAULT,
) -> MetricModel:
    """Wrap user component functions as a model, rejecting invalid ones.

    Raises :class:`~confstat.errors.SignatureError` or
    :class:`~confstat.errors.NormalizationError` with the offending event.
    """
    lo, hi = _box(lo, hi)
    if lo.shape != (4,) or hi.shape != (4,) or np.any(hi <= lo):
        raise ConfigError("domain box needs 4 strictly increasing intervals")
    model = MetricModel(
        name,
        dict(params or {}),
        lo,
        hi,
        metric=metric,
        observer=observer,
        coords=tuple(coords),
        inside=inside,
        region=None if region is None else _box(*region),
        expectations=dict(expectations or {}),
    )
    validate_model(model, n=scan, tol=tol)
    return model
