import numpy as np
import pytest

import oracles as O
from confstat import dual, models
from confstat.conformal import ConformalCandidate
from confstat.errors import ConjugatePointError, DomainError, NullDriftError, ShootingError
from confstat.tolerances import DEFAULT
from confstat.transport import (
    Worldline,
    conformal_frequency_drift,
    connect_observers,
    hamiltonian_check,
    integrate_null_geodesic,
    integrate_null_geodesics,
    null_project,
    parallax_verdict,
    redshift,
    screen_angle,
    screen_projection,
    solve_infinitesimal_message,
)


def _random_rays(model, n, rng, span=1.0):
    lo, hi = model.reference_region
    x0 = rng.uniform(lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo), size=(n, 4))
    K = np.zeros((n, 4))
    K[:, 1:] = rng.normal(size=(n, 3))
    K[:, 1:] *= span / np.linalg.norm(K[:, 1:], axis=1, keepdims=True)
    return x0, K


def test_minkowski_straight_line(mink):
    sig = integrate_null_geodesic(mink, np.zeros(4), [1.0, 1.0, 0, 0], project=False)
    assert np.max(np.abs(sig.x - np.outer(sig.s, [1, 1, 0, 0]))) < 1e-12
    assert np.all(sig.g_KK == 0.0)
    assert sig.null_drift == 0.0 and hamiltonian_check(sig) == 0.0


def test_null_projection_is_future_pointing(goedel, rng):
    x = O.random_points(goedel, 5, rng)
    k = np.concatenate([np.zeros((5, 1)), rng.normal(size=(5, 3))], axis=1)
    K = null_project(goedel, x, k)
    for p, v in zip(x, K):
        gm = O.metric(goedel, p)
        V = O.observer(goedel, p)
        assert abs(v @ gm @ v) < 1e-12 * (1 + np.max(np.abs(v)) ** 2)
        assert v @ gm @ V < 0
    assert np.allclose(K[:, 1:], k[:, 1:])
    past = null_project(goedel, x, k, future=False)
    assert np.all([v @ O.metric(goedel, p) @ O.observer(goedel, p) > 0 for p, v in zip(x, past)])


def test_flrw_conserved_quantities_by_hand(flrw):
    sig = integrate_null_geodesic(flrw, np.zeros(4), [0, 1.0, 0.5, 0], affine_span=2.0)
    a = np.exp(0.1 * sig.x[:, 0])
    energy = a * sig.K[:, 0]  # a dt/ds from the conformal vector field a d_t
    momentum = a**2 * sig.K[:, 1]  # a^2 dx/ds from the Killing field d_x
    assert np.max(np.abs(energy / energy[0] - 1)) < 1e-8
    assert np.max(np.abs(momentum / momentum[0] - 1)) < 1e-8
    assert sig.null_drift < 1e-8 and sig.hamiltonian_drift < 1e-8
    assert hamiltonian_check(sig) < 1e-9


def test_goedel_hamiltonian_conservation(goedel):
    sig = integrate_null_geodesic(goedel, np.zeros(4), [0, 0.6, 0.3, 0.5])
    assert sig.hamiltonian_drift < 1e-8
    assert hamiltonian_check(sig) < 1e-9


@pytest.mark.parametrize("family", ["flrw_flat", "goedel", "minkowski_rotating", "einstein_static", "bianchi_I"])
def test_constraint_drift_every_ray(family, rng):
    m = models.instantiate(family)
    x0, K = _random_rays(m, 8, rng, span=0.3)
    for sig in integrate_null_geodesics(m, x0, K):
        assert sig.null_drift < 1e-8 and sig.hamiltonian_drift < 1e-8


def test_batch_equals_single(flrw, rng):
    x0, K = _random_rays(flrw, 3, rng)
    batch = integrate_null_geodesics(flrw, x0, K)
    for i in range(3):
        single = integrate_null_geodesic(flrw, x0[i], K[i])
        assert np.allclose(batch[i].x, single.x, atol=1e-9)


def test_past_directed_batch_runs_emission_to_reception(flrw):
    sig = integrate_null_geodesic(flrw, [2.0, 0, 0, 0], [0, 1.0, 0, 0], future=False)
    assert sig.reception[0] == pytest.approx(2.0, abs=1e-15)
    assert sig.emission[0] < 2.0
    assert np.all(np.diff(sig.x[:, 0]) > 0)
    x, K = sig.state(np.array([0.0, 1.0]))
    assert np.allclose(x, sig.x[[0, -1]], atol=1e-12) and np.all(K[:, 0] > 0)


def test_conformal_frequency_fixtures(mink, flrw, bianchi):
    sig = integrate_null_geodesic(mink, np.zeros(4), [0, 0.3, 0.4, 0])
    assert conformal_frequency_drift(sig, ConformalCandidate.from_function(mink, lambda x: 1.0)) == 0.0
    sig = integrate_null_geodesic(flrw, np.zeros(4), [0, 1.0, 0, 0], affine_span=2.0)
    cand = ConformalCandidate.from_function(flrw, lambda x: dual.exp(0.1 * x[0]))
    assert conformal_frequency_drift(sig, cand) < 1e-7
    sig = integrate_null_geodesic(bianchi, np.zeros(4), [0, 1.0, 0, 0])
    forced = ConformalCandidate(bianchi, anchor=np.zeros(4))
    assert conformal_frequency_drift(sig, forced) > 1e-3


def test_conformal_frequency_gauge_covariance(flrw):
    sig = integrate_null_geodesic(flrw, np.zeros(4), [0, 1.0, 0.2, 0])
    cand = ConformalCandidate(flrw, anchor=np.zeros(4))
    q1 = sig.attach(cand).conformal_frequency.copy()
    q2 = sig.attach(cand.with_gauge(scale=7.3)).conformal_frequency
    assert np.allclose(q2, 7.3 * q1, rtol=1e-14, atol=0)


def test_conformal_frequency_custom_cvf(rng):
    m = O.conformal_rotating_model()
    cand = ConformalCandidate(m, anchor=[0.5, 0, 0, 0])
    x0, K = _random_rays(m, 4, rng, span=0.4)
    for sig in integrate_null_geodesics(m, x0, K):
        assert conformal_frequency_drift(sig, cand) < 1e-7


def test_redshift_minkowski(mink):
    sig = integrate_null_geodesic(mink, np.zeros(4), [0, 1.0, 0, 0])
    rec = redshift(sig, ConformalCandidate(mink, anchor=np.zeros(4)))
    assert rec.r_integral == 0.0 and rec.z == 0.0 and rec.r_potential == 0.0


def test_redshift_three_ways_on_custom_cvf():
    m = O.conformal_rotating_model()
    sig = integrate_null_geodesic(m, [0.1, 0.0, 0.1, 0.0], [0, 0.2, -0.3, 0.3])
    rec = redshift(sig, ConformalCandidate(m, anchor=[0.5, 0, 0, 0]))
    f = m.expectations["connecting_function"]
    exact = float(np.log(f(sig.reception) / f(sig.emission)))
    assert rec.r_integral == pytest.approx(exact, abs=1e-10)
    assert rec.consistency < 1e-9
    assert rec.z == pytest.approx(np.expm1(rec.r_endpoint), abs=1e-9)
    assert set(rec.as_dict()) >= {"r_integral", "r_endpoint", "r_potential", "z", "consistency"}


def _contracting():
    def metric(x):
        a2 = dual.exp(-0.2 * x[0])
        z = 0.0 * x[0]
        return [[-1.0 + z, z, z, z], [z, a2, z, z], [z, z, a2, z], [z, z, z, a2]]

    return models.register_custom(metric, lambda x: [1.0, 0.0, 0.0, 0.0], [-5] * 4, [5] * 4, name="contracting")


def test_blueshift_in_contracting_model():
    m = _contracting()
    x_obs = (np.exp(0.2) - 1) / 0.1  # comoving distance travelled between t = 0 and t = 2
    wl = Worldline(m, [2.0, x_obs, 0, 0], tau_range=(-3.0, 0.5))
    sig = connect_observers(m, [2.0, 0, 0, 0], wl, "backward")
    assert sig.emission[0] == pytest.approx(0.0, abs=1e-8)
    rec = redshift(sig, ConformalCandidate(m, anchor=np.zeros(4)))
    assert rec.z == pytest.approx(np.exp(-0.2) - 1, abs=1e-6)
    assert rec.z < 0 and rec.consistency < 1e-6


def test_worldline(flrw, goedel):
    wl = Worldline(flrw, [0.0, 0.3, 0, 0], tau_range=(-1, 2))
    assert np.allclose(wl.at(1.5), [1.5, 0.3, 0, 0], atol=1e-12)
    assert wl.tau_at_time(0.7) == pytest.approx(0.7, abs=1e-12)
    with pytest.raises(DomainError):
        wl.at(5.0)
    with pytest.raises(DomainError):
        wl.tau_at_time(10.0)
    with pytest.raises(ValueError):
        Worldline(flrw, np.zeros(4), tau_range=(1, 2))
    g = Worldline(goedel, [0, 0.2, 0, 0], tau_range=(-0.5, 0.5))
    V = O.observer(goedel, g.at(0.25))
    d = (g.at(0.25 + 1e-5) - g.at(0.25 - 1e-5)) / 2e-5
    assert np.allclose(d, V, atol=1e-7)


def test_connect_minkowski(mink):
    wl = Worldline(mink, [0.0, 1.0, 0, 0], tau_range=(-1, 3))
    sig = connect_observers(mink, np.zeros(4), wl)
    assert np.allclose(sig.reception, [1, 1, 0, 0], atol=1e-10)
    assert sig.meta["tau"] == pytest.approx(1.0, abs=1e-10)
    assert np.max(np.abs(sig.x[:, 1] - sig.x[:, 0])) < 1e-12


def test_connect_flrw_arrival_time(flrw):
    wl = Worldline(flrw, [0.0, 1.0, 0, 0], tau_range=(-1, 3))
    sig = connect_observers(flrw, np.zeros(4), wl)
    assert sig.reception[0] == pytest.approx(-np.log(0.9) / 0.1, abs=1e-9)
    assert sig.meta["miss"] < 1e-10
    back = connect_observers(flrw, sig.reception, Worldline(flrw, np.zeros(4), tau_range=(-1, 3)), "backward")
    assert np.allclose(back.emission, 0.0, atol=1e-9)


def test_connect_goedel(goedel):
    wl = Worldline(goedel, [0.0, 0.3, 0.2, 0.1], tau_range=(-1, 2))
    sig = connect_observers(goedel, np.zeros(4), wl)
    assert sig.meta["miss"] < 1e-8
    assert np.allclose(sig.reception, wl.at(sig.meta["tau"]), atol=1e-8)


def test_connect_errors(flrw):
    wl = Worldline(flrw, np.zeros(4), tau_range=(-1, 3))
    with pytest.raises(ShootingError):
        connect_observers(flrw, [0.5, 0, 0, 0], wl)
    with pytest.raises(ValueError):
        connect_observers(flrw, [0.5, 1, 0, 0], wl, direction="sideways")


def test_null_drift_and_domain_errors(flrw):
    with pytest.raises(NullDriftError) as exc:
        integrate_null_geodesic(flrw, np.zeros(4), [0, 1.0, 0, 0], tol=DEFAULT.replace(null=1e-18))
    assert exc.value.best_residual is not None
    with pytest.raises(DomainError):
        integrate_null_geodesic(flrw, [19.0, 0, 0, 0], [0, 1.0, 0, 0], affine_span=10.0)


def test_message_minkowski_is_exactly_the_observer(mink):
    sig = connect_observers(mink, np.zeros(4), Worldline(mink, [0, 1.0, 0.5, 0], tau_range=(-1, 3)))
    msg = solve_infinitesimal_message(mink, sig)
    assert np.max(np.abs(msg.J - [1, 0, 0, 0])) < 1e-12
    assert np.max(np.abs(msg.P)) < 1e-12
    assert msg.c == pytest.approx(1.0, abs=1e-12)
    assert msg.max_parallax_residual < 1e-12


@pytest.fixture(scope="module")
def flrw_message():
    m = models.instantiate("flrw_flat", H=0.1)
    sig = connect_observers(m, np.zeros(4), Worldline(m, [0, 0.6, 0.5, -0.2], tau_range=(-1, 3)))
    return m, sig, solve_infinitesimal_message(m, sig)


def test_message_flrw(flrw_message):
    m, sig, msg = flrw_message
    rec = redshift(sig, ConformalCandidate(m, anchor=np.zeros(4)))
    assert msg.max_parallax_residual < 1e-7
    assert msg.c == pytest.approx(np.exp(rec.r_integral), rel=1e-9)
    assert msg.g_KP_drift < 1e-8 and np.max(msg.cvf_residual) < 1e-7
    assert np.all(msg.v > 0)
    assert msg.endpoint_residual < 1e-9 and msg.initial_residual < 1e-12
    summary = msg.summary()
    assert summary["c"] == msg.c and summary["condition"] < 1e12


def test_message_factor_matches_neighbouring_signals(flrw_message):
    """``c`` is the rate of reception proper time per emission proper time."""
    m, sig, msg = flrw_message
    emitter = Worldline(m, np.zeros(4), tau_range=(-1, 1))
    receiver = Worldline(m, [0, 0.6, 0.5, -0.2], tau_range=(-1, 3))
    d = 1e-3
    taus = [connect_observers(m, emitter.at(s), receiver).meta["tau"] for s in (-d, d)]
    assert (taus[1] - taus[0]) / (2 * d) == pytest.approx(msg.c, rel=1e-6)


def test_message_jacobi_equation_by_finite_differences(flrw_message):
    """``P = nabla_K J`` and ``nabla_K P = R(K, J) K`` along the sampled signal."""
    m, sig, msg = flrw_message
    from confstat.geometry import christoffel_at, riemann_at

    h = sig.s[1] - sig.s[0]
    i = slice(2, -2)
    x, K, J, P = sig.x[i], sig.K[i], msg.J[i], msg.P[i]
    G = christoffel_at(m, x).gamma
    R = riemann_at(m, x).riem

    def d_ds(Y):
        return (-Y[4:] + 8 * Y[3:-1] - 8 * Y[1:-3] + Y[:-4]) / (12 * h)

    cov_J = d_ds(msg.J) + np.einsum("nabc,nb,nc->na", G, K, J)
    cov_P = d_ds(msg.P) + np.einsum("nabc,nb,nc->na", G, K, P)
    jac = np.einsum("nabcd,nb,nc,nd->na", R, K, K, J)
    assert np.max(np.abs(cov_J - P)) < 1e-6
    assert np.max(np.abs(cov_P - jac)) < 1e-6


def test_message_bianchi_detects_parallax(bianchi):
    sig = connect_observers(bianchi, np.zeros(4), Worldline(bianchi, [0, 0.5, 0.5, 0], tau_range=(-1, 3)))
    msg = solve_infinitesimal_message(bianchi, sig)
    assert msg.max_parallax_residual > 1e-3
    assert msg.g_KP_drift < 1e-8
    rec = redshift(sig)
    assert msg.c == pytest.approx(np.exp(rec.r_integral), rel=1e-8)


def test_conjugate_point_diagnostic(flrw_message):
    m, sig, _ = flrw_message
    with pytest.raises(ConjugatePointError):
        solve_infinitesimal_message(m, sig, DEFAULT.replace(conjugate_cond=1.0))


def test_screen_projection_and_angle(goedel):
    p = np.array([0.1, 0.2, 0.0, 0.3])
    g, V = O.metric(goedel, p), O.observer(goedel, p)
    K = null_project(goedel, p[None], np.array([[0, 0.4, 0.3, 0.1]]))[0]
    X = np.array([0.3, -0.2, 0.7, 0.1])
    Y = screen_projection(g, V, K, X)
    assert abs(Y @ g @ K) < 1e-13 and abs(Y @ g @ V) < 1e-13
    assert np.allclose(screen_projection(g, V, K, K), 0, atol=1e-13)
    assert np.allclose(screen_projection(g, V, K, V), 0, atol=1e-13)
    assert screen_angle(g, V, K, K) == pytest.approx(0.0, abs=1e-7)
    K2 = null_project(goedel, p[None], np.array([[0, -0.4, -0.3, -0.1]]))[0]
    assert screen_angle(g, V, K, K2) == pytest.approx(np.pi, abs=1e-7)


@pytest.mark.parametrize("family", ["minkowski_static", "goedel"])
def test_parallax_free_killing_triples(family):
    m = models.instantiate(family)
    win = (-3.0, 1.5)
    rx = Worldline(m, np.zeros(4), win)
    srcs = [Worldline(m, [0, 0.5, 0.5, 0], win), Worldline(m, [0, 0, 0.7, 0.2], win)]
    rep = parallax_verdict(m, rx, srcs, [0.0, 0.5, 1.0])
    assert rep.verdict == "parallax_free"
    assert rep.angle_drift < 1e-9
    d = rep.as_dict()
    assert len(d["angles"]) == 3 and len(d["messages"]) == 6
