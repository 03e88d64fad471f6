"""Cosmological redshift three ways in a flat de Sitter-like FLRW model.

A galaxy and an observer are both comoving.  The light the observer
receives at t = 2 left the galaxy at t = 0, so the wavelength has grown by
the scale-factor ratio a(2)/a(0) = e^0.2.  We recover that number from the
line integral of the expansion, from the conformal factor at the two ends,
and from the emitter-to-receiver clock ratio of the infinitesimal message.
"""

import numpy as np

from confstat import models
from confstat.conformal import ConformalCandidate, stationarity_scan
from confstat.transport import Worldline, connect_observers, redshift, solve_infinitesimal_message

H = 0.1
m = models.instantiate("flrw_flat", H=H)

verdict = stationarity_scan(m, ([0, -1, -1, -1], [1, 1, 1, 1]), grid=5)
print(f"stationarity: {verdict.verdict}  shear_sup={verdict.shear_sup:.1e}  drho_sup={verdict.drho_sup:.1e}")

x_galaxy = (1 - np.exp(-2 * H)) / H
galaxy = Worldline(m, [0.0, x_galaxy, 0, 0], tau_range=(-1.0, 3.0))
signal = connect_observers(m, [2.0, 0, 0, 0], galaxy, "backward")
print(f"emission event: {np.round(signal.emission, 10)}")

candidate = ConformalCandidate(m, anchor=signal.emission)
rec = redshift(signal, candidate)
msg = solve_infinitesimal_message(m, signal)
print(f"z (integral)        = {rec.z:.12f}")
print(f"z (exact e^0.2 - 1) = {np.expm1(0.2):.12f}")
print(f"r_integral - r_potential = {rec.r_integral - rec.r_potential:.2e}")
print(f"message clock ratio c = {msg.c:.12f}  vs e^r = {np.exp(rec.r_integral):.12f}")
print(f"rescaled gauge f -> 7.3 f: z = {redshift(signal, candidate.with_gauge(scale=7.3)).z:.12f}")
