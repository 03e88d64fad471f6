"""Watching two sources: no parallax in FLRW, visible parallax in Bianchi-I.

The receiver sits at the origin and watches two comoving sources for one
unit of its proper time.  In a conformally stationary world the angle
between them on the celestial screen stays fixed.  Anisotropic expansion
changes it.
"""

import numpy as np

from confstat import models
from confstat.transport import Worldline, parallax_verdict

window = (-3.0, 1.5)
for family in ("flrw_flat", "bianchi_I"):
    m = models.instantiate(family)
    receiver = Worldline(m, np.zeros(4), window)
    sources = [Worldline(m, [0, 0.5, 0.5, 0], window), Worldline(m, [0, 0, 0.7, 0.2], window)]
    rep = parallax_verdict(m, receiver, sources, [0.0, 0.5, 1.0])
    angles = ", ".join(f"{a:.8f}" for a in rep.angles)
    print(f"{family:10s} angles [{angles}]  drift {rep.angle_drift:.2e}  -> {rep.verdict}")
