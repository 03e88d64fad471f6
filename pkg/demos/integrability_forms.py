"""Compare the two forms of the integrability conditions on a rotating model.

The model is Minkowski space conformally rescaled by e^{2(0.3 t + 0.2 x)},
observed by rigidly rotating observers.  It is conformally stationary, and
its congruence expands, rotates and accelerates all at once.  Only the
derived form of the conditions holds there.  In FLRW and Goedel both forms
vanish identically.
"""

import numpy as np

from confstat import dual, kinematics_at, models
from confstat.kinematics import integrability_check

OMEGA, A, B = 0.5, 0.3, 0.2


def metric(x):
    c = dual.exp(2 * (A * x[0] + B * x[1]))
    z = 0.0 * x[0]
    return [[-c, z, z, z], [z, c, z, z], [z, z, c, z], [z, z, z, c]]


def observer(x):
    s = dual.exp(-(A * x[0] + B * x[1])) / dual.sqrt(1 - OMEGA**2 * (x[1] * x[1] + x[2] * x[2]))
    return [s, -OMEGA * x[2] * s, OMEGA * x[1] * s, 0.0 * s]


m = models.register_custom(
    metric,
    observer,
    [-2, -1, -1, -2],
    [2, 1, 1, 2],
    name="conformal_rotating",
    inside=lambda p: OMEGA**2 * (p[..., 1] ** 2 + p[..., 2] ** 2) < 0.81,
    region=([0, -0.5, -0.5, -0.5], [1, 0.5, 0.5, 0.5]),
)
p = np.array([[0.3, 0.2, -0.1, 0.1]])
s = kinematics_at(m, p)
print(f"Theta={s.theta[0]:.3f}  |omega|={s.rotation_norm[0]:.3f}  |A|={s.accel_norm[0]:.3f}  |sigma|={s.shear_norm[0]:.1e}")
for form in ("stated", "derived"):
    ri, rii = integrability_check(m, p, form=form)
    print(f"{form:8s} residuals: rotation {ri[0]:.2e}  acceleration {rii[0]:.2e}")
