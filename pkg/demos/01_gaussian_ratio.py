# %% [markdown]
# # Gaussian volume ratio on the model surfaces
#
# rho(r) compares the Gaussian-weighted area around a point with the flat
# value 4 pi r^2.  In the plane it is 1 at every scale; on the other models
# it decreases with r, and its limit is the density theta.

# %%
import numpy as np

from lsiaudit.ambient import Cone, Cylinder, Euclidean, Paraboloid, avr_estimate
from lsiaudit.theta import estimate_theta, paraboloid_audit, rho

grid = np.geomspace(1, 1e4, 9)
models = {
    "plane": (Euclidean(2), (0.0, 0.0)),
    "cylinder R=1": (Cylinder(1.0), (0.0, 0.0)),
    "cone beta=1/2": (Cone(0.5), (0.0, 0.0)),
    "paraboloid a=1": (Paraboloid(1.0), (0.0, 0.0)),
}

# %%
print(f"{'r':>8}" + "".join(f"{k:>18}" for k in models))
for r in grid:
    print(f"{r:8.3g}" + "".join(f"{rho(m, p, r):18.6g}" for m, p in models.values()))

# %% [markdown]
# The cylinder decays like sqrt(pi)/r (one flat direction only), the cone
# sits exactly at beta.  Extrapolation agrees with the volume-growth ratio.

# %%
for name, (m, p) in models.items():
    est = estimate_theta(m, p, grid)
    line = f"{name:16s} theta ~ {est.extrapolated_theta:.4g}  positive: {est.condition_P_satisfied}"
    if isinstance(m, Cone):
        line += f"  (AVR {avr_estimate(m, grid).estimate:.4g})"
    print(line)

# %% [markdown]
# ## The paraboloid
#
# A limit of 2 is sometimes quoted for the paraboloid.  The numbers say
# otherwise: rho stays below 2 (that bound is fine) but decays like r^-1/2.

# %%
rep = paraboloid_audit(1.0)
for r, v in zip(rep["r_grid"], rep["rho_values"]):
    print(f"r = {r:8.3g}   rho = {v:.6g}")
print("rho(100)/rho(10) =", round(rep["ratio_100_10"], 4), " vs 10^-1/2 =", round(rep["predicted_ratio"], 4))
print(rep["note"])
