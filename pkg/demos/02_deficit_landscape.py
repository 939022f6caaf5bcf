# %% [markdown]
# # The log-Sobolev deficit on curves and surfaces
#
# deficit = m log m - int f (log f + n + n/2 log 4 pi) + int |grad f|^2 / f + int f |H|^2,
# with m the mass of f.  It should never be negative.

# %%
import math

import numpy as np

from lsiaudit.functional import deficit, mass_lower_bound_check
from lsiaudit.submanifold import (
    circle,
    ellipsoid,
    icosphere,
    random_fourier_curve,
    random_positive_field,
    uv_sphere,
)

# %% [markdown]
# Round circles with f = 1: the deficit per unit length is
# log(2 pi R) - 1 - log(4 pi)/2 + 1/R^2, smallest at R = sqrt 2.

# %%
Rs = np.linspace(0.8, 2.4, 17)
for R in Rs:
    d = deficit(circle(R, 512))
    exact = math.log(2 * math.pi * R) - 1 - 0.5 * math.log(4 * math.pi) + 1 / R**2
    print(f"R = {R:4.2f}   deficit/mass = {d.deficit / d.mass:.6f}   closed form {exact:.6f}")

# %% [markdown]
# Round sphere of radius 2 (|H| = 1 in the trace convention).

# %%
d = deficit(icosphere(2.0, 4))
print("sphere:", d.deficit, "closed form", 16 * math.pi * (2 * math.log(2) - 1))

# %% [markdown]
# Random smooth curves and random fields.  After rescaling f to make the
# compatibility combination vanish, the mass must exceed e sqrt(4 pi).

# %%
ratios, masses = [], []
for seed in range(50):
    c = random_fourier_curve(seed, 3, 256)
    f = random_positive_field(c, seed)
    d = deficit(c, f)
    ratios.append(d.deficit / d.mass)
    masses.append(mass_lower_bound_check(c, f).normalized_mass)
print(f"min deficit/mass {min(ratios):.4f}; min normalized mass {min(masses):.4f} vs {math.e * math.sqrt(4 * math.pi):.4f}")

for seed in range(5):
    rng = np.random.default_rng(seed)
    m = ellipsoid(rng.uniform(0.5, 2, 3), 4)
    d = deficit(m, random_positive_field(m, seed))
    print(f"ellipsoid {seed}: deficit/mass {d.deficit / d.mass:.4f}")

# %% [markdown]
# Near-sharpness: a Gaussian bump on ever larger spheres looks more and more
# like the flat equality case, and the deficit shrinks.

# %%
for R in (5.0, 20.0, 50.0):
    s = uv_sphere(R, 400, 200, focus=1.0)
    f = np.maximum(np.exp(-np.sum((s.vertices - [0, 0, R]) ** 2, axis=1) / 4), np.finfo(float).tiny)
    print(f"R = {R:5.1f}   deficit = {deficit(s, f).deficit:.5f}")
