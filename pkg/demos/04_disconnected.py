# %% [markdown]
# # Two components
#
# For a shape with pieces of masses a and b the whole deficit equals the
# sum of the piece deficits plus (a+b) log(a+b) - a log a - b log b > 0.

# %%
import math

import numpy as np

from lsiaudit.functional import disconnected_strictness_check
from lsiaudit.submanifold import two_circles

shape = two_circles(math.sqrt(2), 10.0, 256)
dual = shape.dual_measure()
for a, b in [(1, 1), (1, 3), (1, 100)]:
    ma, mb = dual[shape.labels == 0].sum(), dual[shape.labels == 1].sum()
    f = np.where(shape.labels == 0, a / ma, b / mb)
    st = disconnected_strictness_check(shape, f)
    parts = " + ".join(f"{c.deficit:.6f}" for c in st.components)
    print(f"masses ({a}, {b}): whole {st.whole.deficit:.6f} = {parts} + bracket {st.bracket:.6f}"
          f"   (identity residual {st.identity_residual:.1e})")
print("4 log 4 - 3 log 3 =", 4 * math.log(4) - 3 * math.log(3))
