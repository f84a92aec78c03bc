"""Second-moment defect of the inscribed polygon against delta / h.

The chord polygon loses mass near the sphere; for the constant kernel the
mean defect 1 - sigma^{11,2} falls like (h / delta)^2, for the linear kernel
like (h / delta)^4. The lower bound for regular N-gons is printed alongside.
"""
import numpy as np

from nonloc.analysis import polygon_moments, regular_polygon, sigma_lower_bound
from nonloc.checks import defect_order
from nonloc.kernels import make_kernel

for family in ("constant", "linear"):
    slope, means = defect_order(family=family, ratios=(4, 8, 16))
    print(f"{family}: order {slope:.2f}, mean defects {np.round(means, 8)}")

k = make_kernel("constant", 2, 1.0)
print("\n  N   lower bound   regular N-gon defect")
for N in (6, 8, 16, 32, 64):
    _, second, _ = polygon_moments(regular_polygon(N), k)
    print(f"{N:3d}   {sigma_lower_bound(N, k):.3e}     {1 - second[0]:.3e}")
