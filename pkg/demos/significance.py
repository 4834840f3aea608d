"""
Comparing two systems
---------------------

Paired bootstrap over sentence-level scores, and the point-biserial
correlation between a metric and binary human verdicts.
"""

import numpy as np

from citerel.metrics import bootstrap_compare, point_biserial

rng = np.random.default_rng(0)
base = rng.random(500)
better = base + rng.normal(0.05, 0.1, size=500)

diff, p = bootstrap_compare(better, base, seed=1)
print(f"mean diff {diff:.4f}  p {p:.3f}")
print(bootstrap_compare(base, base.copy()))

print(round(point_biserial([2, 4, 1, 3], [1, 1, 0, 0]), 4))
