"""
Why not perturb whole trajectories at once?
===========================================

The exact global mechanism draws from every feasible trajectory. Its output
space grows far too quickly to enumerate outside toy catalogs.
"""

import numpy as np

from gramshield import campus_catalog
from gramshield.catalog import PoiCatalog, TimeAxis
from gramshield.oracle import GuardExceeded, cardinality_S, enumerate_S, global_distribution, global_perturb

# 1000 POIs, five points, 15-minute steps, 20% of POI pairs reachable per step
print(f"|S| = {cardinality_S(1000, 5, 15, 0.2):.3e}")

# a three-building corner of the campus is still enumerable at four-hour steps
catalog = campus_catalog()
small = PoiCatalog(tuple(catalog[p] for p in ("res-000", "cafe-000", "lib-000")), catalog.hierarchy)
axis = TimeAxis(240)
space = enumerate_S(small, 2, axis)
print(f"toy space: {len(space)} trajectories")
real = space[len(space) // 2]
em, dist = global_distribution(real, space, small, axis, epsilon=5.0)
order = np.argsort(-em.probabilities)[:5]
print(f"real {real}")
for i in order:
    print(f"  p={em.probabilities[i]:.3f}  d={dist[i]:6.2f}  {space[i]}")
print("sample", global_perturb(real, space, small, axis, 5.0, np.random.default_rng(0)))

# the full campus is refused
try:
    enumerate_S(catalog, 3, TimeAxis(10))
except GuardExceeded as exc:
    print("refused:", exc)
