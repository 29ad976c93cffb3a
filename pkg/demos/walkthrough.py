"""
One trajectory through the n-gram pipeline
==========================================

Build regions over the synthetic campus, perturb a single trajectory with
overlapping bigrams, rebuild the most consistent region path and draw a
concrete POI/timestep trajectory from it.
"""

import numpy as np

from gramshield import Config, build_model, campus_catalog, generate_campus
from gramshield.perturb import perturb_trajectory
from gramshield.reconstruct import mbr_prune, sample_poi_trajectory, solve_region_path
from gramshield.regions import project_trajectory

# public knowledge: POIs, categories, opening hours
catalog = campus_catalog()
model = build_model(catalog, Config())
print(f"{len(catalog)} POIs -> {len(model.regions)} regions, {len(model.grams(2))} feasible bigrams")

# a real trajectory and its region path
real = generate_campus(catalog, 1, seed=42)[0]
path = project_trajectory(real, model.regions, model.axis)
for (poi, t), r in zip(real.points, path):
    region = model.regions[r]
    print(f"  {poi:<10} {model.axis.minute(t) // 60:02d}:{model.axis.minute(t) % 60:02d}"
          f"  region {r:>3}  {region.category:<18} hours {region.intervals}")

# each index is covered by n perturbed grams; the budget is split evenly over them
rng = np.random.default_rng(0)
record = perturb_trajectory(path, model, epsilon=5.0, rng=rng)
print(f"\n{record.calls} EM calls at eps' = {record.epsilon_prime:.3f}")
for a, b, gram in record.entries:
    print(f"  span [{a}, {b}] -> {gram}")

# region level: exact minimum-error path over the pruned candidates
instance = mbr_prune(record, model)
solved = solve_region_path(instance)
print(f"\n{len(instance.candidates)} candidate regions after pruning; objective {solved.objective:.2f}")
print("  true     ", path)
print("  rebuilt  ", list(solved.regions))

# POI level: uniform over feasible realisations, smoothed if none exist
points, info = sample_poi_trajectory(solved.regions, model, rng)
print(f"\nreleased trajectory (smoothed={info.smoothed}):")
for poi, t in points:
    print(f"  {poi:<10} {model.axis.minute(t) // 60:02d}:{model.axis.minute(t) % 60:02d}")
