import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gramshield.catalog import TimeAxis
from gramshield.regions import (NGramMemoryError, UnmappableError, brute_force_ngrams, build_ngram_set,
                                build_regions, iter_ngrams, merge_regions, project_trajectory,
                                region_reachable)
from gramshield.trajectory import Trajectory

import toy


def test_single_poi_one_region_per_open_hour():
    cat = toy.catalog(toy.poi("a", 49.25, -123.2, open_min=540, close_min=1020))
    regions = build_regions(cat, g_s=1)
    assert len(regions) == 8
    assert sorted(r.intervals[0] for r in regions) == list(range(9, 17))


def test_empty_catalog():
    assert len(build_regions(toy.catalog(), g_s=4)) == 0


def test_no_region_without_open_member():
    # closed overnight: no region can exist at 3am
    cat = toy.catalog(toy.poi("church", 49.25, -123.2, "park", open_min=480, close_min=1200))
    regions = build_regions(cat, g_s=1)
    assert all(3 not in r.intervals for r in regions)
    assert all(r.members for r in regions)


def test_merge_fixpoint_when_all_large_enough():
    cat = toy.catalog(*[toy.poi(f"p{i}", 49.25 + i * 1e-3, -123.2) for i in range(3)])
    regions = build_regions(cat, g_s=2)
    merged = merge_regions(regions, kappa=1)
    assert [r.slots for r in merged] == [r.slots for r in regions]


def test_adjacent_hours_merge_to_eleven():
    early = [toy.poi(f"e{i}", 49.25 + i * 1e-4, -123.2, open_min=540, close_min=600) for i in range(4)]
    late = [toy.poi(f"l{i}", 49.26 + i * 1e-4, -123.2, open_min=600, close_min=660) for i in range(7)]
    regions = merge_regions(build_regions(toy.catalog(*early, *late), g_s=1), 10, ("time", "space", "category"))
    assert len(regions) == 1
    assert len(regions[0].members) == 11
    assert regions[0].intervals == (9, 10)


def test_nightlife_merges_across_time_and_category():
    bar = toy.poi("bar", 49.25, -123.2, "bar", open_min=1380, close_min=120)
    club = toy.poi("club", 49.2501, -123.2, "nightclub", open_min=1380, close_min=120)
    regions = merge_regions(build_regions(toy.catalog(bar, club), g_s=1), 2)
    assert len(regions) == 1
    r = regions[0]
    assert r.intervals == (23, 0, 1)
    assert r.category == "drinks"
    assert ("club", 1) in r.slots and ("bar", 23) in r.slots


def test_space_merge_stays_inside_coarse_cell():
    pois = [toy.poi(f"p{i}", 49.0 + 0.1 * (i // 4), -123.0 + 0.1 * (i % 4)) for i in range(16)]
    regions = merge_regions(build_regions(toy.catalog(*pois), g_s=4), 4, ("space", "time", "category"))
    for r in regions:
        rows = {c // 4 for c in r.space_cells}
        cols = {c % 4 for c in r.space_cells}
        assert len({x // 2 for x in rows}) == 1 and len({x // 2 for x in cols}) == 1


def test_partition_property(campus_model):
    regions, catalog = campus_model.regions, campus_model.catalog
    seen = {}
    for r in regions:
        for slot in r.slots:
            assert slot not in seen
            seen[slot] = r.id
    expected = {(p.id, k) for p in catalog for k in range(24)
                if any(p.is_open(m) for m in range(k * 60, (k + 1) * 60))}
    assert set(seen) == expected


def test_merged_regions_meet_kappa_mostly(campus_model):
    sizes = np.array([len(r.members) for r in campus_model.regions])
    assert (sizes >= 1).all()
    assert np.mean(sizes >= campus_model.config.kappa) > 0.5


def test_region_reachable_examples():
    a = toy.poi("a", 49.25, -123.2)
    far = toy.poi("far", toy.km_north(49.25, 10), -123.2, "diner")
    regions = build_regions(toy.catalog(a, far), g_s=1, time_interval=1440)
    ra, rb = regions[0], regions[1]
    assert region_reachable(ra, ra, regions.catalog, 8, 10)
    assert not region_reachable(ra, rb, regions.catalog, 8, 10)


def test_region_reachable_single_close_pair():
    # western POIs 2 km apart along a parallel, eastern ones far away except e2
    step = 2.0 / (111.195 * np.cos(np.radians(49.25)))
    west = [toy.poi(f"w{i}", 49.25, -123.30 - i * step) for i in range(5)]
    east = [toy.poi(f"e{i}", 49.25 + 0.01 * i, -123.0, "diner") for i in range(5)]
    east[2] = toy.poi("e2", 49.25, -123.30 + step / 2, "diner")
    cat = toy.catalog(*west, *east)
    regions = build_regions(cat, g_s=1, time_interval=1440)
    ra = next(r for r in regions if r.category == "cafe")
    rb = next(r for r in regions if r.category == "diner")
    theta = 8 * 10 / 60
    pairs = [(a, b) for a in west for b in east if toy_distance(a, b) <= theta]
    assert len(pairs) == 1
    assert region_reachable(ra, rb, cat, 8, 10)


def toy_distance(a, b):
    import math
    la1, lo1, la2, lo2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    h = math.sin((la2 - la1) / 2) ** 2 + math.cos(la1) * math.cos(la2) * math.sin((lo2 - lo1) / 2) ** 2
    return 2 * 6371.0 * math.asin(math.sqrt(h))


def test_unigrams_are_all_regions(campus_model):
    g1 = campus_model.grams(1)
    assert g1.as_set() == {(r,) for r in range(len(campus_model.regions))}


def test_three_mutually_reachable_regions_give_nine_bigrams():
    pois = [toy.poi("a", 49.25, -123.2, "cafe", 600, 660), toy.poi("b", 49.2501, -123.2, "diner", 600, 660),
            toy.poi("c", 49.2502, -123.2, "park", 600, 660)]
    regions = build_regions(toy.catalog(*pois), g_s=1)
    assert len(build_ngram_set(regions, 2, 4.0, 10)) == 9


def windows_ok(windows):
    """Independent check: some non-decreasing pick of one interval per window."""
    return any(all(x <= y for x, y in zip(pick, pick[1:])) for pick in itertools.product(*windows))


def reach_ok(regions, gram, speed, gap):
    theta = speed * gap / 60
    for a, b in zip(gram, gram[1:]):
        ma, mb = regions[a].members, regions[b].members
        if min(toy_distance(regions.catalog[x], regions.catalog[y]) for x in ma for y in mb) > theta + 1e-12:
            return False
    return True


def random_regions(seed, count=12):
    rng = np.random.default_rng(seed)
    leaves = ["cafe", "diner", "bar", "nightclub", "park"]
    pois = []
    for i in range(count):
        o = int(rng.integers(0, 23)) * 60
        pois.append(toy.poi(f"p{i}", 49.25 + rng.uniform(0, 0.03), -123.2 + rng.uniform(0, 0.03),
                            leaves[i % 5], o, o + 60 * int(rng.integers(1, 3))))
    regions = build_regions(toy.catalog(*pois), g_s=2)
    return regions


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("n", [2, 3])
def test_ngram_set_matches_brute_force(seed, n):
    regions = random_regions(seed)
    assert len(regions) <= 30
    got = build_ngram_set(regions, n, 4.0, 10).as_set()
    expected = {g for g in itertools.product(range(len(regions)), repeat=n)
                if reach_ok(regions, g, 4.0, 10) and windows_ok([regions[r].intervals for r in g])}
    assert got == expected
    assert got == brute_force_ngrams(regions, n, 4.0, 10)
    assert got == set(iter_ngrams(regions, n, 4.0, 10))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 20), st.floats(0.1, 10))
def test_ngram_set_monotone_in_theta(seed, speed, extra):
    regions = random_regions(seed, count=8)
    small = build_ngram_set(regions, 2, speed, 10).as_set()
    big = build_ngram_set(regions, 2, speed + extra, 10).as_set()
    assert small <= big


def test_memory_guard():
    regions = random_regions(0)
    with pytest.raises(NGramMemoryError):
        build_ngram_set(regions, 3, 4.0, 10, cap=10)


def test_project_central_park():
    park = toy.poi("central_park", 40.7829, -73.9654, "park", 360, 1320)
    south = toy.poi("battery", 40.7033, -74.0170, "park", 360, 1320)
    cat = toy.catalog(park, south)
    regions = build_regions(cat, g_s=2)
    axis = TimeAxis(10)
    rid = project_trajectory(Trajectory("u", (("central_park", 63),)), regions, axis)[0]
    r = regions[rid]
    assert r.intervals == (10,) and r.category == "park" and r.members == {"central_park"}
    # upper half of the box
    assert r.space_cells <= {2, 3}


def test_project_closed_poi_errors():
    cat = toy.catalog(toy.poi("a", 49.25, -123.2, open_min=540, close_min=600))
    regions = build_regions(cat, g_s=1)
    with pytest.raises(UnmappableError):
        project_trajectory(Trajectory("u", (("a", 0),)), regions, TimeAxis(10))


def test_project_round_trip(campus_model):
    rng = np.random.default_rng(0)
    regions, axis = campus_model.regions, campus_model.axis
    for r in rng.choice(len(regions), 30, replace=False):
        region = regions[int(r)]
        poi, k = sorted(region.slots)[0]
        per = 60 // axis.g_t
        t = next(t for t in range(k * per, (k + 1) * per) if campus_model.catalog[poi].is_open(axis.minute(t)))
        assert project_trajectory(Trajectory("u", ((poi, t),)), regions, axis) == [int(r)]
