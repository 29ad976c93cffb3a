import pytest

from gramshield.catalog import TimeAxis
from gramshield.datagen import (CAMPUS_LAYOUT, Event, campus_catalog, default_events, filter_trajectories,
                                generate_campus)
from gramshield.metrics import detect_hotspots
from gramshield.trajectory import Trajectory

import toy

AXIS = TimeAxis(10)


def test_campus_catalog_shape(campus):
    assert len(campus) == sum(row[3] for row in CAMPUS_LAYOUT) == 262
    assert len({p.leaf for p in campus.pois}) == 9
    assert all(len(p.category_path) == 3 for p in campus.pois)
    assert campus_catalog().pois == campus.pois


def test_count_zero_is_empty(campus):
    assert generate_campus(campus, 0) == []


def test_outputs_pass_filter(campus):
    trajs = generate_campus(campus, 200, seed=1)
    kept, dropped = filter_trajectories(trajs, campus, AXIS, 4.0)
    assert kept == trajs and dropped == []
    assert {len(t) for t in trajs} <= set(range(3, 9))
    assert len({len(t) for t in trajs}) == 6
    starts = [t.points[0][1] * 10 for t in trajs]
    assert min(starts) >= 360 and max(starts) <= 1320
    gaps = [b - a for t in trajs for (_, a), (_, b) in zip(t.points, t.points[1:])]
    assert min(gaps) >= 1 and max(gaps) <= 12


def test_deterministic(campus):
    assert generate_campus(campus, 50, seed=3) == generate_campus(campus, 50, seed=3)
    assert generate_campus(campus, 50, seed=3) != generate_campus(campus, 50, seed=4)


def test_event_visits(campus):
    ev = Event("res", "poi", "res-000", 20 * 60, 22 * 60, 60)
    trajs = generate_campus(campus, 150, [ev], seed=2)
    visitors = {t.user for t in trajs for p, s in t.points if p == "res-000" and 120 <= s < 132}
    assert len(visitors) >= 60


def test_category_event(campus):
    ev = Event("lunch", "category", "dining", 12 * 60, 13 * 60, 40)
    trajs = generate_campus(campus, 80, [ev], seed=2)
    visitors = {t.user for t in trajs for p, s in t.points
                if "dining" in campus[p].category_path and 72 <= s < 78}
    assert len(visitors) >= 40


def test_event_demand_exceeds_count(campus):
    with pytest.raises(ValueError):
        generate_campus(campus, 10, [Event("x", "poi", "res-000", 0, 60, 11)])


def test_unknown_event_target(campus):
    with pytest.raises(ValueError):
        generate_campus(campus, 10, [Event("x", "category", "nowhere", 0, 60, 1)])


def test_default_events_scale():
    assert [e.users for e in default_events()] == [500, 1000, 2000]
    assert [e.users for e in default_events(5000)] == [500, 1000, 2000]
    assert [e.users for e in default_events(1000)] == [100, 200, 400]


def test_event_recovered_as_hotspot(campus):
    ev = Event("stadium", "poi", "stad-000", 14 * 60, 16 * 60, 100)
    trajs = generate_campus(campus, 300, [ev], seed=5)
    hs = [h for h in detect_hotspots(trajs, campus, AXIS, "poi", eta=50, window=12) if h.entity == "stad-000"]
    assert len(hs) == 1
    assert abs(hs[0].c - 100) <= 5


def test_filter_reasons():
    a = toy.poi("a", 49.25, -123.2, open_min=600, close_min=700)
    b = toy.poi("b", toy.km_north(49.25, 10), -123.2)
    cat = toy.catalog(a, b)
    good = Trajectory("g", (("a", 60), ("a", 61)))
    closed = Trajectory("c", (("a", 0),))
    far = Trajectory("f", (("a", 60), ("b", 61)))
    kept, dropped = filter_trajectories([good, closed, far], cat, AXIS, 8.0)
    assert kept == [good]
    assert [(t.user, r) for t, r in dropped] == [("c", "closed"), ("f", "unreachable")]
    kept, _ = filter_trajectories([Trajectory("m", (("a", 61), ("a", 60)))], cat, AXIS, 8.0)
    assert kept == []
