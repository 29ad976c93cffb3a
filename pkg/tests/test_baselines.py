import itertools

import numpy as np
import pytest

from gramshield.baselines import (MechanismKind, perturb_independent, perturb_ngram_noh, perturb_phys_dist,
                                  poi_domain, poi_grams, reconstruct_ngram_noh)
from gramshield.distance import gram_distances, unit_bound
from gramshield.mechanism import em_distribution, max_log_ratio
from gramshield.regions import NGramMemoryError
from gramshield.trajectory import Trajectory, is_feasible

import toy


def test_call_counts_and_budget():
    assert MechanismKind.NGRAM_NOH.calls(4, 2) == 9
    assert MechanismKind.NGRAM_NOH.epsilon_prime(5, 4, 2) == pytest.approx(5 / 9)
    assert MechanismKind.NGRAM.calls(4, 2) == 5
    assert MechanismKind.PHYS_DIST.calls(4, 3) == 6
    assert MechanismKind.IND_REACH.calls(4, 2) == 4
    for kind in MechanismKind:
        for length in range(1, 9):
            assert kind.calls(length, 2) * kind.epsilon_prime(5.0, length, 2) == pytest.approx(5.0, rel=1e-12)


def same_cell_model():
    # equal distances from a to b and c; b and c differ only in category
    a = toy.poi("a", 49.25, -123.2, "cafe", 600, 660)
    b = toy.poi("b", toy.km_north(49.25, 0.2), -123.2, "diner", 600, 660)
    c = toy.poi("c", toy.km_north(49.25, -0.2), -123.2, "park", 600, 660)
    return toy.model(a, b, c)


def test_phys_dist_ignores_category():
    model = same_cell_model()
    ra, rb, rc = (model.regions.region_of(p, 600) for p in "abc")
    phys = model.distance("physical")
    assert phys[ra, rb] == pytest.approx(phys[ra, rc], rel=1e-6)
    grams = model.grams(1).grams
    em = em_distribution(gram_distances((ra,), grams, phys), 2.0, model.sensitivity(1, "physical"))
    p = dict(zip((int(g[0]) for g in grams), em.probabilities))
    assert p[rb] == pytest.approx(p[rc], rel=1e-5)


def test_phys_dist_matches_ngram_when_category_and_time_agree():
    pois = [toy.poi(f"p{i}", toy.km_north(49.25, 0.3 * i), -123.2, "cafe", 600, 660) for i in range(4)]
    model = toy.model(*pois)
    sem, phys = model.distance(), model.distance("physical")
    assert np.allclose(sem, phys)


@pytest.mark.parametrize("metric", ["semantic", "physical"])
def test_toy_ratio_exhaustive(metric):
    model = same_cell_model()
    eps_prime = 0.7
    for k in (1, 2):
        grams = model.grams(k).grams
        dist = model.distance(metric)
        laws = [em_distribution(gram_distances(g, grams, dist), eps_prime, model.sensitivity(k, metric)).probabilities
                for g in grams]
        worst = max(max_log_ratio(p, q) for p, q in itertools.product(laws, repeat=2))
        assert worst <= eps_prime + 1e-9


def test_phys_dist_record(campus_model):
    rec = perturb_phys_dist([3, 4, 5], campus_model, 5.0, np.random.default_rng(0))
    assert rec.calls == 4 and rec.epsilon_prime == pytest.approx(1.25)


def test_noh_single_poi_domain():
    model = toy.model(toy.poi("only", 49.25, -123.2))
    traj = Trajectory("u", (("only", 60), ("only", 70), ("only", 80)))
    rec = perturb_ngram_noh(traj, model, 5.0, np.random.default_rng(0))
    assert rec.calls == 2 * 3 + 2 - 1
    assert rec.calls * rec.epsilon_prime == pytest.approx(5.0)
    out = reconstruct_ngram_noh(rec, model)
    assert [p for p, _ in out] == ["only"] * 3
    assert is_feasible(out, model.catalog, model.axis, 4.0)


def test_noh_huge_budget_recovers_input(campus_model):
    from gramshield.datagen import generate_campus
    rng = np.random.default_rng(0)
    reach = poi_grams(campus_model, 2)
    pairs = {tuple(x) for x in reach.tolist()}
    cat = campus_model.catalog
    for traj in generate_campus(cat, 40, seed=3, axis=campus_model.axis):
        idx = [cat.index_of(p) for p in traj.pois]
        if all(pair in pairs for pair in zip(idx, idx[1:])):
            break
    out = reconstruct_ngram_noh(perturb_ngram_noh(traj, campus_model, 1e7, rng), campus_model)
    assert out == list(traj.points)


def test_poi_gram_memory_guard():
    pois = [toy.poi(f"p{i}", 49.25, -123.2 + 1e-4 * i) for i in range(30)]
    model = toy.model(*pois, ngram_cap=1000)
    with pytest.raises(NGramMemoryError):
        poi_grams(model, 3)


def test_single_point_variants_agree(campus_model):
    traj = Trajectory("u", (("acad-000", 60),))
    a = perturb_independent(traj, campus_model, 5.0, np.random.default_rng(9), True)
    b = perturb_independent(traj, campus_model, 5.0, np.random.default_rng(9), False)
    assert a.points == b.points and a.epsilon_prime == 5.0


def test_independent_delta_bounds_every_distance(campus_model):
    dom = poi_domain(campus_model)
    delta = unit_bound(campus_model.ds_max, campus_model.config.distance_params)
    rng = np.random.default_rng(0)
    for p, t in zip(rng.integers(len(campus_model.catalog), size=30), rng.integers(144, size=30)):
        dist = np.sqrt(dom.ds[p, dom.cand_p] ** 2 + dom.dt[t, dom.cand_t] ** 2 + dom.dc[p, dom.cand_p] ** 2)
        assert dist.max() <= delta


def test_ind_reach_falls_back_on_empty_candidates():
    # nothing is reachable after 23:50 in a one-day axis
    a = toy.poi("a", 49.25, -123.2)
    model = toy.model(a, toy.poi("b", 49.26, -123.2))
    traj = Trajectory("u", (("a", 142), ("a", 143)))
    rngs = [np.random.default_rng(s) for s in range(30)]
    results = [perturb_independent(traj, model, 1e6, r, True) for r in rngs]
    assert all(r.points == list(traj.points) for r in results)
    # the second point has no later timestep to move to, so the full set is used and times are smoothed
    late = Trajectory("u", (("a", 143), ("b", 143)))
    res = perturb_independent(late, model, 1e6, np.random.default_rng(0), True)
    assert res.fallbacks == 1 and res.smoothed
    assert res.points == [("a", 141), ("b", 143)]


@pytest.mark.parametrize("kind", ["ind-reach", "ind-noreach"])
def test_independent_outputs_feasible(campus_model, kind):
    from gramshield.datagen import generate_campus
    rng = np.random.default_rng(1)
    for traj in generate_campus(campus_model.catalog, 20, seed=4, axis=campus_model.axis):
        out = perturb_independent(traj, campus_model, 5.0, rng, kind == "ind-reach")
        assert len(out.points) == len(traj)
        assert is_feasible(out.points, campus_model.catalog, campus_model.axis, 4.0)
