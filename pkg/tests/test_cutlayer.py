import numpy as np
import pytest

from hsfl.channel import sample_batch
from hsfl.cutlayer import (
    FitnessCache, GAConfig, capped_latency, cut_bounds, enumerate_cuts, optimize_cuts,
    saa_latency,
)
from hsfl.shortterm import optimize_round
from hsfl.verify import ga_suite, small_scenario


@pytest.fixture(scope="module")
def two_client():
    scen = small_scenario(k=2, subchannels=4, max_cut=1)
    return scen, sample_batch(scen.stats, 5, 3)


def test_config_validation():
    with pytest.raises(ValueError):
        GAConfig(population_size=1)
    with pytest.raises(ValueError):
        GAConfig(mutation_rate=1.5)


def test_saa_single_and_repeated_samples(two_client):
    scen, samples = two_client
    one = saa_latency([1, 0], samples[:1], scen.model, scen.sys)
    direct = capped_latency(optimize_round(scen.model, scen.sys, samples[0], [1, 0]).breakdown)
    assert one == direct
    assert saa_latency([1, 0], samples[:1] * 3, scen.model, scen.sys) == one


def test_saa_mean_composes_per_sample_values(two_client):
    scen, samples = two_client
    for cut in ([0, 1], [1, 1]):
        parts = [optimize_round(scen.model, scen.sys, e, cut).latency for e in samples]
        assert saa_latency(cut, samples, scen.model, scen.sys) == pytest.approx(np.mean(parts), rel=1e-15)


def test_ga_matches_enumeration_on_four_candidates(two_client):
    scen, samples = two_client
    cache = FitnessCache(samples, scen.model, scen.sys)
    best_cut, best = enumerate_cuts(cache, cut_bounds(scen.model, scen.sys))
    res = optimize_cuts(GAConfig(saa_samples=3, seed=1), scen.stats, scen.model, scen.sys, cache=cache)
    assert res.latency == best
    assert res.cut.tolist() == best_cut.tolist()


def test_singleton_search_space():
    scen = small_scenario(k=1, subchannels=2, max_cut=0)
    res = optimize_cuts(GAConfig(saa_samples=1), scen.stats, scen.model, scen.sys)
    assert res.cut.tolist() == [0]


def test_identical_population_without_variation(two_client):
    scen, samples = two_client
    cfg = GAConfig(population_size=4, mutation_rate=0.0, saa_samples=3, stagnation_generations=2)
    res = optimize_cuts(cfg, scen.stats, scen.model, scen.sys, samples=samples,
                        initial_population=[[1, 0]] * 4)
    assert res.cut.tolist() == [1, 0]


def test_elitism_feasibility_and_determinism(two_client, tmp_path):
    scen = small_scenario(k=3, subchannels=5, max_cut=[1, 2, 3])
    cfg = GAConfig(population_size=6, saa_samples=2, stagnation_generations=3, seed=4)
    a = optimize_cuts(cfg, scen.stats, scen.model, scen.sys)
    b = optimize_cuts(cfg, scen.stats, scen.model, scen.sys)
    assert a.cut.tolist() == b.cut.tolist() and a.history == b.history
    best = [h[1] for h in a.history]
    assert all(x <= y for x, y in zip(best, best[1:]))
    assert np.all(a.cut <= [1, 2, 3]) and np.all(a.cut >= 0)
    a.write_log(tmp_path / "ga.csv")
    assert (tmp_path / "ga.csv").read_text().startswith("generation,best_fitness,mean_fitness")


def test_cache_is_order_independent(two_client):
    scen, samples = two_client
    c1, c2 = FitnessCache(samples, scen.model, scen.sys), FitnessCache(samples, scen.model, scen.sys)
    cuts = [(0, 0), (1, 0), (0, 1), (1, 1)]
    for cut in cuts:
        c1.latency(cut)
    for cut in reversed(cuts):
        c2.latency(cut)
    assert c1.values == c2.values


def test_ga_oracle_sample():
    assert all(r.passed for r in ga_suite(trials=20))
