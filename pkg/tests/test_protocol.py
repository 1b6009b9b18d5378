import json

import numpy as np
import pytest

from hsfl.channel import sample
from hsfl.cutlayer import GAConfig, optimize_cuts
from hsfl.latency import per_round_latency
from hsfl.policies import POLICY_NAMES, baseline_policy
from hsfl.profiles import MS_UP, FeasibilityError
from hsfl.protocol import (
    build_aggregation_plan, run_round, run_training, write_records_jsonl, write_summary_csv,
)
from hsfl.shortterm import optimize_round
from hsfl.verify import small_scenario


def test_aggregation_plan_examples():
    assert build_aggregation_plan([2, 2, 2], 4, [1, 1, 1]).common == ()
    plan = build_aggregation_plan([1, 3], 4, [1, 1])
    assert plan.common == (2, 3)
    for j in range(1, 5):
        assert plan.layer_weights(j).sum() == pytest.approx(1.0)
    assert plan.holders(2).tolist() == [1]
    assert plan.is_common(3) and not plan.is_common(4)


def test_aggregation_plan_excludes_stragglers():
    plan = build_aggregation_plan([1, 3, 2], 4, [10, 20, 30], participants=[0, 2])
    np.testing.assert_allclose(plan.weights, [0.25, 0.0, 0.75])
    with pytest.raises(ValueError):
        build_aggregation_plan([1, 5], 4, [1, 1])


def test_run_round_stragglers(scenario):
    env = sample(scenario.stats, 1)
    plan = optimize_round(scenario.model, scenario.sys, env, [1, 2, 3])
    rec = run_round(0, plan.allocation, env, scenario.model, scenario.sys)
    assert rec.stragglers == () and rec.participants == (0, 1, 2)
    assert rec.round_total == per_round_latency(scenario.model, scenario.sys,
                                                plan.allocation, env).round_total
    dead = plan.allocation
    dead.power[MS_UP, 1] = 0.0
    rec = run_round(0, dead, env, scenario.model, scenario.sys)
    assert rec.stragglers == (1,)
    assert set(rec.stragglers) | set(rec.participants) == {0, 1, 2}


def test_run_round_rejects_infeasible(scenario):
    env = sample(scenario.stats, 1)
    alloc = optimize_round(scenario.model, scenario.sys, env, [1, 2, 3]).allocation
    alloc.server_freq_share *= 2
    with pytest.raises(FeasibilityError):
        run_round(0, alloc, env, scenario.model, scenario.sys)


def test_training_is_replayable_and_cumulative(scenario, tmp_path):
    opt = baseline_policy("OPT")
    a = run_training(4, opt, scenario.stats, scenario.model, scenario.sys, 5, [0, 2, 3])
    b = run_training(4, opt, scenario.stats, scenario.model, scenario.sys, 5, [0, 2, 3])
    assert [r.round_total for r in a] == [r.round_total for r in b]
    assert a[-1].cumulative == pytest.approx(sum(r.round_total for r in a), rel=1e-15)
    one = run_training(1, opt, scenario.stats, scenario.model, scenario.sys, 5, [0, 2, 3])
    assert one[0].round_total == a[0].round_total
    write_records_jsonl(a, tmp_path / "r.jsonl")
    write_summary_csv(a, tmp_path / "r.csv")
    lines = (tmp_path / "r.jsonl").read_text().splitlines()
    assert len(lines) == 4 and json.loads(lines[0])["round"] == 0
    assert (tmp_path / "r.csv").read_text().startswith("round,round_total,stragglers,cumulative")


def test_optimized_policy_beats_baselines_on_a_desk_instance():
    scen = small_scenario(k=3, subchannels=6, max_cut=3, level=0.8)
    ga = optimize_cuts(GAConfig(population_size=10, saa_samples=4, stagnation_generations=4),
                       scen.stats, scen.model, scen.sys)
    totals = {name: run_training(10, baseline_policy(name), scen.stats, scen.model, scen.sys,
                                 seed=1, optimized_cut=ga.cut)[-1].cumulative
              for name in POLICY_NAMES}
    assert all(totals["OPT"] <= v for v in totals.values()), totals
