"""Long-timescale cut-layer selection: genetic search on an SAA fitness.

The fitness of a cut vector is minus its mean optimised round latency over
S environment draws fixed for the whole run, so every individual is judged
on the same samples.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .channel import EnvStats, derive_seeds, sample_batch
from .latency import LatencyBreakdown
from .profiles import EnvironmentSample, ModelProfile, SystemProfile
from .shortterm import OPT_RULE, RoundRule, optimize_round


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 24
    stagnation_generations: int = 15
    crossover_rate: float = 0.8
    mutation_rate: float = 0.1
    max_generations: int = 200
    seed: int = 0
    saa_samples: int = 30
    tournament_size: int = 2
    # relative fitness gain below which a generation counts as stagnant
    improvement_rtol: float = 1e-4

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.saa_samples < 1:
            raise ValueError("saa_samples must be >= 1")
        if self.stagnation_generations < 1 or self.max_generations < 0:
            raise ValueError("stagnation_generations must be >= 1, max_generations >= 0")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")


def cut_bounds(model: ModelProfile, sys: SystemProfile) -> np.ndarray:
    """Largest feasible cut per client (C1)."""
    return np.minimum(sys.max_cut, model.num_layers).astype(np.int64)


def capped_latency(bd: LatencyBreakdown) -> float:
    """Round latency with any non-finite downlink term held at the tolerance."""
    if np.isfinite(bd.round_total):
        return bd.round_total
    down = bd.es_downlink[np.isfinite(bd.es_downlink)]
    extra = float(down.max()) if down.size else 0.0
    if not np.all(np.isfinite(bd.es_downlink)):
        extra = max(extra, bd.straggler_tolerance)
    return float(np.max(bd.contribution)) + extra


def saa_latency(cut, samples: list[EnvironmentSample], model: ModelProfile,
                sys: SystemProfile, rule: RoundRule = OPT_RULE) -> float:
    """Mean optimised round latency of ``cut`` over ``samples``."""
    cut = np.asarray(cut, dtype=np.int64)
    total = 0.0
    for env in samples:
        total += capped_latency(optimize_round(model, sys, env, cut, rule).breakdown)
    return total / len(samples)


class FitnessCache:
    """SAA latency per cut vector for one fixed sample set.

    Shareable across GA runs on the same samples; results do not depend on
    the order in which vectors are first requested.
    """

    def __init__(self, samples, model, sys, rule: RoundRule = OPT_RULE):
        self.samples, self.model, self.sys, self.rule = samples, model, sys, rule
        self.values: dict[tuple, float] = {}

    def latency(self, cut) -> float:
        key = tuple(int(c) for c in cut)
        if key not in self.values:
            self.values[key] = saa_latency(key, self.samples, self.model, self.sys, self.rule)
        return self.values[key]

    def __len__(self):
        return len(self.values)


@dataclass
class GAResult:
    cut: np.ndarray
    latency: float
    generations: int
    evaluations: int
    history: list = field(default_factory=list, repr=False)

    def write_log(self, path) -> None:
        """CSV with columns generation, best_fitness, mean_fitness."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["generation", "best_fitness", "mean_fitness"])
            for gen, best, mean in self.history:
                writer.writerow([gen, repr(best), repr(mean)])


def _tournament(rng, fitness, size) -> int:
    picks = rng.integers(0, fitness.shape[0], size=size)
    return int(picks[np.argmax(fitness[picks])])


def _offspring(rng, parents, fitness, cfg: GAConfig, upper) -> np.ndarray:
    k = upper.shape[0]
    a = parents[_tournament(rng, fitness, cfg.tournament_size)]
    b = parents[_tournament(rng, fitness, cfg.tournament_size)]
    child = a.copy()
    if k > 1 and rng.random() < cfg.crossover_rate:
        point = int(rng.integers(1, k))
        child[point:] = b[point:]
    mutate = rng.random(k) < cfg.mutation_rate
    if mutate.any():
        child[mutate] = rng.integers(0, upper[mutate] + 1)
    return np.clip(child, 0, upper)


def optimize_cuts(cfg: GAConfig, stats: EnvStats, model: ModelProfile, sys: SystemProfile,
                  samples: list[EnvironmentSample] | None = None,
                  cache: FitnessCache | None = None, initial_population=None,
                  rule: RoundRule = OPT_RULE) -> GAResult:
    """Search cut vectors for the lowest SAA latency.

    ``samples`` default to ``cfg.saa_samples`` draws seeded from ``cfg.seed``;
    a ``cache`` built on the same samples may be shared between runs.  The
    best individual survives every generation.  Stops after
    ``stagnation_generations`` generations without a relative gain of
    ``improvement_rtol``, or at ``max_generations``.
    """
    sys.check_model(model)
    sample_seq, ga_seq = derive_seeds(cfg.seed, 2)
    if cache is None:
        if samples is None:
            samples = sample_batch(stats, sample_seq, cfg.saa_samples)
        cache = FitnessCache(samples, model, sys, rule)
    rng = np.random.default_rng(ga_seq)
    upper = cut_bounds(model, sys)
    k = upper.shape[0]

    if initial_population is None:
        pop = rng.integers(0, upper + 1, size=(cfg.population_size, k))
    else:
        pop = np.clip(np.asarray(initial_population, dtype=np.int64).reshape(-1, k), 0, upper)
    fitness = np.array([-cache.latency(ind) for ind in pop])
    best_i = int(np.argmax(fitness))
    best_cut, best_fit = pop[best_i].copy(), float(fitness[best_i])
    history = [(0, best_fit, float(fitness.mean()))]
    if np.all(upper == 0):
        return GAResult(best_cut, -best_fit, 0, len(cache), history)

    stale = 0
    gen = 0
    while gen < cfg.max_generations and stale < cfg.stagnation_generations:
        gen += 1
        children = [best_cut.copy()]
        while len(children) < pop.shape[0]:
            children.append(_offspring(rng, pop, fitness, cfg, upper))
        pop = np.array(children)
        fitness = np.array([-cache.latency(ind) for ind in pop])
        i = int(np.argmax(fitness))
        gain = fitness[i] - best_fit
        if gain > cfg.improvement_rtol * abs(best_fit):
            stale = 0
        else:
            stale += 1
        if fitness[i] > best_fit:
            best_cut, best_fit = pop[i].copy(), float(fitness[i])
        history.append((gen, best_fit, float(fitness.mean())))
    return GAResult(best_cut, -best_fit, gen, len(cache), history)


def enumerate_cuts(cache: FitnessCache, upper) -> tuple[np.ndarray, float]:
    """Exhaustive search over every cut vector; test oracle."""
    upper = np.asarray(upper, dtype=np.int64)
    size = int(np.prod(upper + 1))
    if size > 100_000:
        raise ValueError(f"{size} candidate vectors exceed the enumeration limit")
    best_cut, best = None, np.inf
    for cut in np.ndindex(*(upper + 1)):
        lat = cache.latency(cut)
        if lat < best:
            best_cut, best = np.array(cut, dtype=np.int64), lat
    return best_cut, best
