"""Per-round latency of heterogeneous split federated training.

Scalar helpers compute one client's term; :func:`per_round_latency` evaluates
the whole round at once.  A zero rate on a link that has something to send
yields ``inf``; nothing to send costs zero time regardless of the rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .profiles import (
    ES_DOWN, ES_UP, LINKS, MS_DOWN, MS_UP, Allocation, EnvironmentSample,
    ModelProfile, SystemProfile, check_allocation,
)


def transfer_times(load, rate) -> np.ndarray:
    """Elementwise load / rate with 0 for no load and inf for a dead link."""
    return _kernels.transfer_times(np.asarray(load, dtype=float), np.asarray(rate, dtype=float))


def _check_cut(sys: SystemProfile, model: ModelProfile, k: int, l: int) -> None:
    if not 0 <= l <= min(sys.max_cut[k], model.num_layers):
        raise ValueError(f"cut layer {l} outside 0..{sys.max_cut[k]} for client {k}")


def client_compute_latency(model: ModelProfile, sys: SystemProfile,
                           env: EnvironmentSample, k: int, l: int) -> float:
    """Client-side forward plus backward time for one mini-batch."""
    _check_cut(sys, model, k, l)
    freq = env.client_freq[k]
    if not freq > 0:
        raise ValueError(f"client {k} frequency must be > 0, got {freq}")
    work = sys.batch_size * model.client_fp_flops[l] + sys.batch_size * model.client_bp_flops[l]
    return work / (freq * sys.client_intensity[k])


def link_rate(sys: SystemProfile, alloc: Allocation, env: EnvironmentSample,
              link: int, k: int) -> float:
    """Sum over the subchannels owned by ``k`` of B log2(1 + p g / noise)."""
    power = alloc.power[link, k]
    if power < 0:
        raise ValueError(f"negative power {power} on {LINKS[link]} for client {k}")
    gains = env.gain[link]
    if np.any(gains < 0):
        raise ValueError("negative channel gain")
    return float(link_rates(sys, alloc, env, link)[k])


def link_rates(sys: SystemProfile, alloc: Allocation, env: EnvironmentSample,
               link: int) -> np.ndarray:
    return _kernels.client_rates(alloc.subchannel_assign[link], alloc.power[link],
                                 env.gain[link], sys.subchannel_bandwidth, sys.noise_psd)


def smashed_uplink_latency(model: ModelProfile, sys: SystemProfile, alloc: Allocation,
                           env: EnvironmentSample, k: int) -> float:
    load = sys.batch_size * model.smashed_bits[alloc.cut[k]]
    return _kernels.transfer_time(load, link_rate(sys, alloc, env, MS_UP, k))


def gradient_downlink_latency(model: ModelProfile, sys: SystemProfile, alloc: Allocation,
                              env: EnvironmentSample, k: int) -> float:
    load = sys.batch_size * model.gradient_bits[alloc.cut[k]]
    return _kernels.transfer_time(load, link_rate(sys, alloc, env, MS_DOWN, k))


def server_compute_latency(model: ModelProfile, sys: SystemProfile, alloc: Allocation,
                           k: int) -> float:
    share = alloc.server_freq_share[k]
    if not share > 0:
        raise ValueError(f"server frequency share of client {k} must be > 0, got {share}")
    l = alloc.cut[k]
    work = sys.batch_size * model.server_fp_flops[l] + sys.batch_size * model.server_bp_flops[l]
    return work / (share * sys.server_intensity)


def aggregation_latencies(model: ModelProfile, sys: SystemProfile, alloc: Allocation,
                          env: EnvironmentSample, k: int) -> tuple[float, float]:
    """Client-model upload to and download from the edge server."""
    bits = model.model_bits[alloc.cut[k]]
    up = _kernels.transfer_time(bits, link_rate(sys, alloc, env, ES_UP, k))
    down = _kernels.transfer_time(bits, link_rate(sys, alloc, env, ES_DOWN, k))
    return up, down


@dataclass(frozen=True)
class LatencyBreakdown:
    """Per-client components (arrays over clients) and the round total, seconds."""

    client_compute: np.ndarray
    server_compute: np.ndarray
    ms_uplink: np.ndarray
    ms_downlink: np.ndarray
    es_uplink: np.ndarray
    es_downlink: np.ndarray
    ms_total: np.ndarray
    contribution: np.ndarray
    stragglers: np.ndarray
    round_total: float
    batches_per_round: int
    straggler_tolerance: float

    def recompute_total(self) -> float:
        return combine_round(self.ms_total, self.es_uplink, self.es_downlink,
                             self.batches_per_round, self.straggler_tolerance)[2]

    def as_rows(self) -> list[dict]:
        rows = []
        for k in range(self.ms_total.shape[0]):
            rows.append({
                "client": k,
                "client_compute": float(self.client_compute[k]),
                "server_compute": float(self.server_compute[k]),
                "ms_uplink": float(self.ms_uplink[k]),
                "ms_downlink": float(self.ms_downlink[k]),
                "es_uplink": float(self.es_uplink[k]),
                "es_downlink": float(self.es_downlink[k]),
                "contribution": float(self.contribution[k]),
                "straggler": bool(self.stragglers[k]),
            })
        return rows


def combine_round(ms_total, es_uplink, es_downlink, batches_per_round, tolerance):
    """Apply the straggler cap; returns (contribution, straggler mask, total)."""
    inner = batches_per_round * ms_total + es_uplink
    contribution = np.minimum(inner, tolerance)
    stragglers = inner > tolerance
    total = float(np.max(contribution) + np.max(es_downlink))
    return contribution, stragglers, total


def per_round_latency(model: ModelProfile, sys: SystemProfile, alloc: Allocation,
                      env: EnvironmentSample, check: bool = True) -> LatencyBreakdown:
    """Full latency breakdown of one round under ``alloc``.

    Raises:
        FeasibilityError: if ``check`` and the allocation violates C1-C5.
    """
    if check:
        check_allocation(alloc, model, sys)
    b = sys.batch_size
    cut = alloc.cut
    client = (b * model.client_fp_flops[cut] + b * model.client_bp_flops[cut]) / (
        env.client_freq * sys.client_intensity)
    server = (b * model.server_fp_flops[cut] + b * model.server_bp_flops[cut]) / (
        alloc.server_freq_share * sys.server_intensity)
    rates = [link_rates(sys, alloc, env, link) for link in range(len(LINKS))]
    loads = {
        MS_UP: b * model.smashed_bits[cut],
        MS_DOWN: b * model.gradient_bits[cut],
        ES_UP: model.model_bits[cut],
        ES_DOWN: model.model_bits[cut],
    }
    times = {link: transfer_times(load, rates[link]) for link, load in loads.items()}
    ms_total = client + server + times[MS_UP] + times[MS_DOWN]
    contribution, stragglers, total = combine_round(
        ms_total, times[ES_UP], times[ES_DOWN], sys.batches_per_round,
        sys.straggler_tolerance)
    return LatencyBreakdown(
        client_compute=client,
        server_compute=server,
        ms_uplink=times[MS_UP],
        ms_downlink=times[MS_DOWN],
        es_uplink=times[ES_UP],
        es_downlink=times[ES_DOWN],
        ms_total=ms_total,
        contribution=contribution,
        stragglers=stragglers,
        round_total=total,
        batches_per_round=sys.batches_per_round,
        straggler_tolerance=sys.straggler_tolerance,
    )
