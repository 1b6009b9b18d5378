"""Static profiles, per-round decisions and the feasibility checks that tie them.

Units are SI throughout: FLOPs, bits, cycles/s, Hz, W, seconds.  The
computing intensity ``kappa`` multiplies the clock rate in the latency
formulas, so it is expressed in FLOPs per cycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

LINKS = ("ms_up", "ms_down", "es_up", "es_down")
MS_UP, MS_DOWN, ES_UP, ES_DOWN = range(4)
UPLINKS = (MS_UP, ES_UP)
DOWNLINKS = (MS_DOWN, ES_DOWN)

# relative tolerance for sum constraints (C3, C5) after floating-point rescaling
SUM_RTOL = 1e-9


class FeasibilityError(ValueError):
    """An allocation violates one of the constraints C1-C5."""

    def __init__(self, constraint: str, message: str):
        super().__init__(f"{constraint}: {message}")
        self.constraint = constraint


def _vec(x, n=None, dtype=float, name="value"):
    arr = np.array(x, dtype=dtype)
    if n is not None:
        if arr.ndim == 0:
            arr = np.full(n, arr, dtype=dtype)
        if arr.shape != (n,):
            raise ValueError(f"{name} must have {n} entries, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ModelProfile:
    """Per-cut workload and data-size tables, all indexed by cut layer 0..L.

    Cut ``l`` keeps layers 1..l on the client; ``l = 0`` sends raw input.
    FLOP and bit counts are per sample except ``model_bits``.
    """

    client_fp_flops: np.ndarray
    client_bp_flops: np.ndarray
    server_fp_flops: np.ndarray
    server_bp_flops: np.ndarray
    smashed_bits: np.ndarray
    gradient_bits: np.ndarray
    model_bits: np.ndarray

    def __post_init__(self):
        names = ("client_fp_flops", "client_bp_flops", "server_fp_flops",
                 "server_bp_flops", "smashed_bits", "gradient_bits", "model_bits")
        size = None
        for name in names:
            arr = _vec(getattr(self, name), name=name)
            if arr.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            if size is None:
                size = arr.shape[0]
            elif arr.shape[0] != size:
                raise ValueError(f"{name} has {arr.shape[0]} entries, expected {size}")
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} entries must be finite and >= 0")
            object.__setattr__(self, name, arr)
        if size < 1:
            raise ValueError("profile tables need at least the l = 0 entry")
        if np.any(np.diff(self.client_fp_flops) < 0):
            raise ValueError("client_fp_flops must be non-decreasing in the cut layer")
        if np.any(np.diff(self.server_fp_flops) > 0):
            raise ValueError("server_fp_flops must be non-increasing in the cut layer")
        if np.any(np.diff(self.model_bits) < 0):
            raise ValueError("model_bits must be non-decreasing in the cut layer")

    @property
    def num_layers(self) -> int:
        return self.client_fp_flops.shape[0] - 1

    @classmethod
    def from_layers(cls, fp_flops, activation_bits, param_bits, bp_flops=None,
                    bp_ratio=2.0) -> "ModelProfile":
        """Build cumulative tables from per-layer costs.

        Args:
            fp_flops: forward FLOPs per sample of layers 1..L.
            activation_bits: L+1 entries; entry 0 is the raw input, entry j the
                output of layer j.  Smashed data and its gradient share a size.
            param_bits: parameter bits of layers 1..L.
            bp_flops: backward FLOPs per layer; defaults to ``bp_ratio * fp``.
        """
        fp = np.asarray(fp_flops, dtype=float)
        bp = fp * bp_ratio if bp_flops is None else np.asarray(bp_flops, dtype=float)
        act = np.asarray(activation_bits, dtype=float)
        params = np.asarray(param_bits, dtype=float)
        n = fp.shape[0]
        if bp.shape != (n,) or params.shape != (n,) or act.shape != (n + 1,):
            raise ValueError("layer tables disagree on the number of layers")
        fp_c = np.concatenate([[0.0], np.cumsum(fp)])
        bp_c = np.concatenate([[0.0], np.cumsum(bp)])
        return cls(
            client_fp_flops=fp_c,
            client_bp_flops=bp_c,
            server_fp_flops=fp_c[-1] - fp_c,
            server_bp_flops=bp_c[-1] - bp_c,
            smashed_bits=act,
            gradient_bits=act,
            model_bits=np.concatenate([[0.0], np.cumsum(params)]),
        )


@dataclass(frozen=True)
class SystemProfile:
    """System constants; per-client entries accept a scalar broadcast to K."""

    num_clients: int
    batch_size: int
    batches_per_round: int
    total_rounds: int
    server_freq: float
    server_intensity: float
    client_intensity: np.ndarray
    subchannel_count: int
    subchannel_bandwidth: float
    noise_psd: float
    client_power_cap: np.ndarray
    ms_power_cap: float
    es_power_cap: float
    straggler_tolerance: float
    max_cut: np.ndarray
    dataset_size: np.ndarray

    def __post_init__(self):
        k = int(self.num_clients)
        for name in ("num_clients", "batch_size", "batches_per_round", "total_rounds",
                     "subchannel_count"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise ValueError(f"{name} must be a positive integer, got {val}")
            object.__setattr__(self, name, int(val))
        for name in ("server_freq", "server_intensity", "subchannel_bandwidth",
                     "noise_psd", "ms_power_cap", "es_power_cap", "straggler_tolerance"):
            val = float(getattr(self, name))
            if not val > 0 or not np.isfinite(val):
                raise ValueError(f"{name} must be finite and > 0, got {val}")
            object.__setattr__(self, name, val)
        for name in ("client_intensity", "client_power_cap"):
            arr = _vec(getattr(self, name), k, name=name)
            if np.any(~(arr > 0)) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} entries must be finite and > 0")
            object.__setattr__(self, name, arr)
        for name in ("max_cut", "dataset_size"):
            arr = _vec(getattr(self, name), k, dtype=np.int64, name=name)
            object.__setattr__(self, name, arr)
        if np.any(self.max_cut < 0):
            raise ValueError("max_cut entries must be >= 0")
        if np.any(self.dataset_size < 1):
            raise ValueError("dataset_size entries must be >= 1")

    def replace(self, **changes) -> "SystemProfile":
        return replace(self, **changes)

    def check_model(self, model: ModelProfile) -> None:
        if np.any(self.max_cut > model.num_layers):
            raise ValueError(
                f"max_cut {self.max_cut.tolist()} exceeds the model's "
                f"{model.num_layers} layers")


@dataclass(frozen=True)
class EnvironmentSample:
    """One draw of client clock rates and channel gains.

    ``gain[link, i, k]`` is the dimensionless gain of subchannel i to client k.
    """

    client_freq: np.ndarray
    gain: np.ndarray

    def __post_init__(self):
        freq = _vec(self.client_freq, name="client_freq")
        gain = np.array(self.gain, dtype=float)
        if gain.ndim != 3 or gain.shape[0] != len(LINKS) or gain.shape[2] != freq.shape[0]:
            raise ValueError(f"gain must have shape (4, I, K={freq.shape[0]}), got {gain.shape}")
        if np.any(~(freq > 0)):
            raise ValueError("client_freq entries must be > 0")
        if np.any(gain < 0) or not np.all(np.isfinite(gain)):
            raise ValueError("gains must be finite and >= 0")
        gain.setflags(write=False)
        object.__setattr__(self, "client_freq", freq)
        object.__setattr__(self, "gain", gain)

    @property
    def num_clients(self) -> int:
        return self.client_freq.shape[0]

    @property
    def subchannel_count(self) -> int:
        return self.gain.shape[1]


@dataclass
class Allocation:
    """A full per-round decision.

    ``subchannel_assign[link, i]`` is the owning client of subchannel i on
    that link, or -1 when unused.  ``power[link, k]`` is client k's transmit
    power on the link (for downlinks, the server's power towards k).
    """

    cut: np.ndarray
    server_freq_share: np.ndarray
    subchannel_assign: np.ndarray
    power: np.ndarray
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.cut = np.asarray(self.cut, dtype=np.int64)
        self.server_freq_share = np.asarray(self.server_freq_share, dtype=float)
        self.subchannel_assign = np.asarray(self.subchannel_assign, dtype=np.int64)
        self.power = np.asarray(self.power, dtype=float)

    def to_dict(self) -> dict:
        return {
            "cut": self.cut.tolist(),
            "server_freq_share": self.server_freq_share.tolist(),
            "subchannel_assign": {name: self.subchannel_assign[j].tolist()
                                  for j, name in enumerate(LINKS)},
            "power": {name: self.power[j].tolist() for j, name in enumerate(LINKS)},
        }


def check_allocation(alloc: Allocation, model: ModelProfile, sys: SystemProfile) -> None:
    """Raise FeasibilityError naming the first violated constraint."""
    k = sys.num_clients
    if alloc.cut.shape != (k,):
        raise FeasibilityError("C1", f"expected {k} cut layers, got {alloc.cut.shape}")
    bad = np.flatnonzero((alloc.cut < 0) | (alloc.cut > sys.max_cut)
                         | (alloc.cut > model.num_layers))
    if bad.size:
        c = bad[0]
        raise FeasibilityError("C1", f"client {c} cut {alloc.cut[c]} outside 0..{sys.max_cut[c]}")
    share = alloc.server_freq_share
    if share.shape != (k,):
        raise FeasibilityError("C2", f"expected {k} frequency shares, got {share.shape}")
    if np.any(~(share > 0)) or np.any(share > sys.server_freq * (1 + SUM_RTOL)):
        raise FeasibilityError("C2", f"shares must lie in (0, f_s], got {share.tolist()}")
    if share.sum() > sys.server_freq * (1 + SUM_RTOL):
        raise FeasibilityError("C3", f"shares sum to {share.sum():.6g} > f_s = {sys.server_freq:.6g}")
    n_chan = sys.subchannel_count
    if alloc.subchannel_assign.shape != (len(LINKS), n_chan):
        raise FeasibilityError(
            "assignment", f"expected shape (4, {n_chan}), got {alloc.subchannel_assign.shape}")
    if np.any((alloc.subchannel_assign < -1) | (alloc.subchannel_assign >= k)):
        raise FeasibilityError("assignment", "subchannel owner out of range")
    if alloc.power.shape != (len(LINKS), k):
        raise FeasibilityError("power", f"expected shape (4, {k}), got {alloc.power.shape}")
    if np.any(alloc.power < 0) or not np.all(np.isfinite(alloc.power)):
        raise FeasibilityError("power", "transmit powers must be finite and >= 0")
    for link in UPLINKS:
        over = np.flatnonzero(alloc.power[link] > sys.client_power_cap * (1 + SUM_RTOL))
        if over.size:
            raise FeasibilityError(
                "C4", f"client {over[0]} {LINKS[link]} power {alloc.power[link, over[0]]:.6g} "
                      f"> cap {sys.client_power_cap[over[0]]:.6g}")
    for link, cap in ((MS_DOWN, sys.ms_power_cap), (ES_DOWN, sys.es_power_cap)):
        total = alloc.power[link].sum()
        if total > cap * (1 + SUM_RTOL):
            raise FeasibilityError("C5", f"{LINKS[link]} power sums to {total:.6g} > {cap:.6g}")
