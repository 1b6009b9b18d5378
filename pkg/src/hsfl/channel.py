"""Seedable draws of client clock rates and channel gains."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .profiles import LINKS, EnvironmentSample

FLOOR_RATIO = 1e-6


@dataclass(frozen=True)
class EnvStats:
    """Distribution parameters for one environment draw.

    Client frequencies are Gaussian clipped at ``FLOOR_RATIO * mean``.  Gains
    are ``path_loss[link] * |N(gain_mean[link], gain_sd[link]^2)|`` clipped at
    ``FLOOR_RATIO * max(|gain_mean|, gain_sd)``; the defaults give the
    magnitude of a standard normal.
    """

    freq_mean: np.ndarray
    freq_sd: np.ndarray
    subchannel_count: int
    gain_mean: np.ndarray = None
    gain_sd: np.ndarray = None
    path_loss: np.ndarray = None

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.freq_mean, dtype=float))
        sd = np.broadcast_to(np.asarray(self.freq_sd, dtype=float), mean.shape).copy()
        if np.any(~(mean > 0)):
            raise ValueError("freq_mean entries must be > 0")
        if np.any(sd < 0):
            raise ValueError("freq_sd entries must be >= 0")
        object.__setattr__(self, "freq_mean", mean)
        object.__setattr__(self, "freq_sd", sd)
        if int(self.subchannel_count) < 1:
            raise ValueError("subchannel_count must be >= 1")
        object.__setattr__(self, "subchannel_count", int(self.subchannel_count))
        for name, default in (("gain_mean", 0.0), ("gain_sd", 1.0), ("path_loss", 1.0)):
            val = getattr(self, name)
            arr = np.broadcast_to(np.asarray(default if val is None else val, dtype=float),
                                  (len(LINKS),)).copy()
            object.__setattr__(self, name, arr)
        if np.any(self.gain_sd < 0):
            raise ValueError("gain_sd entries must be >= 0")
        if np.any(~(self.path_loss > 0)):
            raise ValueError("path_loss entries must be > 0")
        if np.any((self.gain_sd == 0) & (self.gain_mean == 0)):
            raise ValueError("a link with zero gain mean and zero spread has no signal")

    @property
    def num_clients(self) -> int:
        return self.freq_mean.shape[0]


def sample(stats: EnvStats, seed) -> EnvironmentSample:
    """One draw; ``seed`` is an int or a ``numpy.random.SeedSequence``.

    Frequencies are drawn before gains so that two stats differing only in
    their parameters share the underlying normal variates.
    """
    rng = np.random.default_rng(seed)
    n_clients = stats.num_clients
    z_freq = rng.standard_normal(n_clients)
    z_gain = rng.standard_normal((len(LINKS), stats.subchannel_count, n_clients))
    freq = np.maximum(stats.freq_mean + stats.freq_sd * z_freq, FLOOR_RATIO * stats.freq_mean)
    mean = stats.gain_mean[:, None, None]
    sd = stats.gain_sd[:, None, None]
    floor = FLOOR_RATIO * np.maximum(np.abs(mean), sd)
    gain = stats.path_loss[:, None, None] * np.maximum(np.abs(mean + sd * z_gain), floor)
    return EnvironmentSample(client_freq=freq, gain=gain)


def derive_seeds(seed, count: int) -> list:
    return np.random.SeedSequence(seed).spawn(count) if isinstance(seed, int) else seed.spawn(count)


def sample_batch(stats: EnvStats, seed, count: int) -> list[EnvironmentSample]:
    """``count`` independent draws, one per child of ``SeedSequence(seed)``."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return [sample(stats, child) for child in derive_seeds(seed, count)]
