"""Conventional separate quantization of the channel gains.

Each receiver quantizes its two local gains independently with scalar Lloyd
codebooks and the transmission pair is computed from the reconstructed
state as if it were exact.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .channel import ChannelState, FadingParams
from .rates import Strategy, TransmissionPair, optimal_it_pair, optimal_ts_pair

__all__ = [
    "TrainConfig",
    "LloydCodebook",
    "train_lloyd",
    "cached_codebook",
    "quantize_gain",
    "quantize_state",
    "ConvCodebooks",
    "conv_codebooks",
    "dq_conv",
    "no_feedback_pair",
    "save_codebook",
    "load_codebook",
]


@dataclass(frozen=True)
class TrainConfig:
    samples: int = 1_000_000
    max_iter: int = 500
    rel_tol: float = 1e-8
    # Stratified inverse-CDF training draws: one uniform per equal-probability stratum.
    stratified: bool = True


@dataclass(frozen=True)
class LloydCodebook:
    levels: tuple[float, ...]
    source_mean: float
    thresholds: tuple[float, ...] = field(init=False)
    distortion_history: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        lv = tuple(float(x) for x in self.levels)
        if not lv:
            raise ValueError("codebook needs at least one level")
        if any(b <= a for a, b in zip(lv, lv[1:])):
            raise ValueError("levels must be strictly increasing")
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "thresholds", tuple((a + b) / 2.0 for a, b in zip(lv, lv[1:])))

    @property
    def bits(self) -> int:
        return int(round(math.log2(len(self.levels))))

    def to_dict(self) -> dict:
        return {"bits": self.bits, "source_mean": self.source_mean, "levels": list(self.levels)}


def save_codebook(cb: LloydCodebook, path) -> None:
    Path(path).write_text(json.dumps(cb.to_dict(), indent=2))


def load_codebook(path) -> LloydCodebook:
    d = json.loads(Path(path).read_text())
    cb = LloydCodebook(tuple(d["levels"]), float(d["source_mean"]))
    if cb.bits != d["bits"] or len(cb.levels) != 2 ** d["bits"]:
        raise ValueError("bits field does not match the number of levels")
    return cb


def _training_sample(source_mean: float, rng: np.random.Generator, cfg: TrainConfig) -> np.ndarray:
    n = cfg.samples
    if cfg.stratified:
        u = (np.arange(n) + rng.random(n)) / n
    else:
        u = rng.random(n)
    return np.sort(-source_mean * np.log1p(-u))


def _cells(x_sorted: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    # Ties at a threshold go to the upper cell.
    return np.searchsorted(x_sorted, thresholds, side="left")


def train_lloyd(
    bits_per_gain: int,
    source_mean: float,
    rng: np.random.Generator,
    cfg: TrainConfig = TrainConfig(),
) -> LloydCodebook:
    """Train a ``2**bits_per_gain``-level codebook for an exponential source.

    Alternates the centroid and nearest-neighbour conditions on a fixed
    training sample. Cells are initialised at empirical quantiles. An
    iteration that would raise the training distortion (possible only
    through rounding) is rejected and training stops.
    """
    if bits_per_gain < 0:
        raise ValueError("bits_per_gain must be nonnegative")
    if not source_mean > 0:
        raise ValueError("source_mean must be positive")
    n_levels = 2 ** int(bits_per_gain)
    x = _training_sample(source_mean, rng, cfg)
    n = len(x)
    csum = np.concatenate(([0.0], np.cumsum(x)))
    csum2 = np.concatenate(([0.0], np.cumsum(x * x)))

    def edges_of(bounds):
        return np.concatenate(([0], bounds, [n]))

    def centroids(edges):
        counts = np.diff(edges)
        if np.any(counts == 0):
            raise RuntimeError("empty Lloyd cell; increase the training sample size")
        return (csum[edges[1:]] - csum[edges[:-1]]) / counts

    def distortion(edges, levels):
        s1 = csum[edges[1:]] - csum[edges[:-1]]
        s2 = csum2[edges[1:]] - csum2[edges[:-1]]
        return float(np.sum(s2 - 2.0 * levels * s1 + np.diff(edges) * levels**2) / n)

    edges = edges_of((np.arange(1, n_levels) * n) // n_levels)
    levels = centroids(edges)
    history = [distortion(edges, levels)]
    for _ in range(cfg.max_iter):
        # Nearest-neighbour cells for the current levels, then their centroids.
        edges = edges_of(_cells(x, (levels[:-1] + levels[1:]) / 2.0))
        new_levels = centroids(edges)
        d = distortion(edges, new_levels)
        if d > history[-1]:
            break
        levels = new_levels
        history.append(d)
        if history[-2] - d <= cfg.rel_tol * history[-2]:
            break
    return LloydCodebook(tuple(levels), float(source_mean), distortion_history=tuple(history))


@lru_cache(maxsize=None)
def cached_codebook(bits_per_gain: int, source_mean: float, seed: int = 0) -> LloydCodebook:
    """Train once per ``(bits, mean, seed)`` and reuse within the process."""
    rng = np.random.default_rng([int(seed), int(bits_per_gain)])
    return train_lloyd(bits_per_gain, source_mean, rng)


def quantize_gain(cb: LloydCodebook, x: float) -> float:
    return cb.levels[bisect.bisect_right(cb.thresholds, x)]


@dataclass(frozen=True)
class ConvCodebooks:
    """Codebooks for direct gains (mean 1) and cross gains (mean ``eps``)."""

    direct: LloydCodebook
    cross: LloydCodebook

    @property
    def bits_per_gain(self) -> int:
        return self.direct.bits


def conv_codebooks(b_tot: int, eps: float, seed: int = 0) -> ConvCodebooks:
    if b_tot <= 0 or b_tot % 4:
        raise ValueError(f"b_tot must be a positive multiple of 4, got {b_tot}")
    return ConvCodebooks(cached_codebook(b_tot // 4, 1.0, seed), cached_codebook(b_tot // 4, float(eps), seed))


def quantize_state(h: ChannelState, codebooks: ConvCodebooks) -> ChannelState:
    return ChannelState(
        quantize_gain(codebooks.direct, h.h11),
        quantize_gain(codebooks.cross, h.h12),
        quantize_gain(codebooks.cross, h.h21),
        quantize_gain(codebooks.direct, h.h22),
    )


def dq_conv(
    h: ChannelState,
    params: FadingParams,
    strategy: Strategy,
    b_tot: int,
    codebooks: ConvCodebooks,
) -> tuple[TransmissionPair, int]:
    """Pair chosen from the separately quantized state, and the bits spent."""
    if b_tot <= 0 or b_tot % 4:
        raise ValueError(f"b_tot must be a positive multiple of 4, got {b_tot}")
    if codebooks.bits_per_gain != b_tot // 4 or codebooks.cross.bits != b_tot // 4:
        raise ValueError("codebook sizes do not match b_tot / 4 bits per gain")
    h_hat = quantize_state(h, codebooks)
    if strategy is Strategy.TIME_SHARING:
        return optimal_ts_pair(h_hat, params), b_tot
    return optimal_it_pair(h_hat, params), b_tot


def no_feedback_pair(strategy: Strategy) -> TransmissionPair:
    if strategy is Strategy.TIME_SHARING:
        return TransmissionPair.ts(0.5, 0.5)
    return TransmissionPair.power(1.0, 1.0)
