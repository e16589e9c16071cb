"""Channel states of the two-user interference network.

Gains are power gains ``H_kl = |h_kl|^2`` from transmitter ``k`` to receiver
``l``. Direct links are Rayleigh with unit variance, cross links Rayleigh
with variance ``eps``, so each power gain is exponential.

Random draws are counter based: trial ``t`` under master seed ``s`` always
consumes the single Philox-4x64 block at counter ``t`` keyed by ``s``. Any
partition of trials across workers therefore sees the same channel states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FadingParams",
    "ChannelState",
    "LocalCsi",
    "ChannelBatch",
    "ChannelStream",
    "db_to_linear",
    "linear_to_db",
    "philox_key",
    "sample_channel",
    "sample_block",
    "local_view",
    "cdf_t_min",
    "pdf_t_min",
    "sf_h121",
    "cdf_h121",
    "pdf_h121",
]

_U53 = 2.0 ** -53


def db_to_linear(p_db):
    return np.power(10.0, np.asarray(p_db, dtype=float) / 10.0)[()]


def linear_to_db(p):
    return (10.0 * np.log10(np.asarray(p, dtype=float)))[()]


@dataclass(frozen=True)
class FadingParams:
    """Cross-link variance ``eps``, power constraint ``p`` (linear) and target rate ``rho``."""

    eps: float
    p: float
    rho: float

    def __post_init__(self):
        for name in ("eps", "p", "rho"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")

    @classmethod
    def from_db(cls, eps: float, p_db: float, rho: float) -> "FadingParams":
        return cls(eps=eps, p=float(db_to_linear(p_db)), rho=rho)

    @property
    def p_db(self) -> float:
        return float(linear_to_db(self.p))


@dataclass(frozen=True)
class ChannelState:
    """The four power gains of one fading block."""

    h11: float
    h12: float
    h21: float
    h22: float

    def __post_init__(self):
        for name in ("h11", "h12", "h21", "h22"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and nonnegative, got {value!r}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.h11, self.h12, self.h21, self.h22)


@dataclass(frozen=True)
class LocalCsi:
    """What receiver ``k`` observes: its direct gain and the interfering gain."""

    direct: float
    cross_in: float

    def __post_init__(self):
        if not (self.direct >= 0 and self.cross_in >= 0):
            raise ValueError("local CSI gains must be nonnegative")


@dataclass(frozen=True)
class ChannelBatch:
    """Column arrays of consecutive channel states, trial ``start`` first."""

    start: int
    h11: np.ndarray
    h12: np.ndarray
    h21: np.ndarray
    h22: np.ndarray

    def __len__(self) -> int:
        return len(self.h11)

    def state(self, i: int) -> ChannelState:
        return ChannelState(
            float(self.h11[i]), float(self.h12[i]), float(self.h21[i]), float(self.h22[i])
        )

    def states(self):
        for i in range(len(self)):
            yield self.state(i)


def philox_key(master_seed: int) -> np.ndarray:
    """128-bit Philox key derived from a master seed."""
    return np.random.SeedSequence(int(master_seed)).generate_state(2, dtype=np.uint64)


def _uniforms(key: np.ndarray, start: int, count: int) -> np.ndarray:
    raw = np.random.Philox(key=key, counter=int(start)).random_raw(4 * count)
    # Offset by half an ulp so the variate lies in the open interval (0, 1).
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _U53
    return u.reshape(count, 4)


def _exponential(u: np.ndarray, mean: float) -> np.ndarray:
    return -mean * np.log1p(-u)


def sample_block(master_seed: int, start: int, count: int, params: FadingParams) -> ChannelBatch:
    """Draw the channel states of trials ``start, ..., start + count - 1``."""
    if count < 0 or start < 0:
        raise ValueError("start and count must be nonnegative")
    u = _uniforms(philox_key(master_seed), start, count)
    return ChannelBatch(
        start=int(start),
        h11=_exponential(u[:, 0], 1.0),
        h12=_exponential(u[:, 1], params.eps),
        h21=_exponential(u[:, 2], params.eps),
        h22=_exponential(u[:, 3], 1.0),
    )


class ChannelStream:
    """Single-owner stream of channel states for consecutive trial indices.

    Parameters
    ----------
    master_seed : int
        Seed shared by every stream of one experiment.
    start : int, optional
        Index of the first trial this stream produces.
    """

    def __init__(self, master_seed: int, start: int = 0):
        self.master_seed = int(master_seed)
        self._key = philox_key(master_seed)
        self.position = int(start)

    def next_uniforms(self) -> np.ndarray:
        u = _uniforms(self._key, self.position, 1)[0]
        self.position += 1
        return u


def sample_channel(stream: ChannelStream, params: FadingParams) -> ChannelState:
    """Draw the next channel state from ``stream``.

    Produces exactly the state that :func:`sample_block` yields for the same
    trial index.
    """
    u = stream.next_uniforms()
    return ChannelState(
        h11=float(_exponential(u[0], 1.0)),
        h12=float(_exponential(u[1], params.eps)),
        h21=float(_exponential(u[2], params.eps)),
        h22=float(_exponential(u[3], 1.0)),
    )


def local_view(h: ChannelState, receiver: int) -> LocalCsi:
    if receiver == 1:
        return LocalCsi(direct=h.h11, cross_in=h.h21)
    if receiver == 2:
        return LocalCsi(direct=h.h22, cross_in=h.h12)
    raise ValueError(f"receiver must be 1 or 2, got {receiver!r}")


def _check_positive(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("density argument must be strictly positive")
    return x


def _scalarize(out, x):
    return float(out) if np.ndim(x) == 0 else out


def cdf_t_min(x, params: FadingParams):
    """``Pr{t_min <= x}`` for the minimum time share of one receiver.

    ``t_min <= x`` holds iff the direct gain is at least ``(2^(rho/x) - 1)/P``.
    """
    xs = _check_positive(x)
    with np.errstate(over="ignore"):
        thr = np.expm1(params.rho * math.log(2.0) / xs) / params.p
    return _scalarize(np.exp(-thr), x)


def pdf_t_min(x, params: FadingParams):
    xs = _check_positive(x)
    a = params.rho * math.log(2.0) / xs
    with np.errstate(over="ignore", invalid="ignore"):
        # exp(a - expm1(a)/P) is evaluated in the log domain to avoid inf*0.
        log_f = np.log(a / (params.p * xs)) + a - np.expm1(a) / params.p
        out = np.exp(log_f)
    return _scalarize(out, x)


def sf_h121(x, params: FadingParams):
    """Survival function of ``H11 / (H21 + 1/P)`` (same law as ``H22 / (H12 + 1/P)``)."""
    xs = _check_positive(x)
    return _scalarize(np.exp(-xs / params.p) / (1.0 + params.eps * xs), x)


def cdf_h121(x, params: FadingParams):
    xs = _check_positive(x)
    return _scalarize(-np.expm1(-xs / params.p - np.log1p(params.eps * xs)), x)


def pdf_h121(x, params: FadingParams):
    xs = _check_positive(x)
    e = np.exp(-xs / params.p)
    d = params.eps * xs + 1.0
    return _scalarize(e / (params.p * d) + params.eps * e / d**2, x)
