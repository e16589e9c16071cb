"""Deterministic rate and outage formulas for one channel state.

All functions here are scalar and pure. Vectorised counterparts used by the
Monte-Carlo engine live in :mod:`confquant.montecarlo.kernels` and are
tested sample-by-sample against these.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .channel import ChannelState, FadingParams, LocalCsi, local_view

__all__ = [
    "PairKind",
    "Metric",
    "Strategy",
    "TransmissionPair",
    "RateReport",
    "rate_ts",
    "rate_it",
    "report",
    "optimal_ts_pair",
    "optimal_it_pair",
    "t_min",
    "p_max",
    "opt_outage",
]


class PairKind(enum.Enum):
    TIME_SHARING = "ts"
    POWER = "it"


class Metric(enum.Enum):
    SUM_RATE = "sr"
    MIN_RATE = "mr"


class Strategy(enum.Enum):
    TIME_SHARING = "ts"
    INTERFERENCE = "it"


@dataclass(frozen=True)
class TransmissionPair:
    """A time-sharing pair ``(t1, t2)`` or a power-fraction pair ``(p1, p2)``.

    ``degenerate`` marks pairs produced by a zero-gain fallback branch.
    """

    a: float
    b: float
    kind: PairKind
    degenerate: bool = False

    def __post_init__(self):
        if not (0.0 <= self.a <= 1.0 and 0.0 <= self.b <= 1.0):
            raise ValueError(f"pair coordinates must lie in [0, 1], got ({self.a}, {self.b})")
        if self.kind is PairKind.TIME_SHARING and self.a + self.b > 1.0 + 1e-12:
            raise ValueError(f"time shares must sum to at most 1, got {self.a + self.b}")

    @classmethod
    def ts(cls, t1: float, t2: float, degenerate: bool = False) -> "TransmissionPair":
        return cls(t1, t2, PairKind.TIME_SHARING, degenerate)

    @classmethod
    def power(cls, p1: float, p2: float, degenerate: bool = False) -> "TransmissionPair":
        return cls(p1, p2, PairKind.POWER, degenerate)

    def as_tuple(self) -> tuple[float, float]:
        return (self.a, self.b)


@dataclass(frozen=True)
class RateReport:
    r1: float
    r2: float

    @property
    def sum(self) -> float:
        return self.r1 + self.r2

    @property
    def min(self) -> float:
        return min(self.r1, self.r2)


def rate_ts(t: float, params: FadingParams, direct_gain: float) -> float:
    """Rate of a user holding time share ``t`` at full power."""
    return t * math.log2(1.0 + params.p * direct_gain)


def rate_it(
    p_self: float,
    p_other: float,
    params: FadingParams,
    direct_gain: float,
    cross_gain: float,
) -> float:
    """Rate under simultaneous transmission, interference treated as noise.

    ``cross_gain`` is the gain from the *other* transmitter into this
    receiver, so the interference power is ``p_other * P * cross_gain``.
    """
    sinr = p_self * params.p * direct_gain / (p_other * params.p * cross_gain + 1.0)
    return math.log2(1.0 + sinr)


def report(h: ChannelState, pair: TransmissionPair, params: FadingParams) -> RateReport:
    if pair.kind is PairKind.TIME_SHARING:
        return RateReport(rate_ts(pair.a, params, h.h11), rate_ts(pair.b, params, h.h22))
    return RateReport(
        rate_it(pair.a, pair.b, params, h.h11, h.h21),
        rate_it(pair.b, pair.a, params, h.h22, h.h12),
    )


def optimal_ts_pair(h: ChannelState, params: FadingParams) -> TransmissionPair:
    """Time shares that equalise the two users' rates (max-min optimum)."""
    l1 = math.log2(1.0 + params.p * h.h11)
    l2 = math.log2(1.0 + params.p * h.h22)
    if l1 == 0.0 or l2 == 0.0:
        # One user gets nothing anyway; give the whole block to the other.
        if l2 == 0.0:
            return TransmissionPair.ts(1.0, 0.0, degenerate=True)
        return TransmissionPair.ts(0.0, 1.0, degenerate=True)
    t1 = l2 / (l1 + l2)
    return TransmissionPair.ts(t1, 1.0 - t1)


def _equal_rate_root(p: float, hxx: float, hxy: float, hyx: float, hyy: float) -> float:
    """Positive root of the equal-SINR equation for the reduced-power user.

    With the other user at full power, the user whose power is reduced has
    direct gain ``hxx``; it interferes through ``hxy`` and is interfered
    through ``hyx``; the full-power user has direct gain ``hyy``.
    """
    # (sqrt(1 + a) - 1) / (2 p hxy) rewritten to avoid cancellation when a is small.
    c = p * hyx + 1.0
    a = 4.0 * p * hxy * hyy * c / hxx
    return 2.0 * hyy * c / (hxx * (math.sqrt(1.0 + a) + 1.0))


def optimal_it_pair(h: ChannelState, params: FadingParams) -> TransmissionPair:
    """Max-min optimal power fractions; at least one coordinate equals 1."""
    p = params.p
    sinr1 = p * h.h11 / (p * h.h21 + 1.0)
    sinr2 = p * h.h22 / (p * h.h12 + 1.0)
    if sinr1 >= sinr2:
        if h.h12 == 0.0 or h.h11 == 0.0:
            return TransmissionPair.power(1.0, 1.0, degenerate=True)
        p1 = _equal_rate_root(p, h.h11, h.h12, h.h21, h.h22)
        return TransmissionPair.power(min(p1, 1.0), 1.0)
    if h.h21 == 0.0 or h.h22 == 0.0:
        return TransmissionPair.power(1.0, 1.0, degenerate=True)
    p2 = _equal_rate_root(p, h.h22, h.h21, h.h12, h.h11)
    return TransmissionPair.power(1.0, min(p2, 1.0))


def t_min(local: LocalCsi, params: FadingParams) -> float:
    """Smallest time share that lets this receiver reach ``rho``; ``inf`` if none."""
    cap = math.log2(1.0 + params.p * local.direct)
    if cap == 0.0:
        return math.inf
    return params.rho / cap


def p_max(local: LocalCsi, params: FadingParams) -> float:
    """Largest power fraction of the interferer that keeps this receiver out of outage.

    Evaluated at receiver ``l`` from its own view: the constraint is on the
    transmitter whose signal arrives through ``local.cross_in``. Negative
    values mean the receiver is in outage even without interference;
    ``inf`` means there is no interference link.
    """
    if local.cross_in == 0.0:
        return math.inf
    rho_bar = math.expm1(params.rho * math.log(2.0))
    return local.direct / (rho_bar * local.cross_in) - 1.0 / (params.p * local.cross_in)


def opt_outage(h: ChannelState, params: FadingParams, metric: Metric, strategy: Strategy) -> bool:
    """Whether the best full-CSI pair of ``strategy`` still misses the target."""
    rho = params.rho
    if metric is Metric.SUM_RATE:
        candidates = [TransmissionPair.power(1.0, 0.0), TransmissionPair.power(0.0, 1.0)]
        if strategy is Strategy.INTERFERENCE:
            candidates.append(TransmissionPair.power(1.0, 1.0))
        return all(report(h, c, params).sum < 2.0 * rho for c in candidates)
    if strategy is Strategy.TIME_SHARING:
        total = t_min(local_view(h, 1), params) + t_min(local_view(h, 2), params)
        return total > 1.0
    return report(h, optimal_it_pair(h, params), params).min < rho
