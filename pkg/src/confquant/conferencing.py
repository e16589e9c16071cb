"""Conferencing quantizers: receivers exchange feedback bits over rounds.

Every encoder in this module receives a :class:`~confquant.channel.LocalCsi`
and never a full channel state, so an encoder output can only depend on the
receiver's own gains, the system parameters, and the public bits exchanged
so far. The decoder side of each protocol sees only those public bits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .channel import ChannelState, FadingParams, LocalCsi, local_view
from .rates import PairKind, TransmissionPair, p_max, rate_it, report, t_min

__all__ = [
    "Round",
    "Transcript",
    "CodebookCM",
    "DEFAULT_MAX_ROUNDS",
    "sr_encoder",
    "dq_sr_it",
    "dq_sr_ts",
    "MinRateTsConference",
    "dq_mr_ts",
    "MinRateItConference",
    "dq_mr_it",
    "gq_candidates",
    "gq_mr_it",
    "transcript_bits",
]

DEFAULT_MAX_ROUNDS = 64


def _bit(flag: bool) -> str:
    return "1" if flag else "0"


@dataclass(frozen=True)
class Round:
    bits_rx1: str
    bits_rx2: str

    def __post_init__(self):
        for bits in (self.bits_rx1, self.bits_rx2):
            if set(bits) - {"0", "1"}:
                raise ValueError(f"not a bit string: {bits!r}")

    @property
    def nbits(self) -> int:
        return len(self.bits_rx1) + len(self.bits_rx2)


@dataclass(frozen=True)
class Transcript:
    """Public record of one protocol execution."""

    rounds: tuple[Round, ...]
    decision: TransmissionPair
    declared_outage: bool
    terminated_by_cap: bool = False

    @property
    def total_bits(self) -> int:
        return sum(r.nbits for r in self.rounds)

    def to_dict(self) -> dict:
        return {
            "rounds": [[r.bits_rx1, r.bits_rx2] for r in self.rounds],
            "total_bits": self.total_bits,
            "decision": {
                "kind": self.decision.kind.value,
                "a": self.decision.a,
                "b": self.decision.b,
                "degenerate": self.decision.degenerate,
            },
            "declared_outage": self.declared_outage,
            "terminated_by_cap": self.terminated_by_cap,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Transcript":
        rounds = tuple(Round(a, b) for a, b in d["rounds"])
        dec = d["decision"]
        decision = TransmissionPair(
            float(dec["a"]), float(dec["b"]), PairKind(dec["kind"]), bool(dec.get("degenerate", False))
        )
        t = cls(rounds, decision, bool(d["declared_outage"]), bool(d.get("terminated_by_cap", False)))
        if "total_bits" in d and d["total_bits"] != t.total_bits:
            raise ValueError("total_bits does not match the recorded rounds")
        return t

    @classmethod
    def from_json(cls, text: str) -> "Transcript":
        return cls.from_dict(json.loads(text))


def transcript_bits(t: Transcript) -> int:
    return t.total_bits


@dataclass(frozen=True)
class CodebookCM:
    """Uniform power codebook ``{0, 1/M, ..., 1}`` with fixed-length indices."""

    m: int
    levels: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"M must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "levels", tuple(i / self.m for i in range(self.m + 1)))

    @property
    def index_bits(self) -> int:
        return math.ceil(math.log2(self.m + 1))

    def quantize_down(self, x: float) -> int:
        """Index of the largest level not exceeding ``x`` (0 when ``x <= 0``)."""
        if not x > 0:
            return 0
        if x >= 1.0:
            return self.m
        i = min(int(math.floor(x * self.m)), self.m)
        # Guard the float product against off-by-one at exact multiples of 1/M.
        while i > 0 and self.levels[i] > x:
            i -= 1
        while i < self.m and self.levels[i + 1] <= x:
            i += 1
        return i

    def encode(self, index: int) -> str:
        return format(index, f"0{self.index_bits}b")

    def decode(self, bits: str) -> float:
        if len(bits) != self.index_bits:
            raise ValueError(f"expected {self.index_bits} bits, got {len(bits)}")
        return self.levels[int(bits, 2)]


# -- sum rate ----------------------------------------------------------------


def sr_encoder(local: LocalCsi, params: FadingParams) -> str:
    """One bit: can this receiver alone reach ``2*rho`` with the whole block."""
    return _bit(math.log2(1.0 + params.p * local.direct) >= 2.0 * params.rho)


def _sr_bits(h: ChannelState, params: FadingParams) -> Round:
    return Round(sr_encoder(local_view(h, 1), params), sr_encoder(local_view(h, 2), params))


def dq_sr_it(h: ChannelState, params: FadingParams) -> Transcript:
    """Two-bit quantizer reaching the optimal sum-rate outage, interference transmission."""
    rnd = _sr_bits(h, params)
    b1, b2 = rnd.bits_rx1, rnd.bits_rx2
    if b1 == "1":
        pair = TransmissionPair.power(1.0, 0.0)
    elif b2 == "1":
        pair = TransmissionPair.power(0.0, 1.0)
    else:
        pair = TransmissionPair.power(1.0, 1.0)
    outage = report(h, pair, params).sum < 2.0 * params.rho
    return Transcript((rnd,), pair, outage)


def dq_sr_ts(h: ChannelState, params: FadingParams) -> Transcript:
    """Time-sharing counterpart of :func:`dq_sr_it`, one bit per receiver."""
    rnd = _sr_bits(h, params)
    if rnd.bits_rx1 == "1":
        return Transcript((rnd,), TransmissionPair.ts(1.0, 0.0), False)
    if rnd.bits_rx2 == "1":
        return Transcript((rnd,), TransmissionPair.ts(0.0, 1.0), False)
    return Transcript((rnd,), TransmissionPair.ts(1.0, 0.0), True)


# -- minimum rate, time sharing ------------------------------------------------


class MinRateTsConference:
    """Bisection conferencing on the two minimum time shares.

    Round 0 checks ``t_min >= 1`` at each receiver. Every later round each
    receiver compares its ``t_min`` against the midpoint of its public
    interval ``[lb, ub]``; the pair of bits either ends the protocol or
    moves one interval up and the other down.

    Use :meth:`step` to advance one round at a time, or :meth:`run`.
    """

    def __init__(self, h: ChannelState, params: FadingParams, max_rounds: int = DEFAULT_MAX_ROUNDS):
        if max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")
        self.params = params
        self.max_rounds = int(max_rounds)
        self._locals = (local_view(h, 1), local_view(h, 2))
        self.lb = [0.0, 0.0]
        self.ub = [1.0, 1.0]
        self.rounds: list[Round] = []
        self.decision: TransmissionPair | None = None
        self.declared_outage = False
        self.terminated_by_cap = False

    @property
    def finished(self) -> bool:
        return self.decision is not None

    @property
    def round_index(self) -> int:
        return len(self.rounds)

    def midpoints(self) -> tuple[float, float]:
        return ((self.lb[0] + self.ub[0]) / 2.0, (self.lb[1] + self.ub[1]) / 2.0)

    def encode(self, receiver: int) -> str:
        """Bit that ``receiver`` (1 or 2) sends in the current round."""
        local = self._locals[receiver - 1]
        tk = t_min(local, self.params)
        if self.round_index == 0:
            return _bit(tk >= 1.0)
        return _bit(tk >= self.midpoints()[receiver - 1])

    def _finish(self, pair: TransmissionPair, outage: bool, capped: bool = False):
        self.decision = pair
        self.declared_outage = outage
        self.terminated_by_cap = capped

    def step(self) -> Round:
        if self.finished:
            raise RuntimeError("protocol already terminated")
        rnd = Round(self.encode(1), self.encode(2))
        self.rounds.append(rnd)
        bits = (rnd.bits_rx1, rnd.bits_rx2)
        if len(self.rounds) == 1:
            if "1" in bits:
                self._finish(TransmissionPair.ts(0.5, 0.5), True)
        elif bits == ("1", "1"):
            self._finish(TransmissionPair.ts(0.5, 0.5), True)
        elif bits == ("0", "0"):
            m1, m2 = self.midpoints()
            self._finish(TransmissionPair.ts(m1, m2), False)
        else:
            mids = self.midpoints()
            for k, b in enumerate(bits):
                if b == "1":
                    self.lb[k] = mids[k]
                else:
                    self.ub[k] = mids[k]
        if not self.finished and len(self.rounds) >= self.max_rounds:
            self._finish(TransmissionPair.ts(0.5, 0.5), True, capped=True)
        return rnd

    def run(self) -> Transcript:
        while not self.finished:
            self.step()
        return self.transcript()

    def transcript(self) -> Transcript:
        if not self.finished:
            raise RuntimeError("protocol still running")
        return Transcript(tuple(self.rounds), self.decision, self.declared_outage, self.terminated_by_cap)


def dq_mr_ts(h: ChannelState, params: FadingParams, max_rounds: int = DEFAULT_MAX_ROUNDS) -> Transcript:
    return MinRateTsConference(h, params, max_rounds).run()


# -- minimum rate, interference transmission ---------------------------------------


class MinRateItConference:
    """At most two rounds: each receiver reports the interferer power it tolerates.

    Round 0: receiver 1 quantizes the largest power of transmitter 2 that
    keeps receiver 1 out of outage; receiver 2 answers with one bit telling
    whether that power level is enough for itself. If not, round 1 repeats
    the exchange with the roles swapped, without the answer bit.
    """

    def __init__(self, h: ChannelState, params: FadingParams, codebook: CodebookCM):
        self.params = params
        self.codebook = codebook
        self._locals = (local_view(h, 1), local_view(h, 2))
        self._h = h
        self.rounds: list[Round] = []
        self.decision: TransmissionPair | None = None

    @property
    def finished(self) -> bool:
        return self.decision is not None

    def encode_level(self, receiver: int) -> str:
        """Fixed-length index of the tolerated interferer power at ``receiver``."""
        tolerated = p_max(self._locals[receiver - 1], self.params)
        return self.codebook.encode(self.codebook.quantize_down(tolerated))

    def encode_check(self, p2: float) -> str:
        """Receiver 2's answer: does power ``p2`` against a full-power interferer reach ``rho``."""
        local = self._locals[1]
        return _bit(rate_it(p2, 1.0, self.params, local.direct, local.cross_in) >= self.params.rho)

    def step(self) -> Round:
        if self.finished:
            raise RuntimeError("protocol already terminated")
        if not self.rounds:
            bits1 = self.encode_level(1)
            q = self.codebook.decode(bits1)
            check = self.encode_check(q)
            rnd = Round(bits1, check)
            if check == "1":
                self.decision = TransmissionPair.power(1.0, q)
        else:
            bits2 = self.encode_level(2)
            rnd = Round("", bits2)
            self.decision = TransmissionPair.power(self.codebook.decode(bits2), 1.0)
        self.rounds.append(rnd)
        return rnd

    def run(self) -> Transcript:
        while not self.finished:
            self.step()
        return self.transcript()

    def transcript(self) -> Transcript:
        if not self.finished:
            raise RuntimeError("protocol still running")
        outage = report(self._h, self.decision, self.params).min < self.params.rho
        return Transcript(tuple(self.rounds), self.decision, outage)


def dq_mr_it(h: ChannelState, params: FadingParams, codebook: CodebookCM) -> Transcript:
    return MinRateItConference(h, params, codebook).run()


def gq_candidates(codebook: CodebookCM) -> list[TransmissionPair]:
    """Pairs searched by the global quantizer, in tie-breaking order."""
    m = codebook.m
    out = [TransmissionPair.power(1.0, 1.0)]
    out += [TransmissionPair.power(1.0, i / m) for i in range(1, m)]
    out += [TransmissionPair.power(i / m, 1.0) for i in range(1, m)]
    return out


def gq_mr_it(h: ChannelState, params: FadingParams, codebook: CodebookCM) -> TransmissionPair:
    """Full-CSI quantizer: best minimum rate over the uniform pair codebook."""
    best, best_mr = None, -math.inf
    for pair in gq_candidates(codebook):
        mr = report(h, pair, params).min
        if mr > best_mr:
            best, best_mr = pair, mr
    return best
