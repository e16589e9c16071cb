"""Vectorised per-trial evaluation of every scheme on a block of channel states.

Each kernel reproduces, element by element, the decision of the scalar
implementation in :mod:`confquant.rates`, :mod:`confquant.conferencing` or
:mod:`confquant.baseline`; the arithmetic is written in the same order so
that threshold comparisons agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..baseline import ConvCodebooks, conv_codebooks
from ..channel import ChannelBatch, FadingParams
from ..conferencing import DEFAULT_MAX_ROUNDS

SCHEMES = (
    "opt-sr-ts",
    "opt-sr-it",
    "opt-mr-ts",
    "opt-mr-it",
    "dq-sr-ts",
    "dq-sr-it",
    "dq-mr-ts",
    "dq-mr-it",
    "gq-mr-it",
    "conv-mr-ts",
    "conv-mr-it",
    "nofb-mr-ts",
    "nofb-mr-it",
)

# Optimum each scheme is compared against when computing a distortion.
OPTIMUM_OF = {
    "dq-sr-ts": "opt-sr-ts",
    "dq-sr-it": "opt-sr-it",
    "dq-mr-ts": "opt-mr-ts",
    "dq-mr-it": "opt-mr-it",
    "gq-mr-it": "opt-mr-it",
    "conv-mr-ts": "opt-mr-ts",
    "conv-mr-it": "opt-mr-it",
    "nofb-mr-ts": "opt-mr-ts",
    "nofb-mr-it": "opt-mr-it",
}
for _s in SCHEMES:
    OPTIMUM_OF.setdefault(_s, _s)


@dataclass(frozen=True)
class Scheme:
    """A scheme name with its knobs, resolved so it can be shipped to workers."""

    name: str
    m: int | None = None
    b_tot: int | None = None
    max_rounds: int = DEFAULT_MAX_ROUNDS
    codebooks: ConvCodebooks | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.name not in SCHEMES:
            raise ValueError(f"unknown scheme {self.name!r}; choose from {', '.join(SCHEMES)}")
        if self.name.endswith("mr-it") and self.name[:2] in ("dq", "gq"):
            if self.m is None or int(self.m) != self.m or self.m < 1:
                raise ValueError(f"{self.name} needs a positive integer M")
        if self.name.startswith("conv"):
            if self.b_tot is None or self.b_tot <= 0 or self.b_tot % 4:
                raise ValueError(f"{self.name} needs b_tot, a positive multiple of 4")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")

    @property
    def has_transcript(self) -> bool:
        return self.name.startswith(("dq", "conv", "nofb"))

    def resolved(self, eps: float, codebook_seed: int = 0) -> "Scheme":
        if self.name.startswith("conv") and self.codebooks is None:
            cbs = conv_codebooks(self.b_tot, eps, codebook_seed)
            return Scheme(self.name, self.m, self.b_tot, self.max_rounds, cbs)
        return self

    def label(self) -> str:
        if self.name.startswith(("dq-mr-it", "gq")):
            return f"{self.name}[M={self.m}]"
        if self.name.startswith("conv"):
            return f"{self.name}[B={self.b_tot}]"
        if self.name == "dq-mr-ts":
            return f"{self.name}[rounds<={self.max_rounds}]"
        return self.name


@dataclass
class KernelResult:
    outage: np.ndarray
    bits: np.ndarray | None = None
    capped: np.ndarray | None = None


# -- rate primitives -----------------------------------------------------------


def _log2_1p(x):
    return np.log2(1.0 + x)


def rate_it(p_self, p_other, p, direct, cross):
    return _log2_1p(p_self * p * direct / (p_other * p * cross + 1.0))


def min_rate_it(a, b, p, h: ChannelBatch):
    r1 = rate_it(a, b, p, h.h11, h.h21)
    r2 = rate_it(b, a, p, h.h22, h.h12)
    return np.minimum(r1, r2)


def t_min(direct, params: FadingParams):
    cap = _log2_1p(params.p * direct)
    with np.errstate(divide="ignore"):
        return np.where(cap == 0.0, np.inf, params.rho / cap)


def p_max(direct, cross_in, params: FadingParams):
    rho_bar = math.expm1(params.rho * math.log(2.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        v = direct / (rho_bar * cross_in) - 1.0 / (params.p * cross_in)
    return np.where(cross_in == 0.0, np.inf, v)


def _equal_rate_root(p, hxx, hxy, hyx, hyy):
    # Same operation order as the scalar root in ``rates``.
    c = p * hyx + 1.0
    a = 4.0 * p * hxy * hyy * c / hxx
    return 2.0 * hyy * c / (hxx * (np.sqrt(1.0 + a) + 1.0))


def optimal_it_pair(h11, h12, h21, h22, p):
    """Arrays ``(p1, p2)`` of the max-min optimal power pair."""
    sinr1 = p * h11 / (p * h21 + 1.0)
    sinr2 = p * h22 / (p * h12 + 1.0)
    first = sinr1 >= sinr2
    with np.errstate(divide="ignore", invalid="ignore"):
        root1 = _equal_rate_root(p, h11, h12, h21, h22)
        root2 = _equal_rate_root(p, h22, h21, h12, h11)
    deg1 = (h12 == 0.0) | (h11 == 0.0)
    deg2 = (h21 == 0.0) | (h22 == 0.0)
    p1 = np.where(first, np.where(deg1, 1.0, np.minimum(root1, 1.0)), 1.0)
    p2 = np.where(first, 1.0, np.where(deg2, 1.0, np.minimum(root2, 1.0)))
    return p1, p2


def quantize_down(x, m: int):
    """Vector form of :meth:`CodebookCM.quantize_down`."""
    with np.errstate(invalid="ignore"):
        i = np.floor(np.where(x > 0, np.minimum(x, 1.0), 0.0) * m).astype(np.int64)
    i = np.clip(i, 0, m)
    i = np.where((i > 0) & (i / m > x), i - 1, i)
    i = np.where((i < m) & ((i + 1) / m <= x), i + 1, i)
    i = np.where(x >= 1.0, m, np.where(x > 0, i, 0))
    return i


def quantize_gain(levels: np.ndarray, thresholds: np.ndarray, x):
    return levels[np.searchsorted(thresholds, x, side="right")]


# -- schemes -------------------------------------------------------------------


def _opt_sr(h, params, interference: bool):
    two_rho = 2.0 * params.rho
    out = (_log2_1p(params.p * h.h11) < two_rho) & (_log2_1p(params.p * h.h22) < two_rho)
    if interference:
        sr11 = rate_it(1.0, 1.0, params.p, h.h11, h.h21) + rate_it(1.0, 1.0, params.p, h.h22, h.h12)
        out &= sr11 < two_rho
    return out


def _opt_mr_ts(h, params):
    return t_min(h.h11, params) + t_min(h.h22, params) > 1.0


def _opt_mr_it(h, params):
    p1, p2 = optimal_it_pair(h.h11, h.h12, h.h21, h.h22, params.p)
    return min_rate_it(p1, p2, params.p, h) < params.rho


def _sr_bits(h, params):
    two_rho = 2.0 * params.rho
    return _log2_1p(params.p * h.h11) >= two_rho, _log2_1p(params.p * h.h22) >= two_rho


def _dq_sr_it(h, params):
    b1, b2 = _sr_bits(h, params)
    a = np.where(b1 | ~b2, 1.0, 0.0)
    b = np.where(b1, 0.0, 1.0)
    sr = rate_it(a, b, params.p, h.h11, h.h21) + rate_it(b, a, params.p, h.h22, h.h12)
    return KernelResult(sr < 2.0 * params.rho, np.full(len(h), 2, dtype=np.int64))


def _dq_sr_ts(h, params):
    b1, b2 = _sr_bits(h, params)
    return KernelResult(~b1 & ~b2, np.full(len(h), 2, dtype=np.int64))


def _dq_mr_ts(h, params, max_rounds: int):
    n = len(h)
    t1 = t_min(h.h11, params)
    t2 = t_min(h.h22, params)
    outage = (t1 >= 1.0) | (t2 >= 1.0)
    rounds = np.ones(n, dtype=np.int64)
    capped = np.zeros(n, dtype=bool)
    active = np.flatnonzero(~outage)
    lb1 = np.zeros(len(active))
    ub1 = np.ones(len(active))
    lb2 = np.zeros(len(active))
    ub2 = np.ones(len(active))
    r = 1
    while active.size:
        if r >= max_rounds:
            capped[active] = True
            outage[active] = True
            break
        m1 = (lb1 + ub1) / 2.0
        m2 = (lb2 + ub2) / 2.0
        a1 = t1[active] >= m1
        a2 = t2[active] >= m2
        rounds[active] += 1
        both = a1 & a2
        outage[active[both]] = True
        keep = a1 != a2
        lb1 = np.where(a1, m1, lb1)[keep]
        ub1 = np.where(a1, ub1, m1)[keep]
        lb2 = np.where(a2, m2, lb2)[keep]
        ub2 = np.where(a2, ub2, m2)[keep]
        active = active[keep]
        r += 1
    return KernelResult(outage, 2 * rounds, capped)


def _dq_mr_it(h, params, m: int):
    nbits = math.ceil(math.log2(m + 1))
    q = quantize_down(p_max(h.h11, h.h21, params), m) / m
    check = rate_it(q, 1.0, params.p, h.h22, h.h12) >= params.rho
    q2 = quantize_down(p_max(h.h22, h.h12, params), m) / m
    a = np.where(check, 1.0, q2)
    b = np.where(check, q, 1.0)
    outage = min_rate_it(a, b, params.p, h) < params.rho
    bits = np.where(check, nbits + 1, 2 * nbits + 1).astype(np.int64)
    return KernelResult(outage, bits)


def _gq_mr_it(h, params, m: int):
    best = min_rate_it(1.0, 1.0, params.p, h)
    for i in range(1, m):
        x = i / m
        best = np.maximum(best, min_rate_it(1.0, x, params.p, h))
        best = np.maximum(best, min_rate_it(x, 1.0, params.p, h))
    return best < params.rho


def _conv(h, params, codebooks: ConvCodebooks, b_tot: int, interference: bool):
    dl, dt = np.asarray(codebooks.direct.levels), np.asarray(codebooks.direct.thresholds)
    cl, ct = np.asarray(codebooks.cross.levels), np.asarray(codebooks.cross.thresholds)
    g11 = quantize_gain(dl, dt, h.h11)
    g22 = quantize_gain(dl, dt, h.h22)
    bits = np.full(len(h), b_tot, dtype=np.int64)
    if interference:
        g12 = quantize_gain(cl, ct, h.h12)
        g21 = quantize_gain(cl, ct, h.h21)
        p1, p2 = optimal_it_pair(g11, g12, g21, g22, params.p)
        return KernelResult(min_rate_it(p1, p2, params.p, h) < params.rho, bits)
    l1 = _log2_1p(params.p * g11)
    l2 = _log2_1p(params.p * g22)
    t1 = l2 / (l1 + l2)
    r1 = t1 * _log2_1p(params.p * h.h11)
    r2 = (1.0 - t1) * _log2_1p(params.p * h.h22)
    return KernelResult(np.minimum(r1, r2) < params.rho, bits)


def evaluate(scheme: Scheme, h: ChannelBatch, params: FadingParams) -> KernelResult:
    """Per-trial outage indicators (and feedback bits where defined)."""
    name = scheme.name
    n = len(h)
    if name == "opt-sr-ts":
        return KernelResult(_opt_sr(h, params, False))
    if name == "opt-sr-it":
        return KernelResult(_opt_sr(h, params, True))
    if name == "opt-mr-ts":
        return KernelResult(_opt_mr_ts(h, params))
    if name == "opt-mr-it":
        return KernelResult(_opt_mr_it(h, params))
    if name == "dq-sr-ts":
        return _dq_sr_ts(h, params)
    if name == "dq-sr-it":
        return _dq_sr_it(h, params)
    if name == "dq-mr-ts":
        return _dq_mr_ts(h, params, scheme.max_rounds)
    if name == "dq-mr-it":
        return _dq_mr_it(h, params, scheme.m)
    if name == "gq-mr-it":
        return KernelResult(_gq_mr_it(h, params, scheme.m))
    if name in ("conv-mr-ts", "conv-mr-it"):
        if scheme.codebooks is None:
            raise ValueError("conventional scheme used before its codebooks were resolved")
        return _conv(h, params, scheme.codebooks, scheme.b_tot, name.endswith("it"))
    if name == "nofb-mr-ts":
        r1 = 0.5 * _log2_1p(params.p * h.h11)
        r2 = 0.5 * _log2_1p(params.p * h.h22)
        return KernelResult(np.minimum(r1, r2) < params.rho, np.zeros(n, dtype=np.int64))
    if name == "nofb-mr-it":
        return KernelResult(min_rate_it(1.0, 1.0, params.p, h) < params.rho, np.zeros(n, dtype=np.int64))
    raise ValueError(f"unknown scheme {name!r}")
