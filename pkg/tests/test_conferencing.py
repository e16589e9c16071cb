import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confquant.channel import ChannelState, FadingParams, LocalCsi, local_view, sample_block
from confquant.conferencing import (
    CodebookCM,
    MinRateItConference,
    MinRateTsConference,
    Round,
    Transcript,
    dq_mr_it,
    dq_mr_ts,
    dq_sr_it,
    dq_sr_ts,
    gq_candidates,
    gq_mr_it,
    sr_encoder,
    transcript_bits,
)
from confquant.rates import Metric, Strategy, TransmissionPair, opt_outage, report, t_min

UNIT = FadingParams(1.0, 1.0, 0.5)
RHO1 = FadingParams(1.0, 1.0, 1.0)


def gain_for_t_min(t, params=UNIT):
    return (2.0 ** (params.rho / t) - 1.0) / params.p


def state_for(t1, t2, params=UNIT):
    return ChannelState(gain_for_t_min(t1, params), 0.2, 0.3, gain_for_t_min(t2, params))


# -- sum rate -------------------------------------------------------------------


def test_dq_sr_it_table():
    t = dq_sr_it(ChannelState(2, 0.1, 0.1, 0.5), UNIT)
    assert t.rounds == (Round("1", "0"),) and t.decision.as_tuple() == (1.0, 0.0)
    t = dq_sr_it(ChannelState(0.5, 0, 0, 0.5), UNIT)
    assert t.rounds == (Round("0", "0"),) and t.decision.as_tuple() == (1.0, 1.0)
    assert report(ChannelState(0.5, 0, 0, 0.5), t.decision, UNIT).sum == pytest.approx(2 * math.log2(1.5))
    assert not t.declared_outage
    t = dq_sr_it(ChannelState(2, 0.1, 0.1, 3), UNIT)
    assert t.rounds == (Round("1", "1"),) and t.decision.as_tuple() == (1.0, 0.0)
    t = dq_sr_it(ChannelState(0.5, 0.1, 0.1, 3), UNIT)
    assert t.decision.as_tuple() == (0.0, 1.0)
    assert transcript_bits(t) == 2


def test_dq_sr_ts_rules():
    t = dq_sr_ts(ChannelState(0.5, 0.1, 0.1, 3), UNIT)
    assert t.decision.as_tuple() == (0.0, 1.0) and not t.declared_outage
    t = dq_sr_ts(ChannelState(0.5, 0.1, 0.1, 0.5), UNIT)
    assert t.declared_outage and t.decision.as_tuple() == (1.0, 0.0)
    t = dq_sr_ts(ChannelState(2, 0.1, 0.1, 3), UNIT)
    assert t.decision.as_tuple() == (1.0, 0.0)


def test_dq_sr_ts_matches_optimum():
    params = FadingParams(0.1, 2.0, 0.5)
    for h in sample_block(21, 0, 100_000, params).states():
        t = dq_sr_ts(h, params)
        assert t.declared_outage == opt_outage(h, params, Metric.SUM_RATE, Strategy.TIME_SHARING)
        assert t.total_bits == 2


def test_sr_encoder_threshold():
    # log2(1 + P g) >= 2 rho with P=1, rho=0.5 means g >= 1.
    assert sr_encoder(LocalCsi(1.0, 9.0), UNIT) == "1"
    assert sr_encoder(LocalCsi(0.999, 0.0), UNIT) == "0"


# -- minimum rate, time sharing -------------------------------------------------


def test_mr_ts_trace_outage_in_round_one():
    t = dq_mr_ts(state_for(0.7, 0.6), UNIT)
    assert [(r.bits_rx1, r.bits_rx2) for r in t.rounds] == [("0", "0"), ("1", "1")]
    assert t.declared_outage and t.decision.as_tuple() == (0.5, 0.5) and t.total_bits == 4


def test_mr_ts_trace_midpoint_decision():
    t = dq_mr_ts(state_for(0.3, 0.4), UNIT)
    assert [(r.bits_rx1, r.bits_rx2) for r in t.rounds] == [("0", "0"), ("0", "0")]
    assert not t.declared_outage and t.decision.as_tuple() == (0.5, 0.5) and t.total_bits == 4


def test_mr_ts_trace_four_rounds():
    t = dq_mr_ts(state_for(0.6, 0.3), UNIT)
    assert [(r.bits_rx1, r.bits_rx2) for r in t.rounds] == [("0", "0"), ("1", "0"), ("0", "1"), ("0", "0")]
    assert t.decision.as_tuple() == (0.625, 0.375)
    assert not t.declared_outage and transcript_bits(t) == 8


def test_mr_ts_round_zero_outage():
    t = dq_mr_ts(state_for(1.2, 0.2), UNIT)
    assert t.rounds == (Round("1", "0"),) and t.declared_outage and t.total_bits == 2


def test_mr_ts_cap():
    t = dq_mr_ts(state_for(0.6, 0.3), UNIT, max_rounds=2)
    assert t.terminated_by_cap and t.declared_outage and len(t.rounds) == 2
    assert t.decision.as_tuple() == (0.5, 0.5)
    with pytest.raises(ValueError):
        MinRateTsConference(state_for(0.6, 0.3), UNIT, max_rounds=0)


def test_mr_ts_step_api():
    conf = MinRateTsConference(state_for(0.6, 0.3), UNIT)
    conf.step()
    assert conf.midpoints() == (0.5, 0.5)
    conf.step()
    assert (conf.lb, conf.ub) == ([0.5, 0.0], [1.0, 0.5])
    with pytest.raises(RuntimeError):
        conf.transcript()
    conf.run()
    with pytest.raises(RuntimeError):
        conf.step()


def test_mr_ts_decision_covers_t_min():
    params = FadingParams(0.1, 10.0, 0.5)
    for h in sample_block(22, 0, 20_000, params).states():
        t = dq_mr_ts(h, params)
        if not t.declared_outage:
            t1, t2 = t_min(local_view(h, 1), params), t_min(local_view(h, 2), params)
            assert t.decision.a >= t1 and t.decision.b >= t2
            assert t.decision.a + t.decision.b == 1.0


def _digit(x, l):
    return int(math.floor(x * 2**l)) % 2


def test_round_bits_are_binary_digits():
    params = FadingParams(0.1, 10.0, 0.5)
    checked = 0
    for h in sample_block(23, 0, 5000, params).states():
        tm = (t_min(local_view(h, 1), params), t_min(local_view(h, 2), params))
        if not (tm[0] + tm[1] < 1 and all(0 < x < 1 for x in tm)):
            continue
        conf = MinRateTsConference(h, params)
        conf.step()
        l = 0
        while not conf.finished:
            rnd = conf.step()
            l += 1
            assert rnd.bits_rx1 == str(_digit(tm[0], l))
            assert rnd.bits_rx2 == str(_digit(tm[1], l))
            if not conf.finished:
                for k in range(2):
                    assert conf.lb[k] == math.floor(tm[k] * 2**l) / 2**l
        checked += 1
    assert checked > 1000


def test_locality_of_round_bits():
    # Receiver 1's bits cannot move when only receiver 2's gains change, until the
    # public bits diverge.
    params = FadingParams(0.1, 10.0, 0.5)
    h = ChannelState(0.9, 0.2, 0.3, 0.8)
    other = ChannelState(0.9, 5.0, 0.3, 0.8)
    assert MinRateTsConference(h, params).encode(1) == MinRateTsConference(other, params).encode(1)
    a = MinRateItConference(h, params, CodebookCM(4)).encode_level(1)
    b = MinRateItConference(ChannelState(0.9, 7.0, 0.3, 0.01), params, CodebookCM(4)).encode_level(1)
    assert a == b


# -- minimum rate, interference transmission ------------------------------------


def test_codebook():
    cb = CodebookCM(4)
    assert cb.levels == (0.0, 0.25, 0.5, 0.75, 1.0)
    assert cb.index_bits == 3
    assert CodebookCM(1).index_bits == 1 and CodebookCM(3).index_bits == 2
    assert cb.quantize_down(-0.1) == 0 and cb.quantize_down(0.0) == 0
    assert cb.quantize_down(0.5) == 2 and cb.quantize_down(0.4999) == 1
    assert cb.quantize_down(7.0) == 4 and cb.quantize_down(math.inf) == 4
    assert cb.decode(cb.encode(3)) == 0.75
    with pytest.raises(ValueError):
        CodebookCM(0)
    with pytest.raises(ValueError):
        cb.decode("1")


@given(st.integers(1, 40), st.floats(-2.0, 2.0))
def test_quantize_down_is_largest_level_below(m, x):
    cb = CodebookCM(m)
    i = cb.quantize_down(x)
    below = [j for j, lv in enumerate(cb.levels) if lv <= x]
    assert i == (max(below) if below else 0)


def test_mr_it_trace_round_zero_success():
    t = dq_mr_it(ChannelState(3, 1, 1, 3), RHO1, CodebookCM(1))
    assert t.rounds == (Round("1", "1"),)
    assert t.decision.as_tuple() == (1.0, 1.0) and t.total_bits == 2 and not t.declared_outage


def test_mr_it_trace_round_one():
    t = dq_mr_it(ChannelState(3, 1, 1, 0.5), RHO1, CodebookCM(1))
    assert t.rounds == (Round("1", "0"), Round("", "0"))
    assert t.decision.as_tuple() == (0.0, 1.0) and t.total_bits == 3 and t.declared_outage


def test_mr_it_bits_and_shape():
    params = FadingParams(0.1, 3.0, 0.5)
    hs = list(sample_block(24, 0, 5000, params).states())
    for m in (1, 2, 3, 4, 8, 16):
        cb = CodebookCM(m)
        bound = 2 * math.ceil(math.log2(m + 1)) + 1
        for h in hs:
            t = dq_mr_it(h, params, cb)
            assert t.total_bits <= bound <= 2 * math.log2(m + 1) + 3
            assert 1.0 in t.decision.as_tuple()
            assert t.total_bits in (cb.index_bits + 1, bound)


def test_gq_candidates_order():
    pairs = [p.as_tuple() for p in gq_candidates(CodebookCM(3))]
    assert pairs == [(1.0, 1.0), (1.0, 1 / 3), (1.0, 2 / 3), (1 / 3, 1.0), (2 / 3, 1.0)]
    assert [p.as_tuple() for p in gq_candidates(CodebookCM(1))] == [(1.0, 1.0)]


def _brute_gq(h, params, m):
    best, best_mr = None, -1.0
    pairs = [(1.0, 1.0)] + [(1.0, i / m) for i in range(1, m)] + [(i / m, 1.0) for i in range(1, m)]
    for a, b in pairs:
        p = params.p
        r1 = math.log2(1 + a * p * h.h11 / (b * p * h.h21 + 1))
        r2 = math.log2(1 + b * p * h.h22 / (a * p * h.h12 + 1))
        if min(r1, r2) > best_mr:
            best, best_mr = (a, b), min(r1, r2)
    return best


def test_gq_matches_reenumeration():
    params = FadingParams(0.1, 3.0, 0.5)
    hs = list(sample_block(25, 0, 3000, params).states()) + [ChannelState(3, 1, 1, 0.5)]
    for m in (1, 2, 5):
        for h in hs:
            assert gq_mr_it(h, params, CodebookCM(m)).as_tuple() == _brute_gq(h, params, m)


def test_gq_m2_example():
    pair = gq_mr_it(ChannelState(3, 1, 1, 0.5), UNIT, CodebookCM(2))
    values = {p.as_tuple(): report(ChannelState(3, 1, 1, 0.5), p, UNIT).min for p in gq_candidates(CodebookCM(2))}
    assert values[pair.as_tuple()] == max(values.values())


def test_outage_non_increasing_in_nested_m():
    params = FadingParams(0.1, 3.0, 0.5)
    hs = list(sample_block(26, 0, 20_000, params).states())
    counts = [sum(dq_mr_it(h, params, CodebookCM(m)).declared_outage for h in hs) for m in (1, 2, 4, 8, 16)]
    assert all(b <= a for a, b in zip(counts, counts[1:]))


# -- transcripts ----------------------------------------------------------------


def test_transcript_json_roundtrip():
    params = FadingParams(0.1, 10.0, 0.5)
    for h in itertools.islice(sample_block(27, 0, 200, params).states(), 200):
        for t in (dq_mr_ts(h, params), dq_mr_it(h, params, CodebookCM(5)), dq_sr_it(h, params)):
            back = Transcript.from_json(t.to_json())
            assert back == t and back.total_bits == t.total_bits
    d = dq_mr_ts(state_for(0.6, 0.3), UNIT).to_dict()
    assert d["rounds"][1] == ["1", "0"] and d["total_bits"] == 8
    d["total_bits"] = 9
    with pytest.raises(ValueError):
        Transcript.from_dict(d)


def test_round_rejects_non_bits():
    with pytest.raises(ValueError):
        Round("012", "")


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.text("01", max_size=5), st.text("01", max_size=5)), max_size=6), st.booleans())
def test_total_bits_is_sum_of_lengths(rounds, outage):
    t = Transcript(tuple(Round(a, b) for a, b in rounds), TransmissionPair.ts(0.5, 0.5), outage)
    assert transcript_bits(t) == sum(len(a) + len(b) for a, b in rounds)
    assert Transcript.from_json(t.to_json()) == t
