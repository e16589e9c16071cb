"""Vectorised scheme kernels against the scalar protocol implementations."""

import numpy as np
import pytest

from confquant.baseline import conv_codebooks, dq_conv, no_feedback_pair
from confquant.channel import FadingParams, sample_block
from confquant.conferencing import CodebookCM, dq_mr_it, dq_mr_ts, dq_sr_it, dq_sr_ts, gq_mr_it
from confquant.montecarlo import SCHEMES, Scheme, evaluate
from confquant.rates import Metric, Strategy, opt_outage, report

N = 4000


def scalar(scheme, h, params):
    """(outage, bits, capped) from the scalar code path."""
    rho = params.rho
    name = scheme.name
    if name.startswith("opt"):
        metric = Metric.SUM_RATE if "-sr-" in name else Metric.MIN_RATE
        strategy = Strategy.TIME_SHARING if name.endswith("ts") else Strategy.INTERFERENCE
        return opt_outage(h, params, metric, strategy), None, None
    if name in ("dq-sr-it", "dq-sr-ts", "dq-mr-ts", "dq-mr-it"):
        t = {
            "dq-sr-it": lambda: dq_sr_it(h, params),
            "dq-sr-ts": lambda: dq_sr_ts(h, params),
            "dq-mr-ts": lambda: dq_mr_ts(h, params, scheme.max_rounds),
            "dq-mr-it": lambda: dq_mr_it(h, params, CodebookCM(scheme.m)),
        }[name]()
        return t.declared_outage, t.total_bits, t.terminated_by_cap
    if name == "gq-mr-it":
        return report(h, gq_mr_it(h, params, CodebookCM(scheme.m)), params).min < rho, None, None
    strategy = Strategy.TIME_SHARING if name.endswith("ts") else Strategy.INTERFERENCE
    if name.startswith("conv"):
        pair, bits = dq_conv(h, params, strategy, scheme.b_tot, scheme.codebooks)
        return report(h, pair, params).min < rho, bits, None
    return report(h, no_feedback_pair(strategy), params).min < rho, 0, None


def schemes_under_test(eps):
    out = []
    for name in SCHEMES:
        if name in ("dq-mr-it", "gq-mr-it"):
            out += [Scheme(name, m=m) for m in (1, 3, 4, 16)]
        elif name.startswith("conv"):
            out += [Scheme(name, b_tot=b).resolved(eps) for b in (4, 8, 16)]
        elif name == "dq-mr-ts":
            out += [Scheme(name), Scheme(name, max_rounds=3)]
        else:
            out.append(Scheme(name))
    return out


@pytest.mark.parametrize("eps,p_db", [(0.1, -5.0), (0.1, 5.0), (1.0, 12.0), (0.01, 30.0)])
def test_kernels_match_scalar(eps, p_db):
    params = FadingParams.from_db(eps, p_db, 0.5)
    batch = sample_block(31, 0, N, params)
    states = list(batch.states())
    for scheme in schemes_under_test(eps):
        res = evaluate(scheme, batch, params)
        ref = [scalar(scheme, h, params) for h in states]
        assert np.array_equal(res.outage, [r[0] for r in ref]), scheme.label()
        if ref[0][1] is not None:
            assert np.array_equal(res.bits, [r[1] for r in ref]), scheme.label()
        if scheme.name == "dq-mr-ts":
            assert np.array_equal(res.capped, [r[2] for r in ref]), scheme.label()


def test_unresolved_conv_scheme_rejected():
    params = FadingParams(0.1, 1.0, 0.5)
    with pytest.raises(ValueError):
        evaluate(Scheme("conv-mr-ts", b_tot=8), sample_block(0, 0, 4, params), params)


@pytest.mark.parametrize("kw", [dict(name="dq-mr-it"), dict(name="conv-mr-ts", b_tot=6), dict(name="nope")])
def test_scheme_validation(kw):
    with pytest.raises(ValueError):
        Scheme(**kw)
