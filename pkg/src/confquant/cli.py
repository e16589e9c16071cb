"""Command-line driver for the figure experiments and ad-hoc sweeps.

Each subcommand writes one table, as CSV with ``#``-prefixed metadata
lines or as a JSON document ``{"meta": ..., "rows": [...]}``. The metadata
holds every setting that influences the numbers (and nothing that does not,
so the worker count is deliberately absent).

Exit codes: 0 success, 2 configuration error, 3 some point undersampled.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path
from typing import Sequence

from . import __version__
from .channel import FadingParams, db_to_linear
from .montecarlo.engine import (
    DEFAULT_BLOCK,
    RunConfig,
    estimate_distortion,
    estimate_fr,
    estimate_outage,
    find_p_th,
    paired_difference,
    run_tally,
)
from .montecarlo.kernels import OPTIMUM_OF, SCHEMES, Scheme

log = logging.getLogger("confquant")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNDERSAMPLED = 3

FIGURES = ("fig1", "fig2", "fig3", "fig4", "custom")

# Crossing points read off the outage curves; fig3/fig4 default to 5 dB below.
REFERENCE_P_TH_DB = {1.0: 2.0, 0.5: 5.0, 0.1: 12.0, 0.01: 25.0}
FIG3_BACKOFF_DB = 5.0

FIG1_COLUMNS = [
    "row", "eps", "p_db", "out_ts_opt", "out_ts_se", "out_it_opt", "out_it_se",
    "diff", "diff_se", "trials", "undersampled", "p_th_db", "boundary",
]
FIG2_COLUMNS = [
    "eps", "p_db", "out_dq", "out_dq_se", "out_conv", "out_conv_se", "out_nofb", "out_nofb_se",
    "out_opt", "b_tot", "fr_dq", "fr_dq_se", "cap_hits", "trials", "undersampled",
]
FIG3_COLUMNS = [
    "eps", "p_db", "m", "b_tot", "dist_dq", "dist_dq_se", "dist_conv", "dist_conv_se",
    "dist_nofb", "dist_nofb_se", "out_opt", "fr_dq", "trials", "undersampled",
]
CUSTOM_COLUMNS = [
    "scheme", "metric", "eps", "p_db", "rho", "m", "b_tot", "seed",
    "value", "std_err", "trials", "events", "undersampled",
]


class ConfigError(ValueError):
    pass


def conv_budget(m: int) -> int:
    """Bits given to the conventional quantizer when compared at codebook size ``m``."""
    return 4 * math.ceil((2.0 * math.log2(m + 1) + 3.0) / 4.0)


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    figure: str
    p_db: tuple[float, ...] = ()
    eps: tuple[float, ...] = ()
    m: tuple[int, ...] = ()
    b_tot: tuple[int, ...] = ()
    seeds: tuple[int, ...] = ()
    rho: float = 0.5
    scheme: str | None = None
    metric: str = "outage"
    template: RunConfig = field(
        default_factory=lambda: RunConfig(FadingParams(1.0, 1.0, 0.5), "opt-mr-ts")
    )
    out: str | None = None
    fmt: str = "csv"

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise ConfigError(f"unknown figure {self.figure!r}")
        if self.fmt not in ("csv", "json"):
            raise ConfigError("output format must be csv or json")
        if not self.eps:
            raise ConfigError("the eps sweep is empty")
        if any(e <= 0 for e in self.eps) or self.rho <= 0:
            raise ConfigError("eps and rho must be positive")
        if self.figure in ("fig1", "fig2", "custom") and not self.p_db:
            raise ConfigError("the P sweep is empty")
        if self.figure in ("fig3", "fig4", "custom") and self.m == () and self._needs_m():
            raise ConfigError("the M sweep is empty")
        if any(int(x) != x or x < 1 for x in self.m):
            raise ConfigError("M values must be positive integers")
        if any(b <= 0 or b % 4 for b in self.b_tot):
            raise ConfigError("b_tot values must be positive multiples of 4")
        if self.figure == "custom":
            self._check_custom()

    def _needs_m(self) -> bool:
        if self.figure != "custom":
            return True
        return self.scheme in ("dq-mr-it", "gq-mr-it")

    def _check_custom(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.metric not in ("outage", "fr", "distortion"):
            raise ConfigError(f"unknown metric {self.metric!r}")
        if not self.seeds:
            raise ConfigError("the seed sweep is empty")
        if self.scheme.startswith("conv") and not self.b_tot:
            raise ConfigError(f"{self.scheme} needs a b_tot sweep")
        if self.b_tot and not self.scheme.startswith("conv"):
            raise ConfigError(f"b_tot does not apply to {self.scheme}")
        if self.m and not self._needs_m():
            raise ConfigError(f"M does not apply to {self.scheme}")
        if self.metric == "fr" and not Scheme(self.scheme, 1, 4).has_transcript:
            raise ConfigError(f"{self.scheme} has no feedback transcript")
        if self.metric == "distortion" and OPTIMUM_OF[self.scheme] == self.scheme:
            raise ConfigError(f"{self.scheme} is itself an optimum")

    def point(self, eps: float, p_db: float, **overrides) -> RunConfig:
        params = FadingParams(eps, float(db_to_linear(p_db)), self.rho)
        return replace(self.template, params=params, **overrides)

    def meta(self) -> dict:
        t = self.template
        meta = {
            "name": self.name,
            "figure": self.figure,
            "version": __version__,
            "rho": self.rho,
            "eps": list(self.eps),
            "p_db": list(self.p_db),
            "m": list(self.m),
            "b_tot": list(self.b_tot),
            "seed": t.master_seed,
            "trials": t.trials,
            "min_outage_events": t.min_outage_events,
            "max_trials": t.max_trials,
            "max_rounds": t.max_rounds,
            "block_size": t.block_size,
            "codebook_seed": t.codebook_seed,
        }
        if self.figure == "custom":
            meta.update(scheme=self.scheme, metric=self.metric, seeds=list(self.seeds))
        return meta


@dataclass
class Table:
    columns: list[str]
    rows: list[dict]
    meta: dict

    @property
    def undersampled(self) -> bool:
        return any(r.get("undersampled") for r in self.rows)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(table: Table, fmt: str) -> str:
    if fmt == "json":
        return json.dumps({"meta": table.meta, "rows": table.rows}, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    for key, value in table.meta.items():
        buf.write(f"# {key}: {json.dumps(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_fmt(row.get(c)) for c in table.columns])
    return buf.getvalue()


def write_table(table: Table, out: str | None, fmt: str) -> None:
    text = render(table, fmt)
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# -- figure runners --------------------------------------------------------------


def run_fig1(spec: ExperimentSpec) -> Table:
    rows = []
    for eps in spec.eps:
        res = find_p_th(eps, spec.rho, spec.p_db, spec.point(eps, spec.p_db[0]))
        for pt in res.points:
            rows.append({
                "row": "point", "eps": eps, "p_db": pt.p_db,
                "out_ts_opt": pt.out_ts.value, "out_ts_se": pt.out_ts.std_err,
                "out_it_opt": pt.out_it.value, "out_it_se": pt.out_it.std_err,
                "diff": pt.diff, "diff_se": pt.diff_se, "trials": pt.out_ts.trials,
                "undersampled": pt.out_ts.undersampled,
            })
        rows.append({
            "row": "p_th", "eps": eps, "p_th_db": res.p_th_db, "boundary": res.boundary,
            "undersampled": res.undersampled,
        })
    return Table(FIG1_COLUMNS, rows, spec.meta())


def _stop_on(index: int, min_events: int):
    return lambda t: t.events(index) >= min_events


def run_fig2(spec: ExperimentSpec) -> Table:
    b_tot = spec.b_tot[0] if spec.b_tot else 16
    rows = []
    for eps, p_db in product(spec.eps, spec.p_db):
        cfg = spec.point(eps, p_db)
        schemes = [
            Scheme("dq-mr-ts", max_rounds=cfg.max_rounds),
            Scheme("conv-mr-ts", b_tot=b_tot),
            Scheme("nofb-mr-ts"),
            Scheme("opt-mr-ts"),
        ]
        tally, met = run_tally(
            cfg.params, cfg.master_seed, schemes, cfg.max_trials,
            _stop_on(0, cfg.min_outage_events), cfg.block_size, cfg.workers, cfg.codebook_seed,
        )
        n = tally.trials
        fr = estimate_fr(cfg.with_scheme("dq-mr-ts"))
        row = {"eps": eps, "p_db": p_db, "b_tot": b_tot, "trials": n, "undersampled": not met}
        for key, i in (("out_dq", 0), ("out_conv", 1), ("out_nofb", 2)):
            v = tally.events(i) / n
            row[key] = v
            row[key + "_se"] = math.sqrt(v * (1 - v) / n)
        row["out_opt"] = tally.events(3) / n
        row["cap_hits"] = tally.caps[0]
        row["fr_dq"], row["fr_dq_se"] = fr.value, fr.std_err
        rows.append(row)
    meta = spec.meta()
    meta["b_tot_conv"] = b_tot
    return Table(FIG2_COLUMNS, rows, meta)


def fig3_p_db(spec: ExperimentSpec, eps: float) -> list[float]:
    if spec.p_db:
        return list(spec.p_db)
    if eps not in REFERENCE_P_TH_DB:
        raise ConfigError(f"no default P for eps={eps}; pass --p-db")
    return [REFERENCE_P_TH_DB[eps] - FIG3_BACKOFF_DB]


def run_fig3_fig4(spec: ExperimentSpec) -> Table:
    rows = []
    for eps in spec.eps:
        for p_db, m in product(fig3_p_db(spec, eps), spec.m):
            cfg = spec.point(eps, p_db)
            b_tot = conv_budget(m)
            schemes = [
                Scheme("dq-mr-it", m=m),
                Scheme("conv-mr-it", b_tot=b_tot),
                Scheme("nofb-mr-it"),
                Scheme("opt-mr-it"),
            ]
            tally, met = run_tally(
                cfg.params, cfg.master_seed, schemes, cfg.max_trials,
                _stop_on(0, cfg.min_outage_events), cfg.block_size, cfg.workers, cfg.codebook_seed,
            )
            n = tally.trials
            row = {"eps": eps, "p_db": p_db, "m": m, "b_tot": b_tot, "trials": n, "undersampled": not met}
            for key, i in (("dist_dq", 0), ("dist_conv", 1), ("dist_nofb", 2)):
                row[key], row[key + "_se"] = paired_difference(tally, i, 3)
            row["out_opt"] = tally.events(3) / n
            row["fr_dq"] = tally.bits_sum[0] / n
            rows.append(row)
    meta = spec.meta()
    meta["p_db_default_rule"] = f"P_th - {FIG3_BACKOFF_DB} dB" if not spec.p_db else None
    meta["p_th_db_reference"] = {str(k): v for k, v in REFERENCE_P_TH_DB.items()}
    return Table(FIG3_COLUMNS, rows, meta)


def run_custom(spec: ExperimentSpec) -> Table:
    rows = []
    ms = spec.m or (None,)
    bs = spec.b_tot or (None,)
    for eps, p_db, m, b_tot, seed in product(spec.eps, spec.p_db, ms, bs, spec.seeds):
        cfg = spec.point(eps, p_db, scheme=spec.scheme, m=m, b_tot=b_tot, master_seed=seed)
        if spec.metric == "outage":
            est = estimate_outage(cfg)
        elif spec.metric == "fr":
            est = estimate_fr(cfg)
        else:
            est = estimate_distortion(cfg)
        rows.append({
            "scheme": spec.scheme, "metric": spec.metric, "eps": eps, "p_db": p_db,
            "rho": spec.rho, "m": m, "b_tot": b_tot, "seed": seed, "value": est.value,
            "std_err": est.std_err, "trials": est.trials, "events": est.events,
            "undersampled": est.undersampled,
        })
    return Table(CUSTOM_COLUMNS, rows, spec.meta())


RUNNERS = {
    "fig1": run_fig1,
    "fig2": run_fig2,
    "fig3": run_fig3_fig4,
    "fig4": run_fig3_fig4,
    "custom": run_custom,
}


# -- argument parsing ------------------------------------------------------------


def parse_list(text: str, cast=float) -> tuple:
    """Comma-separated values; ``a:b:step`` expands to an inclusive range."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            a, b, step = (float(x) for x in part.split(":"))
            if step <= 0:
                raise ConfigError(f"range step must be positive in {part!r}")
            k = 0
            while a + k * step <= b + 1e-9:
                out.append(cast(round(a + k * step, 10)))
                k += 1
        else:
            out.append(cast(part))
    return tuple(out)


def _int(text) -> int:
    v = float(text)
    if v != int(v):
        raise ConfigError(f"expected an integer, got {text!r}")
    return int(v)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="confquant", description="Conferencing distributed quantizer experiments"
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="figure", required=True)

    defaults = {
        "fig1": dict(eps="1,0.5,0.1,0.01", p_db="-6:30:1"),
        "fig2": dict(eps="0.1", p_db="-20:40:5", b_tot="16"),
        "fig3": dict(eps="1,0.5,0.1,0.01", p_db="", m="1,2,3,4,5,6,7,8,16"),
        "fig4": dict(eps="1,0.5,0.1,0.01", p_db="-10:10:2", m="1,2,4,8,16"),
        "custom": dict(eps="0.1", p_db="0"),
    }
    for name in FIGURES:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        d = defaults[name]
        p.add_argument("--eps", default=d["eps"], help="comma-separated cross-link variances")
        p.add_argument("--p-db", default=d["p_db"], help="power constraints in dB (list or a:b:step)")
        p.add_argument("--rho", type=float, default=0.5, help="target rate in bits/s/Hz")
        p.add_argument("--m", default=d.get("m", ""), help="codebook sizes M")
        p.add_argument("--b-tot", default=d.get("b_tot", ""), help="conventional feedback budgets")
        if name == "custom":
            p.add_argument("--scheme", required=True, choices=SCHEMES)
            p.add_argument("--metric", default="outage", choices=("outage", "fr", "distortion"))
            p.add_argument("--seeds", default="", help="master seeds to sweep (defaults to --seed)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int, default=1_000_000, help="trials for feedback-rate estimates")
        p.add_argument("--min-outage-events", type=int, default=5000)
        p.add_argument("--max-trials", type=int, default=10_000_000)
        p.add_argument("--max-rounds", type=int, default=64)
        p.add_argument("--block-size", type=int, default=DEFAULT_BLOCK)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", default=None, help="output path (stdout if omitted)")
        p.add_argument("--format", dest="fmt", default="csv", choices=("csv", "json"))
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    template = RunConfig(
        FadingParams(1.0, 1.0, args.rho),
        "opt-mr-ts",
        max_rounds=args.max_rounds,
        min_outage_events=args.min_outage_events,
        max_trials=args.max_trials,
        trials=args.trials,
        master_seed=args.seed,
        workers=args.workers,
        block_size=args.block_size,
    )
    seeds = ()
    if args.figure == "custom":
        seeds = parse_list(args.seeds, _int) if args.seeds else (args.seed,)
    return ExperimentSpec(
        name=args.figure,
        figure=args.figure,
        p_db=parse_list(args.p_db),
        eps=parse_list(args.eps),
        m=parse_list(args.m, _int),
        b_tot=parse_list(args.b_tot, _int),
        seeds=seeds,
        rho=args.rho,
        scheme=getattr(args, "scheme", None),
        metric=getattr(args, "metric", "outage"),
        template=template,
        out=args.out,
        fmt=args.fmt,
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        spec = spec_from_args(args)
        if spec.figure in ("fig3", "fig4"):
            for eps in spec.eps:
                fig3_p_db(spec, eps)
    except ValueError as exc:
        print(f"confquant: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    table = RUNNERS[spec.figure](spec)
    write_table(table, spec.out, spec.fmt)
    if table.undersampled:
        print("confquant: some points did not reach the outage-event target", file=sys.stderr)
        return EXIT_UNDERSAMPLED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
