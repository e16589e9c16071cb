"""Monte-Carlo estimation of outage probabilities, feedback rates and distortions.

Trials are processed in fixed blocks of consecutive trial indices. A block's
tally depends only on ``(master_seed, block index)`` and every tally is an
integer count, so totals are exact and independent of how blocks are spread
over worker processes. The outage-event stopping rule is applied by scanning
block tallies in index order, which makes the stopping point independent of
the worker count as well.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ..channel import FadingParams, db_to_linear, sample_block
from ..conferencing import DEFAULT_MAX_ROUNDS
from .kernels import OPTIMUM_OF, Scheme, evaluate

log = logging.getLogger(__name__)

DEFAULT_BLOCK = 1 << 16
MAX_SCHEMES = 12


@dataclass(frozen=True)
class RunConfig:
    params: FadingParams
    scheme: str
    m: int | None = None
    b_tot: int | None = None
    max_rounds: int = DEFAULT_MAX_ROUNDS
    min_outage_events: int = 5000
    max_trials: int = 10_000_000
    trials: int = 1_000_000
    master_seed: int = 0
    workers: int = 1
    block_size: int = DEFAULT_BLOCK
    codebook_seed: int = 0

    def __post_init__(self):
        if self.min_outage_events < 1:
            raise ValueError("min_outage_events must be at least 1")
        if self.max_trials < self.min_outage_events:
            raise ValueError("max_trials must be at least min_outage_events")
        if self.trials < 1 or self.block_size < 1 or self.workers < 1:
            raise ValueError("trials, block_size and workers must be positive")
        self.scheme_spec()

    def scheme_spec(self) -> Scheme:
        return Scheme(self.scheme, self.m, self.b_tot, self.max_rounds)

    def with_scheme(self, scheme: str, **knobs) -> "RunConfig":
        return replace(self, scheme=scheme, **knobs)

    def describe(self) -> dict:
        return {
            "eps": self.params.eps,
            "p_db": round(self.params.p_db, 12),
            "rho": self.params.rho,
            "scheme": self.scheme,
            "m": self.m,
            "b_tot": self.b_tot,
            "max_rounds": self.max_rounds,
            "min_outage_events": self.min_outage_events,
            "max_trials": self.max_trials,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "block_size": self.block_size,
            "codebook_seed": self.codebook_seed,
        }


@dataclass(frozen=True)
class Estimate:
    value: float
    trials: int
    events: int
    std_err: float
    undersampled: bool = False
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.events > self.trials or self.std_err < 0:
            raise ValueError("inconsistent estimate")


@dataclass
class Tally:
    """Integer counts over a set of trials for several schemes evaluated on common draws."""

    n_schemes: int
    trials: int = 0
    joint: np.ndarray = None
    bits_sum: list = None
    bits_sq: list = None
    caps: list = None

    def __post_init__(self):
        if self.joint is None:
            self.joint = np.zeros(1 << self.n_schemes, dtype=np.int64)
            self.bits_sum = [0] * self.n_schemes
            self.bits_sq = [0] * self.n_schemes
            self.caps = [0] * self.n_schemes

    def add(self, other: "Tally") -> None:
        self.trials += other.trials
        self.joint += other.joint
        for i in range(self.n_schemes):
            self.bits_sum[i] += other.bits_sum[i]
            self.bits_sq[i] += other.bits_sq[i]
            self.caps[i] += other.caps[i]

    def events(self, i: int) -> int:
        codes = np.arange(len(self.joint))
        return int(self.joint[(codes >> i) & 1 == 1].sum())

    def discordant(self, i: int, j: int) -> tuple[int, int]:
        """Trials with (i in outage, j not) and (j in outage, i not)."""
        codes = np.arange(len(self.joint))
        bi = (codes >> i) & 1
        bj = (codes >> j) & 1
        return int(self.joint[(bi == 1) & (bj == 0)].sum()), int(self.joint[(bi == 0) & (bj == 1)].sum())


def _block_tally(task) -> Tally:
    params, seed, start, count, schemes = task
    batch = sample_block(seed, start, count, params)
    tally = Tally(len(schemes), trials=count)
    code = np.zeros(count, dtype=np.int64)
    for i, scheme in enumerate(schemes):
        res = evaluate(scheme, batch, params)
        code |= res.outage.astype(np.int64) << i
        if res.bits is not None:
            tally.bits_sum[i] = int(res.bits.sum())
            tally.bits_sq[i] = int((res.bits * res.bits).sum())
        if res.capped is not None:
            tally.caps[i] = int(res.capped.sum())
    tally.joint = np.bincount(code, minlength=1 << len(schemes)).astype(np.int64)
    return tally


def run_tally(
    params: FadingParams,
    master_seed: int,
    schemes: Sequence[Scheme],
    max_trials: int,
    stop: Callable[[Tally], bool] | None = None,
    block_size: int = DEFAULT_BLOCK,
    workers: int = 1,
    codebook_seed: int = 0,
) -> tuple[Tally, bool]:
    """Tally ``schemes`` on common draws until ``stop`` holds or ``max_trials`` is reached.

    Returns the tally and whether ``stop`` was satisfied.
    """
    if not 1 <= len(schemes) <= MAX_SCHEMES:
        raise ValueError(f"between 1 and {MAX_SCHEMES} schemes per run")
    schemes = tuple(s.resolved(params.eps, codebook_seed) for s in schemes)
    n_blocks = -(-max_trials // block_size)
    tasks = (
        (params, master_seed, b * block_size, min(block_size, max_trials - b * block_size), schemes)
        for b in range(n_blocks)
    )
    total = Tally(len(schemes))
    if workers <= 1:
        for task in tasks:
            total.add(_block_tally(task))
            if stop is not None and stop(total):
                return total, True
        return total, stop is None
    chunk = 2 * workers
    with ProcessPoolExecutor(max_workers=workers) as pool:
        pending = list(_take(tasks, chunk))
        while pending:
            for tally in pool.map(_block_tally, pending):
                total.add(tally)
                if stop is not None and stop(total):
                    return total, True
            pending = list(_take(tasks, chunk))
    return total, stop is None


def _take(it, n):
    for _, item in zip(range(n), it):
        yield item


def _proportion(events: int, trials: int) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 0.0
    v = events / trials
    return v, math.sqrt(v * (1.0 - v) / trials)


def _events_stop(indices: Sequence[int], min_events: int) -> Callable[[Tally], bool]:
    def stop(t: Tally) -> bool:
        return all(t.events(i) >= min_events for i in indices)

    return stop


def estimate_outage(cfg: RunConfig, fixed_trials: bool = False) -> Estimate:
    """Outage probability with the outage-event stopping rule.

    With ``fixed_trials`` the stopping rule is replaced by exactly
    ``cfg.trials`` draws, as used for closed-form checks.
    """
    scheme = cfg.scheme_spec()
    if fixed_trials:
        limit, stop = cfg.trials, None
    else:
        limit, stop = cfg.max_trials, _events_stop([0], cfg.min_outage_events)
    tally, met = run_tally(
        cfg.params, cfg.master_seed, [scheme], limit, stop, cfg.block_size, cfg.workers, cfg.codebook_seed
    )
    events = tally.events(0)
    value, se = _proportion(events, tally.trials)
    if not met:
        log.warning("%s: only %d outage events in %d trials", scheme.label(), events, tally.trials)
    return Estimate(value, tally.trials, events, se, undersampled=not met, extra={"cap_hits": tally.caps[0]})


def estimate_fr(cfg: RunConfig) -> Estimate:
    """Mean feedback bits per channel state over a fixed number of trials."""
    scheme = cfg.scheme_spec()
    if not scheme.has_transcript:
        raise ValueError(f"{scheme.name} has no feedback transcript")
    tally, _ = run_tally(
        cfg.params, cfg.master_seed, [scheme], cfg.trials, None, cfg.block_size, cfg.workers, cfg.codebook_seed
    )
    n = tally.trials
    mean = tally.bits_sum[0] / n
    var = max(tally.bits_sq[0] / n - mean * mean, 0.0)
    return Estimate(
        mean,
        n,
        tally.events(0),
        math.sqrt(var / n),
        extra={"cap_hits": tally.caps[0], "outage": tally.events(0) / n},
    )


def paired_difference(tally: Tally, i: int, j: int) -> tuple[float, float]:
    """Mean and standard error of ``out_i - out_j`` over common trials."""
    n = tally.trials
    n10, n01 = tally.discordant(i, j)
    mean = (n10 - n01) / n
    second = (n10 + n01) / n
    return mean, math.sqrt(max(second - mean * mean, 0.0) / n)


def estimate_distortion(cfg: RunConfig, opt_scheme: str | None = None) -> Estimate:
    """Paired estimate of ``OUT(scheme) - OUT(optimum)`` on common draws.

    Sampling stops once the scheme has seen ``min_outage_events`` outage
    events or ``max_trials`` is reached. The value is the signed paired
    mean; ``events`` counts the scheme's outage events.
    """
    scheme = cfg.scheme_spec()
    opt = Scheme(opt_scheme or OPTIMUM_OF[scheme.name])
    tally, met = run_tally(
        cfg.params,
        cfg.master_seed,
        [scheme, opt],
        cfg.max_trials,
        _events_stop([0], cfg.min_outage_events),
        cfg.block_size,
        cfg.workers,
        cfg.codebook_seed,
    )
    mean, se = paired_difference(tally, 0, 1)
    n = tally.trials
    extra = {
        "out_scheme": tally.events(0) / n,
        "out_opt": tally.events(1) / n,
        "cap_hits": tally.caps[0],
    }
    if scheme.has_transcript:
        extra["fr"] = tally.bits_sum[0] / n
    return Estimate(mean, n, tally.events(0), se, undersampled=not met, extra=extra)


@dataclass(frozen=True)
class PthPoint:
    p_db: float
    out_ts: Estimate
    out_it: Estimate
    diff: float
    diff_se: float


@dataclass(frozen=True)
class PthResult:
    """Crossing of the optimal min-rate outage curves of the two strategies.

    ``p_th_db`` is ``None`` when the difference never changes sign on the
    grid; ``boundary`` then says on which side the crossing must lie.
    """

    p_th_db: float | None
    boundary: str | None
    points: tuple[PthPoint, ...]

    @property
    def undersampled(self) -> bool:
        return any(pt.out_ts.undersampled or pt.out_it.undersampled for pt in self.points)


def outage_pair(cfg: RunConfig, first: str, second: str) -> tuple[Estimate, Estimate, float, float, bool]:
    """Two outage curves on common draws, stopping when both reached the event target."""
    tally, met = run_tally(
        cfg.params,
        cfg.master_seed,
        [Scheme(first), Scheme(second)],
        cfg.max_trials,
        _events_stop([0, 1], cfg.min_outage_events),
        cfg.block_size,
        cfg.workers,
        cfg.codebook_seed,
    )
    ests = []
    for i in range(2):
        v, se = _proportion(tally.events(i), tally.trials)
        ests.append(Estimate(v, tally.trials, tally.events(i), se, undersampled=not met))
    d, dse = paired_difference(tally, 0, 1)
    return ests[0], ests[1], d, dse, met


def find_p_th(eps: float, rho: float, p_grid_db: Sequence[float], cfg: RunConfig | None = None) -> PthResult:
    """Locate where optimal time sharing stops losing to interference transmission.

    Both optimal min-rate outage probabilities are estimated on common draws
    at every grid point; the crossing is the first grid interval where
    ``OUT_ts - OUT_it`` goes from positive to non-positive, refined by
    linear interpolation.
    """
    grid = [float(x) for x in p_grid_db]
    if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("p_grid_db must be strictly increasing with at least two points")
    base = cfg or RunConfig(FadingParams(eps, 1.0, rho), "opt-mr-ts")
    points = []
    for p_db in grid:
        point_cfg = replace(base, params=FadingParams(eps, float(db_to_linear(p_db)), rho), scheme="opt-mr-ts")
        ts, it, d, dse, _ = outage_pair(point_cfg, "opt-mr-ts", "opt-mr-it")
        points.append(PthPoint(p_db, ts, it, d, dse))
    for a, b in zip(points, points[1:]):
        if a.diff > 0.0 >= b.diff:
            x = a.p_db + a.diff / (a.diff - b.diff) * (b.p_db - a.p_db)
            return PthResult(x, None, tuple(points))
    # No crossing: time sharing better everywhere puts it below the grid.
    boundary = "below_grid" if all(pt.diff <= 0.0 for pt in points) else "above_grid"
    return PthResult(None, boundary, tuple(points))
