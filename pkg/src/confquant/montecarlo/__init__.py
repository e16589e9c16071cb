"""Monte-Carlo estimation engine."""

from .engine import (
    Estimate,
    PthPoint,
    PthResult,
    RunConfig,
    Tally,
    estimate_distortion,
    estimate_fr,
    estimate_outage,
    find_p_th,
    outage_pair,
    paired_difference,
    run_tally,
)
from .kernels import OPTIMUM_OF, SCHEMES, KernelResult, Scheme, evaluate

__all__ = [
    "Estimate",
    "PthPoint",
    "PthResult",
    "RunConfig",
    "Tally",
    "estimate_distortion",
    "estimate_fr",
    "estimate_outage",
    "find_p_th",
    "outage_pair",
    "paired_difference",
    "run_tally",
    "OPTIMUM_OF",
    "SCHEMES",
    "KernelResult",
    "Scheme",
    "evaluate",
]
