"""Conferencing-based distributed channel quantizers for two-user interference networks."""

from .channel import ChannelState, FadingParams, LocalCsi, local_view, sample_block, sample_channel
from .rates import Metric, Strategy, TransmissionPair, opt_outage, optimal_it_pair, optimal_ts_pair

__version__ = "0.1.0"

__all__ = [
    "ChannelState",
    "FadingParams",
    "LocalCsi",
    "local_view",
    "sample_block",
    "sample_channel",
    "Metric",
    "Strategy",
    "TransmissionPair",
    "opt_outage",
    "optimal_it_pair",
    "optimal_ts_pair",
]
