"""Trace-driven simulator of a marker-based compressed main memory."""

from .common import LINE_SIZE, Level
from .config import SimConfig
from .controller import BandwidthLedger, Controller, ControllerConfig, Mode, storage_budget
from .sim import StatsReport, run, simulate
from .trace import TraceRecord, generate, parse_trace

__all__ = [
    "LINE_SIZE", "Level", "SimConfig", "BandwidthLedger", "Controller", "ControllerConfig",
    "Mode", "storage_budget", "StatsReport", "run", "simulate", "TraceRecord", "generate",
    "parse_trace",
]
__version__ = "0.1.0"
