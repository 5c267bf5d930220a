"""Continuous-time Monte Carlo of PushASEP.

The event loop lives in a compiled core when available and falls back to a
pure-Python implementation that consumes the random stream identically.
"""
from .engine import (
    AuditResult, Chi2Result, Explicit, Flat, KPZResult, LightCone, SimConfig, SpaceLikeEstimate,
    Step, Trajectory, alias_table, binomial_ci, core, flat_buffer_audit, kpz_exponent,
    sample_positions, sample_space_like, simulate, terminal_chi2,
)

BACKEND = core.BACKEND

__all__ = [
    "BACKEND", "AuditResult", "Chi2Result", "Explicit", "Flat", "KPZResult", "LightCone",
    "SimConfig", "SpaceLikeEstimate", "Step", "Trajectory", "alias_table", "binomial_ci", "core",
    "flat_buffer_audit", "kpz_exponent", "sample_positions", "sample_space_like", "simulate",
    "terminal_chi2",
]
