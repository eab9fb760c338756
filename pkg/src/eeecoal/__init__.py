"""Energy Efficient Ethernet frame coalescing laboratory.

Analytic energy/delay models for time-based and size-based coalescing,
open-loop adaptive controllers holding a mean-delay target, efficiency
bounds, and a discrete-event simulator that validates all of the above.
"""

from .analytic import (
    BoundResult,
    CoalescingOutcome,
    EeeParams,
    TrafficStats,
    delay_energy_bound,
    energy_lower_bound,
    energy_ratio,
    is_infeasible,
    toff_upper_bound,
    w0_exact,
)
from .policy import PolicyConfig, TrafficEstimate, WakePlan, plan_cycle, update_estimate
from .simcore import CycleRecord, SimReport, cycle_records, delay_cdf, run
from .traffic import (
    BimodalSize,
    FixedSize,
    Frame,
    Pareto,
    Poisson,
    Trace,
    TrafficSpec,
    load_trace,
    measured_stats,
    theoretical_stats,
)

__version__ = "0.1.0"

__all__ = [
    "BimodalSize",
    "BoundResult",
    "CoalescingOutcome",
    "CycleRecord",
    "EeeParams",
    "FixedSize",
    "Frame",
    "Pareto",
    "Poisson",
    "PolicyConfig",
    "SimReport",
    "Trace",
    "TrafficEstimate",
    "TrafficSpec",
    "TrafficStats",
    "WakePlan",
    "cycle_records",
    "delay_cdf",
    "delay_energy_bound",
    "energy_lower_bound",
    "energy_ratio",
    "is_infeasible",
    "load_trace",
    "measured_stats",
    "plan_cycle",
    "run",
    "theoretical_stats",
    "toff_upper_bound",
    "update_estimate",
    "w0_exact",
]
