"""Charge qubits coupled through a mechanical resonator: gates, schedules, numerics."""

__version__ = "0.1.0"

from .operators import QOperator, QState, TruncationWarning  # noqa: E402
from .propagator import ConvergenceError, PropagationSpec, propagate  # noqa: E402
from .device import ControlSettings, DeviceParams, QubitControl, QubitParams  # noqa: E402
from .gates import GateReport, PulseSegment  # noqa: E402
from .scheduler import InfeasibleScheduleError, PulseSchedule, ScheduleRequest  # noqa: E402
from .network import NetworkSpec  # noqa: E402

__all__ = [
    "QOperator", "QState", "TruncationWarning",
    "ConvergenceError", "PropagationSpec", "propagate",
    "ControlSettings", "DeviceParams", "QubitControl", "QubitParams",
    "GateReport", "PulseSegment",
    "InfeasibleScheduleError", "PulseSchedule", "ScheduleRequest",
    "NetworkSpec",
]
