"""Black-box simplex runtime assurance with swarm and aircraft case studies."""
from .core import (ACCEPTED, REJECTED, TIMED_OUT, CommandSequence, ConfigurationError, Decision,
                   FaultSchedule, PlantModel, SafetyChecker, SafetyVerdict, dm_step, dm_update,
                   run_execution)

__all__ = ["ACCEPTED", "REJECTED", "TIMED_OUT", "CommandSequence", "ConfigurationError", "Decision",
           "FaultSchedule", "PlantModel", "SafetyChecker", "SafetyVerdict", "dm_step", "dm_update",
           "run_execution"]
__version__ = "0.1.0"
