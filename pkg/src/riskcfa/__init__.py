"""Risk-aware look-ahead and cost-function-approximation policies for a
wind / battery / hydrogen microgrid, with an LP solver, risk measures,
closed-loop simulation and policy tuning."""

from .domain import Decision, SystemParams, SystemState
from .policy import DLAPolicy, RiskConfig, SBPoEPolicy, SCVaRPolicy, SLAPolicy, Theta
from .sim import Instance, evaluate, run_episode, run_scenario

__version__ = "0.1.0"

__all__ = ["Decision", "SystemParams", "SystemState", "DLAPolicy", "SLAPolicy", "SCVaRPolicy",
           "SBPoEPolicy", "RiskConfig", "Theta", "Instance", "evaluate", "run_episode", "run_scenario"]
