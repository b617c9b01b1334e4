"""UAV-to-X uplink simulator with joint subchannel allocation and speed optimization."""

from .alloc_u2i import AssignmentInstance, greedy_u2i, solve_u2i, verify_phi
from .alloc_u2u import U2uInstance, branch_and_bound, enumerate_u2u, greedy_u2u, lfss
from .channel import ChannelParams, assemble_rates
from .config import ProtocolSettings, RunConfig, bundled_config, load_config
from .engine import RunResult, SlotLog, run_simulation
from .isasoa import IterTrace, SlotDecision, run_greedy, run_isasoa
from .scenario import ScenarioConfig, ScenarioState, categorize_and_pair, generate_scenario
from .slot import SlotProblem, SolverSettings

__version__ = "0.1.0"

__all__ = [
    "AssignmentInstance",
    "ChannelParams",
    "IterTrace",
    "ProtocolSettings",
    "RunConfig",
    "RunResult",
    "ScenarioConfig",
    "ScenarioState",
    "SlotDecision",
    "SlotLog",
    "SlotProblem",
    "SolverSettings",
    "U2uInstance",
    "assemble_rates",
    "branch_and_bound",
    "bundled_config",
    "categorize_and_pair",
    "enumerate_u2u",
    "generate_scenario",
    "greedy_u2i",
    "greedy_u2u",
    "lfss",
    "load_config",
    "run_greedy",
    "run_isasoa",
    "run_simulation",
    "solve_u2i",
    "verify_phi",
]
