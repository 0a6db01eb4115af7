"""Resource-aware runtime mode selection for software-defined vehicle apps."""

from .axil import AxilLevel, Experience, Exposition, ScoreMap, Substitution, axil_score, derive_axil
from .errors import (
    GenerationError, InvalidRequestError, OrchestrationError, ScenarioMismatchError,
    SearchSpaceError, UnknownModeError,
)
from .generator import PRESETS, GenParams, gen_instance, gen_scenario
from .kernels import BACKEND
from .metrics import (
    HealthSummary, RunComparison, compare_runs, emit_plot_series, quartiles, summarize_health,
)
from .model import (
    Application, Assignment, Flow, Instance, ModeRef, ModeSpec, Scenario, ScenarioState,
    Topology, assignment_usage, dependencies_satisfied, mode_requirements, total_axil,
    validate_instance,
)
from .simulator import MetricsLog, Policy, SimConfig, run_scenario, step_tick
from .solver import Candidate, Solution, explain, solve_exact, solve_greedy

__version__ = "0.1.0"
