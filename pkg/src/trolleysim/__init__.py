"""trolleysim: deterministic trolley-problem driving dilemmas.

Load scenario files, run forced-choice driving episodes under human or
programmatic control, and record every decision to a file or network sink.
"""

from .model import (
    ActorKind,
    ActorSpec,
    Corridor,
    Diagnostic,
    Gender,
    Mode,
    Scenario,
    Side,
    Simulation,
    Spawn,
    VictimAttributes,
    group_member_names,
    validate_scenario,
)
from .dsl import (
    InvalidSimulationError,
    ParseError,
    SimulationParseError,
    SourceSpan,
    lint_simulation,
    parse_simulation,
    serialize_simulation,
)
from .recorder import (
    ActionTrace,
    AggregateStats,
    DecisionRecord,
    Outcome,
    RecordSink,
    aggregate_stats,
    make_decision_record,
    read_records,
    write_records,
)
from .sim import (
    Control,
    EpisodePhase,
    EpisodeState,
    Observation,
    SimParams,
    SimulationRun,
    TickEvent,
    TickEventKind,
    VehicleState,
    check_collisions,
    init_values,
    make_observation,
    step_vehicle,
)

__version__ = "0.1.0"
