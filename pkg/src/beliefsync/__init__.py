"""Justification-based belief consistency for groups of management nodes.

Per-node truth maintenance over shared management data (kb), a small
Prolog-style text format for knowledge bases (jkb), flooding and
backoff-controlled belief-change propagation (protocol), and a seeded
cycle simulator with experiment tooling (sim, cli).
"""

from .kb import (
    Antecedent,
    AntecedentKind,
    CyclicDefinition,
    DatumDefinition,
    DuplicateSymbol,
    KbError,
    KnowledgeBase,
    Label,
    NotAJustification,
    Provenance,
    ProvenanceKind,
    StateReport,
    UnknownAntecedent,
    UnknownSymbol,
)
from .jkb import (
    IncoherentRulePair,
    ParseError,
    Program,
    load,
    load_text,
    parse_program,
    render_program,
    render_report,
)
from .protocol import (
    Action,
    BeliefChangeMessage,
    ForwardDecision,
    DecisionKind,
    InvalidParameter,
    Node,
    NoPendingEntry,
    Strategy,
    StrategyConfig,
    rcf,
)
from .sim import (
    DisconnectedAfterRetries,
    ExperimentConfig,
    FixtureError,
    InvalidConfig,
    Metrics,
    RunMetrics,
    build_overlay,
    run_experiment,
    sweep,
)

__all__ = [
    "Action",
    "Antecedent",
    "AntecedentKind",
    "BeliefChangeMessage",
    "CyclicDefinition",
    "DatumDefinition",
    "DecisionKind",
    "DisconnectedAfterRetries",
    "DuplicateSymbol",
    "ExperimentConfig",
    "FixtureError",
    "ForwardDecision",
    "IncoherentRulePair",
    "InvalidConfig",
    "InvalidParameter",
    "KbError",
    "KnowledgeBase",
    "Label",
    "Metrics",
    "Node",
    "NoPendingEntry",
    "NotAJustification",
    "ParseError",
    "Program",
    "Provenance",
    "ProvenanceKind",
    "RunMetrics",
    "StateReport",
    "Strategy",
    "StrategyConfig",
    "UnknownAntecedent",
    "UnknownSymbol",
    "build_overlay",
    "load",
    "load_text",
    "parse_program",
    "rcf",
    "render_program",
    "render_report",
    "run_experiment",
    "sweep",
]

__version__ = "0.1.0"
