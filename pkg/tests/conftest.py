"""Shared test helpers: independent oracles and random KB structures."""

from __future__ import annotations

from random import Random

from beliefsync.kb import (
    Antecedent,
    AntecedentKind,
    DatumDefinition,
    KnowledgeBase,
    Provenance,
)

# Presence assignments in oracle form: name -> None | "gen" | "recv".
GEN = "gen"
RECV = "recv"


def oracle_labels(defs: dict[str, tuple[str, ...]], presences: dict[str, str | None]):
    """Brute-force labeler, independent of the engine.

    ``defs`` maps each datum to its antecedent targets (justifications are
    the names present in ``presences``).  Evaluates the conjunction and
    internality rules by plain recursion with no cached state.
    """

    def is_in(name: str) -> bool:
        if name in presences:
            return presences[name] is not None
        return all(is_in(target) for target in defs[name])

    def is_internal(name: str) -> bool:
        if name in presences:
            return presences[name] == GEN
        return all(is_internal(target) for target in defs[name])

    labels = {}
    for name in defs:
        if not is_in(name):
            labels[name] = "out"
        elif is_internal(name):
            labels[name] = "internal"
        else:
            labels[name] = "external"
    return labels


def random_kb_structure(
    rng: Random,
    n_justs: int,
    n_data: int,
    max_depth: int = 3,
    max_antecedents: int = 4,
) -> tuple[list[str], dict[str, tuple[str, ...]]]:
    """Random DAG-shaped KB structure with bounded datum-chain depth."""
    justs = [f"j{i}" for i in range(n_justs)]
    defs: dict[str, tuple[str, ...]] = {}
    depth: dict[str, int] = {}
    for i in range(n_data):
        name = f"d{i}"
        reusable = [d for d in defs if depth[d] < max_depth]
        pool = justs + reusable
        count = rng.randint(1, min(max_antecedents, len(pool)))
        targets = tuple(rng.sample(pool, count))
        defs[name] = targets
        datum_depths = [depth[t] for t in targets if t in defs]
        depth[name] = 1 + max(datum_depths, default=0)
    return justs, defs


def build_engine_kb(
    justs: list[str], defs: dict[str, tuple[str, ...]]
) -> KnowledgeBase:
    """Install an oracle-form structure into the real engine."""
    kb = KnowledgeBase()
    for name in justs:
        kb.declare_justification(name)
    for name, targets in defs.items():
        antecedents = tuple(
            Antecedent(
                target,
                AntecedentKind.DATUM if target in defs else AntecedentKind.JUSTIFICATION,
            )
            for target in targets
        )
        kb.define_datum(DatumDefinition(name, antecedents))
    return kb


def apply_assignment(kb: KnowledgeBase, assignment: dict[str, str | None]) -> None:
    for name, value in assignment.items():
        if value is None:
            kb.set_presence(name, None)
        elif value == GEN:
            kb.set_presence(name, Provenance.generated())
        else:
            kb.set_presence(name, Provenance.received("peer"))


def flood_cost(adjacency: list[tuple[int, ...]], origin: int) -> int:
    """Transmissions of zero-loss flooding on a connected graph.

    Every reached node forwards exactly once to all neighbors except the
    copy's sender, so the origin sends deg(origin) and every other node
    deg - 1, independent of delivery order.
    """
    return len(adjacency[origin]) + sum(
        len(neighbors) - 1
        for node, neighbors in enumerate(adjacency)
        if node != origin
    )
