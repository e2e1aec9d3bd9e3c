"""Justification-based truth maintenance for shared management data.

A knowledge base holds named justifications and data.  A justification is
present when it was generated locally or received from a peer; a datum is
believed ("in") exactly when all of its antecedents are satisfied, and the
"in" state refines to internal (all support is local) or external (some
support came from peers).  Data may serve as antecedents of other data,
so one presence change can relabel a whole chain.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional


class KbError(Exception):
    """Base class for knowledge-base errors."""


class DuplicateSymbol(KbError):
    pass


class UnknownSymbol(KbError):
    pass


class UnknownAntecedent(KbError):
    pass


class CyclicDefinition(KbError):
    pass


class NotAJustification(KbError):
    pass


# Leading uppercase is allowed so device-style names like R1_load_mat work.
_SYMBOL_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


def check_symbol(name: str) -> str:
    if not _SYMBOL_RE.match(name or ""):
        raise KbError(f"invalid symbol name: {name!r}")
    return name


class ProvenanceKind(Enum):
    GENERATED = "generated"
    RECEIVED = "received"


@dataclass(frozen=True)
class Provenance:
    """Where a justification's presence came from.

    Generated presences are local and carry no source; received presences
    carry the identifier of the node whose belief change they report.
    ``at`` is the simulation cycle of the write (0 outside simulations).
    """

    kind: ProvenanceKind
    source: Optional[str] = None
    at: int = 0

    def __post_init__(self) -> None:
        if self.kind is ProvenanceKind.GENERATED and self.source is not None:
            raise KbError("generated presence must not carry a source")
        if self.kind is ProvenanceKind.RECEIVED and self.source is None:
            raise KbError("received presence requires a source")

    @classmethod
    def generated(cls, at: int = 0) -> "Provenance":
        return cls(ProvenanceKind.GENERATED, None, at)

    @classmethod
    def received(cls, source: str, at: int = 0) -> "Provenance":
        return cls(ProvenanceKind.RECEIVED, source, at)


class AntecedentKind(Enum):
    JUSTIFICATION = "justification"
    DATUM = "datum"


@dataclass(frozen=True)
class Antecedent:
    target: str
    kind: AntecedentKind


def just(target: str) -> Antecedent:
    return Antecedent(target, AntecedentKind.JUSTIFICATION)


def sub(target: str) -> Antecedent:
    return Antecedent(target, AntecedentKind.DATUM)


@dataclass(frozen=True)
class DatumDefinition:
    """A datum plus its conjunctive antecedent list (order is presentation only)."""

    name: str
    antecedents: tuple[Antecedent, ...]

    def __post_init__(self) -> None:
        if not self.antecedents:
            raise KbError(f"datum {self.name!r} needs at least one antecedent")


class Label(Enum):
    OUT = "out"
    IN_INTERNAL = "internal"
    IN_EXTERNAL = "external"

    @property
    def is_in(self) -> bool:
        return self is not Label.OUT


# Provenance tags used in state reports.
TAG_LOCAL = "mod"
TAG_REMOTE = "msg"


@dataclass(frozen=True)
class StateReport:
    """Queried state of one datum: label plus a tag per supported antecedent.

    ``support`` lists, in definition order, every antecedent that currently
    contributes (present justification or in sub-datum) with its tag:
    ``mod`` for generated/derived-internal, ``msg`` for received/derived-external.
    Unsatisfied antecedents carry no tag and are omitted.
    """

    datum: str
    state: Label
    support: tuple[tuple[str, str], ...]


LabelChange = tuple[str, Label, Label]


class KnowledgeBase:
    """Per-node store of datum definitions, justification presences, and labels.

    Single writer: concurrent reads of an unchanging instance are safe,
    mutations require external exclusion.  Labels are recomputed after every
    mutation, so they are always consistent with the presences.
    """

    def __init__(self) -> None:
        self._presences: dict[str, Optional[Provenance]] = {}
        self._definitions: dict[str, DatumDefinition] = {}
        self._labels: dict[str, Label] = {}

    # -- introspection -------------------------------------------------

    def is_justification(self, name: str) -> bool:
        return name in self._presences

    def is_datum(self, name: str) -> bool:
        return name in self._definitions

    def justifications(self) -> tuple[str, ...]:
        return tuple(self._presences)

    def data(self) -> tuple[str, ...]:
        """Datum names in definition order."""
        return tuple(self._definitions)

    def definition(self, name: str) -> DatumDefinition:
        self._require_datum(name)
        return self._definitions[name]

    def presence(self, name: str) -> Optional[Provenance]:
        if name not in self._presences:
            raise UnknownSymbol(f"unknown justification: {name!r}")
        return self._presences[name]

    def label(self, name: str) -> Label:
        self._require_datum(name)
        return self._labels[name]

    def copy(self) -> "KnowledgeBase":
        dup = KnowledgeBase()
        dup._presences = dict(self._presences)
        dup._definitions = dict(self._definitions)
        dup._labels = dict(self._labels)
        return dup

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeBase):
            return NotImplemented
        return (
            self._presences == other._presences
            and self._definitions == other._definitions
            and self._labels == other._labels
        )

    # -- mutation ------------------------------------------------------

    def declare_justification(self, name: str) -> None:
        check_symbol(name)
        if name in self._presences or name in self._definitions:
            raise DuplicateSymbol(f"symbol already declared: {name!r}")
        self._presences[name] = None

    def define_datum(self, definition: DatumDefinition) -> None:
        check_symbol(definition.name)
        if definition.name in self._presences or definition.name in self._definitions:
            raise DuplicateSymbol(f"symbol already declared: {definition.name!r}")
        for ant in definition.antecedents:
            if ant.target == definition.name:
                raise CyclicDefinition(f"datum {definition.name!r} references itself")
            if ant.kind is AntecedentKind.JUSTIFICATION:
                if ant.target not in self._presences:
                    raise UnknownAntecedent(
                        f"{definition.name!r} needs justification {ant.target!r},"
                        " which is not declared"
                    )
            else:
                if ant.target not in self._definitions:
                    raise UnknownAntecedent(
                        f"{definition.name!r} needs datum {ant.target!r},"
                        " which is not defined"
                    )
        if self._would_cycle(definition):
            raise CyclicDefinition(f"datum {definition.name!r} would close a cycle")
        self._definitions[definition.name] = definition
        self._labels[definition.name] = self._compute_label(definition)

    def set_presence(self, name: str, provenance: Optional[Provenance]) -> list[LabelChange]:
        """Write (or retract, with None) a justification's presence.

        The latest write wins; in particular a generated write replaces a
        received one.  All affected data are relabeled before returning, and
        the list of (datum, old label, new label) changes is returned.
        """
        if name not in self._presences:
            if name in self._definitions:
                raise NotAJustification(
                    f"{name!r} is a datum; datum states are derived, never set"
                )
            raise UnknownSymbol(f"unknown justification: {name!r}")
        if self._presences[name] == provenance:
            return []
        self._presences[name] = provenance
        return self._refresh_labels()

    def relabel(self, name: str) -> Label:
        """Recompute and return the label of one datum from current support."""
        self._require_datum(name)
        label = self._compute_label(self._definitions[name])
        self._labels[name] = label
        return label

    def query(self, name: str) -> StateReport:
        self._require_datum(name)
        definition = self._definitions[name]
        support = []
        for ant in definition.antecedents:
            tag = self._support_tag(ant)
            if tag is not None:
                support.append((ant.target, tag))
        return StateReport(name, self._labels[name], tuple(support))

    # -- internals -----------------------------------------------------

    def _require_datum(self, name: str) -> None:
        if name not in self._definitions:
            if name in self._presences:
                raise UnknownSymbol(f"{name!r} is a justification, not a datum")
            raise UnknownSymbol(f"unknown datum: {name!r}")

    def _would_cycle(self, definition: DatumDefinition) -> bool:
        # Antecedents must already be defined, so a cycle could only pass
        # through the new name; walk down to be safe.
        stack = [a.target for a in definition.antecedents if a.kind is AntecedentKind.DATUM]
        seen: set[str] = set()
        while stack:
            current = stack.pop()
            if current == definition.name:
                return True
            if current in seen:
                continue
            seen.add(current)
            below = self._definitions.get(current)
            if below is not None:
                stack.extend(
                    a.target for a in below.antecedents if a.kind is AntecedentKind.DATUM
                )
        return False

    def _satisfied(self, ant: Antecedent) -> bool:
        if ant.kind is AntecedentKind.JUSTIFICATION:
            return self._presences[ant.target] is not None
        return self._labels[ant.target].is_in

    def _internal(self, ant: Antecedent) -> bool:
        if ant.kind is AntecedentKind.JUSTIFICATION:
            presence = self._presences[ant.target]
            return presence is not None and presence.kind is ProvenanceKind.GENERATED
        return self._labels[ant.target] is Label.IN_INTERNAL

    def _compute_label(self, definition: DatumDefinition) -> Label:
        if not all(self._satisfied(a) for a in definition.antecedents):
            return Label.OUT
        if all(self._internal(a) for a in definition.antecedents):
            return Label.IN_INTERNAL
        return Label.IN_EXTERNAL

    def _refresh_labels(self) -> list[LabelChange]:
        # Definitions were inserted with all antecedents already present, so
        # insertion order is a topological order of the datum graph.
        changes: list[LabelChange] = []
        for name, definition in self._definitions.items():
            old = self._labels[name]
            new = self._compute_label(definition)
            if new is not old:
                self._labels[name] = new
                changes.append((name, old, new))
        return changes

    def _support_tag(self, ant: Antecedent) -> Optional[str]:
        if ant.kind is AntecedentKind.JUSTIFICATION:
            presence = self._presences[ant.target]
            if presence is None:
                return None
            return TAG_LOCAL if presence.kind is ProvenanceKind.GENERATED else TAG_REMOTE
        label = self._labels[ant.target]
        if label is Label.OUT:
            return None
        return TAG_LOCAL if label is Label.IN_INTERNAL else TAG_REMOTE


def build_kb(
    justifications: Iterable[str],
    definitions: Iterable[DatumDefinition] = (),
) -> KnowledgeBase:
    """Convenience constructor used by tests and fixtures."""
    kb = KnowledgeBase()
    for name in justifications:
        kb.declare_justification(name)
    for definition in definitions:
        kb.define_datum(definition)
    return kb
