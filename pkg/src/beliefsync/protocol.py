"""Belief-change propagation inside a node group.

Two strategies are implemented.  Unbridled replication floods every belief
change: the first copy of a change is applied to the local knowledge base
and forwarded to all neighbors except the one it came from; later copies
are discarded.  Controlled replication delays the forwarding decision by a
backoff of ``backoff`` cycles, counts the duplicate copies that arrive
while the decision is pending, and then forwards with probability

    rcf(rho, duplicates) = rho / (1 + duplicates)

so changes that are evidently already circulating proliferate less.  A
controlled node with ``backoff == 0`` behaves exactly like an unbridled
one (there is no window in which duplicates could be counted).

Each node is a deterministic sequential state machine: the same ordered
inputs (events plus random samples) produce the same outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .kb import KnowledgeBase, Provenance, UnknownSymbol


class InvalidParameter(Exception):
    pass


class NoPendingEntry(Exception):
    pass


def rcf(rho: float, duplicates: int) -> float:
    """Forwarding probability: rho scaled down by duplicate copies seen.

    rho must lie in (0, 1]; values above 1 would make the result exceed 1
    when no duplicates were seen, so they are rejected rather than clamped.
    """
    if not 0.0 < rho <= 1.0:
        raise InvalidParameter(f"rho must be in (0, 1], got {rho}")
    if duplicates < 0:
        raise InvalidParameter(f"duplicate count must be >= 0, got {duplicates}")
    return rho / (1 + duplicates)


class Action(Enum):
    ASSERT = "assert"
    RETRACT = "retract"


ChangeId = tuple[int, int]  # (origin node id, origin sequence number)


@dataclass(frozen=True)
class BeliefChangeMessage:
    """One copy of a belief-change announcement.

    All copies and forwards of one originated change share ``change_id``.
    ``sender`` is the transport stamp of the node that transmitted this
    particular copy (the origin itself for initial copies).
    """

    change_id: ChangeId
    justification: str
    action: Action
    group: str = "default"
    sender: int = -1


class Strategy(Enum):
    UNBRIDLED = "unbridled"
    CONTROLLED = "controlled"


@dataclass(frozen=True)
class StrategyConfig:
    kind: Strategy
    rho: float = 1.0
    backoff: int = 3

    def __post_init__(self) -> None:
        if self.kind is Strategy.CONTROLLED:
            if not 0.0 < self.rho <= 1.0:
                raise InvalidParameter(f"rho must be in (0, 1], got {self.rho}")
            if self.backoff < 0:
                raise InvalidParameter(f"backoff must be >= 0, got {self.backoff}")

    @classmethod
    def unbridled(cls) -> "StrategyConfig":
        return cls(Strategy.UNBRIDLED)

    @classmethod
    def controlled(cls, rho: float = 1.0, backoff: int = 3) -> "StrategyConfig":
        return cls(Strategy.CONTROLLED, rho, backoff)


class DecisionKind(Enum):
    FORWARD = "forward"
    SCHEDULED = "scheduled"
    DROP = "drop"


Send = tuple[int, BeliefChangeMessage]


@dataclass(frozen=True)
class ForwardDecision:
    kind: DecisionKind
    sends: tuple[Send, ...] = ()
    at: Optional[int] = None  # cycle of the pending forwarding decision


@dataclass
class _Pending:
    message: BeliefChangeMessage
    first_seen: int
    first_sender: int
    duplicates: int = 0


class Node:
    """Protocol state for one group member: knowledge base plus bookkeeping."""

    def __init__(
        self,
        node_id: int,
        kb: KnowledgeBase,
        strategy: StrategyConfig,
        neighbors: tuple[int, ...] = (),
        group: str = "default",
    ):
        self.node_id = node_id
        self.kb = kb
        self.strategy = strategy
        self.neighbors = tuple(neighbors)
        self.group = group
        self.seen: set[ChangeId] = set()
        self.pending: dict[ChangeId, _Pending] = {}
        self.seq = 0

    # -- events ----------------------------------------------------------

    def on_local_change(
        self, justification: str, action: Action, now: int
    ) -> list[Send]:
        """Apply a locally produced change and announce it to every neighbor.

        Internally produced changes are always sent (probability 1).  The
        minted change id is marked seen, so later echoes are ignored.
        """
        self._apply(justification, action, Provenance.generated(now))
        change_id = (self.node_id, self.seq)
        self.seq += 1
        self.seen.add(change_id)
        message = BeliefChangeMessage(
            change_id, justification, action, self.group, self.node_id
        )
        return [(neighbor, message) for neighbor in self.neighbors]

    def on_receive(self, message: BeliefChangeMessage, now: int) -> ForwardDecision:
        """Process one delivered copy and decide whether/when to forward it."""
        if not self.kb.is_justification(message.justification):
            # Signals mis-grouped knowledge bases; the caller drops and counts.
            raise UnknownSymbol(
                f"justification {message.justification!r} not declared at node"
                f" {self.node_id}"
            )
        if message.change_id in self.seen:
            entry = self.pending.get(message.change_id)
            if entry is not None:
                entry.duplicates += 1
            return ForwardDecision(DecisionKind.DROP)
        self.seen.add(message.change_id)
        origin = str(message.change_id[0])
        provenance = (
            Provenance.received(origin, now)
            if message.action is Action.ASSERT
            else None
        )
        self.kb.set_presence(message.justification, provenance)
        if (
            self.strategy.kind is Strategy.CONTROLLED
            and self.strategy.backoff > 0
        ):
            self.pending[message.change_id] = _Pending(
                message, now, message.sender
            )
            return ForwardDecision(
                DecisionKind.SCHEDULED, at=now + self.strategy.backoff
            )
        return ForwardDecision(
            DecisionKind.FORWARD, self._forwards(message, message.sender)
        )

    def on_backoff_expiry(
        self, change_id: ChangeId, now: int, rand: float
    ) -> ForwardDecision:
        """Evaluate the delayed forwarding decision for a pending change."""
        entry = self.pending.pop(change_id, None)
        if entry is None:
            raise NoPendingEntry(f"no pending entry for change {change_id}")
        probability = rcf(self.strategy.rho, entry.duplicates)
        if rand < probability:
            return ForwardDecision(
                DecisionKind.FORWARD, self._forwards(entry.message, entry.first_sender)
            )
        return ForwardDecision(DecisionKind.DROP)

    # -- internals ---------------------------------------------------------

    def _apply(
        self, justification: str, action: Action, provenance: Provenance
    ) -> None:
        if action is Action.ASSERT:
            self.kb.set_presence(justification, provenance)
        else:
            self.kb.set_presence(justification, None)

    def _forwards(
        self, message: BeliefChangeMessage, exclude: int
    ) -> tuple[Send, ...]:
        copy = replace(message, sender=self.node_id)
        return tuple(
            (neighbor, copy) for neighbor in self.neighbors if neighbor != exclude
        )


def trace_line(
    cycle: int,
    event: str,
    message: BeliefChangeMessage,
    from_node: int,
    to_node: int,
) -> str:
    """One tab-separated trace log line; the format is stable byte-for-byte."""
    origin, seq = message.change_id
    return (
        f"{cycle}\t{event}\t{origin}:{seq}\t{from_node}\t{to_node}"
        f"\t{message.justification}\t{message.action.value}"
    )
