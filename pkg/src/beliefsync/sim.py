"""Deterministic cycle-based simulation of belief exchange in a node group.

One experiment run: build a random overlay, give every node a copy of the
fixture knowledge base with all justifications except one pre-set as
generated, crash a fraction of nodes, pick a live origin, let it assert the
remaining justification at cycle 0, and run cycles until quiescence.  Each
cycle processes phases in a fixed order:

    deliver due transmissions (each independently lost with loss_prob)
    -> process receptions -> process backoff expiries
    -> enqueue the sends produced this cycle with the per-hop delay.

A transmission delivered in some cycle counts toward the duplicate counter
of a pending entry whose decision runs in the same cycle (delivery precedes
expiry).  Coherence is measured against the origin: a live node is coherent
when its in/out label of the target datum matches the origin's.

Everything is driven by explicitly seeded generators, so identical configs
produce bit-identical metrics and trace logs.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from random import Random
from typing import Callable, Optional, Sequence

from . import corpus, jkb
from .kb import KbError, KnowledgeBase, Provenance, UnknownSymbol
from .protocol import (
    Action,
    BeliefChangeMessage,
    DecisionKind,
    Node,
    StrategyConfig,
    trace_line,
)


class InvalidConfig(Exception):
    pass


class FixtureError(Exception):
    pass


class DisconnectedAfterRetries(Exception):
    pass


TOPOLOGIES = ("random_regular", "complete")
AXES = ("group_size", "loss_prob", "rho")


@dataclass(frozen=True)
class ExperimentConfig:
    group_size: int
    seed: int = 0
    topology: str = "random_regular"
    degree: int = 4
    strategy: str = "unbridled"
    rho: float = 1.0
    backoff: int = 3
    loss_prob: float = 0.0
    delay: int = 1
    crash_prob: float = 0.0
    runs: int = 10
    kb_fixture: Optional[str] = None  # path to a .jkb file; None = bundled default
    target_datum: str = corpus.DEFAULT_TARGET_DATUM
    changed_justification: str = corpus.DEFAULT_CHANGED_JUSTIFICATION

    def validate(self) -> None:
        if self.group_size < 2:
            raise InvalidConfig("group_size must be >= 2")
        if self.topology not in TOPOLOGIES:
            raise InvalidConfig(f"topology must be one of {TOPOLOGIES}")
        if self.topology == "random_regular" and self.degree < 1:
            raise InvalidConfig("degree must be >= 1")
        if self.strategy not in ("unbridled", "controlled"):
            raise InvalidConfig("strategy must be 'unbridled' or 'controlled'")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise InvalidConfig("loss_prob must be in [0, 1]")
        if self.delay < 1:
            raise InvalidConfig("delay must be >= 1 cycle")
        if not 0.0 <= self.crash_prob <= 1.0:
            raise InvalidConfig("crash_prob must be in [0, 1]")
        if self.runs < 1:
            raise InvalidConfig("runs must be >= 1")
        # Strategy parameters are validated by StrategyConfig.
        self.strategy_config()

    def strategy_config(self) -> StrategyConfig:
        if self.strategy == "unbridled":
            return StrategyConfig.unbridled()
        return StrategyConfig.controlled(self.rho, self.backoff)

    def fixture_text(self) -> str:
        if self.kb_fixture is None:
            return corpus.corpus_text(corpus.DEFAULT_FIXTURE)
        return Path(self.kb_fixture).read_text(encoding="utf-8")


@dataclass(frozen=True)
class RunMetrics:
    run: int
    messages_sent: int
    messages_delivered: int
    messages_lost: int
    coherent_fraction: float
    cycles_to_quiescence: int


@dataclass(frozen=True)
class Metrics:
    """Per-run results plus mean / 95% confidence half-width aggregates."""

    runs: tuple[RunMetrics, ...]

    def values(self, field: str) -> list[float]:
        return [float(getattr(run, field)) for run in self.runs]

    def mean(self, field: str) -> float:
        return statistics.fmean(self.values(field))

    def ci95(self, field: str) -> float:
        values = self.values(field)
        if len(values) < 2:
            return 0.0
        return 1.96 * statistics.stdev(values) / math.sqrt(len(values))


# -- seeding ----------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_seed(seed: int, *parts: int) -> int:
    """Derive an independent 64-bit sub-seed from a master seed and indices."""
    value = _splitmix64(seed & _MASK64)
    for part in parts:
        value = _splitmix64((value ^ (part & _MASK64)) & _MASK64)
    return value


_STREAM_TOPOLOGY = 1
_STREAM_SETUP = 2
_STREAM_LOSS = 3
_STREAM_DECISION = 4


# -- overlay ----------------------------------------------------------------

def build_overlay(
    n: int, topology: str, seed: int, degree: int = 4
) -> list[tuple[int, ...]]:
    """Undirected connected overlay as sorted per-node neighbor tuples.

    Deterministic in (n, topology, degree, seed).  Random regular graphs are
    sampled by stub pairing and resampled with the next sub-seed until the
    result is connected; the degree is capped at n - 1 (which turns small
    groups into complete graphs).
    """
    if topology == "complete":
        return [tuple(j for j in range(n) if j != i) for i in range(n)]
    if topology != "random_regular":
        raise InvalidConfig(f"unknown topology {topology!r}")
    k = min(degree, n - 1)
    if (n * k) % 2 != 0:
        raise InvalidConfig(f"n * degree must be even, got n={n}, degree={k}")
    if k == n - 1:
        return build_overlay(n, "complete", seed)
    for attempt in range(100):
        rng = Random(mix_seed(seed, attempt))
        edges = _sample_regular(n, k, rng)
        if edges is not None and _connected(n, edges):
            adjacency: list[list[int]] = [[] for _ in range(n)]
            for a, b in edges:
                adjacency[a].append(b)
                adjacency[b].append(a)
            return [tuple(sorted(nbrs)) for nbrs in adjacency]
    raise DisconnectedAfterRetries(
        f"no connected {k}-regular graph on {n} nodes after 100 attempts"
    )


def _sample_regular(n: int, k: int, rng: Random) -> Optional[set[tuple[int, int]]]:
    # Stub pairing with collision repair (the NetworkX approach): pair all
    # stubs, then keep re-pairing just the stubs left over by self-loops and
    # duplicate edges, until none remain or no suitable pair exists.
    edges: set[tuple[int, int]] = set()
    stubs = list(range(n)) * k
    while stubs:
        collisions: dict[int, int] = {}
        rng.shuffle(stubs)
        for a, b in zip(stubs[::2], stubs[1::2]):
            if a > b:
                a, b = b, a
            if a != b and (a, b) not in edges:
                edges.add((a, b))
            else:
                collisions[a] = collisions.get(a, 0) + 1
                collisions[b] = collisions.get(b, 0) + 1
        if collisions and not _repairable(edges, collisions):
            return None
        stubs = [node for node, count in collisions.items() for _ in range(count)]
    return edges


def _repairable(edges: set[tuple[int, int]], stubs: dict[int, int]) -> bool:
    for a in stubs:
        for b in stubs:
            if a == b:
                break
            if (min(a, b), max(a, b)) not in edges:
                return True
    return False


def _connected(n: int, edges: set[tuple[int, int]]) -> bool:
    adjacency: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adjacency[a].append(b)
        adjacency[b].append(a)
    seen = {0}
    stack = [0]
    while stack:
        for nbr in adjacency[stack.pop()]:
            if nbr not in seen:
                seen.add(nbr)
                stack.append(nbr)
    return len(seen) == n


# -- experiment -------------------------------------------------------------

TraceSink = Callable[[str], None]


@dataclass(frozen=True)
class _Transmission:
    message: BeliefChangeMessage
    to_node: int


def _template_kb(cfg: ExperimentConfig) -> KnowledgeBase:
    try:
        kb = jkb.load_text(cfg.fixture_text())
    except (KbError, OSError) as exc:
        raise FixtureError(f"cannot load fixture: {exc}") from exc
    if not kb.is_datum(cfg.target_datum):
        raise FixtureError(f"target datum {cfg.target_datum!r} not in fixture")
    if not kb.is_justification(cfg.changed_justification):
        raise FixtureError(
            f"changed justification {cfg.changed_justification!r} not in fixture"
        )
    # Pre-set every other justification so the target datum hinges on the
    # changed one alone.
    for name in kb.justifications():
        if name != cfg.changed_justification:
            kb.set_presence(name, Provenance.generated())
    return kb


def _single_run(
    cfg: ExperimentConfig,
    run_index: int,
    template: KnowledgeBase,
    trace: Optional[TraceSink],
) -> RunMetrics:
    run_seed = mix_seed(cfg.seed, run_index)
    rng_setup = Random(mix_seed(run_seed, _STREAM_SETUP))
    rng_loss = Random(mix_seed(run_seed, _STREAM_LOSS))
    rng_decision = Random(mix_seed(run_seed, _STREAM_DECISION))

    n = cfg.group_size
    overlay = build_overlay(
        n, cfg.topology, mix_seed(run_seed, _STREAM_TOPOLOGY), cfg.degree
    )
    strategy = cfg.strategy_config()
    nodes = [Node(i, template.copy(), strategy, overlay[i]) for i in range(n)]

    crashed = [rng_setup.random() < cfg.crash_prob for _ in range(n)]
    live = [i for i in range(n) if not crashed[i]]
    if not live:
        # Degenerate draw; keep the origin alive so the run is measurable.
        revived = rng_setup.randrange(n)
        crashed[revived] = False
        live = [revived]
    origin = rng_setup.choice(live)

    sent = delivered = lost = 0
    in_flight: dict[int, list[_Transmission]] = {}
    expiries: dict[int, list[tuple[int, tuple[int, int]]]] = {}

    def enqueue(cycle: int, sends) -> None:
        nonlocal sent
        for to_node, message in sends:
            sent += 1
            if trace:
                trace(trace_line(cycle, "send", message, message.sender, to_node))
            in_flight.setdefault(cycle + cfg.delay, []).append(
                _Transmission(message, to_node)
            )

    enqueue(0, nodes[origin].on_local_change(cfg.changed_justification, Action.ASSERT, 0))

    cycle = 0
    while in_flight or expiries:
        cycle += 1
        outgoing = []
        for item in in_flight.pop(cycle, []):
            message = item.message
            if rng_loss.random() < cfg.loss_prob:
                lost += 1
                if trace:
                    trace(trace_line(cycle, "deliver_fail", message, message.sender, item.to_node))
                continue
            delivered += 1
            if crashed[item.to_node]:
                if trace:
                    trace(trace_line(cycle, "drop", message, message.sender, item.to_node))
                continue
            node = nodes[item.to_node]
            try:
                decision = node.on_receive(message, cycle)
            except UnknownSymbol:
                decision = None
            if decision is None or decision.kind is DecisionKind.DROP:
                if trace:
                    trace(trace_line(cycle, "drop", message, message.sender, item.to_node))
                continue
            if trace:
                trace(trace_line(cycle, "recv", message, message.sender, item.to_node))
            if decision.kind is DecisionKind.FORWARD:
                outgoing.extend(decision.sends)
            else:
                expiries.setdefault(decision.at, []).append(
                    (item.to_node, message.change_id)
                )
        for node_id, change_id in expiries.pop(cycle, []):
            decision = nodes[node_id].on_backoff_expiry(
                change_id, cycle, rng_decision.random()
            )
            if decision.kind is DecisionKind.FORWARD:
                outgoing.extend(decision.sends)
        enqueue(cycle, outgoing)

    quiescence = cycle + 1
    origin_in = nodes[origin].kb.label(cfg.target_datum).is_in
    coherent = sum(
        1 for i in live if nodes[i].kb.label(cfg.target_datum).is_in == origin_in
    )
    return RunMetrics(
        run=run_index,
        messages_sent=sent,
        messages_delivered=delivered,
        messages_lost=lost,
        coherent_fraction=coherent / len(live),
        cycles_to_quiescence=quiescence,
    )


def run_experiment(
    cfg: ExperimentConfig, trace: Optional[TraceSink] = None
) -> Metrics:
    """Run cfg.runs independent repetitions and collect their metrics."""
    cfg.validate()
    template = _template_kb(cfg)
    return Metrics(
        tuple(
            _single_run(cfg, run_index, template, trace)
            for run_index in range(cfg.runs)
        )
    )


def sweep(
    cfg: ExperimentConfig, axis: str, values: Sequence
) -> list[tuple[float, Metrics]]:
    """One Metrics row per axis value; deterministic given cfg.seed."""
    if axis not in AXES:
        raise InvalidConfig(f"axis must be one of {AXES}")
    if not values:
        raise InvalidConfig("axis values must be non-empty")
    rows = []
    for value in values:
        coerced = int(value) if axis == "group_size" else float(value)
        row_cfg = dataclasses.replace(cfg, **{axis: coerced})
        rows.append((coerced, run_experiment(row_cfg)))
    return rows


# -- config files and CSV output ---------------------------------------------

_CONFIG_EXTRA_KEYS = ("axis", "values")


def parse_config_text(text: str) -> tuple[dict, dict]:
    """Parse ``key = value`` lines into (config fields, extra sweep keys)."""
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    values: dict = {}
    extras: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"config line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in _CONFIG_EXTRA_KEYS:
            extras[key] = value
            continue
        if key not in fields:
            raise InvalidConfig(f"config line {lineno}: unknown key {key!r}")
        values[key] = _coerce(fields[key].type, value, key)
    return values, extras


def _coerce(annotation: str, value: str, key: str):
    if annotation == "int":
        try:
            return int(value)
        except ValueError as exc:
            raise InvalidConfig(f"{key} must be an integer, got {value!r}") from exc
    if annotation == "float":
        try:
            return float(value)
        except ValueError as exc:
            raise InvalidConfig(f"{key} must be a number, got {value!r}") from exc
    if annotation.startswith("Optional"):
        return value or None
    return value


def load_config(path: str, **overrides) -> ExperimentConfig:
    values, _ = parse_config_text(Path(path).read_text(encoding="utf-8"))
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise InvalidConfig(str(exc)) from exc
    cfg.validate()
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for field in dataclasses.fields(ExperimentConfig):
        value = getattr(cfg, field.name)
        if value is None:
            continue
        lines.append(f"{field.name} = {value}")
    return "\n".join(lines) + "\n"


RESULT_COLUMNS = (
    "axis",
    "axis_value",
    "run",
    "messages_sent",
    "messages_delivered",
    "coherent_fraction",
    "cycles_to_quiescence",
)

SUMMARY_COLUMNS = (
    "axis",
    "axis_value",
    "runs",
    "mean_messages_sent",
    "ci95_messages_sent",
    "mean_messages_delivered",
    "ci95_messages_delivered",
    "mean_coherent_fraction",
    "ci95_coherent_fraction",
    "mean_cycles_to_quiescence",
    "ci95_cycles_to_quiescence",
)


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def write_results_csv(
    path: Path, axis: str, rows: Sequence[tuple[float, Metrics]]
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(RESULT_COLUMNS)
        for axis_value, metrics in rows:
            for run in metrics.runs:
                writer.writerow(
                    (
                        axis,
                        axis_value,
                        run.run,
                        run.messages_sent,
                        run.messages_delivered,
                        _fmt(run.coherent_fraction),
                        run.cycles_to_quiescence,
                    )
                )


def write_summary_csv(
    path: Path, axis: str, rows: Sequence[tuple[float, Metrics]], note: str = ""
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        if note:
            handle.write(f"# {note}\n")
        writer = csv.writer(handle)
        writer.writerow(SUMMARY_COLUMNS)
        for axis_value, metrics in rows:
            writer.writerow(
                (
                    axis,
                    axis_value,
                    len(metrics.runs),
                    _fmt(metrics.mean("messages_sent")),
                    _fmt(metrics.ci95("messages_sent")),
                    _fmt(metrics.mean("messages_delivered")),
                    _fmt(metrics.ci95("messages_delivered")),
                    _fmt(metrics.mean("coherent_fraction")),
                    _fmt(metrics.ci95("coherent_fraction")),
                    _fmt(metrics.mean("cycles_to_quiescence")),
                    _fmt(metrics.ci95("cycles_to_quiescence")),
                )
            )
