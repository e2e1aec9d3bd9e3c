"""Parser and renderer for the .jkb knowledge-base text format.

The format is a small Prolog-style surface syntax with exactly five clause
forms and no evaluation:

    justification(adm_cmd).
    generated(adm_cmd).                        % or received(adm_cmd).
    justificationIsPresent(X) :- generated(X). % fixed bridge rule
    datum(qos_pol) :- justificationIsPresent(adm_cmd), datum(other).
    datumIsInternal(qos_pol) :- generated(adm_cmd), datumIsInternal(other).

The two ``justificationIsPresent`` bridge rules are boilerplate: they are
validated verbatim and otherwise ignored, their meaning is hard-coded in
the engine.  ``X`` is reserved for the bridge rules.  ``%`` starts a
comment.  Whitespace and newlines are insignificant; every clause ends
with a dot.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .kb import (
    Antecedent,
    AntecedentKind,
    KbError,
    KnowledgeBase,
    DatumDefinition,
    Provenance,
    ProvenanceKind,
    StateReport,
)

# Source recorded for received(...) facts; the text format carries no peer id.
FILE_SOURCE = "peer"


class ParseError(KbError):
    """Syntax error with position and what was expected instead."""

    def __init__(self, line: int, col: int, expected: str):
        self.line = line
        self.col = col
        self.expected = expected
        super().__init__(f"line {line}, col {col}: expected {expected}")


class IncoherentRulePair(KbError):
    """datum(...) and datumIsInternal(...) rules disagree for one datum."""


class ClauseKind(Enum):
    JUSTIFICATION_DECL = "justification_decl"
    GENERATED_FACT = "generated_fact"
    RECEIVED_FACT = "received_fact"
    PRESENCE_BRIDGE = "presence_bridge"
    DATUM_RULE = "datum_rule"
    DATUM_INTERNAL_RULE = "datum_internal_rule"


@dataclass(frozen=True)
class BodyAtom:
    functor: str
    arg: str


@dataclass(frozen=True)
class Clause:
    kind: ClauseKind
    name: str  # declared/fact/datum name; bridge kind for bridges
    body: tuple[BodyAtom, ...] = ()
    line: int = 0


@dataclass(frozen=True)
class Program:
    clauses: tuple[Clause, ...]


_HEAD_FUNCTORS = (
    "justification",
    "generated",
    "received",
    "justificationIsPresent",
    "datum",
    "datumIsInternal",
)
_DATUM_BODY_FUNCTORS = ("justificationIsPresent", "datum")
_INTERNAL_BODY_FUNCTORS = ("generated", "datumIsInternal")


@dataclass(frozen=True)
class _Token:
    kind: str  # "name", "(", ")", ":-", ",", ".", "eof"
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch in " \t\r":
            col += 1
            i += 1
        elif ch == "%":
            while i < n and text[i] != "\n":
                i += 1
        elif ch.isalpha():
            start = i
            start_col = col
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
                col += 1
            tokens.append(_Token("name", text[start:i], line, start_col))
        elif ch in "(),.":
            tokens.append(_Token(ch, ch, line, col))
            i += 1
            col += 1
        elif ch == ":":
            if i + 1 < n and text[i + 1] == "-":
                tokens.append(_Token(":-", ":-", line, col))
                i += 2
                col += 2
            else:
                raise ParseError(line, col, "':-'")
        else:
            raise ParseError(line, col, "clause text")
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self._tokens = _tokenize(text)
        self._pos = 0

    def _peek(self) -> _Token:
        return self._tokens[self._pos]

    def _take(self, kind: str, expected: str) -> _Token:
        token = self._tokens[self._pos]
        if token.kind != kind:
            raise ParseError(token.line, token.col, expected)
        self._pos += 1
        return token

    def _atom(self, expected: str) -> tuple[BodyAtom, _Token]:
        functor = self._take("name", expected)
        self._take("(", "'('")
        arg = self._take("name", "identifier")
        self._take(")", "')'")
        return BodyAtom(functor.text, arg.text), functor

    def parse(self) -> Program:
        clauses: list[Clause] = []
        while self._peek().kind != "eof":
            clauses.append(self._clause())
        program = Program(tuple(clauses))
        _check_rule_pairs(program)
        return program

    def _clause(self) -> Clause:
        head, head_token = self._atom("one of " + ", ".join(_HEAD_FUNCTORS))
        if head.functor not in _HEAD_FUNCTORS:
            raise ParseError(
                head_token.line, head_token.col, "one of " + ", ".join(_HEAD_FUNCTORS)
            )
        if self._peek().kind == ":-":
            self._take(":-", "':-'")
            body = [self._atom("body atom")[0]]
            while self._peek().kind == ",":
                self._take(",", "','")
                body.append(self._atom("body atom")[0])
            self._take(".", "'.'")
            return self._classify_rule(head, tuple(body), head_token)
        self._take(".", "'.' or ':-'")
        return self._classify_fact(head, head_token)

    def _classify_fact(self, head: BodyAtom, token: _Token) -> Clause:
        if head.arg == "X":
            raise ParseError(token.line, token.col, "identifier ('X' is reserved)")
        if head.functor == "justification":
            return Clause(ClauseKind.JUSTIFICATION_DECL, head.arg, line=token.line)
        if head.functor == "generated":
            return Clause(ClauseKind.GENERATED_FACT, head.arg, line=token.line)
        if head.functor == "received":
            return Clause(ClauseKind.RECEIVED_FACT, head.arg, line=token.line)
        raise ParseError(token.line, token.col, "a fact or a rule with ':-'")

    def _classify_rule(
        self, head: BodyAtom, body: tuple[BodyAtom, ...], token: _Token
    ) -> Clause:
        if head.functor == "justificationIsPresent":
            if (
                head.arg == "X"
                and len(body) == 1
                and body[0].functor in ("generated", "received")
                and body[0].arg == "X"
            ):
                return Clause(
                    ClauseKind.PRESENCE_BRIDGE, body[0].functor, body, token.line
                )
            raise ParseError(
                token.line,
                token.col,
                "the fixed bridge rule justificationIsPresent(X) :- generated(X)"
                " or ... :- received(X)",
            )
        if head.arg == "X":
            raise ParseError(token.line, token.col, "identifier ('X' is reserved)")
        if head.functor == "datum":
            allowed = _DATUM_BODY_FUNCTORS
            kind = ClauseKind.DATUM_RULE
        elif head.functor == "datumIsInternal":
            allowed = _INTERNAL_BODY_FUNCTORS
            kind = ClauseKind.DATUM_INTERNAL_RULE
        else:
            raise ParseError(token.line, token.col, "'datum' or 'datumIsInternal' rule")
        for atom in body:
            if atom.functor not in allowed or atom.arg == "X":
                raise ParseError(
                    token.line,
                    token.col,
                    f"body atoms of {head.functor}({head.arg}) among "
                    + ", ".join(f"{f}(...)" for f in allowed),
                )
        return Clause(kind, head.arg, body, token.line)


def _rule_antecedents(clause: Clause) -> tuple[Antecedent, ...]:
    if clause.kind is ClauseKind.DATUM_RULE:
        datum_functor = "datum"
    else:
        datum_functor = "datumIsInternal"
    return tuple(
        Antecedent(
            atom.arg,
            AntecedentKind.DATUM
            if atom.functor == datum_functor
            else AntecedentKind.JUSTIFICATION,
        )
        for atom in clause.body
    )


def _check_rule_pairs(program: Program) -> None:
    datum_rules: dict[str, Clause] = {}
    internal_rules: dict[str, Clause] = {}
    for clause in program.clauses:
        if clause.kind is ClauseKind.DATUM_RULE:
            if clause.name in datum_rules:
                raise IncoherentRulePair(f"duplicate datum rule for {clause.name!r}")
            datum_rules[clause.name] = clause
        elif clause.kind is ClauseKind.DATUM_INTERNAL_RULE:
            if clause.name in internal_rules:
                raise IncoherentRulePair(
                    f"duplicate datumIsInternal rule for {clause.name!r}"
                )
            internal_rules[clause.name] = clause
    for name in set(datum_rules) | set(internal_rules):
        if name not in datum_rules:
            raise IncoherentRulePair(f"{name!r} has no datum rule")
        if name not in internal_rules:
            raise IncoherentRulePair(f"{name!r} has no datumIsInternal rule")
        plain = set(_rule_antecedents(datum_rules[name]))
        internal = set(_rule_antecedents(internal_rules[name]))
        if plain != internal:
            raise IncoherentRulePair(
                f"rules for {name!r} disagree on antecedents:"
                f" {sorted(a.target for a in plain ^ internal)}"
            )


def parse_program(text: str) -> Program:
    """Parse .jkb text into a Program, or raise ParseError/IncoherentRulePair."""
    return _Parser(text).parse()


def load(program: Program, kb: Optional[KnowledgeBase] = None) -> KnowledgeBase:
    """Install a parsed program into a knowledge base.

    Declarations and datum definitions are installed in program order (a
    datum is defined once both of its rules have been seen); presence facts
    are applied after all definitions.
    """
    if kb is None:
        kb = KnowledgeBase()
    pending_rules: dict[str, Clause] = {}
    facts: list[Clause] = []
    for clause in program.clauses:
        if clause.kind is ClauseKind.JUSTIFICATION_DECL:
            kb.declare_justification(clause.name)
        elif clause.kind in (ClauseKind.GENERATED_FACT, ClauseKind.RECEIVED_FACT):
            facts.append(clause)
        elif clause.kind in (ClauseKind.DATUM_RULE, ClauseKind.DATUM_INTERNAL_RULE):
            partner = pending_rules.pop(clause.name, None)
            if partner is None:
                pending_rules[clause.name] = clause
            else:
                # Antecedent order in reports follows the datum(...) rule.
                source = clause if clause.kind is ClauseKind.DATUM_RULE else partner
                kb.define_datum(DatumDefinition(clause.name, _rule_antecedents(source)))
        # Bridges carry no information beyond their verbatim shape.
    for clause in facts:
        if clause.kind is ClauseKind.GENERATED_FACT:
            kb.set_presence(clause.name, Provenance.generated())
        else:
            kb.set_presence(clause.name, Provenance.received(FILE_SOURCE))
    return kb


def load_text(text: str) -> KnowledgeBase:
    return load(parse_program(text))


def render_report(report: StateReport) -> str:
    """Render a state report as ``name:state (ant:tag ant:tag)``."""
    inner = " ".join(f"{name}:{tag}" for name, tag in report.support)
    return f"{report.datum}:{report.state.value} ({inner})"


def render_program(kb: KnowledgeBase) -> str:
    """Pretty-print a knowledge base back into .jkb text (inverse of load)."""
    lines = [f"justification({name})." for name in kb.justifications()]
    lines.append("justificationIsPresent(X) :- generated(X).")
    lines.append("justificationIsPresent(X) :- received(X).")
    for name in kb.data():
        definition = kb.definition(name)
        plain = []
        internal = []
        for ant in definition.antecedents:
            if ant.kind is AntecedentKind.JUSTIFICATION:
                plain.append(f"justificationIsPresent({ant.target})")
                internal.append(f"generated({ant.target})")
            else:
                plain.append(f"datum({ant.target})")
                internal.append(f"datumIsInternal({ant.target})")
        lines.append(f"datum({name}) :- " + ", ".join(plain) + ".")
        lines.append(f"datumIsInternal({name}) :- " + ", ".join(internal) + ".")
    for name in kb.justifications():
        presence = kb.presence(name)
        if presence is None:
            continue
        functor = (
            "generated" if presence.kind is ProvenanceKind.GENERATED else "received"
        )
        lines.append(f"{functor}({name}).")
    return "\n".join(lines) + "\n"


def report_lines(kb: KnowledgeBase) -> list[str]:
    """One rendered report line per datum, in definition order."""
    return [render_report(kb.query(name)) for name in kb.data()]
