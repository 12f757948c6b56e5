"""The construct-rule DSL: parser, canonical printer, and evaluator.

A rule is a restricted SPARQL-style CONSTRUCT query:

    # rule: box_t32_h80_w17.5
    CONSTRUCT {
      ?FireEvent_1 prov:atLocation ?node .
      ?FireEvent_1 prov:atTime ?T .
      ?FireEvent_1 rdf:type fwi:High .
    }
    WHERE {
      ?RH_OB1 ssn:ObservedProperty cf:relative_humidity .
      ...
      FILTER(?RH_OB1V >= 80 && ?RH_OB1V <= 100 && ...)
    }

Keywords are case-insensitive, 'a' abbreviates rdf:type, '#' starts a
comment, and the construct block is restricted to the three-triple event
shape (atLocation / atTime / rdf:type) around a single fresh event
variable. Event IRIs are deterministic hashes of (rule name, node, time),
so re-running a rule reproduces identical triples.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from . import vocab
from .core import DomainError, FwiClass
from .store import (
    Comparison,
    IRI,
    Literal,
    TripleIndex,
    TriplePattern,
    Triple,
    Var,
    match_bgp,
)


class RuleSyntaxError(DomainError):
    def __init__(self, message: str, line: int, col: int) -> None:
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Rule:
    """One parsed construct rule.

    The single construct-subject variable is the fresh event token and must
    not occur in the where block; every other construct or filter variable
    must be bound by a where pattern.
    """

    name: str
    construct_templates: Tuple[TriplePattern, ...]
    where_patterns: Tuple[TriplePattern, ...]
    filters: Tuple[Comparison, ...] = ()
    prefixes: Dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        event, location, time_var, _ = _validate_rule(
            self.name, self.construct_templates, self.where_patterns, self.filters
        )
        object.__setattr__(self, "_event_var", event)
        object.__setattr__(self, "_location_var", location)
        object.__setattr__(self, "_time_var", time_var)

    @property
    def event_var(self) -> str:
        return self._event_var

    @property
    def location_var(self) -> str:
        return self._location_var

    @property
    def time_var(self) -> str:
        return self._time_var

    @property
    def class_iri(self) -> IRI:
        for s, p, o in self.construct_templates:
            if isinstance(p, IRI) and p.value == vocab.RDF_TYPE:
                return o
        raise DomainError("rule lacks an rdf:type template")  # unreachable after validation

    def fwi_class(self) -> FwiClass:
        return FwiClass.from_ontology_name(self.class_iri.value[len(vocab.FWI):])


def _where_vars(patterns: Sequence[TriplePattern]) -> Set[str]:
    return {part.name for pattern in patterns for part in pattern if isinstance(part, Var)}


def _validate_rule(name, templates, where_patterns, filters):
    if not name or "\n" in name:
        raise DomainError(f"invalid rule name: {name!r}")
    if len(templates) != 3:
        raise DomainError(
            f"rule {name}: construct block must hold exactly 3 templates, got {len(templates)}"
        )
    bound = _where_vars(where_patterns)
    subjects = {s.name for s, _, _ in templates if isinstance(s, Var)}
    if len(subjects) != 1:
        raise DomainError(f"rule {name}: construct templates must share one subject variable")
    event = subjects.pop()
    if event in bound:
        raise DomainError(f"rule {name}: event variable ?{event} must be fresh, not where-bound")

    by_predicate = {}
    for s, p, o in templates:
        if not isinstance(p, IRI):
            raise DomainError(f"rule {name}: construct predicates must be constants")
        by_predicate[p.value] = o
    expected = {vocab.PROV_AT_LOCATION, vocab.PROV_AT_TIME, vocab.RDF_TYPE}
    if set(by_predicate) != expected:
        got = sorted(vocab.compact(p) for p in by_predicate)
        raise DomainError(
            f"rule {name}: construct must assert exactly atLocation/atTime/type, got {got}"
        )
    location = by_predicate[vocab.PROV_AT_LOCATION]
    time_term = by_predicate[vocab.PROV_AT_TIME]
    class_term = by_predicate[vocab.RDF_TYPE]
    if not isinstance(location, Var) or location.name == event:
        raise DomainError(f"rule {name}: atLocation object must be a where-bound variable")
    if not isinstance(time_term, Var) or time_term.name == event:
        raise DomainError(f"rule {name}: atTime object must be a where-bound variable")
    for var in (location, time_term):
        if var.name not in bound:
            raise DomainError(f"rule {name}: construct variable ?{var.name} is unbound")
    if not isinstance(class_term, IRI) or not class_term.value.startswith(vocab.FWI):
        raise DomainError(f"rule {name}: rdf:type object must be an fwi: class IRI")
    fwi_class = FwiClass.from_ontology_name(class_term.value[len(vocab.FWI):])

    for comparison in filters:
        if comparison.var not in bound:
            raise DomainError(
                f"rule {name}: filter variable ?{comparison.var} is unbound"
            )
    _check_filter_intervals(name, filters)
    return event, location.name, time_term.name, fwi_class


def _check_filter_intervals(name: str, filters: Sequence[Comparison]) -> None:
    """Reject filters whose comparisons on one variable exclude every value."""
    lower: Dict[str, Tuple[float, bool]] = {}  # var -> (bound, strict)
    upper: Dict[str, Tuple[float, bool]] = {}

    def tighten(store, var, bound, strict, keep_max):
        if var not in store:
            store[var] = (bound, strict)
            return
        current, current_strict = store[var]
        if bound == current:
            store[var] = (bound, strict or current_strict)
        elif (bound > current) == keep_max:
            store[var] = (bound, strict)

    for c in filters:
        if c.op in (">", ">="):
            tighten(lower, c.var, c.value, c.op == ">", keep_max=True)
        elif c.op in ("<", "<="):
            tighten(upper, c.var, c.value, c.op == "<", keep_max=False)
        else:  # '='
            tighten(lower, c.var, c.value, False, keep_max=True)
            tighten(upper, c.var, c.value, False, keep_max=False)
    for var in set(lower) & set(upper):
        lo, lo_strict = lower[var]
        hi, hi_strict = upper[var]
        if lo > hi or (lo == hi and (lo_strict or hi_strict)):
            raise DomainError(f"rule {name}: filter on ?{var} defines an empty interval")


@dataclass
class RuleSet:
    rules: Tuple[Rule, ...]
    metadata: Dict[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        self.rules = tuple(self.rules)
        names = [r.name for r in self.rules]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DomainError(f"duplicate rule names: {dupes}")

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for rule in self.rules:
            digest.update(serialize_rule(rule).encode("utf-8"))
        return digest.hexdigest()


# --- tokenizer ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<iriref><[^<>\s]+>)
  | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
  | (?P<number>[+-]?(?:\d+\.\d*|\.\d+|\d+))
  | (?P<and>&&)
  | (?P<op><=|>=|<|>|=)
  | (?P<punct>[{}().])
  | (?P<qname>[A-Za-z_][A-Za-z0-9_\-]*:[A-Za-z0-9_\-]*)
  | (?P<name>[A-Za-z_][A-Za-z0-9_\-]*)
    """,
    re.VERBOSE,
)

_NAME_COMMENT_RE = re.compile(r"#\s*rule:\s*(\S+)")


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> Tuple[List[_Token], Optional[str]]:
    tokens: List[_Token] = []
    name: Optional[str] = None
    line = 1
    line_start = 0
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            col = pos - line_start + 1
            raise RuleSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = match.lastgroup
        token_text = match.group()
        col = pos - line_start + 1
        if kind == "comment":
            found = _NAME_COMMENT_RE.match(token_text)
            if found and name is None:
                name = found.group(1)
        elif kind != "ws":
            tokens.append(_Token(kind, token_text, line, col))
        newlines = token_text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + token_text.rindex("\n") + 1
        pos = match.end()
    return tokens, name


class _Parser:
    def __init__(self, tokens: List[_Token], prefixes: Dict[str, str]) -> None:
        self.tokens = tokens
        self.pos = 0
        self.prefixes = dict(prefixes)

    def error(self, message: str) -> RuleSyntaxError:
        if self.pos < len(self.tokens):
            token = self.tokens[self.pos]
            return RuleSyntaxError(f"{message}, got {token.text!r}", token.line, token.col)
        last = self.tokens[-1] if self.tokens else _Token("eof", "", 1, 1)
        return RuleSyntaxError(f"{message}, got end of input", last.line, last.col)

    def peek(self) -> Optional[_Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        token = self.peek()
        if token is None:
            raise self.error("unexpected end of input")
        self.pos += 1
        return token

    def at_keyword(self, word: str) -> bool:
        token = self.peek()
        return token is not None and token.kind == "name" and token.text.lower() == word

    def expect_punct(self, char: str) -> None:
        token = self.peek()
        if token is None or token.kind != "punct" or token.text != char:
            raise self.error(f"expected {char!r}")
        self.pos += 1

    def parse_prefixes(self) -> None:
        while self.at_keyword("prefix"):
            self.next()
            qname = self.next()
            if qname.kind != "qname" or not qname.text.endswith(":"):
                raise RuleSyntaxError("expected 'prefix:' after PREFIX", qname.line, qname.col)
            iriref = self.next()
            if iriref.kind != "iriref":
                raise RuleSyntaxError("expected <iri> in PREFIX", iriref.line, iriref.col)
            self.prefixes[qname.text[:-1]] = iriref.text[1:-1]

    def resolve_qname(self, token: _Token) -> IRI:
        prefix, _, local = token.text.partition(":")
        if prefix not in self.prefixes:
            raise RuleSyntaxError(f"unknown prefix {prefix!r}", token.line, token.col)
        return IRI(self.prefixes[prefix] + local)

    def parse_term(self, position: str):
        token = self.next()
        if token.kind == "var":
            return Var(token.text[1:])
        if token.kind == "iriref":
            return IRI(token.text[1:-1])
        if token.kind == "qname":
            return self.resolve_qname(token)
        if token.kind == "name" and token.text == "a" and position == "predicate":
            return IRI(vocab.RDF_TYPE)
        if token.kind == "number" and position == "object":
            return Literal.decimal(token.text)
        raise RuleSyntaxError(
            f"expected a {position} term, got {token.text!r}", token.line, token.col
        )

    def parse_pattern_block(self, allow_filter: bool):
        self.expect_punct("{")
        patterns: List[TriplePattern] = []
        filters: List[Comparison] = []
        while True:
            token = self.peek()
            if token is None:
                raise self.error("unterminated block, expected '}'")
            if token.kind == "punct" and token.text == "}":
                self.pos += 1
                break
            if allow_filter and self.at_keyword("filter"):
                if filters:
                    raise RuleSyntaxError("only one FILTER allowed", token.line, token.col)
                self.next()
                filters = self.parse_filter()
                continue
            s = self.parse_term("subject")
            p = self.parse_term("predicate")
            o = self.parse_term("object")
            patterns.append((s, p, o))
            after = self.peek()
            if after is not None and after.kind == "punct" and after.text == ".":
                self.pos += 1
        return tuple(patterns), tuple(filters)

    def parse_filter(self) -> List[Comparison]:
        self.expect_punct("(")
        comparisons: List[Comparison] = []
        while True:
            var = self.next()
            if var.kind != "var":
                raise RuleSyntaxError(
                    f"filter comparisons start with a variable, got {var.text!r}",
                    var.line,
                    var.col,
                )
            op = self.next()
            if op.kind != "op":
                raise RuleSyntaxError(f"expected comparison operator", op.line, op.col)
            number = self.next()
            if number.kind != "number":
                raise RuleSyntaxError(
                    f"expected numeric constant, got {number.text!r}", number.line, number.col
                )
            comparisons.append(Comparison(var.text[1:], op.text, float(number.text)))
            token = self.peek()
            if token is not None and token.kind == "and":
                self.pos += 1
                continue
            break
        self.expect_punct(")")
        return comparisons


def parse_rule(text: str, default_name: Optional[str] = None) -> Rule:
    """Parse one rule; the '# rule: NAME' header names it when present."""
    tokens, name = _tokenize(text)
    parser = _Parser(tokens, vocab.PREFIXES)
    parser.parse_prefixes()
    if not parser.at_keyword("construct"):
        raise parser.error("expected CONSTRUCT")
    parser.next()
    templates, _ = parser.parse_pattern_block(allow_filter=False)
    if not parser.at_keyword("where"):
        raise parser.error("expected WHERE")
    parser.next()
    where_patterns, filters = parser.parse_pattern_block(allow_filter=True)
    if parser.peek() is not None:
        raise parser.error("trailing input after rule")
    if name is None:
        name = default_name or "r" + hashlib.sha256(text.encode("utf-8")).hexdigest()[:10]
    return Rule(
        name=name,
        construct_templates=templates,
        where_patterns=where_patterns,
        filters=tuple(filters),
        prefixes=parser.prefixes,
    )


RULE_SEPARATOR = "\n---\n"


def parse_rules(text: str) -> RuleSet:
    """Parse a '---'-separated multi-rule document."""
    chunks = [chunk for chunk in re.split(r"^---\s*$", text, flags=re.M) if chunk.strip()]
    rules = []
    for i, chunk in enumerate(chunks):
        rules.append(parse_rule(chunk, default_name=f"rule{i + 1}"))
    return RuleSet(tuple(rules))


def _format_number(value: float) -> str:
    return f"{value:g}"


def _term_text(term) -> str:
    if isinstance(term, Var):
        return f"?{term.name}"
    if isinstance(term, IRI):
        compacted = vocab.compact(term.value)
        return compacted if compacted != term.value else f"<{term.value}>"
    if isinstance(term, Literal):
        return term.lexical if term.datatype == "decimal" else f'"{term.lexical}"'
    raise DomainError(f"cannot serialize term {term!r}")


def serialize_rule(rule: Rule) -> str:
    """Canonical text form; parse(serialize(r)) == r."""
    lines = [f"# rule: {rule.name}", "CONSTRUCT {"]
    for s, p, o in rule.construct_templates:
        lines.append(f"  {_term_text(s)} {_term_text(p)} {_term_text(o)} .")
    lines.append("}")
    lines.append("WHERE {")
    for s, p, o in rule.where_patterns:
        lines.append(f"  {_term_text(s)} {_term_text(p)} {_term_text(o)} .")
    if rule.filters:
        parts = [f"?{c.var} {c.op} {_format_number(c.value)}" for c in rule.filters]
        lines.append(f"  FILTER({' && '.join(parts)})")
    lines.append("}")
    return "\n".join(lines) + "\n"


def serialize_rules(ruleset: RuleSet) -> str:
    return RULE_SEPARATOR.join(serialize_rule(rule) for rule in ruleset.rules)


# --- evaluation --------------------------------------------------------------


def event_iri(rule_name: str, node: IRI, time_lexical: str) -> IRI:
    digest = hashlib.sha256(f"{rule_name}|{node.value}|{time_lexical}".encode("utf-8"))
    return IRI(vocab.EVENT_BASE + digest.hexdigest()[:24])


@dataclass(frozen=True)
class RuleHit:
    """One (rule, node, slot) match, ready to become an event."""

    rule: Rule
    node: IRI
    time: datetime
    time_lexical: str

    def fwi_class(self) -> FwiClass:
        return self.rule.fwi_class()

    def event(self) -> IRI:
        return event_iri(self.rule.name, self.node, self.time_lexical)


def _binding_hit(rule: Rule, binding: Dict[str, object]) -> Optional[RuleHit]:
    node = binding.get(rule.location_var)
    time_term = binding.get(rule.time_var)
    if not isinstance(node, IRI) or not isinstance(time_term, Literal):
        return None
    when = time_term.time()
    if when is None:
        return None
    return RuleHit(rule=rule, node=node, time=when, time_lexical=time_term.lexical)


def rule_hits(rule: Rule, source) -> List[RuleHit]:
    """Evaluate one rule against graphs or a prebuilt TripleIndex."""
    hits = []
    for binding in match_bgp(source, rule.where_patterns, rule.filters):
        hit = _binding_hit(rule, binding)
        if hit is not None:
            hits.append(hit)
    return hits


def hit_triples(hit: RuleHit) -> Set[Triple]:
    """Instantiate the construct templates for one hit."""
    event = hit.event()
    substitution = {
        hit.rule.event_var: event,
        hit.rule.location_var: hit.node,
        hit.rule.time_var: Literal(hit.time_lexical, "dateTime"),
    }
    out = set()
    for s, p, o in hit.rule.construct_templates:
        ground_s = substitution[s.name] if isinstance(s, Var) else s
        ground_o = substitution[o.name] if isinstance(o, Var) else o
        out.add(Triple(ground_s, p, ground_o))
    return out


def apply_rule(rule: Rule, source) -> Set[Triple]:
    """All construct-template instantiations over the rule's bindings."""
    out: Set[Triple] = set()
    for hit in rule_hits(rule, source):
        out |= hit_triples(hit)
    return out


def _signature(rule: Rule):
    """BGP shape with variables renamed by first occurrence, filters ignored.

    Rules sharing a signature (the generated grid rules all do) can share
    one pattern-match run, with per-rule filters applied afterwards.
    """
    mapping: Dict[str, str] = {}

    def canon(part):
        if isinstance(part, Var):
            if part.name not in mapping:
                mapping[part.name] = f"v{len(mapping)}"
            return ("var", mapping[part.name])
        if isinstance(part, IRI):
            return ("iri", part.value)
        return ("lit", part.lexical, part.datatype)

    key = tuple(tuple(canon(part) for part in pattern) for pattern in rule.where_patterns)
    return key, mapping


_NUMPY_OPS = {
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
    "=": np.equal,
}

# below this many rules in a group, plain per-binding checks win
_VECTOR_THRESHOLD = 4


def evaluate_ruleset(rules: Iterable[Rule], source) -> List[RuleHit]:
    """Evaluate many rules, sharing pattern-match work across rules whose
    where blocks are identical up to variable renaming.

    Returns hits in (rule order, binding order); semantics are exactly
    len(rules) independent rule_hits() runs.
    """
    index = source if isinstance(source, TripleIndex) else TripleIndex(source)
    rules = list(rules)
    groups: Dict[tuple, List[Tuple[int, Rule, Dict[str, str]]]] = {}
    for position, rule in enumerate(rules):
        key, mapping = _signature(rule)
        groups.setdefault(key, []).append((position, rule, mapping))

    hits_by_position: Dict[int, List[RuleHit]] = {}
    for key, members in groups.items():
        canonical_patterns = tuple(
            tuple(Var(part[1]) if part[0] == "var" else _key_term(part) for part in pattern)
            for pattern in key
        )
        bindings = match_bgp(index, canonical_patterns)
        if not bindings:
            for position, _, _ in members:
                hits_by_position[position] = []
            continue
        if len(members) < _VECTOR_THRESHOLD:
            for position, rule, mapping in members:
                hits = []
                for binding in bindings:
                    if all(
                        c.holds(binding[mapping[c.var]]) for c in rule.filters
                    ):
                        hit = _canonical_hit(rule, mapping, binding)
                        if hit is not None:
                            hits.append(hit)
                hits_by_position[position] = hits
        else:
            hits_by_position.update(_vector_filter(members, bindings))

    out: List[RuleHit] = []
    for position in range(len(rules)):
        out.extend(hits_by_position[position])
    return out


def _key_term(part):
    if part[0] == "iri":
        return IRI(part[1])
    return Literal(part[1], part[2])


def _canonical_hit(rule: Rule, mapping: Dict[str, str], binding) -> Optional[RuleHit]:
    node = binding.get(mapping[rule.location_var])
    time_term = binding.get(mapping[rule.time_var])
    if not isinstance(node, IRI) or not isinstance(time_term, Literal):
        return None
    when = time_term.time()
    if when is None:
        return None
    return RuleHit(rule=rule, node=node, time=when, time_lexical=time_term.lexical)


def _vector_filter(members, bindings) -> Dict[int, List[RuleHit]]:
    """Numpy path: one value array per filtered variable, one mask per rule."""
    filter_vars = set()
    for _, rule, mapping in members:
        for c in rule.filters:
            filter_vars.add(mapping[c.var])
    arrays: Dict[str, np.ndarray] = {}
    for var in filter_vars:
        values = np.empty(len(bindings), dtype=np.float64)
        for i, binding in enumerate(bindings):
            term = binding.get(var)
            number = term.numeric() if isinstance(term, Literal) else None
            values[i] = np.nan if number is None else number
        arrays[var] = values

    result: Dict[int, List[RuleHit]] = {}
    for position, rule, mapping in members:
        mask = np.ones(len(bindings), dtype=bool)
        for c in rule.filters:
            mask &= _NUMPY_OPS[c.op](arrays[mapping[c.var]], c.value)
        hits = []
        for i in np.flatnonzero(mask):
            hit = _canonical_hit(rule, mapping, bindings[i])
            if hit is not None:
                hits.append(hit)
        result[position] = hits
    return result
