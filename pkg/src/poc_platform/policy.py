"""Monotone attribute access policies.

Grammar (AND binds tighter than OR):

    policy := term (OR term)*
    term   := factor (AND factor)*
    factor := attribute | INT 'of' '(' policy (',' policy)* ')' | '(' policy ')'

Attributes are namespaced, case-insensitive identifiers such as
``role:doctor``.  The AST is threshold-gate only (AND is k-of-n with k=n, OR
with k=1), which is exactly the shape the secret-sharing layer consumes.
Negation does not exist in the grammar, so every policy is monotone by
construction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional, Union

_ATTR_PART = re.compile(r"[a-z0-9_]+\Z")


class PolicyError(ValueError):
    """Raised for syntactically or structurally invalid policies."""

    def __init__(self, message: str, position: Optional[int] = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


@dataclass(frozen=True, order=True)
class Attribute:
    """One namespaced credential attribute, e.g. role:doctor."""

    namespace: str
    name: str

    def __str__(self) -> str:
        return f"{self.namespace}:{self.name}"

    @classmethod
    def parse(cls, text: str) -> "Attribute":
        parts = text.strip().lower().split(":")
        if len(parts) != 2:
            raise PolicyError(f"attribute {text!r} must have the form namespace:name")
        ns, name = parts
        if not _ATTR_PART.match(ns) or not _ATTR_PART.match(name):
            raise PolicyError(
                f"attribute {text!r} may only contain ASCII letters, digits and underscore"
            )
        return cls(ns, name)


@dataclass(frozen=True)
class Leaf:
    attribute: Attribute


@dataclass(frozen=True)
class Gate:
    """Threshold gate: true when at least ``k`` children are true."""

    k: int
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise PolicyError("gates need at least two children")
        if not 1 <= self.k <= len(self.children):
            raise PolicyError(
                f"threshold {self.k} out of range for {len(self.children)} children"
            )


Node = Union[Leaf, Gate]


def and_gate(*children: Node) -> Gate:
    return Gate(len(children), tuple(children))


def or_gate(*children: Node) -> Gate:
    return Gate(1, tuple(children))


def leaves(node: Node) -> list:
    """All leaves in left-to-right order (the order ciphertext shares use)."""
    if isinstance(node, Leaf):
        return [node]
    out = []
    for child in node.children:
        out.extend(leaves(child))
    return out


# ---------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<kof>\d+)\s*of\s*\(|(?P<and>AND\b)|(?P<or>OR\b)|"
    r"(?P<attr>[A-Za-z0-9_]+\s*:\s*[A-Za-z0-9_]+)|(?P<lpar>\()|(?P<rpar>\))|(?P<comma>,))",
    re.IGNORECASE,
)


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens = []
        while self.pos < len(text):
            m = _TOKEN.match(text, self.pos)
            if m is None:
                if text[self.pos:].strip() == "":
                    break
                raise PolicyError(f"unexpected input {text[self.pos:].strip()[:10]!r}", self.pos)
            for kind in ("kof", "and", "or", "attr", "lpar", "rpar", "comma"):
                if m.group(kind) is not None:
                    self.tokens.append((kind, m.group(kind), m.start()))
                    break
            self.pos = m.end()
        self.idx = 0

    def peek(self):
        return self.tokens[self.idx] if self.idx < len(self.tokens) else ("eof", "", len(self.text))

    def next(self):
        tok = self.peek()
        self.idx += 1
        return tok


def parse(text: str) -> Node:
    """Parse a policy string into its gate/leaf AST."""
    if not text or not text.strip():
        raise PolicyError("empty policy")
    lex = _Lexer(text)
    node = _parse_or(lex)
    kind, value, pos = lex.peek()
    if kind != "eof":
        raise PolicyError(f"trailing input {value!r}", pos)
    return node


def _parse_or(lex: _Lexer) -> Node:
    terms = [_parse_and(lex)]
    while lex.peek()[0] == "or":
        lex.next()
        terms.append(_parse_and(lex))
    if len(terms) == 1:
        return terms[0]
    return Gate(1, tuple(terms))


def _parse_and(lex: _Lexer) -> Node:
    factors = [_parse_factor(lex)]
    while lex.peek()[0] == "and":
        lex.next()
        factors.append(_parse_factor(lex))
    if len(factors) == 1:
        return factors[0]
    return Gate(len(factors), tuple(factors))


def _parse_factor(lex: _Lexer) -> Node:
    kind, value, pos = lex.next()
    if kind == "attr":
        return Leaf(Attribute.parse(value))
    if kind == "kof":
        k = int(value)
        children = [_parse_or(lex)]
        while lex.peek()[0] == "comma":
            lex.next()
            children.append(_parse_or(lex))
        close = lex.next()
        if close[0] != "rpar":
            raise PolicyError("expected ')' closing threshold list", close[2])
        gate = Gate(k, tuple(children))
        # 1-of and n-of collapse to OR / AND canonical forms on render; the
        # AST is the same object either way.
        return gate
    if kind == "lpar":
        node = _parse_or(lex)
        close = lex.next()
        if close[0] != "rpar":
            raise PolicyError("expected ')'", close[2])
        return node
    raise PolicyError(f"expected attribute, threshold or '(', got {value!r}", pos)


# ---------------------------------------------------------------------------
# Rendering

def render(node: Node) -> str:
    """Canonical, minimally parenthesized policy text; parse(render(p)) == p."""
    return _render(node, parent=None)


def _render(node: Node, parent) -> str:
    if isinstance(node, Leaf):
        return str(node.attribute)
    n = len(node.children)
    if node.k == 1:  # OR
        text = " OR ".join(_render(c, "or") for c in node.children)
        # Parenthesized when precedence demands it, or to preserve explicit
        # same-operator nesting so parse(render(p)) reproduces the AST.
        if parent in ("and", "or"):
            return f"({text})"
        return text
    if node.k == n:  # AND
        text = " AND ".join(_render(c, "and") for c in node.children)
        if parent == "and":
            return f"({text})"
        return text
    inner = ", ".join(_render(c, None) for c in node.children)
    return f"{node.k}of({inner})"


# ---------------------------------------------------------------------------
# Satisfaction

def normalize_attributes(attrs: Iterable) -> frozenset:
    """Attribute set from attributes or strings, deduplicated and normalized."""
    out = set()
    for a in attrs:
        out.add(a if isinstance(a, Attribute) else Attribute.parse(a))
    return frozenset(out)


def satisfies(node: Node, attrs: Iterable) -> tuple:
    """(satisfied, leaf subset).

    When satisfied, the returned tuple of leaves is a sufficient subset, picked
    to be small (children with fewer supporting leaves are preferred) so the
    decryption layer pairs over as few shares as possible.
    """
    attr_set = normalize_attributes(attrs)
    return _satisfies(node, attr_set)


def _satisfies(node: Node, attr_set: frozenset) -> tuple:
    if isinstance(node, Leaf):
        if node.attribute in attr_set:
            return True, (node,)
        return False, ()
    satisfied = []
    for child in node.children:
        ok, subset = _satisfies(child, attr_set)
        if ok:
            satisfied.append(subset)
    if len(satisfied) < node.k:
        return False, ()
    satisfied.sort(key=len)
    chosen = []
    for subset in satisfied[: node.k]:
        chosen.extend(subset)
    return True, tuple(chosen)
