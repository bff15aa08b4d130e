"""Generic syntax tree used by every grammar adapter.

The rest of the toolchain only sees SyntaxNode trees: internal nodes carry a
kind name, leaves carry the token text. Keywords and punctuation are implied
by the node kinds, so leaves are exactly the tokens worth embedding
(identifiers, literals, type names).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Protocol


@dataclass
class SyntaxNode:
    kind: str
    children: list["SyntaxNode"] = field(default_factory=list)
    token_text: str = ""

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self) -> Iterator["SyntaxNode"]:
        """Yield leaf nodes in source order (depth-first, left to right)."""
        if self.is_leaf:
            yield self
            return
        for child in self.children:
            yield from child.leaves()

    def walk(self) -> Iterator["SyntaxNode"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def pretty(self, indent: int = 0) -> str:
        pad = "  " * indent
        if self.is_leaf:
            return f"{pad}{self.kind} {self.token_text!r}"
        lines = [f"{pad}{self.kind}"]
        lines.extend(child.pretty(indent + 1) for child in self.children)
        return "\n".join(lines)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SyntaxNode):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.token_text == other.token_text
            and self.children == other.children
        )


def leaf(kind: str, text: str) -> SyntaxNode:
    return SyntaxNode(kind=kind, token_text=text)


def node(kind: str, *children: SyntaxNode) -> SyntaxNode:
    return SyntaxNode(kind=kind, children=list(children))


def validate_tree(root: SyntaxNode) -> None:
    """Check the structural invariants: leaves carry text, internals have
    at least one child, and no node appears twice (acyclic, single root)."""
    seen: set[int] = set()
    for n in root.walk():
        if id(n) in seen:
            raise ValueError(f"node {n.kind!r} appears twice in the tree")
        seen.add(id(n))
        if n.is_leaf:
            if not n.token_text:
                raise ValueError(f"leaf {n.kind!r} has empty token_text")
        elif n.token_text:
            raise ValueError(f"internal node {n.kind!r} carries token text")


class Grammar(Protocol):
    """Adapter contract a language grammar must satisfy.

    The toolchain never inspects node-kind names beyond what the adapter
    returns here, so alternative parsers can be plugged in.
    """

    def parse_function(self, source: str) -> SyntaxNode:
        """Parse a single function definition; raise UnparsableSource."""
        ...

    def parse_file(self, source: str) -> list[SyntaxNode]:
        """Parse a source file and return every function definition in it."""
        ...

    def function_name(self, root: SyntaxNode) -> str:
        """Extract the declared name from a function definition tree."""
        ...
