"""Hand-written C-family grammar adapter.

Produces SyntaxNode trees shaped like a conventional C parse tree
(function_definition, compound_statement, binary_expression, ...) without
keyword or punctuation leaves: structure lives in the node kinds, leaves are
identifiers, literals and type names. Expression kinds carry their operator
(e.g. "binary_expression:+") so mirrored shapes stay distinguishable.

Parse errors inside a function body degrade to "error" nodes holding the
skipped tokens; only an unrecognizable function signature is fatal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import UnparsableSource
from .syntax import SyntaxNode, leaf, node

KEYWORDS = {
    "auto", "break", "case", "char", "const", "continue", "default", "do",
    "double", "else", "enum", "extern", "float", "for", "goto", "if",
    "inline", "int", "long", "register", "restrict", "return", "short",
    "signed", "sizeof", "static", "struct", "switch", "typedef", "union",
    "unsigned", "void", "volatile", "while", "_Bool", "bool", "true",
    "false", "NULL",
}

PRIMITIVE_TYPES = {
    "void", "char", "short", "int", "long", "float", "double", "signed",
    "unsigned", "_Bool", "bool",
}

STORAGE_SPECIFIERS = {"static", "extern", "inline", "register", "auto", "typedef"}
TYPE_QUALIFIERS = {"const", "volatile", "restrict"}

ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="}

# Binary operators from lowest to highest precedence tier.
BINARY_TIERS = [
    {"||"},
    {"&&"},
    {"|"},
    {"^"},
    {"&"},
    {"==", "!="},
    {"<", ">", "<=", ">="},
    {"<<", ">>"},
    {"+", "-"},
    {"*", "/", "%"},
]

PUNCT = sorted(
    [
        ">>=", "<<=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==",
        "!=", "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
        "+", "-", "*", "/", "%", "=", "<", ">", "!", "~", "&", "|", "^",
        "?", ":", ";", ",", ".", "(", ")", "{", "}", "[", "]",
    ],
    key=len,
    reverse=True,
)

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(
    r"0[xX][0-9a-fA-F]+[uUlL]*|\d+\.\d*(?:[eE][+-]?\d+)?[fFlL]?"
    r"|\.\d+(?:[eE][+-]?\d+)?[fFlL]?|\d+(?:[eE][+-]?\d+)?[uUlLfF]*"
)


@dataclass
class Token:
    type: str  # ident | number | string | char | punct
    text: str
    start: int = 0
    end: int = 0


class _ParseFailure(Exception):
    """Internal: statement or expression could not be parsed here."""


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(source)
    at_line_start = True
    while i < n:
        ch = source[i]
        if ch in " \t\r":
            i += 1
            continue
        if ch == "\n":
            i += 1
            at_line_start = True
            continue
        if ch == "#" and at_line_start:
            # Preprocessor directive: skip the logical line, honoring \ splices.
            while i < n:
                if source[i] == "\\" and i + 1 < n and source[i + 1] == "\n":
                    i += 2
                    continue
                if source[i] == "\n":
                    break
                i += 1
            continue
        at_line_start = False
        if source.startswith("//", i):
            j = source.find("\n", i)
            i = n if j < 0 else j
            continue
        if source.startswith("/*", i):
            j = source.find("*/", i + 2)
            i = n if j < 0 else j + 2
            continue
        if ch == '"' or ch == "'":
            quote = ch
            j = i + 1
            while j < n and source[j] != quote:
                if source[j] == "\\" and j + 1 < n:
                    j += 1
                j += 1
            j = min(j + 1, n)
            tokens.append(Token("string" if quote == '"' else "char", source[i:j], i, j))
            i = j
            continue
        m = _IDENT_RE.match(source, i)
        if m:
            tokens.append(Token("ident", m.group(), i, m.end()))
            i = m.end()
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            m = _NUMBER_RE.match(source, i)
            if m:
                tokens.append(Token("number", m.group(), i, m.end()))
                i = m.end()
                continue
        for p in PUNCT:
            if source.startswith(p, i):
                tokens.append(Token("punct", p, i, i + len(p)))
                i += len(p)
                break
        else:
            i += 1  # unknown byte, drop it
    return tokens


def strip_comments(source: str) -> str:
    """Replace comments with a single space, leaving strings intact."""
    out: list[str] = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if source.startswith("//", i):
            j = source.find("\n", i)
            i = n if j < 0 else j
            out.append(" ")
            continue
        if source.startswith("/*", i):
            j = source.find("*/", i + 2)
            i = n if j < 0 else j + 2
            out.append(" ")
            continue
        if ch == '"' or ch == "'":
            quote = ch
            j = i + 1
            while j < n and source[j] != quote:
                if source[j] == "\\" and j + 1 < n:
                    j += 1
                j += 1
            j = min(j + 1, n)
            out.append(source[i:j])
            i = j
            continue
        out.append(ch)
        i += 1
    return "".join(out)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token stream helpers ------------------------------------------------

    def peek(self, offset: int = 0) -> Token | None:
        idx = self.pos + offset
        return self.tokens[idx] if idx < len(self.tokens) else None

    def at(self, text: str, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok is not None and tok.text == text

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise _ParseFailure(f"expected {text!r}")
        return self.advance()

    def eat(self, text: str) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    # -- top level -----------------------------------------------------------

    def parse_translation_unit(self) -> list[tuple[SyntaxNode, int, int]]:
        """Return (function tree, start token index, end token index) triples."""
        functions: list[tuple[SyntaxNode, int, int]] = []
        while not self.at_end():
            mark = self.pos
            fn = self._try_function_definition()
            if fn is not None:
                functions.append((fn, mark, self.pos - 1))
                continue
            self.pos = mark
            self._skip_top_level_item()
        return functions

    def _try_function_definition(self) -> SyntaxNode | None:
        try:
            specs = self._parse_declaration_specifiers()
            declarator = self._parse_declarator()
        except _ParseFailure:
            return None
        if not specs or not _contains_kind(declarator, "function_declarator"):
            return None
        if not self.at("{"):
            return None
        body = self._parse_compound_statement()
        children = specs + [declarator]
        if body is not None:
            children.append(body)
        return node("function_definition", *children)

    def _skip_top_level_item(self) -> None:
        depth = 0
        while not self.at_end():
            tok = self.advance()
            if tok.text == "{":
                depth += 1
            elif tok.text == "}":
                depth -= 1
                if depth <= 0:
                    return
            elif tok.text == ";" and depth == 0:
                return

    # -- declarations ----------------------------------------------------------

    def _parse_declaration_specifiers(self) -> list[SyntaxNode]:
        specs: list[SyntaxNode] = []
        while True:
            tok = self.peek()
            if tok is None or tok.type != "ident":
                break
            text = tok.text
            if text in STORAGE_SPECIFIERS:
                self.advance()
                specs.append(leaf("storage_class_specifier", text))
            elif text in TYPE_QUALIFIERS:
                self.advance()
                specs.append(leaf("type_qualifier", text))
            elif text in PRIMITIVE_TYPES:
                self.advance()
                specs.append(leaf("primitive_type", text))
            elif text in ("struct", "union", "enum"):
                self.advance()
                name = self.peek()
                if name is not None and name.type == "ident":
                    self.advance()
                    specs.append(node(f"{text}_specifier", leaf("type_identifier", name.text)))
                else:
                    specs.append(leaf("type_identifier", text))
            elif text not in KEYWORDS and self._looks_like_type_name():
                self.advance()
                specs.append(leaf("type_identifier", text))
            else:
                break
        return specs

    def _looks_like_type_name(self) -> bool:
        # An identifier is a type name when a declarator plausibly follows.
        nxt = self.peek(1)
        if nxt is None:
            return False
        if nxt.type == "ident" and nxt.text not in KEYWORDS:
            return True
        if nxt.text == "*":
            after = self.peek(2)
            return after is not None and (
                (after.type == "ident" and after.text not in KEYWORDS) or after.text == "*"
            )
        return False

    def _parse_declarator(self) -> SyntaxNode:
        if self.eat("*"):
            while self.peek() is not None and self.peek().text in TYPE_QUALIFIERS:
                self.advance()
            inner = self._parse_declarator()
            return node("pointer_declarator", inner)
        if self.eat("("):
            decl = self._parse_declarator()
            self.expect(")")
            return self._parse_declarator_suffix(decl)
        tok = self.peek()
        if tok is None or tok.type != "ident" or tok.text in KEYWORDS:
            raise _ParseFailure("expected declarator name")
        self.advance()
        return self._parse_declarator_suffix(leaf("identifier", tok.text))

    def _parse_declarator_suffix(self, decl: SyntaxNode) -> SyntaxNode:
        while True:
            if self.at("("):
                params = self._parse_parameter_list()
                children = [decl] + ([params] if params is not None else [])
                decl = node("function_declarator", *children)
            elif self.at("["):
                self.advance()
                size = None
                if not self.at("]"):
                    size = self._parse_expression()
                self.expect("]")
                children = [decl] + ([size] if size is not None else [])
                decl = node("array_declarator", *children)
            else:
                return decl

    def _parse_parameter_list(self) -> SyntaxNode | None:
        self.expect("(")
        params: list[SyntaxNode] = []
        if self.eat(")"):
            return None
        while True:
            if self.at("..."):
                self.advance()
                params.append(leaf("variadic_parameter", "..."))
            else:
                params.append(self._parse_parameter_declaration())
            if not self.eat(","):
                break
        self.expect(")")
        return node("parameter_list", *params) if params else None

    def _parse_parameter_declaration(self) -> SyntaxNode:
        specs = self._parse_declaration_specifiers()
        if not specs:
            tok = self.peek()
            if tok is not None and tok.type == "ident":
                self.advance()
                specs = [leaf("type_identifier", tok.text)]
            else:
                raise _ParseFailure("expected parameter type")
        children = list(specs)
        tok = self.peek()
        if tok is not None and tok.text not in (",", ")"):
            try:
                children.append(self._parse_abstract_or_named_declarator())
            except _ParseFailure:
                pass
        return node("parameter_declaration", *children)

    def _parse_abstract_or_named_declarator(self) -> SyntaxNode:
        stars = 0
        while self.eat("*"):
            stars += 1
            while self.peek() is not None and self.peek().text in TYPE_QUALIFIERS:
                self.advance()
        tok = self.peek()
        if tok is not None and tok.type == "ident" and tok.text not in KEYWORDS:
            self.advance()
            decl = self._parse_declarator_suffix(leaf("identifier", tok.text))
            for _ in range(stars):
                decl = node("pointer_declarator", decl)
            return decl
        if stars:
            return leaf("abstract_pointer_declarator", "*" * stars)
        raise _ParseFailure("expected parameter declarator")

    # -- statements ------------------------------------------------------------

    def _parse_compound_statement(self) -> SyntaxNode | None:
        self.expect("{")
        statements: list[SyntaxNode] = []
        while not self.at_end() and not self.at("}"):
            stmt = self._parse_statement_with_recovery()
            if stmt is not None:
                statements.append(stmt)
        self.eat("}")
        return node("compound_statement", *statements) if statements else None

    def _parse_statement_with_recovery(self) -> SyntaxNode | None:
        mark = self.pos
        try:
            return self._parse_statement()
        except _ParseFailure:
            self.pos = mark
            skipped: list[SyntaxNode] = []
            depth = 0
            while not self.at_end():
                tok = self.peek()
                if depth == 0 and tok.text in (";", "}"):
                    if tok.text == ";":
                        self.advance()
                    break
                if tok.text == "{":
                    depth += 1
                elif tok.text == "}":
                    if depth == 0:
                        break
                    depth -= 1
                skipped.append(leaf("error", self.advance().text))
            if not skipped and not self.at_end() and self.at("}") is False:
                skipped.append(leaf("error", self.advance().text))
            return node("error", *skipped) if skipped else None

    def _parse_statement(self) -> SyntaxNode | None:
        if self.eat(";"):
            return None
        if self.at("{"):
            return self._parse_compound_statement()
        tok = self.peek()
        if tok is None:
            raise _ParseFailure("unexpected end of input")
        if tok.type == "ident":
            handler = getattr(self, f"_stmt_{tok.text}", None)
            if handler is not None:
                return handler()
            if self._starts_declaration():
                return self._parse_local_declaration()
            nxt = self.peek(1)
            if nxt is not None and nxt.text == ":" and tok.text not in KEYWORDS:
                self.advance()
                self.advance()
                body = self._parse_statement()
                children = [leaf("statement_identifier", tok.text)]
                if body is not None:
                    children.append(body)
                return node("labeled_statement", *children)
        expr = self._parse_expression()
        self.expect(";")
        return node("expression_statement", expr)

    def _starts_declaration(self) -> bool:
        tok = self.peek()
        if tok is None or tok.type != "ident":
            return False
        text = tok.text
        if text in PRIMITIVE_TYPES or text in TYPE_QUALIFIERS or text in STORAGE_SPECIFIERS:
            return True
        if text in ("struct", "union", "enum"):
            return True
        return text not in KEYWORDS and self._looks_like_type_name()

    def _parse_local_declaration(self) -> SyntaxNode:
        specs = self._parse_declaration_specifiers()
        if not specs:
            raise _ParseFailure("expected declaration specifiers")
        children = list(specs)
        while True:
            decl = self._parse_declarator()
            if self.eat("="):
                value = self._parse_initializer()
                decl = node("init_declarator", decl, value)
            children.append(decl)
            if not self.eat(","):
                break
        self.expect(";")
        return node("declaration", *children)

    def _parse_initializer(self) -> SyntaxNode:
        if self.at("{"):
            self.advance()
            items: list[SyntaxNode] = []
            while not self.at_end() and not self.at("}"):
                items.append(self._parse_initializer())
                if not self.eat(","):
                    break
            self.expect("}")
            if items:
                return node("initializer_list", *items)
            return leaf("initializer_list", "{}")
        return self._parse_assignment_expression()

    def _stmt_return(self):
        self.advance()
        if self.eat(";"):
            return leaf("return_statement", "return")
        expr = self._parse_expression()
        self.expect(";")
        return node("return_statement", expr)

    def _stmt_break(self):
        self.advance()
        self.expect(";")
        return leaf("break_statement", "break")

    def _stmt_continue(self):
        self.advance()
        self.expect(";")
        return leaf("continue_statement", "continue")

    def _stmt_goto(self):
        self.advance()
        tok = self.peek()
        if tok is None or tok.type != "ident":
            raise _ParseFailure("expected label after goto")
        self.advance()
        self.expect(";")
        return node("goto_statement", leaf("statement_identifier", tok.text))

    def _stmt_if(self):
        self.advance()
        self.expect("(")
        cond = self._parse_expression()
        self.expect(")")
        children = [cond]
        then = self._parse_statement()
        if then is not None:
            children.append(then)
        if self.at("else"):
            self.advance()
            alt = self._parse_statement()
            if alt is not None:
                children.append(node("else_clause", alt))
        return node("if_statement", *children)

    def _stmt_while(self):
        self.advance()
        self.expect("(")
        cond = self._parse_expression()
        self.expect(")")
        children = [cond]
        body = self._parse_statement()
        if body is not None:
            children.append(body)
        return node("while_statement", *children)

    def _stmt_do(self):
        self.advance()
        body = self._parse_statement()
        self.expect("while")
        self.expect("(")
        cond = self._parse_expression()
        self.expect(")")
        self.eat(";")
        children = ([body] if body is not None else []) + [cond]
        return node("do_statement", *children)

    def _stmt_for(self):
        self.advance()
        self.expect("(")
        children: list[SyntaxNode] = []
        if not self.at(";"):
            if self._starts_declaration():
                children.append(self._parse_local_declaration())
            else:
                children.append(node("expression_statement", self._parse_expression()))
                self.expect(";")
        else:
            self.advance()
        if not self.at(";"):
            children.append(self._parse_expression())
        self.expect(";")
        if not self.at(")"):
            children.append(self._parse_expression())
        self.expect(")")
        body = self._parse_statement()
        if body is not None:
            children.append(body)
        if not children:
            return leaf("for_statement", "for")
        return node("for_statement", *children)

    def _stmt_switch(self):
        self.advance()
        self.expect("(")
        cond = self._parse_expression()
        self.expect(")")
        children = [cond]
        body = self._parse_compound_statement()
        if body is not None:
            children.append(body)
        return node("switch_statement", *children)

    def _stmt_case(self):
        self.advance()
        value = self._parse_expression()
        self.expect(":")
        children = [value]
        children.extend(self._parse_case_body())
        return node("case_statement", *children)

    def _stmt_default(self):
        self.advance()
        self.expect(":")
        stmts = self._parse_case_body()
        if stmts:
            return node("default_case", *stmts)
        return leaf("default_label", "default")

    def _parse_case_body(self) -> list[SyntaxNode]:
        stmts: list[SyntaxNode] = []
        while not self.at_end() and not self.at("}"):
            tok = self.peek()
            if tok.type == "ident" and tok.text in ("case", "default"):
                break
            stmt = self._parse_statement_with_recovery()
            if stmt is not None:
                stmts.append(stmt)
        return stmts

    # -- expressions -----------------------------------------------------------

    def _parse_expression(self) -> SyntaxNode:
        expr = self._parse_assignment_expression()
        while self.eat(","):
            right = self._parse_assignment_expression()
            expr = node("comma_expression", expr, right)
        return expr

    def _parse_assignment_expression(self) -> SyntaxNode:
        left = self._parse_conditional_expression()
        tok = self.peek()
        if tok is not None and tok.text in ASSIGN_OPS:
            op = self.advance().text
            right = self._parse_assignment_expression()
            return node(f"assignment_expression:{op}", left, right)
        return left

    def _parse_conditional_expression(self) -> SyntaxNode:
        cond = self._parse_binary_expression(0)
        if self.eat("?"):
            then = self._parse_expression()
            self.expect(":")
            alt = self._parse_assignment_expression()
            return node("conditional_expression", cond, then, alt)
        return cond

    def _parse_binary_expression(self, tier: int) -> SyntaxNode:
        if tier >= len(BINARY_TIERS):
            return self._parse_unary_expression()
        left = self._parse_binary_expression(tier + 1)
        while True:
            tok = self.peek()
            if tok is None or tok.type != "punct" or tok.text not in BINARY_TIERS[tier]:
                return left
            op = self.advance().text
            right = self._parse_binary_expression(tier + 1)
            left = node(f"binary_expression:{op}", left, right)

    def _parse_unary_expression(self) -> SyntaxNode:
        tok = self.peek()
        if tok is None:
            raise _ParseFailure("expected expression")
        if tok.text in ("++", "--"):
            op = self.advance().text
            operand = self._parse_unary_expression()
            return node(f"update_expression:{op}", operand)
        if tok.text in ("!", "~", "+", "-", "*", "&"):
            op = self.advance().text
            operand = self._parse_unary_expression()
            return node(f"unary_expression:{op}", operand)
        if tok.type == "ident" and tok.text == "sizeof":
            self.advance()
            if self.at("(") and self._paren_holds_type():
                self.advance()
                specs = self._parse_declaration_specifiers()
                stars = 0
                while self.eat("*"):
                    stars += 1
                self.expect(")")
                if stars:
                    specs.append(leaf("abstract_pointer_declarator", "*" * stars))
                return node("sizeof_expression", *specs)
            operand = self._parse_unary_expression()
            return node("sizeof_expression", operand)
        if self.at("(") and self._paren_holds_type():
            self.advance()
            specs = self._parse_declaration_specifiers()
            stars = 0
            while self.eat("*"):
                stars += 1
            self.expect(")")
            if stars:
                specs.append(leaf("abstract_pointer_declarator", "*" * stars))
            operand = self._parse_unary_expression()
            return node("cast_expression", *(specs + [operand]))
        return self._parse_postfix_expression()

    def _paren_holds_type(self) -> bool:
        tok = self.peek(1)
        return (
            tok is not None
            and tok.type == "ident"
            and (
                tok.text in PRIMITIVE_TYPES
                or tok.text in TYPE_QUALIFIERS
                or tok.text in ("struct", "union", "enum")
            )
        )

    def _parse_postfix_expression(self) -> SyntaxNode:
        expr = self._parse_primary_expression()
        while True:
            if self.at("("):
                self.advance()
                args: list[SyntaxNode] = []
                while not self.at_end() and not self.at(")"):
                    args.append(self._parse_assignment_expression())
                    if not self.eat(","):
                        break
                self.expect(")")
                children = [expr] + ([node("argument_list", *args)] if args else [])
                expr = node("call_expression", *children)
            elif self.at("["):
                self.advance()
                index = self._parse_expression()
                self.expect("]")
                expr = node("subscript_expression", expr, index)
            elif self.at(".") or self.at("->"):
                op = self.advance().text
                tok = self.peek()
                if tok is None or tok.type != "ident":
                    raise _ParseFailure("expected field name")
                self.advance()
                expr = node(f"field_expression:{op}", expr, leaf("field_identifier", tok.text))
            elif self.at("++") or self.at("--"):
                op = self.advance().text
                expr = node(f"update_expression:{op}", expr)
            else:
                return expr

    def _parse_primary_expression(self) -> SyntaxNode:
        tok = self.peek()
        if tok is None:
            raise _ParseFailure("expected expression")
        if tok.type == "number":
            self.advance()
            return leaf("number_literal", tok.text)
        if tok.type == "string":
            self.advance()
            return leaf("string_literal", tok.text)
        if tok.type == "char":
            self.advance()
            return leaf("char_literal", tok.text)
        if tok.type == "ident":
            if tok.text in ("true", "false"):
                self.advance()
                return leaf("boolean_literal", tok.text)
            if tok.text == "NULL":
                self.advance()
                return leaf("null_literal", tok.text)
            if tok.text in KEYWORDS and tok.text != "sizeof":
                raise _ParseFailure(f"unexpected keyword {tok.text!r}")
            self.advance()
            return leaf("identifier", tok.text)
        if self.at("("):
            self.advance()
            expr = self._parse_expression()
            self.expect(")")
            return node("parenthesized_expression", expr)
        raise _ParseFailure(f"unexpected token {tok.text!r}")


def _contains_kind(root: SyntaxNode, kind: str) -> bool:
    return any(n.kind == kind for n in root.walk())


class CFamilyGrammar:
    """Default grammar adapter for C-family source."""

    def parse_file(self, source: str) -> list[SyntaxNode]:
        parser = _Parser(tokenize(source))
        return [fn for fn, _, _ in parser.parse_translation_unit()]

    def parse_file_with_sources(self, source: str) -> list[tuple[SyntaxNode, str]]:
        """Like parse_file but pairs each tree with its own source slice."""
        tokens = tokenize(source)
        parser = _Parser(tokens)
        out = []
        for fn, first, last in parser.parse_translation_unit():
            out.append((fn, source[tokens[first].start:tokens[last].end]))
        return out

    def parse_function(self, source: str) -> SyntaxNode:
        functions = self.parse_file(source)
        if not functions:
            raise UnparsableSource("no function definition recognized")
        return functions[0]

    def function_name(self, root: SyntaxNode) -> str:
        declarator = _find_function_declarator(root)
        if declarator is not None:
            for n in declarator.walk():
                if n.kind == "identifier":
                    return n.token_text
        for n in root.walk():
            if n.kind == "identifier":
                return n.token_text
        raise UnparsableSource("function definition has no name")


def _find_function_declarator(root: SyntaxNode) -> SyntaxNode | None:
    for child in root.children:
        for n in child.walk():
            if n.kind == "function_declarator":
                return n
    return None


DEFAULT_GRAMMAR = CFamilyGrammar()
