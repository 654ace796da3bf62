"""Recursive-descent parser for the supported Solidity subset.

The grammar covers pragma and import directives, contract/library/interface
definitions, state variables, function/modifier/constructor definitions,
blocks, the common statement forms, and raw-token expressions. Constructs
the parser does not understand inside a block are wrapped in an opaque
statement node holding their raw tokens instead of being rejected; only
malformed top-level structure is a hard error.

Every non-comment token ends up as a leaf of the tree, in source order, so
an in-order leaf walk reproduces the lexer output exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from ..errors import ParseError
from .lexer import Token, TokenKind, filter_comments, tokenize


class NodeKind(Enum):
    """AST node kinds; values are the names used in structural token paths."""

    SOURCE_UNIT = "sourceUnit"
    PRAGMA_DIRECTIVE = "pragmaDirective"
    IMPORT_DIRECTIVE = "importDirective"
    CONTRACT_DEFINITION = "contractDefinition"
    CONTRACT_PART = "contractPart"
    STATE_VARIABLE_DECLARATION = "stateVariableDeclaration"
    FUNCTION_DEFINITION = "functionDefinition"
    MODIFIER_DEFINITION = "modifierDefinition"
    EVENT_DEFINITION = "eventDefinition"
    STRUCT_DEFINITION = "structDefinition"
    ENUM_DEFINITION = "enumDefinition"
    USING_FOR_DECLARATION = "usingForDeclaration"
    PARAMETER_LIST = "parameterList"
    BLOCK = "block"
    STATEMENT = "statement"
    SIMPLE_STATEMENT = "simpleStatement"
    EXPRESSION_STATEMENT = "expressionStatement"
    VARIABLE_DECLARATION_STATEMENT = "variableDeclarationStatement"
    IF_STATEMENT = "ifStatement"
    FOR_STATEMENT = "forStatement"
    WHILE_STATEMENT = "whileStatement"
    DO_WHILE_STATEMENT = "doWhileStatement"
    RETURN_STATEMENT = "returnStatement"
    BREAK_STATEMENT = "breakStatement"
    CONTINUE_STATEMENT = "continueStatement"
    THROW_STATEMENT = "throwStatement"
    EMIT_STATEMENT = "emitStatement"
    EXPRESSION = "expression"
    OPAQUE_STATEMENT = "opaqueStatement"


# Statement kinds whose node is itself a detection unit (full terminals).
SIMPLE_UNIT_KINDS = frozenset({
    NodeKind.EXPRESSION_STATEMENT,
    NodeKind.VARIABLE_DECLARATION_STATEMENT,
    NodeKind.RETURN_STATEMENT,
    NodeKind.BREAK_STATEMENT,
    NodeKind.CONTINUE_STATEMENT,
    NodeKind.THROW_STATEMENT,
    NodeKind.EMIT_STATEMENT,
    NodeKind.OPAQUE_STATEMENT,
})

# Compound statements contribute a header unit; their bodies are walked.
COMPOUND_UNIT_KINDS = frozenset({
    NodeKind.IF_STATEMENT,
    NodeKind.FOR_STATEMENT,
    NodeKind.WHILE_STATEMENT,
    NodeKind.DO_WHILE_STATEMENT,
})

_TYPE_KEYWORDS = frozenset({
    "uint", "int", "bool", "address", "string", "bytes", "byte", "mapping", "var",
})
_SIZED_TYPE_RE = re.compile(r"^(?:u?int\d+|bytes\d+|u?fixed(?:\d+x\d+)?)$")
_LOCATION_WORDS = frozenset({"memory", "storage", "calldata", "payable"})


@dataclass(eq=False)
class AstNode:
    kind: NodeKind
    children: list["AstNode | Token"] = field(default_factory=list)
    span_start: int = 0
    span_end: int = 0
    name: str | None = None
    warnings: list[str] = field(default_factory=list)  # populated on the root

    def leaves(self) -> list[Token]:
        out: list[Token] = []
        _collect_leaves(self, out)
        return out


def _collect_leaves(node: AstNode, out: list[Token]) -> None:
    for child in node.children:
        if isinstance(child, Token):
            out.append(child)
        else:
            _collect_leaves(child, out)


def walk(node: AstNode):
    """Yield AST nodes in pre-order."""
    yield node
    for child in node.children:
        if isinstance(child, AstNode):
            yield from walk(child)


def find_nodes(node: AstNode, kind: NodeKind) -> list[AstNode]:
    return [n for n in walk(node) if n.kind is kind]


def _is_type_token(tok: Token) -> bool:
    return tok.kind is TokenKind.KEYWORD and (
        tok.text in _TYPE_KEYWORDS or bool(_SIZED_TYPE_RE.match(tok.text))
    )


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0
        self.warnings: list[str] = []

    # -- token cursor helpers -------------------------------------------------

    def _eof(self) -> bool:
        return self.pos >= len(self.toks)

    def _peek(self, offset: int = 0) -> Token | None:
        idx = self.pos + offset
        return self.toks[idx] if idx < len(self.toks) else None

    def _take(self) -> Token:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def _last_line(self) -> int:
        if not self.toks:
            return 1
        return self.toks[min(self.pos, len(self.toks) - 1)].line

    def _expect(self, text: str) -> Token:
        tok = self._peek()
        if tok is None:
            raise ParseError(f"expected {text!r} but reached end of input", self._last_line())
        if tok.text != text:
            raise ParseError(f"expected {text!r} but found {tok.text!r}", tok.line)
        return self._take()

    def _expect_identifier(self, what: str) -> Token:
        tok = self._peek()
        if tok is None:
            raise ParseError(f"expected {what} name but reached end of input", self._last_line())
        if tok.kind is not TokenKind.IDENTIFIER:
            raise ParseError(f"expected {what} name but found {tok.text!r}", tok.line)
        return self._take()

    def _consume_until_semi(self, opener_line: int) -> list[Token]:
        """Collect tokens through the next ';' at bracket depth zero."""
        out: list[Token] = []
        depth = 0
        while not self._eof():
            tok = self._take()
            out.append(tok)
            if tok.text in "([{":
                depth += 1
            elif tok.text in ")]}":
                depth -= 1
            elif tok.text == ";" and depth <= 0:
                return out
        raise ParseError("missing ';' before end of input", opener_line)

    def _consume_balanced(self, open_text: str, close_text: str) -> list[Token]:
        """Collect a balanced bracket group, both delimiters included."""
        opener = self._expect(open_text)
        out = [opener]
        depth = 1
        while not self._eof():
            tok = self._take()
            out.append(tok)
            if tok.text == open_text:
                depth += 1
            elif tok.text == close_text:
                depth -= 1
                if depth == 0:
                    return out
        raise ParseError(f"unbalanced {open_text!r} group", opener.line)

    # -- grammar --------------------------------------------------------------

    def parse_source_unit(self) -> AstNode:
        children: list[AstNode | Token] = []
        while not self._eof():
            tok = self._peek()
            if tok.kind is TokenKind.PRAGMA:
                children.append(self._parse_directive(NodeKind.PRAGMA_DIRECTIVE))
            elif tok.text == "import":
                children.append(self._parse_directive(NodeKind.IMPORT_DIRECTIVE))
            elif tok.text in ("contract", "library", "interface"):
                children.append(self._parse_contract())
            else:
                raise ParseError(
                    f"unexpected token {tok.text!r} at top level "
                    "(expected pragma, import, contract, library, or interface)",
                    tok.line,
                )
        root = AstNode(NodeKind.SOURCE_UNIT, children)
        _assign_spans(root, 1)
        root.warnings = self.warnings
        return root

    def _parse_directive(self, kind: NodeKind) -> AstNode:
        first = self._peek()
        toks = self._consume_until_semi(first.line)
        return AstNode(kind, list(toks))

    def _parse_contract(self) -> AstNode:
        kw = self._take()
        name = self._expect_identifier(kw.text)
        children: list[AstNode | Token] = [kw, name]
        while not self._eof() and self._peek().text != "{":
            children.append(self._take())  # inheritance specifier tokens
        children.append(self._expect("{"))
        while not self._eof() and self._peek().text != "}":
            children.append(self._parse_contract_part())
        closing = self._peek()
        if closing is None:
            raise ParseError(f"missing '}}' for {kw.text} {name.text!r}", self._last_line())
        children.append(self._take())
        return AstNode(NodeKind.CONTRACT_DEFINITION, children, name=name.text)

    def _parse_contract_part(self) -> AstNode:
        tok = self._peek()
        text = tok.text
        if text in ("function", "constructor"):
            inner = self._parse_callable(NodeKind.FUNCTION_DEFINITION)
        elif text == "modifier":
            inner = self._parse_callable(NodeKind.MODIFIER_DEFINITION)
        elif text in ("fallback", "receive") and self._peek(1) is not None \
                and self._peek(1).text == "(":
            inner = self._parse_callable(NodeKind.FUNCTION_DEFINITION)
        elif text == "event":
            inner = AstNode(NodeKind.EVENT_DEFINITION, list(self._consume_until_semi(tok.line)))
            inner.name = _first_identifier_text(inner.children)
        elif text == "using":
            inner = AstNode(NodeKind.USING_FOR_DECLARATION,
                            list(self._consume_until_semi(tok.line)))
        elif text in ("struct", "enum"):
            kw = self._take()
            name = self._expect_identifier(kw.text)
            body = self._consume_balanced("{", "}")
            kind = (NodeKind.STRUCT_DEFINITION if text == "struct"
                    else NodeKind.ENUM_DEFINITION)
            inner = AstNode(kind, [kw, name, *body], name=name.text)
        else:
            inner = self._parse_state_variable_or_opaque(tok)
        return AstNode(NodeKind.CONTRACT_PART, [inner])

    def _parse_state_variable_or_opaque(self, first: Token) -> AstNode:
        raw: list[Token] = []
        depth = 0
        while not self._eof():
            tok = self._peek()
            if depth == 0 and tok.text == ";":
                raw.append(self._take())
                return AstNode(NodeKind.STATE_VARIABLE_DECLARATION, list(raw))
            if depth == 0 and tok.text == "{":
                raw.extend(self._consume_balanced("{", "}"))
                if not self._eof() and self._peek().text == ";":
                    raw.append(self._take())
                self.warnings.append(
                    f"line {first.line}: unrecognized contract member kept as opaque tokens"
                )
                return AstNode(NodeKind.OPAQUE_STATEMENT, list(raw))
            if depth == 0 and tok.text == "}":
                raise ParseError(
                    f"missing ';' after contract member starting at line {first.line}",
                    tok.line,
                )
            tok = self._take()
            raw.append(tok)
            if tok.text in "([":
                depth += 1
            elif tok.text in ")]":
                depth -= 1
        raise ParseError("missing ';' before end of input", first.line)

    def _parse_callable(self, kind: NodeKind) -> AstNode:
        kw = self._take()
        children: list[AstNode | Token] = [kw]
        name: str | None = None
        nxt = self._peek()
        if nxt is not None and nxt.kind is TokenKind.IDENTIFIER:
            name_tok = self._take()
            name = name_tok.text
            children.append(name_tok)
        if not self._eof() and self._peek().text == "(":
            children.append(self._parse_parameter_list())
        # Visibility, mutability, and modifier invocations up to the body.
        while not self._eof():
            tok = self._peek()
            if tok.text == "{":
                children.append(self._parse_block())
                break
            if tok.text == ";":
                children.append(self._take())
                break
            if tok.text == "returns":
                children.append(self._take())
                children.append(self._parse_parameter_list())
                continue
            if tok.text == "(":
                children.extend(self._consume_balanced("(", ")"))
                continue
            children.append(self._take())
        else:
            raise ParseError(f"unterminated {kw.text} definition", kw.line)
        return AstNode(kind, children, name=name)

    def _parse_parameter_list(self) -> AstNode:
        toks = self._consume_balanced("(", ")")
        return AstNode(NodeKind.PARAMETER_LIST, list(toks))

    def _parse_block(self) -> AstNode:
        opener = self._expect("{")
        children: list[AstNode | Token] = [opener]
        while not self._eof() and self._peek().text != "}":
            children.append(self._parse_statement())
        if self._eof():
            raise ParseError("missing '}' before end of input", self._last_line())
        children.append(self._take())
        return AstNode(NodeKind.BLOCK, children)

    def _parse_statement(self) -> AstNode:
        tok = self._peek()
        text = tok.text
        if text == "{":
            inner: AstNode = self._parse_block()
        elif text == "if":
            inner = self._parse_if()
        elif text == "while":
            inner = self._parse_while()
        elif text == "for":
            inner = self._parse_for()
        elif text == "do":
            inner = self._parse_do_while()
        elif text == "return":
            inner = AstNode(NodeKind.RETURN_STATEMENT, list(self._consume_until_semi(tok.line)))
        elif text == "break":
            inner = AstNode(NodeKind.BREAK_STATEMENT, list(self._consume_until_semi(tok.line)))
        elif text == "continue":
            inner = AstNode(NodeKind.CONTINUE_STATEMENT,
                            list(self._consume_until_semi(tok.line)))
        elif text == "throw":
            inner = AstNode(NodeKind.THROW_STATEMENT, list(self._consume_until_semi(tok.line)))
        elif text == "emit":
            inner = AstNode(NodeKind.EMIT_STATEMENT, list(self._consume_until_semi(tok.line)))
        else:
            inner = self._parse_simple_or_opaque(tok)
        return AstNode(NodeKind.STATEMENT, [inner])

    def _parse_condition(self) -> list[AstNode | Token]:
        """Parse '(' expression ')' returning [paren, Expression, paren]."""
        toks = self._consume_balanced("(", ")")
        expr = AstNode(NodeKind.EXPRESSION, list(toks[1:-1]))
        return [toks[0], expr, toks[-1]]

    def _parse_if(self) -> AstNode:
        kw = self._take()
        children: list[AstNode | Token] = [kw, *self._parse_condition()]
        children.append(self._parse_statement())
        if not self._eof() and self._peek().text == "else":
            children.append(self._take())
            children.append(self._parse_statement())
        return AstNode(NodeKind.IF_STATEMENT, children)

    def _parse_while(self) -> AstNode:
        kw = self._take()
        children: list[AstNode | Token] = [kw, *self._parse_condition()]
        children.append(self._parse_statement())
        return AstNode(NodeKind.WHILE_STATEMENT, children)

    def _parse_for(self) -> AstNode:
        kw = self._take()
        control = self._consume_balanced("(", ")")
        children: list[AstNode | Token] = [kw, *control]
        children.append(self._parse_statement())
        return AstNode(NodeKind.FOR_STATEMENT, children)

    def _parse_do_while(self) -> AstNode:
        kw = self._take()
        children: list[AstNode | Token] = [kw, self._parse_statement()]
        children.append(self._expect("while"))
        children.extend(self._parse_condition())
        children.append(self._expect(";"))
        return AstNode(NodeKind.DO_WHILE_STATEMENT, children)

    def _parse_simple_or_opaque(self, first: Token) -> AstNode:
        raw: list[Token] = []
        depth = 0
        while True:
            tok = self._peek()
            if tok is None:
                raise ParseError("unterminated statement", first.line)
            if depth == 0 and tok.text == ";":
                raw.append(self._take())
                break
            if depth == 0 and tok.text == "}":
                # Tolerate a missing ';' right before a closing brace.
                break
            if depth == 0 and tok.text == "{":
                # assembly/unchecked style construct: keep raw, flag opaque.
                raw.extend(self._consume_balanced("{", "}"))
                if not self._eof() and self._peek().text == ";":
                    raw.append(self._take())
                self.warnings.append(
                    f"line {first.line}: unrecognized construct kept as opaque statement"
                )
                return AstNode(NodeKind.OPAQUE_STATEMENT, list(raw))
            tok = self._take()
            raw.append(tok)
            if tok.text in "([":
                depth += 1
            elif tok.text in ")]":
                depth -= 1
        kind = (NodeKind.VARIABLE_DECLARATION_STATEMENT
                if _looks_like_declaration(raw) else NodeKind.EXPRESSION_STATEMENT)
        inner = AstNode(kind, list(raw))
        return AstNode(NodeKind.SIMPLE_STATEMENT, [inner])


def _first_identifier_text(children: list[AstNode | Token]) -> str | None:
    for child in children:
        if isinstance(child, Token) and child.kind is TokenKind.IDENTIFIER:
            return child.text
    return None


def _looks_like_declaration(raw: list[Token]) -> bool:
    if not raw:
        return False
    first = raw[0]
    rest = raw[1:]
    if _is_type_token(first):
        if not rest:
            return False
        nxt = rest[0]
        return (nxt.kind is TokenKind.IDENTIFIER
                or nxt.text == "["
                or nxt.text in _LOCATION_WORDS)
    if first.kind is TokenKind.IDENTIFIER and rest:
        nxt = rest[0]
        if nxt.kind is TokenKind.IDENTIFIER or nxt.text in _LOCATION_WORDS:
            return True
        if nxt.text == "[":
            # Distinguish `Foo[] x` from `xs[0] = 1` by what follows ']'.
            depth = 0
            for tok in rest:
                if tok.text == "[":
                    depth += 1
                elif tok.text == "]":
                    depth -= 1
                elif depth == 0:
                    return (tok.kind is TokenKind.IDENTIFIER
                            or tok.text in _LOCATION_WORDS)
    return False


def extract_declared_names(raw: list[Token]) -> list[str]:
    """Names bound by a declaration-style token run.

    The declared name is the last identifier before the first '=' at
    bracket depth zero, or before the terminating ';' when there is no
    initializer. Member accesses (identifiers right after '.') never bind.
    """
    depth = 0
    last_ident: str | None = None
    prev: Token | None = None
    for tok in raw:
        if tok.text in "([{":
            depth += 1
        elif tok.text in ")]}":
            depth -= 1
        elif depth == 0 and tok.text in ("=", ";"):
            break
        elif (depth == 0 and tok.kind is TokenKind.IDENTIFIER
                and (prev is None or prev.text != ".")):
            last_ident = tok.text
        prev = tok
    return [last_ident] if last_ident else []


def _assign_spans(node: AstNode, fallback_line: int) -> tuple[int, int]:
    start: int | None = None
    end: int | None = None
    pending: list[AstNode] = []
    for child in node.children:
        if isinstance(child, Token):
            start = child.line if start is None else min(start, child.line)
            end = child.line if end is None else max(end, child.line)
        else:
            s, e = _assign_spans(child, fallback_line if start is None else start)
            if child.children:
                start = s if start is None else min(start, s)
                end = e if end is None else max(end, e)
            else:
                pending.append(child)
    if start is None:
        start = end = fallback_line
    for child in pending:  # empty nodes inherit the parent's start line
        child.span_start = child.span_end = start
    node.span_start = start
    node.span_end = end
    return start, end


def parse(tokens: list[Token]) -> AstNode:
    """Parse a comment-filtered token list into a source-unit tree."""
    return _Parser(tokens).parse_source_unit()


def parse_source(source: str) -> AstNode:
    """Convenience wrapper: lex, drop comments, parse."""
    return parse(filter_comments(tokenize(source)))
