"""Serialize parsed trees into contract-level and statement-level documents.

Contract-level serialization is an in-order walk over the terminals, with
version literals rewritten to their canonical name. Statement-level
serialization additionally prefixes the chain of enclosing nonterminal
names and appends the enclosing function and contract headers, so a
statement stream carries its structural context with it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ContextError, EmptyContractError
from .documents import Granularity, TokenDocument, TokenRole
from .lexer import Token, TokenKind
from .parser import (
    COMPOUND_UNIT_KINDS,
    SIMPLE_UNIT_KINDS,
    AstNode,
    NodeKind,
    extract_declared_names,
    find_nodes,
    walk,
)

_CALLABLE_KINDS = (NodeKind.FUNCTION_DEFINITION, NodeKind.MODIFIER_DEFINITION)

_CAMEL_RE = re.compile(r"[A-Z]+[0-9]*(?![a-z])|[A-Z][a-z0-9]*|[a-z]+[0-9]*|[0-9]+")

_KIND_ROLE = {
    TokenKind.KEYWORD: TokenRole.KEYWORD,
    TokenKind.PRAGMA: TokenRole.KEYWORD,
    TokenKind.PUNCTUATION: TokenRole.PUNCTUATION,
    TokenKind.OPERATOR: TokenRole.OPERATOR,
    TokenKind.DECIMAL_NUMBER: TokenRole.DECIMAL,
    TokenKind.HEX_NUMBER: TokenRole.HEX,
    TokenKind.STRING_LITERAL: TokenRole.STRING,
    TokenKind.BOOL_LITERAL: TokenRole.BOOL,
    TokenKind.VERSION_LITERAL: TokenRole.VERSION,
}


def camel_case_subtokens(name: str) -> list[str]:
    """Split an identifier into lowercased camelCase segments.

    All-caps runs (with trailing digits) stay whole: ``addValue`` gives
    ``["add", "value"]`` while ``ERC20`` gives ``["erc20"]``.
    """
    return [seg.lower() for seg in _CAMEL_RE.findall(name)]


@dataclass
class Bindings:
    """Simple-variable names per contract and per callable."""

    state_vars: dict
    callable_vars: dict

    def scope_for(self, contract: AstNode | None, callable_node: AstNode | None) -> frozenset:
        names: set[str] = set()
        if contract is not None:
            names |= self.state_vars.get(id(contract), set())
        if callable_node is not None:
            names |= self.callable_vars.get(id(callable_node), set())
        return frozenset(names)


def _parameter_names(param_list: AstNode) -> list[str]:
    names = []
    inner = [t for t in param_list.children if isinstance(t, Token)][1:-1]
    group: list[Token] = []
    depth = 0
    for tok in inner + [None]:
        if tok is None or (tok.text == "," and depth == 0):
            if len(group) >= 2 and group[-1].kind is TokenKind.IDENTIFIER \
                    and group[-2].text != ".":
                names.append(group[-1].text)
            group = []
            continue
        if tok.text in "([":
            depth += 1
        elif tok.text in ")]":
            depth -= 1
        group.append(tok)
    return names


def _for_init_tokens(for_node: AstNode) -> list[Token]:
    toks = [t for t in for_node.children if isinstance(t, Token)]
    out: list[Token] = []
    seen_open = False
    for tok in toks:
        if not seen_open:
            seen_open = tok.text == "("
            continue
        if tok.text == ";":
            break
        out.append(tok)
    return out


def collect_bindings(root: AstNode) -> Bindings:
    """Walk the tree once and collect every simple-variable binding."""
    state_vars: dict = {}
    callable_vars: dict = {}
    for contract in find_nodes(root, NodeKind.CONTRACT_DEFINITION):
        svars: set[str] = set()
        for decl in find_nodes(contract, NodeKind.STATE_VARIABLE_DECLARATION):
            svars.update(extract_declared_names(decl.leaves()))
        state_vars[id(contract)] = svars
        for kind in _CALLABLE_KINDS:
            for fn in find_nodes(contract, kind):
                names: set[str] = set()
                for child in fn.children:
                    if isinstance(child, AstNode) and child.kind is NodeKind.PARAMETER_LIST:
                        names.update(_parameter_names(child))
                for decl in find_nodes(fn, NodeKind.VARIABLE_DECLARATION_STATEMENT):
                    names.update(extract_declared_names(decl.leaves()))
                for loop in find_nodes(fn, NodeKind.FOR_STATEMENT):
                    names.update(extract_declared_names(_for_init_tokens(loop)))
                callable_vars[id(fn)] = names
    return Bindings(state_vars, callable_vars)


def _tag_tokens(tokens: list[Token], scopes: list[frozenset]) -> list[tuple[str, TokenRole]]:
    """Assign a role to each token; identifiers need neighbors and scope."""
    out: list[tuple[str, TokenRole]] = []
    for i, tok in enumerate(tokens):
        if tok.kind is TokenKind.VERSION_LITERAL:
            out.append(("versionliteral", TokenRole.VERSION))
            continue
        role = _KIND_ROLE.get(tok.kind)
        if role is None:  # identifier
            prev_text = tokens[i - 1].text if i > 0 else ""
            next_text = tokens[i + 1].text if i + 1 < len(tokens) else ""
            if prev_text == ".":
                role = TokenRole.MEMBER
            elif next_text == "(":
                role = TokenRole.IDENTIFIER
            elif tok.text in scopes[i]:
                role = TokenRole.SIMPLE_VAR
            else:
                role = TokenRole.IDENTIFIER
        out.append((tok.text, role))
    return out


def _scoped_terminals(node: AstNode, bindings: Bindings,
                      contract: AstNode | None = None,
                      callable_node: AstNode | None = None,
                      ) -> tuple[list[Token], list[frozenset]]:
    tokens: list[Token] = []
    scopes: list[frozenset] = []

    def visit(n: AstNode, contract_: AstNode | None, callable_: AstNode | None) -> None:
        if n.kind is NodeKind.CONTRACT_DEFINITION:
            contract_ = n
        elif n.kind in _CALLABLE_KINDS:
            callable_ = n
        scope = bindings.scope_for(contract_, callable_)
        for child in n.children:
            if isinstance(child, Token):
                tokens.append(child)
                scopes.append(scope)
            else:
                visit(child, contract_, callable_)

    visit(node, contract, callable_node)
    return tokens, scopes


def serialize_contract(node: AstNode, bindings: Bindings | None = None,
                       source_ref: str = "") -> TokenDocument:
    """Serialize a source unit, contract, or function into one document."""
    if node.kind is NodeKind.SOURCE_UNIT:
        granularity = Granularity.CONTRACT
    elif node.kind is NodeKind.CONTRACT_DEFINITION:
        granularity = Granularity.SUBCONTRACT
    elif node.kind in _CALLABLE_KINDS:
        granularity = Granularity.FUNCTION
    else:
        raise ValueError(f"cannot serialize a {node.kind.value} node as a fragment")
    if bindings is None:
        bindings = collect_bindings(node)
    tokens, scopes = _scoped_terminals(node, bindings)
    if not tokens:
        raise EmptyContractError(
            f"serialization of {source_ref or granularity.value} produced no tokens")
    tagged = _tag_tokens(tokens, scopes)
    return TokenDocument(
        id=f"{node.span_start}_{node.span_end}",
        granularity=granularity,
        tokens=tuple(text for text, _ in tagged),
        source_ref=source_ref,
        roles=tuple(role for _, role in tagged),
    )


@dataclass
class StatementContext:
    """Where a statement lives: its root, contract, and callable."""

    root: AstNode
    contract: AstNode
    callable: AstNode


@dataclass
class StatementUnit:
    """One detection unit: a simple statement, or a compound header."""

    node: AstNode
    context: StatementContext
    header_only: bool


def _resolve_unit(stmt: AstNode) -> AstNode:
    node = stmt
    while node.kind in (NodeKind.STATEMENT, NodeKind.SIMPLE_STATEMENT):
        inner = next((c for c in node.children if isinstance(c, AstNode)), None)
        if inner is None:
            break
        node = inner
    return node


def _ancestor_path(root: AstNode, target: AstNode) -> list[AstNode] | None:
    """Strict ancestors of ``target`` from ``root`` down, or None."""
    if root is target:
        return []
    for child in root.children:
        if isinstance(child, AstNode):
            sub = _ancestor_path(child, target)
            if sub is not None:
                return [root] + sub
    return None


def _header_terminals(unit: AstNode) -> list[Token]:
    out: list[Token] = []
    for child in unit.children:
        if isinstance(child, AstNode) and child.kind is NodeKind.STATEMENT:
            break
        if isinstance(child, Token):
            out.append(child)
        else:
            out.extend(child.leaves())
    return out


def _unit_terminals(unit: AstNode) -> list[Token]:
    if unit.kind in COMPOUND_UNIT_KINDS:
        return _header_terminals(unit)
    return unit.leaves()


def _callable_header(fn: AstNode, scope: frozenset) -> list[tuple[str, TokenRole]]:
    out: list[tuple[str, TokenRole]] = []
    children = list(fn.children)
    kw = children[0]
    out.append((kw.text, TokenRole.KEYWORD))
    rest = children[1:]
    if fn.name is not None and rest and isinstance(rest[0], Token) \
            and rest[0].text == fn.name:
        out.append((fn.name, TokenRole.IDENTIFIER))
        out.extend((sub, TokenRole.STRUCTURE) for sub in camel_case_subtokens(fn.name))
        rest = rest[1:]
    for child in rest:
        if isinstance(child, AstNode) and child.kind is NodeKind.PARAMETER_LIST:
            toks = [t for t in child.children if isinstance(t, Token)]
            scopes = [scope] * len(toks)
            out.extend(_tag_tokens(toks, scopes))
        elif isinstance(child, Token) and child.text == "returns":
            out.append(("returns", TokenRole.KEYWORD))
    return out


def _contract_header(contract: AstNode) -> list[tuple[str, TokenRole]]:
    kw = contract.children[0]
    name = contract.name or ""
    return [
        (kw.text, TokenRole.KEYWORD),
        (name, TokenRole.IDENTIFIER),
        (name.lower(), TokenRole.STRUCTURE),
        ("{", TokenRole.PUNCTUATION),
        ("}", TokenRole.PUNCTUATION),
    ]


def serialize_statement(stmt: AstNode, context: StatementContext,
                        bindings: Bindings | None = None,
                        source_ref: str = "") -> TokenDocument:
    """Serialize one statement with its structural and header context."""
    unit = _resolve_unit(stmt)
    ancestors = _ancestor_path(context.root, unit)
    if ancestors is None:
        raise ContextError("statement is not part of the given root")
    if context.callable not in ancestors or context.contract not in ancestors:
        raise ContextError("statement is not contained in the given context")
    if bindings is None:
        bindings = collect_bindings(context.root)
    scope = bindings.scope_for(context.contract, context.callable)

    tagged: list[tuple[str, TokenRole]] = [
        (node.kind.value, TokenRole.STRUCTURE) for node in ancestors
    ]
    terminals = _unit_terminals(unit)
    if not terminals:
        raise EmptyContractError("statement has no terminals")
    tagged.extend(_tag_tokens(terminals, [scope] * len(terminals)))
    tagged.extend(_callable_header(context.callable, scope))
    tagged.extend(_contract_header(context.contract))

    lines = [t.line for t in terminals]
    return TokenDocument(
        id=f"{min(lines)}_{max(lines)}",
        granularity=Granularity.STATEMENT,
        tokens=tuple(text for text, _ in tagged),
        source_ref=source_ref,
        roles=tuple(role for _, role in tagged),
    )


def iter_statement_units(root: AstNode):
    """Yield every detection unit in the tree, in source order."""
    units: list[StatementUnit] = []
    for contract in find_nodes(root, NodeKind.CONTRACT_DEFINITION):
        for kind in _CALLABLE_KINDS:
            for fn in find_nodes(contract, kind):
                context = StatementContext(root, contract, fn)
                for node in walk(fn):
                    if node.kind in SIMPLE_UNIT_KINDS:
                        units.append(StatementUnit(node, context, header_only=False))
                    elif node.kind in COMPOUND_UNIT_KINDS:
                        units.append(StatementUnit(node, context, header_only=True))
    units.sort(key=lambda u: (u.node.span_start, u.node.span_end))
    return units


def serialize_statements(root: AstNode, source_ref: str = "") -> list[TokenDocument]:
    """Serialize every statement unit of a parsed source unit."""
    bindings = collect_bindings(root)
    return [
        serialize_statement(unit.node, unit.context, bindings, source_ref)
        for unit in iter_statement_units(root)
    ]
