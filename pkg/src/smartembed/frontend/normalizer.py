"""Rewrite token documents to erase nonessential differences.

Simple variables collapse to ``simplevar``, literals to their kind names,
``;`` and ``,`` disappear, and every remaining token is lowercased.
Structural tokens emitted by the statement serializer are kept verbatim.
The result is what makes consistently renamed code byte-identical.
"""

from __future__ import annotations

import re
from dataclasses import replace
from typing import Iterable

from .documents import TokenDocument, TokenRole
from .lexer import KEYWORDS, OPERATORS, PUNCTUATION, _SIZED_TYPE_RE

CANONICAL_TOKENS = {
    TokenRole.SIMPLE_VAR: "simplevar",
    TokenRole.DECIMAL: "decimalnumber",
    TokenRole.HEX: "hexnumber",
    TokenRole.STRING: "stringliteral",
    TokenRole.BOOL: "boolliteral",
    TokenRole.VERSION: "versionliteral",
}

_CANONICAL_ROLES = {text: role for role, text in CANONICAL_TOKENS.items()}

DROPPED_PUNCTUATION = frozenset({";", ","})

_DECIMAL_RE = re.compile(r"^\d+(?:\.\d+)?(?:[eE][+-]?\d+)?$")
_HEX_RE = re.compile(r"^0[xX][0-9a-fA-F]+$")
_VERSION_RE = re.compile(r"^\d+(?:\.\d+){2,}$")


def _classify_raw(token: str, simple_vars: frozenset) -> TokenRole:
    """Best-effort role for a bare token string (no serializer tags)."""
    if token in _CANONICAL_ROLES:
        return _CANONICAL_ROLES[token]
    if token in ("true", "false"):
        return TokenRole.BOOL
    if token in KEYWORDS or _SIZED_TYPE_RE.match(token):
        return TokenRole.KEYWORD
    if token in PUNCTUATION:
        return TokenRole.PUNCTUATION
    if token in OPERATORS:
        return TokenRole.OPERATOR
    if _VERSION_RE.match(token):
        return TokenRole.VERSION
    if _HEX_RE.match(token):
        return TokenRole.HEX
    if _DECIMAL_RE.match(token):
        return TokenRole.DECIMAL
    if token.startswith(("'", '"')):
        return TokenRole.STRING
    if token in simple_vars:
        return TokenRole.SIMPLE_VAR
    return TokenRole.IDENTIFIER


def normalize(doc: TokenDocument,
              simple_vars: Iterable[str] | None = None) -> TokenDocument:
    """Return the normalized form of a serialized document.

    Documents produced by the serializers carry per-token roles and need no
    extra context. For documents built from bare token strings,
    ``simple_vars`` supplies the identifier names bound as variables.
    """
    vars_ = frozenset(simple_vars or ())
    roles = doc.roles
    if roles is None:
        roles = tuple(_classify_raw(tok, vars_) for tok in doc.tokens)

    out_tokens: list[str] = []
    out_roles: list[TokenRole] = []
    for token, role in zip(doc.tokens, roles):
        if role is TokenRole.PUNCTUATION and token in DROPPED_PUNCTUATION:
            continue
        if role is TokenRole.STRUCTURE:
            out_tokens.append(token)
        elif role in CANONICAL_TOKENS:
            out_tokens.append(CANONICAL_TOKENS[role])
        else:
            out_tokens.append(token.lower())
        out_roles.append(role)

    return replace(doc, tokens=tuple(out_tokens), roles=tuple(out_roles))


def normalize_all(docs: Iterable[TokenDocument]) -> list[TokenDocument]:
    return [normalize(doc) for doc in docs]
