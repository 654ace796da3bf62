"""Tokenizer for the supported Solidity subset.

Comments are kept as tokens so callers decide whether to filter them.
Version literals such as ``0.4.15`` are recognized only inside a pragma
directive (between the ``pragma`` token and the closing ``;``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from ..errors import LexError


class TokenKind(Enum):
    KEYWORD = "keyword"
    IDENTIFIER = "identifier"
    PUNCTUATION = "punctuation"
    OPERATOR = "operator"
    DECIMAL_NUMBER = "decimalnumber"
    HEX_NUMBER = "hexnumber"
    STRING_LITERAL = "stringliteral"
    BOOL_LITERAL = "boolliteral"
    VERSION_LITERAL = "versionliteral"
    COMMENT = "comment"
    PRAGMA = "pragma"


@dataclass(frozen=True)
class Token:
    text: str
    kind: TokenKind
    line: int
    column: int

    def __repr__(self) -> str:  # compact, for test failure output
        return f"{self.kind.name}({self.text!r}@{self.line}:{self.column})"


KEYWORDS = frozenset({
    "contract", "library", "interface", "function", "modifier", "constructor",
    "event", "struct", "enum", "mapping", "returns", "return", "if", "else",
    "for", "while", "do", "break", "continue", "throw", "emit", "new",
    "delete", "public", "private", "internal", "external", "pure", "view",
    "payable", "constant", "anonymous", "indexed", "memory", "storage",
    "calldata", "var", "is", "using", "import", "from", "solidity",
    "uint", "int", "bool", "address", "string", "bytes", "byte",
    "wei", "szabo", "finney", "ether",
    "seconds", "minutes", "hours", "days", "weeks", "years",
})

# Sized elementary types (uint8..uint256, bytes1..bytes32, fixed128x18, ...).
_SIZED_TYPE_RE = re.compile(r"^(?:u?int\d+|bytes\d+|u?fixed(?:\d+x\d+)?)$")

_IDENT_START = re.compile(r"[A-Za-z_$]")
_IDENT_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")
_HEX_RE = re.compile(r"0[xX][0-9a-fA-F]+")
_DECIMAL_RE = re.compile(r"\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")
_VERSION_RE = re.compile(r"\d+(?:\.\d+)*")

# Longest-match-first operator table.
OPERATORS = (
    "<<=", ">>=",
    "**", "++", "--", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=",
    "==", "!=", "<=", ">=", "&&", "||", "=>", "<<", ">>",
    "+", "-", "*", "/", "%", "!", "~", "&", "|", "^", "<", ">", "=", "?", ":",
)

PUNCTUATION = frozenset("(){}[];,.")


def _classify_word(word: str) -> TokenKind:
    if word in ("true", "false"):
        return TokenKind.BOOL_LITERAL
    if word == "pragma":
        return TokenKind.PRAGMA
    if word in KEYWORDS or _SIZED_TYPE_RE.match(word):
        return TokenKind.KEYWORD
    return TokenKind.IDENTIFIER


def tokenize(source: str) -> list[Token]:
    """Lex ``source`` into a token list, comments included.

    Raises LexError (with 1-based line/column) on an unterminated string
    or block comment, or on a character outside the language.
    """
    tokens: list[Token] = []
    line = 1
    col = 1
    i = 0
    n = len(source)
    in_pragma = False

    def advance(text: str) -> None:
        nonlocal line, col
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)

    while i < n:
        ch = source[i]

        if ch in " \t\r\n\f\v":
            advance(ch)
            i += 1
            continue

        if source.startswith("//", i):
            end = source.find("\n", i)
            end = n if end == -1 else end
            tokens.append(Token(source[i:end], TokenKind.COMMENT, line, col))
            advance(source[i:end])
            i = end
            continue

        if source.startswith("/*", i):
            end = source.find("*/", i + 2)
            if end == -1:
                raise LexError("unterminated block comment", line, col)
            end += 2
            tokens.append(Token(source[i:end], TokenKind.COMMENT, line, col))
            advance(source[i:end])
            i = end
            continue

        if ch in "\"'":
            j = i + 1
            while j < n:
                c = source[j]
                if c == "\\":
                    j += 2
                    continue
                if c == "\n":
                    break
                if c == ch:
                    break
                j += 1
            if j >= n or source[j] != ch:
                raise LexError("unterminated string literal", line, col)
            text = source[i:j + 1]
            tokens.append(Token(text, TokenKind.STRING_LITERAL, line, col))
            advance(text)
            i = j + 1
            continue

        if ch.isdigit():
            if in_pragma:
                m = _VERSION_RE.match(source, i)
                kind = TokenKind.VERSION_LITERAL
            else:
                m = _HEX_RE.match(source, i) or _DECIMAL_RE.match(source, i)
                kind = (TokenKind.HEX_NUMBER
                        if source.startswith(("0x", "0X"), i) else TokenKind.DECIMAL_NUMBER)
            text = m.group(0)
            tokens.append(Token(text, kind, line, col))
            advance(text)
            i = m.end()
            continue

        if _IDENT_START.match(ch):
            m = _IDENT_RE.match(source, i)
            text = m.group(0)
            kind = _classify_word(text)
            if kind is TokenKind.PRAGMA:
                in_pragma = True
            tokens.append(Token(text, kind, line, col))
            advance(text)
            i = m.end()
            continue

        matched = False
        for op in OPERATORS:
            if source.startswith(op, i):
                tokens.append(Token(op, TokenKind.OPERATOR, line, col))
                advance(op)
                i += len(op)
                matched = True
                break
        if matched:
            continue

        if ch in PUNCTUATION:
            if ch == ";" and in_pragma:
                in_pragma = False
            tokens.append(Token(ch, TokenKind.PUNCTUATION, line, col))
            advance(ch)
            i += 1
            continue

        raise LexError(f"illegal character {ch!r}", line, col)

    return tokens


def filter_comments(tokens: list[Token]) -> list[Token]:
    """Drop Comment tokens; the parser operates on the result."""
    return [t for t in tokens if t.kind is not TokenKind.COMMENT]
