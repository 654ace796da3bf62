"""Token documents: the serialized form every later stage consumes."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum


class Granularity(Enum):
    CONTRACT = "contract"
    SUBCONTRACT = "subcontract"
    FUNCTION = "function"
    STATEMENT = "statement"


class TokenRole(Enum):
    """Per-token classification carried next to the token texts.

    Roles drive normalization: which tokens collapse to canonical literal
    names, which become ``simplevar``, and which are structural and must be
    kept verbatim.
    """

    KEYWORD = "kw"
    IDENTIFIER = "ident"
    SIMPLE_VAR = "var"
    MEMBER = "member"
    PUNCTUATION = "punct"
    OPERATOR = "op"
    DECIMAL = "dec"
    HEX = "hex"
    STRING = "str"
    BOOL = "bool"
    VERSION = "ver"
    STRUCTURE = "struct"


@dataclass(frozen=True)
class TokenDocument:
    """A serialized token stream for one code fragment.

    ``id`` is the 1-based line span of the originating node, written
    ``"<startLine>_<endLine>"``. ``roles`` is a parallel tuple aligned with
    ``tokens``; documents parsed back from corpus lines carry no roles.
    """

    id: str
    granularity: Granularity
    tokens: tuple[str, ...]
    source_ref: str = ""
    roles: tuple[TokenRole, ...] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.roles is not None and len(self.roles) != len(self.tokens):
            raise ValueError("roles must align one-to-one with tokens")

    @property
    def span(self) -> tuple[int, int]:
        start, _, end = self.id.partition("_")
        return int(start), int(end)

    @property
    def line_count(self) -> int:
        start, end = self.span
        return end - start + 1

    def with_source_ref(self, source_ref: str) -> "TokenDocument":
        return replace(self, source_ref=source_ref)

    def to_line(self) -> str:
        return f"{self.id} : {' '.join(self.tokens)}"


def document_from_line(line: str, granularity: Granularity = Granularity.CONTRACT,
                       source_ref: str = "") -> TokenDocument:
    """Parse one ``"<id> : <tokens>"`` corpus line back into a document."""
    doc_id, sep, rest = line.partition(" : ")
    if not sep or not doc_id.strip():
        raise ValueError(f"not a token-document line: {line!r}")
    tokens = tuple(rest.split())
    if not tokens:
        raise ValueError(f"token-document line has no tokens: {line!r}")
    return TokenDocument(doc_id.strip(), granularity, tokens, source_ref)


def write_corpus_file(docs, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(doc.to_line() + "\n")


def read_corpus_file(path, granularity: Granularity = Granularity.CONTRACT):
    """Yield documents from a corpus file, skipping blank lines."""
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                docs.append(document_from_line(line, granularity))
    return docs
