"""Solidity subset frontend: lexing, parsing, serialization, normalization."""

from .documents import (
    Granularity,
    TokenDocument,
    TokenRole,
    document_from_line,
    read_corpus_file,
    write_corpus_file,
)
from .lexer import Token, TokenKind, filter_comments, tokenize
from .normalizer import normalize, normalize_all
from .parser import AstNode, NodeKind, find_nodes, parse, parse_source, walk
from .serializer import (
    Bindings,
    StatementContext,
    StatementUnit,
    camel_case_subtokens,
    collect_bindings,
    iter_statement_units,
    serialize_contract,
    serialize_statement,
    serialize_statements,
)

__all__ = [
    "AstNode",
    "Bindings",
    "Granularity",
    "NodeKind",
    "StatementContext",
    "StatementUnit",
    "Token",
    "TokenDocument",
    "TokenKind",
    "TokenRole",
    "camel_case_subtokens",
    "collect_bindings",
    "document_from_line",
    "filter_comments",
    "find_nodes",
    "iter_statement_units",
    "normalize",
    "normalize_all",
    "parse",
    "parse_source",
    "read_corpus_file",
    "serialize_contract",
    "serialize_statement",
    "serialize_statements",
    "tokenize",
    "walk",
    "write_corpus_file",
]
