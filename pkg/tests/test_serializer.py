from __future__ import annotations

from collections import Counter

import pytest

from smartembed.errors import ContextError, EmptyContractError
from smartembed.frontend import (
    Granularity,
    NodeKind,
    StatementContext,
    TokenRole,
    camel_case_subtokens,
    collect_bindings,
    find_nodes,
    iter_statement_units,
    parse_source,
    serialize_contract,
    serialize_statement,
    serialize_statements,
)
from conftest import LISTING1_CONTRACT_STREAM, LISTING1_STATEMENT_STREAM


def test_listing1_contract_stream_golden(listing1_source):
    doc = serialize_contract(parse_source(listing1_source))
    assert doc.id == "1_10"
    assert doc.granularity is Granularity.CONTRACT
    assert " ".join(doc.tokens) == LISTING1_CONTRACT_STREAM


def test_listing1_statement_stream_golden(listing1_source):
    docs = serialize_statements(parse_source(listing1_source))
    assert len(docs) == 1
    doc = docs[0]
    assert doc.id == "8_8"
    assert doc.granularity is Granularity.STATEMENT
    assert " ".join(doc.tokens) == LISTING1_STATEMENT_STREAM


def test_minimal_contract_stream():
    root = parse_source("contract A { }")
    doc = serialize_contract(root)
    assert doc.id == "1_1"
    assert " ".join(doc.tokens) == "contract A { }"


def leaf_walk_texts(node):
    """Independent oracle: raw leaf texts with version literals renamed."""
    out = []
    for tok in node.leaves():
        out.append("versionliteral" if tok.kind.name == "VERSION_LITERAL" else tok.text)
    return out


def test_per_contract_streams_cover_whole_file_minus_pragma():
    src = """pragma solidity ^0.4.24;
contract A { uint x; function f() { x = 1; } }
contract B { string name; }
"""
    root = parse_source(src)
    whole = serialize_contract(root)
    contracts = find_nodes(root, NodeKind.CONTRACT_DEFINITION)
    bindings = collect_bindings(root)
    per_contract = [serialize_contract(c, bindings) for c in contracts]
    assert all(d.granularity is Granularity.SUBCONTRACT for d in per_contract)

    oracle_whole = Counter(leaf_walk_texts(root))
    oracle_pragma = Counter(leaf_walk_texts(root.children[0]))
    combined = Counter()
    for doc in per_contract:
        combined.update(doc.tokens)
    assert combined == oracle_whole - oracle_pragma
    assert Counter(whole.tokens) == oracle_whole


def test_statement_ids_match_spans():
    src = """contract A {
    function f(uint n) {
        uint x = 0;
        x = n +
            1;
    }
}
"""
    docs = serialize_statements(parse_source(src))
    assert [d.id for d in docs] == ["3_3", "4_5"]


def reference_statement_stream(path_kinds, stmt_tokens, fn_name, fn_params,
                               contract_name):
    """Hand-applied construction rules for a statement document."""
    parts = list(path_kinds)
    parts += stmt_tokens
    parts += ["function", fn_name]
    parts += [s.lower() for s in camel_case_subtokens(fn_name)]
    parts += fn_params
    parts += ["contract", contract_name, contract_name.lower(), "{", "}"]
    return " ".join(parts)


def test_statement_stream_matches_reference_builder():
    src = """contract MyCoin {
    function fooBar(uint y) {
        x = y + z;
    }
}
"""
    docs = serialize_statements(parse_source(src))
    expected = reference_statement_stream(
        ["sourceUnit", "contractDefinition", "contractPart", "functionDefinition",
         "block", "statement", "simpleStatement"],
        ["x", "=", "y", "+", "z", ";"],
        "fooBar", ["(", "uint", "y", ")"],
        "MyCoin",
    )
    assert " ".join(docs[0].tokens) == expected


def test_single_word_function_name_subtoken():
    src = "contract C { function f() { x = 1; } }"
    doc = serialize_statements(parse_source(src))[0]
    stream = " ".join(doc.tokens)
    assert "function f f ( )" in stream


def test_camel_case_splitting():
    assert camel_case_subtokens("addValue") == ["add", "value"]
    assert camel_case_subtokens("f") == ["f"]
    assert camel_case_subtokens("ERC20") == ["erc20"]
    assert camel_case_subtokens("myERC20Token") == ["my", "erc20", "token"]
    assert camel_case_subtokens("HTTPServer") == ["http", "server"]
    assert camel_case_subtokens("_setOwner") == ["set", "owner"]


def test_compound_statements_yield_header_plus_inner_units():
    src = """contract A {
    function f(uint n) {
        if (n > 0) {
            n -= 1;
        }
    }
}
"""
    root = parse_source(src)
    docs = serialize_statements(root)
    streams = [" ".join(d.tokens) for d in docs]
    assert len(docs) == 2
    assert "if ( n > 0 )" in streams[0]
    assert "n -= 1 ;" in streams[1]
    # the inner unit's path records its position inside the if-statement
    assert "statement ifStatement statement block statement simpleStatement" in streams[1]


def test_serializer_is_idempotent(listing1_source):
    root = parse_source(listing1_source)
    assert serialize_contract(root) == serialize_contract(root)
    first = serialize_statements(root)
    second = serialize_statements(root)
    assert first == second


def test_context_error_for_foreign_statement(listing1_source):
    root = parse_source(listing1_source)
    other = parse_source("contract X { function g() { a = 1; } }")
    unit = iter_statement_units(other)[0]
    contract = find_nodes(root, NodeKind.CONTRACT_DEFINITION)[0]
    fn = find_nodes(root, NodeKind.FUNCTION_DEFINITION)[0]
    with pytest.raises(ContextError):
        serialize_statement(unit.node, StatementContext(root, contract, fn))


def test_empty_source_unit_raises_empty_contract():
    with pytest.raises(EmptyContractError):
        serialize_contract(parse_source(""))


def test_member_access_is_not_a_simple_var():
    src = """contract A {
    function f(uint value) {
        total += msg.value;
    }
}
"""
    doc = serialize_statements(parse_source(src))[0]
    roles = dict(zip(doc.tokens, doc.roles))
    # the member access keeps its role even though a parameter shares the name
    idx = list(doc.tokens).index("msg")
    assert doc.roles[idx + 2] is TokenRole.MEMBER
