from __future__ import annotations

import re
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from smartembed.corpus import ingest_directory, prepare_corpus
from smartembed.detect import build_bug_matrix, load_bug_records
from smartembed.embedding import HyperParams, train

settings.register_profile(
    "ci",
    max_examples=60,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")

REPO_ROOT = Path(__file__).resolve().parent.parent
SEED_DIR = REPO_ROOT / "seed"
BUGTEST_DIR = Path(__file__).resolve().parent / "fixtures" / "bugtest"

# The source of Listing 1: the worked example every serializer golden uses.
LISTING1 = """\
pragma solidity ^0.4.15;

contract Overflow {
    uint private r=0;

    function addValue(uint value) returns (bool){
        // possible overflow
        r += value;
    }
}
"""

LISTING1_CONTRACT_STREAM = (
    "pragma solidity ^ versionliteral ; contract Overflow { uint private r = 0 ; "
    "function addValue ( uint value ) returns ( bool ) { r += value ; } }"
)

LISTING1_STATEMENT_STREAM = (
    "sourceUnit contractDefinition contractPart functionDefinition block statement "
    "simpleStatement r += value ; function addValue add value ( uint value ) "
    "returns ( bool ) contract Overflow overflow { }"
)

# Fixture training budgets. The clone model follows the small documented
# budget (d=32, 3 epochs); the bug model trains longer so that unrelated
# statements separate well below the 0.95 bug threshold.
CLONE_PARAMS = HyperParams(dim=32, window_size=5, negative_samples=5,
                           min_count=1, bucket_count=1 << 15, epochs=3,
                           initial_learning_rate=0.05, seed=20240601)
BUG_PARAMS = HyperParams(dim=32, window_size=5, negative_samples=5,
                         min_count=1, bucket_count=1 << 15, epochs=10,
                         initial_learning_rate=0.08, seed=20240601)

# Planted bug statements in tests/fixtures/bugtest: (file name, start line).
# Six are verbatim copies of bug-database statements, six are consistently
# variable-renamed versions; 30 remaining statement units are clean.
PLANTED_BUGS = {
    ("f01_vault_verbatim.sol", 8): "SE-001",
    ("f01_vault_verbatim.sol", 12): "SE-003",
    ("f02_vault_renamed.sol", 8): "SE-001",
    ("f02_vault_renamed.sol", 9): "SE-002",
    ("f02_vault_renamed.sol", 13): "SE-003",
    ("f03_fund_verbatim.sol", 8): "SE-005",
    ("f03_fund_verbatim.sol", 12): "SE-006",
    ("f04_fund_renamed.sol", 8): "SE-005",
    ("f05_send_verbatim.sol", 8): "SE-007",
    ("f06_send_renamed.sol", 8): "SE-008",
    ("f07_origin_verbatim.sol", 8): "SE-009",
    ("f08_origin_renamed.sol", 8): "SE-010",
}
EXPECTED_CLEAN_UNITS = 30

# Simple-variable rename maps used to build type-2 clone variants of the
# seed corpus. Names avoid digits so the literal bump cannot touch them.
TYPE2_RENAMES = {
    "token.sol": {"balances": "heldBy", "totalSupply": "supplyCap",
                  "minter": "issuer", "initialSupply": "startSupply",
                  "receiver": "toAcct", "amount": "qty", "holder": "acct"},
    "wallet.sol": {"owner": "boss", "deposits": "vault", "amount": "qty",
                   "target": "sink"},
    "auction.sol": {"highestBidder": "leader", "highestBid": "topOffer",
                    "deadline": "cutoff", "ended": "closed"},
    "voting.sol": {"voteCounts": "tallies", "hasVoted": "voted",
                   "proposalCount": "numProposals", "proposal": "choice",
                   "winner": "leading", "best": "top", "i": "k"},
    "crowdsale.sol": {"beneficiary": "recipient", "goal": "cap",
                      "raised": "collected", "rate": "price",
                      "contributions": "pledges", "tokens": "minted"},
    "registry.sol": {"records": "owners", "registeredAt": "stampedAt",
                     "fee": "cost", "name": "handle"},
    "lottery.sol": {"players": "entrants", "manager": "host",
                    "ticketPrice": "entryFee", "index": "winnerSlot"},
    "escrow.sol": {"payer": "depositor", "payee": "collector",
                   "arbiter": "judge", "amount": "total", "released": "done"},
    "splitter.sol": {"first": "alpha", "second": "beta",
                     "totalSplit": "splitSum", "half": "part",
                     "newFirst": "nextAlpha", "newSecond": "nextBeta"},
    "bank.sol": {"savings": "stash", "lastDeposit": "lastSave",
                 "interestRate": "growthRate", "saver": "client",
                 "elapsed": "delta", "bonus": "gain", "amount": "qty"},
}


def make_type2_variant(text: str, renames: dict[str, str]) -> str:
    """Consistently rename simple variables and perturb decimal literals."""
    out = []
    for line in text.splitlines(keepends=True):
        if line.lstrip().startswith("pragma"):
            out.append(line)
            continue
        for old, new in renames.items():
            line = re.sub(rf"(?<!\.)\b{old}\b", new, line)
        line = re.sub(r"\b(\d+)\b", lambda m: str(int(m.group(1)) + 3), line)
        out.append(line)
    return "".join(out)


@pytest.fixture(scope="session")
def listing1_source() -> str:
    return LISTING1


@pytest.fixture(scope="session")
def seed_contract_dir() -> Path:
    return SEED_DIR / "contracts"


@pytest.fixture(scope="session")
def seed_bugdb_path() -> Path:
    return SEED_DIR / "bugs.tsv"


@pytest.fixture(scope="session")
def seed_prepared():
    contracts = prepare_corpus(ingest_directory(SEED_DIR / "contracts"))
    bug_sources = prepare_corpus(ingest_directory(SEED_DIR / "bug_sources"))
    return contracts, bug_sources


@pytest.fixture(scope="session")
def clone_model(seed_prepared):
    contracts, _ = seed_prepared
    return train(contracts.training_docs, CLONE_PARAMS)


@pytest.fixture(scope="session")
def bug_model(seed_prepared):
    contracts, bug_sources = seed_prepared
    return train(contracts.training_docs + bug_sources.training_docs, BUG_PARAMS)


@pytest.fixture(scope="session")
def clone_corpus_matrix(seed_prepared, clone_model):
    from smartembed.corpus import build_contract_matrix

    contracts, _ = seed_prepared
    return build_contract_matrix(contracts, clone_model)


@pytest.fixture(scope="session")
def corpus_matrix(seed_prepared, bug_model):
    from smartembed.corpus import build_contract_matrix

    contracts, _ = seed_prepared
    return build_contract_matrix(contracts, bug_model)


@pytest.fixture(scope="session")
def bug_records(bug_model):
    records = load_bug_records(SEED_DIR / "bugs.tsv")
    return records


@pytest.fixture(scope="session")
def bug_matrix(bug_records, bug_model):
    return build_bug_matrix(bug_records, bug_model, base_dir=SEED_DIR)


@pytest.fixture(scope="session")
def artifact_dir(tmp_path_factory, bug_model, corpus_matrix, bug_matrix):
    """On-disk artifacts shared by the CLI and service tests."""
    from smartembed.embedding import save_model
    from smartembed.simindex import save_matrix

    out = tmp_path_factory.mktemp("artifacts")
    save_model(bug_model, out / "model.bin")
    save_matrix(corpus_matrix, out / "corpus.mat")
    save_matrix(bug_matrix, out / "bugs.mat")
    return out
