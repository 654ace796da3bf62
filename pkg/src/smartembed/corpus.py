"""Contract corpus management: ingestion, explorer fetch, index building.

Local-directory ingestion is the primary path; the HTTP fetch client is an
optional convenience for pulling verified sources from an explorer-style
endpoint and never runs during ingestion or index builds.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import requests

from . import __version__
from .detect import BugRecord, build_bug_matrix, load_bug_records
from .embedding import EmbeddingModel, HyperParams, embed_fragment, load_model, save_model, train
from .errors import (
    EmptyCorpusError,
    LexError,
    NetworkError,
    NotVerifiedError,
    ParseError,
    RateLimitError,
    SmartEmbedError,
)
from .frontend import (
    Granularity,
    NodeKind,
    TokenDocument,
    collect_bindings,
    find_nodes,
    normalize,
    parse_source,
    serialize_contract,
    serialize_statements,
    write_corpus_file,
)
from .simindex import EmbeddingMatrix, RowMeta, build_matrix, save_matrix

ADDRESS_RE = re.compile(r"^0x[0-9a-fA-F]{40}$")
DEFAULT_LINK_TEMPLATE = "https://etherscan.io/address/{address}#code"

_CONTRACT_NAME_RE = re.compile(
    r"^\s*(?:contract|library|interface)\s+([A-Za-z_$][A-Za-z0-9_$]*)", re.MULTILINE)


@dataclass
class ContractEntry:
    path: str
    contract_name: str
    line_count: int
    sha256: str
    address: str | None = None
    external_link: str | None = None

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "contractName": self.contract_name,
            "lineCount": self.line_count,
            "sha256": self.sha256,
            "address": self.address,
            "externalLink": self.external_link,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ContractEntry":
        return cls(data["path"], data["contractName"], data["lineCount"],
                   data["sha256"], data.get("address"), data.get("externalLink"))


@dataclass
class CorpusManifest:
    entries: list[ContractEntry]
    created_at: str
    tool_version: str = __version__
    skipped: list[str] = field(default_factory=list)
    duplicates: list[str] = field(default_factory=list)

    def save(self, path) -> None:
        payload = {
            "entries": [e.to_dict() for e in self.entries],
            "createdAt": self.created_at,
            "toolVersion": self.tool_version,
            "skipped": self.skipped,
            "duplicates": self.duplicates,
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls([ContractEntry.from_dict(e) for e in data["entries"]],
                   data["createdAt"], data.get("toolVersion", "unknown"),
                   data.get("skipped", []), data.get("duplicates", []))


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _load_sidecar(path: Path) -> dict:
    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        return {}
    try:
        return json.loads(sidecar.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return {}


def _guess_contract_name(text: str, path: Path) -> str:
    match = _CONTRACT_NAME_RE.search(text)
    return match.group(1) if match else path.stem


def ingest_directory(root, keep_duplicates: bool = False) -> CorpusManifest:
    """Collect every ``*.sol`` under ``root`` into a manifest.

    Byte-identical files are deduplicated (first path in sorted order wins)
    unless ``keep_duplicates`` is set. Unreadable files are skipped and
    listed in the manifest's skip report.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus root {root} is not a directory")
    entries: list[ContractEntry] = []
    skipped: list[str] = []
    duplicates: list[str] = []
    seen_hashes: dict[str, str] = {}
    for path in sorted(root.rglob("*.sol")):
        try:
            raw = path.read_bytes()
            text = raw.decode("utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            skipped.append(f"{path}: {exc}")
            continue
        digest = hashlib.sha256(raw).hexdigest()
        if digest in seen_hashes and not keep_duplicates:
            duplicates.append(f"{path}: duplicate of {seen_hashes[digest]}")
            continue
        seen_hashes.setdefault(digest, str(path))
        meta = _load_sidecar(path)
        address = meta.get("address")
        if address is not None and not ADDRESS_RE.match(str(address)):
            skipped.append(f"{_sidecar_path(path)}: bad address {address!r} ignored")
            address = None
        entries.append(ContractEntry(
            path=str(path.resolve()),
            contract_name=meta.get("contractName") or _guess_contract_name(text, path),
            line_count=max(1, len(text.splitlines())),
            sha256=digest,
            address=address,
            external_link=meta.get("externalLink"),
        ))
    if not entries:
        raise EmptyCorpusError(f"no readable contracts under {root}")
    return CorpusManifest(entries, datetime.now(timezone.utc).isoformat(),
                          skipped=skipped, duplicates=duplicates)


@dataclass
class FetchResult:
    address: str
    contract_name: str
    source: str
    path: str
    external_link: str


def fetch_verified_source(address: str, endpoint: str, out_dir,
                          api_key: str | None = None, timeout: float = 10.0,
                          max_retries: int = 3,
                          link_template: str = DEFAULT_LINK_TEMPLATE,
                          session=None) -> FetchResult:
    """Fetch one verified source from an explorer-compatible endpoint.

    Retries on HTTP 429 honoring Retry-After (bounded). The fetched file
    lands in ``out_dir`` with a metadata sidecar alongside.
    """
    if not ADDRESS_RE.match(address):
        raise ValueError(f"malformed address {address!r}")
    params = {"module": "contract", "action": "getsourcecode", "address": address}
    if api_key:
        params["apikey"] = api_key
    http = session or requests
    attempts = 0
    while True:
        try:
            response = http.get(endpoint, params=params, timeout=timeout)
        except requests.RequestException as exc:
            raise NetworkError(f"fetch from {endpoint} failed: {exc}") from exc
        if response.status_code == 429:
            attempts += 1
            if attempts > max_retries:
                raise RateLimitError(
                    f"{endpoint} kept returning 429 after {max_retries} retries")
            delay = min(float(response.headers.get("Retry-After", "1") or 1), 10.0)
            time.sleep(delay)
            continue
        break
    if response.status_code != 200:
        raise NetworkError(f"{endpoint} answered HTTP {response.status_code}")
    try:
        payload = response.json()
        result = payload["result"][0]
        source = result.get("SourceCode", "")
        name = result.get("ContractName") or address
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise NetworkError(f"unexpected response shape from {endpoint}") from exc
    if not source.strip():
        raise NotVerifiedError(f"{address} has no verified source at {endpoint}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    file_path = out_dir / f"{address}.sol"
    file_path.write_text(source, encoding="utf-8")
    link = link_template.format(address=address)
    _sidecar_path(file_path).write_text(json.dumps({
        "contractName": name, "address": address, "externalLink": link,
    }, indent=2) + "\n", encoding="utf-8")
    return FetchResult(address, name, source, str(file_path), link)


@dataclass
class BuildReport:
    contracts: int = 0
    subcontracts: int = 0
    functions: int = 0
    statements: int = 0
    lines: int = 0
    skipped: list[str] = field(default_factory=list)
    trained: bool = False
    artifacts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "contracts": self.contracts,
            "subcontracts": self.subcontracts,
            "functions": self.functions,
            "statements": self.statements,
            "lines": self.lines,
            "skipped": self.skipped,
            "trained": self.trained,
            "artifacts": self.artifacts,
        }


@dataclass
class PreparedCorpus:
    """Per-entry documents plus the flattened training corpus."""

    entries: list[ContractEntry]
    contract_docs: list[TokenDocument]  # aligned with entries
    training_docs: list[TokenDocument]
    report: BuildReport


def prepare_corpus(manifest: CorpusManifest) -> PreparedCorpus:
    """Parse and serialize every manifest entry into normalized documents.

    Files that fail to lex or parse are skipped (and reported); the build
    aborts only when more than half of the entries fail.
    """
    if not manifest.entries:
        raise EmptyCorpusError("manifest holds no entries")
    report = BuildReport()
    kept_entries: list[ContractEntry] = []
    contract_docs: list[TokenDocument] = []
    training_docs: list[TokenDocument] = []
    for entry in manifest.entries:
        try:
            text = Path(entry.path).read_text(encoding="utf-8")
            root = parse_source(text)
            contract_doc = normalize(serialize_contract(root, source_ref=entry.path))
            statement_docs = [normalize(d) for d in
                              serialize_statements(root, entry.path)]
        except (OSError, UnicodeDecodeError, LexError, ParseError,
                SmartEmbedError) as exc:
            report.skipped.append(f"{entry.path}: {exc}")
            continue
        subcontracts = find_nodes(root, NodeKind.CONTRACT_DEFINITION)
        sub_docs = []
        if len(subcontracts) > 1:
            bindings = collect_bindings(root)
            sub_docs = [normalize(serialize_contract(c, bindings, entry.path))
                        for c in subcontracts]
        kept_entries.append(entry)
        contract_docs.append(contract_doc)
        training_docs.extend([contract_doc, *sub_docs, *statement_docs])
        report.contracts += 1
        report.subcontracts += len(subcontracts)
        report.functions += len(find_nodes(root, NodeKind.FUNCTION_DEFINITION))
        report.statements += len(statement_docs)
        report.lines += entry.line_count
    if len(report.skipped) * 2 > len(manifest.entries):
        raise SmartEmbedError(
            f"{len(report.skipped)} of {len(manifest.entries)} entries failed "
            "to parse; refusing to build from a minority of the corpus")
    if not kept_entries:
        raise EmptyCorpusError("every manifest entry failed to parse")
    return PreparedCorpus(kept_entries, contract_docs, training_docs, report)


def build_contract_matrix(prepared: PreparedCorpus,
                          model: EmbeddingModel) -> EmbeddingMatrix:
    fragments = [embed_fragment(model, doc) for doc in prepared.contract_docs]
    meta = [
        RowMeta(doc.id, Granularity.CONTRACT, entry.path, entry.contract_name,
                entry.external_link or "")
        for doc, entry in zip(prepared.contract_docs, prepared.entries)
    ]
    return build_matrix(fragments, meta, dim=model.dim)


def build_index(manifest: CorpusManifest, out_dir,
                params: HyperParams | None = None,
                model_path=None, bugdb_path=None,
                workers: int = 1) -> BuildReport:
    """Run the whole pipeline: documents, model, matrix C, optional matrix B."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prepared = prepare_corpus(manifest)
    report = prepared.report

    tokens_path = out / "corpus.tokens"
    write_corpus_file(prepared.training_docs, tokens_path)
    report.artifacts["tokens"] = str(tokens_path)

    if model_path is not None:
        model = load_model(model_path)
        report.artifacts["model"] = str(model_path)
    else:
        model = train(prepared.training_docs, params or HyperParams(),
                      workers=workers)
        model_file = out / "model.bin"
        save_model(model, model_file)
        report.trained = True
        report.artifacts["model"] = str(model_file)

    matrix = build_contract_matrix(prepared, model)
    matrix_path = out / "corpus.mat"
    save_matrix(matrix, matrix_path)
    report.artifacts["corpus_matrix"] = str(matrix_path)

    if bugdb_path is not None:
        records = load_bug_records(bugdb_path)
        bug_matrix = build_bug_matrix(records, model,
                                      base_dir=Path(bugdb_path).parent)
        bug_path = out / "bugs.mat"
        save_matrix(bug_matrix, bug_path)
        report.artifacts["bug_matrix"] = str(bug_path)

    report_path = out / "build_report.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n",
                           encoding="utf-8")
    return report
