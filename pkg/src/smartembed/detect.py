"""Clone detection, clone-bug detection, and corpus clone statistics.

Clone queries embed the whole submitted source at contract granularity and
rank corpus rows by similarity. Bug queries embed every statement of the
submitted source and compare against the bug-statement matrix; a statement
reports at most its best-matching bug record. A contract's lines count as
cloned when it participates in at least one clone pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .embedding import EmbeddingModel, embed_fragment
from .errors import SmartEmbedError
from .frontend import (
    Granularity,
    NodeKind,
    find_nodes,
    normalize,
    parse_source,
    serialize_contract,
    serialize_statements,
)
from .simindex import (
    EmbeddingMatrix,
    RowMeta,
    build_matrix,
    similarity,
    threshold_query,
    top_k,
)

DEFAULT_BUG_THRESHOLD = 0.95
DEFAULT_CLONE_TOP_K = 5


@dataclass
class CloneMatch:
    rank: int
    contract_name: str
    similarity: float
    external_link: str
    source_ref: str
    fragment_id: str

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "contractName": self.contract_name,
            "similarity": self.similarity,
            "externalLink": self.external_link or None,
            "sourceRef": self.source_ref,
            "fragmentId": self.fragment_id,
        }


@dataclass
class CloneReport:
    query_ref: str
    matches: list[CloneMatch]
    top_k: int
    parse_warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "queryRef": self.query_ref,
            "topK": self.top_k,
            "matches": [m.to_dict() for m in self.matches],
            "parseWarnings": list(self.parse_warnings),
        }


@dataclass
class BugFinding:
    start_line: int
    end_line: int
    bug_id: str
    bug_type: str
    similarity: float
    all_matches: list[tuple[str, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "startLine": self.start_line,
            "endLine": self.end_line,
            "bugId": self.bug_id,
            "bugType": self.bug_type,
            "similarity": self.similarity,
        }
        if self.all_matches:
            out["allMatches"] = [
                {"bugId": bug_id, "similarity": sim}
                for bug_id, sim in self.all_matches
            ]
        return out


@dataclass
class BugReport:
    findings: list[BugFinding]
    threshold_used: float
    parse_warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "thresholdUsed": self.threshold_used,
            "findings": [f.to_dict() for f in self.findings],
            "parseWarnings": list(self.parse_warnings),
        }


@dataclass
class ClonePair:
    left: int
    right: int
    similarity: float


@dataclass
class CloneStats:
    total_lines: int
    cloned_lines: int
    clone_ratio: float
    clone_pair_count: int
    threshold: float

    def to_dict(self) -> dict:
        return {
            "totalLines": self.total_lines,
            "clonedLines": self.cloned_lines,
            "cloneRatio": self.clone_ratio,
            "clonePairCount": self.clone_pair_count,
            "threshold": self.threshold,
        }


@dataclass
class BugRecord:
    bug_id: str
    bug_type: str
    source_contract: str
    line_in_source: int
    raw_statement: str
    normalized_doc: object | None = None


def load_bug_records(path) -> list[BugRecord]:
    """Read the tab-separated bug database.

    Columns: bugId, bugType, sourceContractPath, lineNumber, rawStatement.
    """
    records: list[BugRecord] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise SmartEmbedError(
                    f"{path}:{lineno}: expected 5 tab-separated fields, "
                    f"found {len(parts)}")
            bug_id, bug_type, source, line_no, raw = parts
            if bug_id in seen:
                raise SmartEmbedError(f"{path}:{lineno}: duplicate bug id {bug_id!r}")
            seen.add(bug_id)
            records.append(BugRecord(bug_id, bug_type, source, int(line_no), raw))
    return records


def save_bug_records(records: list[BugRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write("\t".join([rec.bug_id, rec.bug_type, rec.source_contract,
                                str(rec.line_in_source), rec.raw_statement]) + "\n")


def _statement_docs(source: str, source_ref: str = ""):
    root = parse_source(source)
    docs = [normalize(doc) for doc in serialize_statements(root, source_ref)]
    return root, docs


def resolve_bug_documents(records: list[BugRecord], base_dir=None) -> None:
    """Fill each record's normalized statement document from its source file.

    The record's contract is parsed and the statement covering the recorded
    line is serialized with its real context. Paths resolve relative to
    ``base_dir`` (normally the bug database's directory).
    """
    base = Path(base_dir) if base_dir is not None else Path(".")
    cache: dict[str, list] = {}
    for rec in records:
        path = Path(rec.source_contract)
        if not path.is_absolute():
            path = base / path
        key = str(path)
        if key not in cache:
            _, docs = _statement_docs(path.read_text(encoding="utf-8"), key)
            cache[key] = docs
        covering = [d for d in cache[key]
                    if d.span[0] <= rec.line_in_source <= d.span[1]]
        if not covering:
            raise SmartEmbedError(
                f"bug {rec.bug_id!r}: no statement covers line "
                f"{rec.line_in_source} of {rec.source_contract}")
        covering.sort(key=lambda d: (d.span[0] != rec.line_in_source,
                                     d.line_count))
        rec.normalized_doc = covering[0]


def build_bug_matrix(records: list[BugRecord], model: EmbeddingModel,
                     base_dir=None) -> EmbeddingMatrix:
    """Embed every bug record's statement into matrix rows (record order)."""
    if any(rec.normalized_doc is None for rec in records):
        resolve_bug_documents(records, base_dir)
    fragments = []
    meta = []
    for rec in records:
        fragments.append(embed_fragment(model, rec.normalized_doc))
        meta.append(RowMeta(rec.normalized_doc.id, Granularity.STATEMENT,
                            rec.source_contract, rec.bug_id))
    return build_matrix(fragments, meta, dim=model.dim)


def find_clones(source: str, corpus: EmbeddingMatrix, model: EmbeddingModel,
                k: int = DEFAULT_CLONE_TOP_K, source_ref: str = "") -> CloneReport:
    """Top-k most similar corpus contracts for the submitted source."""
    if corpus.row_count and corpus.meta[0].granularity is not Granularity.CONTRACT:
        raise ValueError("clone corpus must hold contract-granularity rows")
    root = parse_source(source)
    doc = normalize(serialize_contract(root, source_ref=source_ref))
    query = embed_fragment(model, doc)
    matches = top_k(query.values, corpus, k)
    contracts = find_nodes(root, NodeKind.CONTRACT_DEFINITION)
    query_ref = source_ref or (contracts[0].name if contracts else "<submitted>")
    clone_matches = [
        CloneMatch(rank, m.meta.label or m.meta.source_ref, m.similarity,
                   m.meta.external_link, m.meta.source_ref, m.meta.fragment_id)
        for rank, m in enumerate(matches, 1)
    ]
    return CloneReport(query_ref, clone_matches, k, list(root.warnings))


def detect_clone_pairs(corpus: EmbeddingMatrix,
                       delta: float) -> tuple[list[ClonePair], CloneStats]:
    """All unordered row pairs at or above the threshold, plus statistics."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    pairs: list[ClonePair] = []
    in_pair: set[int] = set()
    n = corpus.row_count
    for i in range(n):
        for j in range(i + 1, n):
            sim = similarity(corpus.rows[i], corpus.rows[j])
            if sim >= delta:
                pairs.append(ClonePair(i, j, sim))
                in_pair.add(i)
                in_pair.add(j)
    total_lines = sum(entry.line_count for entry in corpus.meta)
    cloned_lines = sum(corpus.meta[i].line_count for i in sorted(in_pair))
    ratio = cloned_lines / total_lines if total_lines else 0.0
    stats = CloneStats(total_lines, cloned_lines, ratio, len(pairs), delta)
    return pairs, stats


def clone_ratio(corpus: EmbeddingMatrix, delta: float) -> CloneStats:
    _, stats = detect_clone_pairs(corpus, delta)
    return stats


def detect_bugs(source: str, bug_matrix: EmbeddingMatrix,
                records: list[BugRecord], model: EmbeddingModel,
                threshold: float = DEFAULT_BUG_THRESHOLD,
                all_matches: bool = False, source_ref: str = "") -> BugReport:
    """Match every statement of the source against the bug database."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    if bug_matrix.row_count != len(records):
        raise ValueError("bug matrix rows must align with bug records")
    root = parse_source(source)
    findings: list[BugFinding] = []
    for doc in serialize_statements(root, source_ref):
        norm_doc = normalize(doc)
        query = embed_fragment(model, norm_doc)
        matches = threshold_query(query.values, bug_matrix, threshold)
        if not matches:
            continue
        best = min(matches,
                   key=lambda m: (-m.similarity, records[m.row_index].bug_id))
        record = records[best.row_index]
        start, end = doc.span
        extra = ([(records[m.row_index].bug_id, m.similarity) for m in matches]
                 if all_matches else [])
        findings.append(BugFinding(start, end, record.bug_id, record.bug_type,
                                   best.similarity, extra))
    return BugReport(findings, threshold, list(root.warnings))
