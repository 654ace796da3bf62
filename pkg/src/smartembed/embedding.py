"""Subword-augmented skip-gram token embeddings over normalized token streams.

A token is represented as its whole-token vector plus the vectors of its
hashed character n-grams (the token is wrapped in ``<`` ``>`` boundary
markers before extraction). Training optimizes the skip-gram objective with
negative sampling, drawing negatives from the unigram distribution raised
to the 3/4 power, with the learning rate decayed linearly to zero across
all epochs. Out-of-vocabulary tokens still embed through their n-grams,
which is the point of the subword construction.

Training is deterministic for a fixed seed when run single-threaded.
An opt-in multi-worker mode updates the shared tables without locking;
it is faster but not reproducible.
"""

from __future__ import annotations

import math
import struct
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateVocabError,
    DimensionMismatchError,
    EmptyCorpusError,
    EmptyDocumentError,
    FormatVersionMismatchError,
    TruncatedFileError,
)
from .frontend.documents import Granularity, TokenDocument

MODEL_MAGIC = b"SEMB"
MODEL_FORMAT_VERSION = 1

_NEGATIVE_POWER = 0.75
_MAX_NEGATIVE_REDRAWS = 100
_SIGMOID_CLAMP = 30.0


@dataclass(frozen=True)
class HyperParams:
    dim: int = 100
    window_size: int = 5
    negative_samples: int = 5
    min_count: int = 1
    ngram_min: int = 3
    ngram_max: int = 6
    bucket_count: int = 1 << 21
    epochs: int = 5
    initial_learning_rate: float = 0.05
    seed: int = 1

    def __post_init__(self) -> None:
        for name in ("dim", "window_size", "negative_samples", "ngram_min",
                     "ngram_max", "bucket_count", "epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.min_count < 0:
            raise ValueError("min_count must be non-negative")
        if self.ngram_min > self.ngram_max:
            raise ValueError("ngram_min must not exceed ngram_max")
        if self.initial_learning_rate <= 0:
            raise ValueError("initial_learning_rate must be positive")


def character_ngrams(token: str, ngram_min: int, ngram_max: int) -> list[str]:
    """Character n-grams of the boundary-wrapped token, extraction order.

    The whole wrapped token counts as one n-gram when it is shorter than
    ``ngram_min`` (longer wrapped tokens inside the length range are already
    produced by the sliding window).
    """
    wrapped = f"<{token}>"
    length = len(wrapped)
    out: list[str] = []
    for n in range(ngram_min, min(ngram_max, length) + 1):
        for i in range(length - n + 1):
            out.append(wrapped[i:i + n])
    if length < ngram_min:
        out.append(wrapped)
    return out


def fnv1a_32(data: bytes) -> int:
    """32-bit FNV-1a; the stable hash behind n-gram bucket assignment."""
    h = 0x811C9DC5
    for byte in data:
        h ^= byte
        h = (h * 0x01000193) & 0xFFFFFFFF
    return h


def ngram_buckets(token: str, params: HyperParams) -> np.ndarray:
    """Bucket index per extracted n-gram (multiset, extraction order)."""
    grams = character_ngrams(token, params.ngram_min, params.ngram_max)
    return np.array([fnv1a_32(g.encode("utf-8")) % params.bucket_count for g in grams],
                    dtype=np.int64)


@dataclass(frozen=True)
class FragmentVector:
    values: np.ndarray
    source_id: str
    granularity: Granularity

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise ValueError("fragment vector has non-finite entries")


class EmbeddingModel:
    """Trained token vectors: vocabulary rows plus hashed n-gram rows."""

    def __init__(self, params: HyperParams, tokens: list[str],
                 counts: np.ndarray, word_vecs: np.ndarray,
                 ngram_vecs: np.ndarray, epoch_losses: list[float]):
        self.params = params
        self.tokens = tokens
        self.vocab = {tok: i for i, tok in enumerate(tokens)}
        self.counts = counts
        self.word_vecs = word_vecs
        self.ngram_vecs = ngram_vecs
        self.epoch_losses = epoch_losses
        self._bucket_cache: dict[str, np.ndarray] = {}
        self._vector_cache: dict[str, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.params.dim

    def frequency(self, token: str) -> int:
        idx = self.vocab.get(token)
        return 0 if idx is None else int(self.counts[idx])

    def token_frequencies(self) -> dict[str, int]:
        return {tok: int(self.counts[i]) for i, tok in enumerate(self.tokens)}

    def _buckets(self, token: str) -> np.ndarray:
        cached = self._bucket_cache.get(token)
        if cached is None:
            cached = ngram_buckets(token, self.params)
            self._bucket_cache[token] = cached
        return cached

    def _vector(self, token: str) -> np.ndarray:
        cached = self._vector_cache.get(token)
        if cached is None:
            acc = self.ngram_vecs[self._buckets(token)].sum(axis=0)
            idx = self.vocab.get(token)
            if idx is not None:
                acc = acc + self.word_vecs[idx]
            cached = acc.astype(np.float32)
            self._vector_cache[token] = cached
        return cached

    def token_vector(self, token: str) -> np.ndarray:
        """Vector for any non-empty token; out-of-vocabulary tokens use
        their n-gram buckets alone."""
        if not token:
            raise ValueError("token must be non-empty")
        return self._vector(token).copy()


def _build_sentences(corpus: Sequence, vocab: dict[str, int]) -> list[np.ndarray]:
    sentences = []
    for doc in corpus:
        tokens = doc.tokens if isinstance(doc, TokenDocument) else doc
        ids = [vocab[t] for t in tokens if t in vocab]
        if ids:
            sentences.append(np.array(ids, dtype=np.int64))
    return sentences


def _log_sigmoid(z: float) -> float:
    if z > _SIGMOID_CLAMP:
        return 0.0
    if z < -_SIGMOID_CLAMP:
        return z
    return -math.log1p(math.exp(-z))


def train(corpus: Sequence, params: HyperParams | None = None,
          workers: int = 1) -> EmbeddingModel:
    """Train token vectors over normalized documents (or bare token lists).

    Single-threaded runs are bit-reproducible for a fixed seed. With
    ``workers > 1`` the shared tables are updated concurrently without
    synchronization, trading determinism for speed.
    """
    params = params or HyperParams()
    corpus = list(corpus)
    if not corpus:
        raise EmptyCorpusError("training corpus is empty")

    raw_counts: Counter = Counter()
    for doc in corpus:
        tokens = doc.tokens if isinstance(doc, TokenDocument) else doc
        raw_counts.update(tokens)
    if not raw_counts:
        raise EmptyCorpusError("training corpus has no token occurrences")

    kept = sorted(
        (tok for tok, cnt in raw_counts.items() if cnt >= max(params.min_count, 1)),
        key=lambda tok: (-raw_counts[tok], tok),
    )
    if not kept:
        raise DegenerateVocabError(
            f"no token reaches min_count={params.min_count}")

    tokens = list(kept)
    vocab = {tok: i for i, tok in enumerate(tokens)}
    counts = np.array([raw_counts[t] for t in tokens], dtype=np.int64)
    sentences = _build_sentences(corpus, vocab)

    rng = np.random.default_rng(params.seed)
    dim = params.dim
    bound = 1.0 / dim
    word_vecs = rng.uniform(-bound, bound, size=(len(tokens), dim)).astype(np.float32)
    ngram_vecs = rng.uniform(-bound, bound,
                             size=(params.bucket_count, dim)).astype(np.float32)
    out_vecs = np.zeros((len(tokens), dim), dtype=np.float32)

    word_buckets = [ngram_buckets(tok, params) for tok in tokens]

    probs = counts.astype(np.float64) ** _NEGATIVE_POWER
    cumulative = np.cumsum(probs / probs.sum())

    total_positions = sum(len(s) for s in sentences) * params.epochs
    lr0 = params.initial_learning_rate
    negatives = params.negative_samples
    window = params.window_size
    epoch_losses: list[float] = []
    processed_box = [0]  # shared across workers; racy updates are tolerated

    def run_sentences(batch: list[np.ndarray], gen: np.random.Generator,
                      sums: list[float]) -> None:
        loss_sum = 0.0
        pair_count = 0
        for sent in batch:
            n = len(sent)
            for i in range(n):
                processed_box[0] += 1
                lr = lr0 * max(0.0, 1.0 - processed_box[0] / total_positions)
                if n < 2:
                    continue
                center = int(sent[i])
                reach = int(gen.integers(1, window + 1))
                lo = max(0, i - reach)
                hi = min(n, i + reach + 1)
                grams = word_buckets[center]
                n_inputs = 1 + len(grams)
                top = len(cumulative) - 1
                for j in range(lo, hi):
                    if j == i:
                        continue
                    hidden = (word_vecs[center]
                              + ngram_vecs[grams].sum(axis=0)).astype(np.float32)
                    target = int(sent[j])
                    draws = gen.random(negatives)
                    negs = np.minimum(np.searchsorted(cumulative, draws), top)
                    for k in range(negatives):
                        tries = 0
                        while negs[k] == target and tries < _MAX_NEGATIVE_REDRAWS:
                            negs[k] = min(np.searchsorted(cumulative, gen.random()), top)
                            tries += 1
                    rows = np.concatenate(([target], negs))
                    labels = np.zeros(len(rows), dtype=np.float32)
                    labels[0] = 1.0
                    z = out_vecs[rows] @ hidden
                    p = 1.0 / (1.0 + np.exp(-np.clip(z, -_SIGMOID_CLAMP,
                                                     _SIGMOID_CLAMP)))
                    g = (lr * (labels - p)).astype(np.float32)
                    grad_h = g @ out_vecs[rows]
                    np.add.at(out_vecs, rows, np.outer(g, hidden))
                    scaled = (grad_h / n_inputs).astype(np.float32)
                    word_vecs[center] += scaled
                    np.add.at(ngram_vecs, grams, scaled)
                    loss_sum += -_log_sigmoid(float(z[0]))
                    loss_sum += -sum(_log_sigmoid(-float(zz)) for zz in z[1:])
                    pair_count += 1
        sums[0] += loss_sum
        sums[1] += pair_count

    for epoch in range(params.epochs):
        sums = [0.0, 0.0]
        if workers <= 1:
            run_sentences(sentences, rng, sums)
        else:
            shards = [sentences[w::workers] for w in range(workers)]
            gens = [np.random.default_rng(params.seed + 7919 * (w + 1) + epoch)
                    for w in range(workers)]
            threads = [
                threading.Thread(target=run_sentences, args=(shard, gen, sums))
                for shard, gen in zip(shards, gens)
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        epoch_losses.append(sums[0] / sums[1] if sums[1] else 0.0)

    return EmbeddingModel(params, tokens, counts, word_vecs, ngram_vecs,
                          epoch_losses)


def embed_fragment(model: EmbeddingModel, doc: TokenDocument) -> FragmentVector:
    """Sum the token vectors of a document, multiplicity respected.

    Accumulation runs over the sorted unique tokens so the result is
    independent of token order within the document.
    """
    if not doc.tokens:
        raise EmptyDocumentError(f"document {doc.id!r} has no tokens")
    acc = np.zeros(model.dim, dtype=np.float64)
    for token, count in sorted(Counter(doc.tokens).items()):
        acc += count * model._vector(token).astype(np.float64)
    return FragmentVector(acc.astype(np.float32), doc.id, doc.granularity)


def embed_fragments(model: EmbeddingModel, docs: Iterable[TokenDocument]) -> list[FragmentVector]:
    return [embed_fragment(model, doc) for doc in docs]


# -- persistence ---------------------------------------------------------------

def _read_exact(fh, size: int, what: str) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise TruncatedFileError(f"model file ended while reading {what}")
    return data


def save_model(model: EmbeddingModel, path) -> None:
    p = model.params
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", MODEL_FORMAT_VERSION))
        fh.write(struct.pack("<IIIIII", p.dim, p.window_size, p.negative_samples,
                             p.min_count, p.ngram_min, p.ngram_max))
        fh.write(struct.pack("<QIdq", p.bucket_count, p.epochs,
                             p.initial_learning_rate, p.seed))
        fh.write(struct.pack("<I", len(model.epoch_losses)))
        for loss in model.epoch_losses:
            fh.write(struct.pack("<d", loss))
        fh.write(struct.pack("<Q", len(model.tokens)))
        for token, count in zip(model.tokens, model.counts):
            raw = token.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<Q", int(count)))
        model.word_vecs.astype("<f4", copy=False).tofile(fh)
        model.ngram_vecs.astype("<f4", copy=False).tofile(fh)


def load_model(path) -> EmbeddingModel:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic bytes")
        if magic != MODEL_MAGIC:
            raise FormatVersionMismatchError("not an embedding-model file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "format version"))
        if version != MODEL_FORMAT_VERSION:
            raise FormatVersionMismatchError(
                "unsupported embedding-model format",
                found=version, supported=MODEL_FORMAT_VERSION)
        dim, window, negatives, min_count, ngram_min, ngram_max = struct.unpack(
            "<IIIIII", _read_exact(fh, 24, "hyperparameters"))
        bucket_count, epochs, lr, seed = struct.unpack(
            "<QIdq", _read_exact(fh, 28, "hyperparameters"))
        params = HyperParams(dim=dim, window_size=window,
                             negative_samples=negatives, min_count=min_count,
                             ngram_min=ngram_min, ngram_max=ngram_max,
                             bucket_count=bucket_count, epochs=epochs,
                             initial_learning_rate=lr, seed=seed)
        (n_losses,) = struct.unpack("<I", _read_exact(fh, 4, "loss table size"))
        losses = [struct.unpack("<d", _read_exact(fh, 8, "loss table"))[0]
                  for _ in range(n_losses)]
        (vocab_size,) = struct.unpack("<Q", _read_exact(fh, 8, "vocabulary size"))
        tokens: list[str] = []
        counts = np.empty(vocab_size, dtype=np.int64)
        for i in range(vocab_size):
            (length,) = struct.unpack("<I", _read_exact(fh, 4, "token length"))
            tokens.append(_read_exact(fh, length, "token text").decode("utf-8"))
            (counts[i],) = struct.unpack("<Q", _read_exact(fh, 8, "token count"))
        word_vecs = np.fromfile(fh, dtype="<f4", count=vocab_size * dim)
        if word_vecs.size != vocab_size * dim:
            raise TruncatedFileError("model file ended inside the word-vector block")
        ngram_vecs = np.fromfile(fh, dtype="<f4", count=bucket_count * dim)
        if ngram_vecs.size != bucket_count * dim:
            raise TruncatedFileError("model file ended inside the n-gram-vector block")
    return EmbeddingModel(params, tokens, counts,
                          word_vecs.reshape(vocab_size, dim),
                          ngram_vecs.reshape(bucket_count, dim), losses)
