from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smartembed.embedding import FragmentVector
from smartembed.errors import (
    DimensionMismatchError,
    FormatVersionMismatchError,
    NonFiniteInputError,
    SmartEmbedError,
    TruncatedFileError,
)
from smartembed.frontend import Granularity
from smartembed.simindex import (
    EmbeddingMatrix,
    Match,
    RowMeta,
    build_matrix,
    distance,
    load_matrix,
    save_matrix,
    similarity,
    threshold_query,
    top_k,
)


def fragment(values, source_id="1_1", granularity=Granularity.CONTRACT):
    return FragmentVector(np.asarray(values, dtype=np.float32), source_id, granularity)


def random_matrix(rng, n=50, d=16) -> EmbeddingMatrix:
    frags = [fragment(rng.normal(size=d), source_id=f"{i + 1}_{i + 1}")
             for i in range(n)]
    return build_matrix(frags)


# -- metric ---------------------------------------------------------------------

def test_identical_vectors_have_distance_zero():
    v = np.array([1.0, 2.0, 3.0])
    assert distance(v, v) == 0.0
    assert similarity(v, v) == 1.0


def test_antipodal_vectors_saturate():
    v = np.array([0.5, -1.25, 2.0])
    assert distance(v, -v) == 1.0
    assert similarity(v, -v) == 0.0


def test_orthonormal_vectors():
    e1 = np.array([1.0, 0.0])
    e2 = np.array([0.0, 1.0])
    assert distance(e1, e2) == pytest.approx(math.sqrt(2) / 2, abs=1e-12)
    assert similarity(e1, e2) == pytest.approx(1 - math.sqrt(2) / 2, abs=1e-12)


def test_zero_vectors_are_maximally_similar():
    z = np.zeros(4)
    assert distance(z, z) == 0.0
    assert similarity(z, z) == 1.0


def test_zero_against_nonzero():
    z = np.zeros(3)
    v = np.array([1.0, 1.0, 1.0])
    assert distance(z, v) == 1.0


@pytest.mark.parametrize("alpha", [1.0, 2.0, 0.5])
def test_scaling_behavior(alpha):
    v = np.array([3.0, -4.0, 12.0])
    expected = 1.0 - abs(alpha - 1.0) / (alpha + 1.0)
    assert similarity(alpha * v, v) == pytest.approx(expected, abs=1e-12)


def test_dimension_mismatch_and_nonfinite():
    with pytest.raises(DimensionMismatchError):
        distance(np.ones(3), np.ones(4))
    with pytest.raises(NonFiniteInputError):
        distance(np.array([1.0, np.nan]), np.ones(2))
    with pytest.raises(NonFiniteInputError):
        similarity(np.array([np.inf, 0.0]), np.ones(2))


@given(st.integers(0, 2 ** 32 - 1))
def test_metric_bounds_and_symmetry_on_random_pairs(seed):
    rng = np.random.default_rng(seed)
    scale = 10.0 ** rng.uniform(-6, 6)
    a = rng.normal(size=16) * scale
    b = rng.normal(size=16) * 10.0 ** rng.uniform(-6, 6)
    d = distance(a, b)
    assert 0.0 <= d <= 1.0
    assert similarity(a, b) == 1.0 - d
    assert similarity(a, b) == similarity(b, a)
    assert distance(a, a) == 0.0


# -- matrices -------------------------------------------------------------------

def test_build_matrix_preserves_order_and_norms():
    frags = [fragment([1, 0]), fragment([0, 2]), fragment([2, 1])]
    matrix = build_matrix(frags)
    assert matrix.row_count == 3
    assert np.array_equal(matrix.rows[1], np.array([0, 2], dtype=np.float32))
    for i, entry in enumerate(matrix.meta):
        recomputed = math.sqrt(float(np.dot(matrix.rows[i], matrix.rows[i])))
        assert entry.norm == pytest.approx(recomputed, rel=1e-6)


def test_empty_matrix_returns_no_matches():
    matrix = build_matrix([], dim=8)
    assert matrix.row_count == 0
    assert top_k(np.ones(8), matrix, 5) == []
    assert threshold_query(np.ones(8), matrix, 0.0) == []


def test_mixed_dimensions_rejected():
    with pytest.raises(DimensionMismatchError):
        build_matrix([fragment([1, 2]), fragment([1, 2, 3])])


def test_self_query_ranks_self_first():
    rng = np.random.default_rng(7)
    matrix = random_matrix(rng)
    for i in range(matrix.row_count):
        matches = top_k(matrix.rows[i], matrix, 1)
        assert matches[0].row_index == i
        assert matches[0].similarity == 1.0


def test_top_k_with_k_larger_than_n():
    rng = np.random.default_rng(11)
    matrix = random_matrix(rng, n=4)
    assert len(top_k(rng.normal(size=16), matrix, 10)) == 4


def test_threshold_zero_returns_all_rows():
    rng = np.random.default_rng(13)
    matrix = random_matrix(rng, n=10)
    assert len(threshold_query(rng.normal(size=16), matrix, 0.0)) == 10


def test_threshold_one_finds_exact_duplicate():
    frags = [fragment([1, 2, 3]), fragment([4, 5, 6]), fragment([1, 2, 3])]
    matrix = build_matrix(frags)
    matches = threshold_query(np.array([1, 2, 3], dtype=np.float32), matrix, 1.0)
    assert [m.row_index for m in matches] == [0, 2]


def brute_force(query, matrix):
    """Oracle: score every row with the public metric, sort stably."""
    sims = [similarity(query, matrix.rows[i]) for i in range(matrix.row_count)]
    return sorted(range(len(sims)), key=lambda i: (-sims[i], i)), sims


def test_search_matches_brute_force_on_random_instances():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        matrix = random_matrix(rng, n=50, d=16)
        # plant duplicated rows to force tie-breaking
        dup = rng.integers(0, 40)
        matrix.rows[dup + 5] = matrix.rows[dup]
        query = rng.normal(size=16)
        if rng.random() < 0.3:
            query = matrix.rows[rng.integers(0, 50)].copy()
        order, sims = brute_force(query, matrix)
        k = int(rng.integers(1, 8))
        got = top_k(query, matrix, k)
        assert [m.row_index for m in got] == order[:k]
        assert [m.similarity for m in got] == [sims[i] for i in order[:k]]
        delta = float(rng.uniform(0.2, 0.99))
        got_threshold = threshold_query(query, matrix, delta)
        expected = [i for i in order if sims[i] >= delta]
        assert [m.row_index for m in got_threshold] == expected


def test_query_dimension_mismatch():
    rng = np.random.default_rng(3)
    matrix = random_matrix(rng, n=5)
    with pytest.raises(DimensionMismatchError):
        top_k(np.ones(4), matrix, 1)
    with pytest.raises(DimensionMismatchError):
        threshold_query(np.ones(4), matrix, 0.5)


def test_invalid_k_and_delta():
    rng = np.random.default_rng(5)
    matrix = random_matrix(rng, n=3)
    with pytest.raises(ValueError):
        top_k(np.ones(16), matrix, 0)
    with pytest.raises(ValueError):
        threshold_query(np.ones(16), matrix, 1.5)


# -- persistence -----------------------------------------------------------------

def full_meta_matrix():
    frags = [fragment([1, 2, 3], "1_10"), fragment([4, 5, 6], "2_8")]
    meta = [
        RowMeta("1_10", Granularity.CONTRACT, "a.sol", "TokenA",
                "https://example.org/a"),
        RowMeta("2_8", Granularity.CONTRACT, "b.sol", "TokenB", ""),
    ]
    return build_matrix(frags, meta)


def test_save_load_round_trip(tmp_path):
    matrix = full_meta_matrix()
    path = tmp_path / "corpus.mat"
    save_matrix(matrix, path)
    loaded = load_matrix(path)
    assert np.array_equal(loaded.rows, matrix.rows)
    assert loaded.meta == matrix.meta

    again = tmp_path / "again.mat"
    save_matrix(loaded, again)
    assert path.read_bytes() == again.read_bytes()


def test_truncated_matrix_file(tmp_path):
    matrix = full_meta_matrix()
    path = tmp_path / "corpus.mat"
    save_matrix(matrix, path)
    data = path.read_bytes()
    for cut in [2, 9, 30, len(data) - 3]:
        clipped = tmp_path / f"clip_{cut}.mat"
        clipped.write_bytes(data[:cut])
        with pytest.raises((TruncatedFileError, FormatVersionMismatchError)):
            load_matrix(clipped)


def test_matrix_version_mismatch(tmp_path):
    matrix = full_meta_matrix()
    path = tmp_path / "corpus.mat"
    save_matrix(matrix, path)
    data = bytearray(path.read_bytes())
    data[4:8] = (7).to_bytes(4, "little")
    path.write_bytes(bytes(data))
    with pytest.raises(FormatVersionMismatchError) as exc:
        load_matrix(path)
    assert "7" in str(exc.value)


def test_corrupted_norms_detected(tmp_path):
    matrix = full_meta_matrix()
    path = tmp_path / "corpus.mat"
    save_matrix(matrix, path)
    data = bytearray(path.read_bytes())
    data[-4:] = np.array([1234.5], dtype="<f4").tobytes()
    path.write_bytes(bytes(data))
    with pytest.raises(SmartEmbedError):
        load_matrix(path)
