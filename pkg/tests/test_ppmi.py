"""Tests for corpus preprocessing, co-occurrence counting, PPMI, and SVD."""

import math

import numpy as np
import pytest
import scipy.sparse as sp

from diffvec.ppmi import (
    CooccurrenceCounts,
    build_cooccurrence,
    compute_ppmi,
    preprocess_corpus,
    truncated_svd,
    truncated_svd_embed,
)


def counts_from_pairs(vocab, pairs, window=1):
    index = {w: i for i, w in enumerate(vocab)}
    pair_counts = {(index[a], index[b]): c for (a, b), c in pairs.items()}
    word_totals = np.zeros(len(vocab), dtype=np.int64)
    context_totals = np.zeros(len(vocab), dtype=np.int64)
    for (i, j), c in pair_counts.items():
        word_totals[i] += c
        context_totals[j] += c
    return CooccurrenceCounts(list(vocab), pair_counts, word_totals, context_totals,
                              int(sum(pair_counts.values())), window)


class TestPreprocess:
    def test_threshold_filters_rare_words(self):
        segments, vocab = preprocess_corpus("A a b", min_count=2)
        assert vocab == {"a": 2}
        assert segments == [["a", "a"]]

    def test_min_count_one_keeps_all(self):
        segments, vocab = preprocess_corpus("The cat SAT", min_count=1)
        assert set(vocab) == {"the", "cat", "sat"}
        assert segments == [["the", "cat", "sat"]]

    def test_everything_filtered_is_an_error(self):
        with pytest.raises(ValueError, match="empty"):
            preprocess_corpus("a b c", min_count=5)

    def test_blank_line_separates_segments(self):
        segments, _ = preprocess_corpus("a b\n\nc a", min_count=1)
        assert segments == [["a", "b"], ["c", "a"]]

    def test_non_textual_tokens_dropped(self):
        segments, vocab = preprocess_corpus("a -- !! a ?", min_count=1)
        assert set(vocab) == {"a"}
        assert segments == [["a", "a"]]


class TestCooccurrence:
    def test_single_adjacency(self):
        counts = build_cooccurrence([["a", "b"]], window=1)
        assert counts.total == 2
        index = {w: i for i, w in enumerate(counts.vocab)}
        assert counts.pair_counts[(index["a"], index["b"])] == 1
        assert counts.pair_counts[(index["b"], index["a"])] == 1

    def test_hand_counted_aba(self):
        counts = build_cooccurrence([["a", "b", "a"]], window=1)
        index = {w: i for i, w in enumerate(counts.vocab)}
        assert counts.pair_counts[(index["a"], index["b"])] == 2
        assert counts.pair_counts[(index["b"], index["a"])] == 2
        assert counts.total == 4
        counts.validate()

    def test_window_covering_whole_segment_counts_all_ordered_pairs(self):
        tokens = ["a", "b", "c", "d"]
        counts = build_cooccurrence([tokens], window=10)
        # brute force over all ordered position pairs
        expected = {}
        for i in range(4):
            for j in range(4):
                if i != j:
                    key = (tokens[i], tokens[j])
                    expected[key] = expected.get(key, 0) + 1
        index = {w: i for i, w in enumerate(counts.vocab)}
        got = {(counts.vocab[i], counts.vocab[j]): c for (i, j), c in counts.pair_counts.items()}
        assert got == expected

    def test_segments_do_not_cross(self):
        counts = build_cooccurrence([["a"], ["b"]], window=5)
        assert counts.total == 0

    def test_totals_consistent(self):
        segments, _ = preprocess_corpus("a b c a b\n\nb c c a", min_count=1)
        counts = build_cooccurrence(segments, window=2)
        counts.validate()

    def test_window_must_be_positive(self):
        with pytest.raises(ValueError):
            build_cooccurrence([["a", "b"]], window=0)


class TestPpmi:
    def test_two_cell_table_log2(self):
        counts = counts_from_pairs(["a", "b"], {("a", "b"): 1, ("b", "a"): 1})
        m = compute_ppmi(counts, cds=1.0, shift=1)
        assert m[0, 1] == pytest.approx(math.log(2), abs=1e-12)
        assert m[1, 0] == pytest.approx(math.log(2), abs=1e-12)

    def test_shift_one_means_no_subtraction(self):
        counts = counts_from_pairs(["a", "b"], {("a", "b"): 1, ("b", "a"): 1})
        m1 = compute_ppmi(counts, cds=1.0, shift=1)
        # shift 2 subtracts log 2, killing the log-2 cells exactly
        m2 = compute_ppmi(counts, cds=1.0, shift=2)
        assert m1.nnz == 2 and m2.nnz == 0

    def test_negative_pmi_clamped_to_zero(self):
        # cross pairs: ratio = 1*10 / (5*5) = 0.4 < 1, so PMI < 0 -> cell 0
        counts = counts_from_pairs(["a", "b"],
                                   {("a", "a"): 4, ("a", "b"): 1,
                                    ("b", "a"): 1, ("b", "b"): 4})
        m = compute_ppmi(counts, cds=1.0, shift=1)
        assert m[0, 1] == 0.0 and m[1, 0] == 0.0
        assert m[0, 0] > 0.0

    def test_smoothed_values_match_hand_derivation(self):
        # corpus [a, b, c, b], window 1; values derived by hand from
        # cnt * S / (word_total * context_total^0.75), S the smoothed sum
        segments, _ = preprocess_corpus("a b c b", min_count=1)
        counts = build_cooccurrence(segments, window=1)
        m = compute_ppmi(counts, cds=0.75, shift=1)
        index = {w: i for i, w in enumerate(counts.vocab)}
        expected = {
            ("a", "b"): 0.7777085639854618,
            ("b", "a"): 0.5030554918184343,
            ("b", "c"): 0.6763422869584207,
            ("c", "b"): 0.7777085639854618,
        }
        for (i, j), value in expected.items():
            assert m[index[i], index[j]] == pytest.approx(value, abs=1e-9)

    def test_matrix_is_nonnegative(self):
        segments, _ = preprocess_corpus("a b c a c c b a\n\nb a c b", min_count=1)
        counts = build_cooccurrence(segments, window=2)
        m = compute_ppmi(counts, cds=0.75, shift=1)
        assert (m.data >= 0).all()

    def test_symmetric_counts_give_symmetric_matrix(self):
        segments, _ = preprocess_corpus("a b c a c c b a", min_count=1)
        counts = build_cooccurrence(segments, window=3)
        m = compute_ppmi(counts, cds=1.0, shift=1).toarray()
        np.testing.assert_allclose(m, m.T, atol=1e-12)

    def test_parameter_validation(self):
        counts = counts_from_pairs(["a", "b"], {("a", "b"): 1, ("b", "a"): 1})
        with pytest.raises(ValueError):
            compute_ppmi(counts, cds=0.0)
        with pytest.raises(ValueError):
            compute_ppmi(counts, shift=0)


class TestTruncatedSvd:
    def test_rank_one_exact_recovery(self):
        u_true = np.array([1.0, 2.0, 3.0])
        v_true = np.array([2.0, -1.0])
        m = np.outer(u_true, v_true)
        u, s = truncated_svd(m, 1)
        v1 = m.T @ u[:, 0] / s[0]
        recon = s[0] * np.outer(u[:, 0], v1)
        np.testing.assert_allclose(recon, m, atol=1e-8)

    def test_eig_weight_zero_gives_orthogonal_rows(self):
        rng = np.random.default_rng(8)
        m = rng.standard_normal((6, 6))
        table = truncated_svd_embed(m, [f"w{i}" for i in range(6)], dim=6, eig_weight=0.0)
        np.testing.assert_allclose(table.vectors @ table.vectors.T, np.eye(6), atol=1e-8)

    def test_matches_dense_svd_oracle(self):
        rng = np.random.default_rng(15)
        m = rng.standard_normal((20, 15))
        u, s = truncated_svd(m, 5)
        u_ref, s_ref, _ = np.linalg.svd(m, full_matrices=False)
        np.testing.assert_allclose(s, s_ref[:5], atol=1e-6)
        for col in range(5):
            ref = u_ref[:, col]
            got = u[:, col]
            sign = 1.0 if abs(ref @ got - 1) < abs(ref @ got + 1) else -1.0
            np.testing.assert_allclose(got, sign * ref, atol=1e-6)

    def test_sparse_input_matches_dense_oracle(self):
        rng = np.random.default_rng(16)
        dense = rng.standard_normal((12, 18)) * (rng.random((12, 18)) < 0.3)
        u, s = truncated_svd(sp.csr_matrix(dense), 4)
        _, s_ref, _ = np.linalg.svd(dense)
        np.testing.assert_allclose(s, s_ref[:4], atol=1e-6)

    def test_singular_values_sorted_nonnegative(self):
        rng = np.random.default_rng(21)
        m = rng.standard_normal((10, 10))
        _, s = truncated_svd(m, 10)
        assert np.all(s >= 0)
        assert np.all(np.diff(s) <= 1e-12)

    def test_u_columns_orthonormal(self):
        rng = np.random.default_rng(22)
        m = rng.standard_normal((9, 14))
        u, _ = truncated_svd(m, 6)
        np.testing.assert_allclose(u.T @ u, np.eye(6), atol=1e-8)

    def test_rank_deficient_returns_zero_directions(self, caplog):
        m = np.outer([1.0, 2.0], [3.0, 4.0])  # rank 1, 2x2
        with caplog.at_level("WARNING"):
            u, s = truncated_svd(m, 2)
        assert s[1] == 0.0
        assert not u[:, 1].any()
        assert any("rank" in rec.message for rec in caplog.records)

    def test_embed_weighting(self):
        rng = np.random.default_rng(23)
        m = rng.standard_normal((8, 8))
        half = truncated_svd_embed(m, [f"w{i}" for i in range(8)], dim=3, eig_weight=0.5)
        u, s = truncated_svd(m, 3)
        np.testing.assert_allclose(half.vectors, u * np.sqrt(s)[None, :], atol=1e-12)

    def test_vocab_length_mismatch(self):
        with pytest.raises(ValueError, match="vocab"):
            truncated_svd_embed(np.eye(3), ["a", "b"], dim=2)
