import math

import numpy as np
import pytest

from streamcs.sensing import (
    DegenerateMatrixError,
    PermutationOffset,
    SensingConfigError,
    basis_coherence,
    column,
    gen_achlioptas,
    gen_bernoulli,
    gen_gaussian,
    load_matrix,
    materialize,
    mutual_coherence,
    rotate,
    save_matrix,
    shift_matrix,
    view,
)


class TestEnsembles:
    def test_gaussian_column_norms_concentrate(self):
        m, n = 60, 1000
        a = gen_gaussian(m, n, seed=0)
        sq = np.sum(a.base**2, axis=0)  # each ~ chi2_m / m, mean 1, var 2/m
        assert abs(float(np.mean(sq)) - 1.0) <= 3 * math.sqrt(2.0 / m / n)

    def test_different_seeds_differ(self):
        assert not np.array_equal(gen_gaussian(4, 8, 0).base, gen_gaussian(4, 8, 1).base)

    def test_same_seed_bit_identical(self):
        for gen in (gen_gaussian, gen_bernoulli, gen_achlioptas):
            assert np.array_equal(gen(6, 12, 3).base, gen(6, 12, 3).base)

    def test_bernoulli_unit_columns(self):
        a = gen_bernoulli(40, 200, seed=1)
        assert np.allclose(np.sum(a.base**2, axis=0), 1.0, atol=1e-12)

    def test_bernoulli_sign_balance(self):
        a = gen_bernoulli(100, 1000, seed=2)
        pos = np.count_nonzero(a.base > 0)
        total = a.base.size
        assert abs(pos / total - 0.5) <= 3 * math.sqrt(0.25 / total)

    def test_bernoulli_coherent_pairs_below_one(self):
        assert mutual_coherence(gen_bernoulli(40, 200, seed=3)) < 1.0

    def test_achlioptas_support_and_stats(self):
        a = gen_achlioptas(100, 1000, seed=4)
        vals = np.unique(a.base)
        assert set(vals.tolist()) <= {-1.0, 0.0, 1.0}
        total = a.base.size
        zero_frac = np.count_nonzero(a.base == 0) / total
        assert abs(zero_frac - 2 / 3) <= 3 * math.sqrt((2 / 3) * (1 / 3) / total)
        mean = float(np.mean(a.base))
        assert abs(mean) <= 3 * math.sqrt((1 / 3) / total)

    def test_compressive_regime_enforced(self):
        for gen in (gen_gaussian, gen_bernoulli, gen_achlioptas):
            with pytest.raises(SensingConfigError):
                gen(10, 10, 0)


class TestRotation:
    def test_full_cycle_is_identity(self):
        off = PermutationOffset(0, 8)
        assert rotate(off, 8).offset == 0

    def test_shift_matrix_reference_product(self):
        p = shift_matrix(4)
        assert np.array_equal(p @ np.array([1.0, 2.0, 3.0, 4.0]), [4.0, 1.0, 2.0, 3.0])

    def test_one_step_first_column(self):
        a = gen_gaussian(5, 9, seed=6)
        p = shift_matrix(9)
        rotated = a.base @ p
        off1 = rotate(PermutationOffset(0, 9), 1)
        assert np.array_equal(column(a, off1, 0), rotated[:, 0])
        assert np.array_equal(column(a, off1, 0), a.base[:, 1])

    def test_column_wraparound(self):
        a = gen_gaussian(4, 7, seed=7)
        off = PermutationOffset(1, 7)
        assert np.array_equal(column(a, off, 6), a.base[:, 0])

    def test_materialize_matches_matrix_powers(self):
        a = gen_gaussian(6, 11, seed=8)
        p = shift_matrix(11)
        prod = np.array(a.base)
        for i in range(1, 2 * 11 + 1):
            prod = prod @ p
            off = PermutationOffset(i, 11)
            assert np.allclose(materialize(a, off), prod, atol=1e-12)
            j = i % 7
            assert np.array_equal(column(a, off, j), prod[:, j])

    def test_view_equals_materialize(self):
        a = gen_bernoulli(5, 12, seed=9)
        for i in (0, 1, 5, 11, 12, 25):
            assert np.array_equal(view(a, i), materialize(a, PermutationOffset(i, 12)))


class TestMutualCoherence:
    def test_orthogonal_columns(self):
        assert mutual_coherence(np.eye(5)) == 0.0

    def test_duplicate_columns(self):
        mat = np.ones((4, 2))
        assert mutual_coherence(mat) == pytest.approx(1.0, abs=1e-12)

    def test_matches_exhaustive_pairwise_max(self):
        a = gen_gaussian(20, 40, seed=10)
        mat = a.base
        best = 0.0
        for i in range(40):
            for j in range(i + 1, 40):
                num = abs(float(mat[:, i] @ mat[:, j]))
                den = float(np.linalg.norm(mat[:, i]) * np.linalg.norm(mat[:, j]))
                best = max(best, num / den)
        assert mutual_coherence(a) == pytest.approx(best, rel=1e-12)

    def test_rotation_invariance_exact(self):
        a = gen_gaussian(16, 48, seed=11)
        base_val = mutual_coherence(a)
        for i in range(48):
            assert mutual_coherence(a, PermutationOffset(i, 48)) == base_val

    def test_zero_column_rejected(self):
        mat = np.eye(4)
        mat[:, 2] = 0.0
        with pytest.raises(DegenerateMatrixError):
            mutual_coherence(mat)


class TestBasisCoherence:
    def test_self_alignment_maximal(self):
        q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((16, 16)))
        assert basis_coherence(q, q) == pytest.approx(4.0, rel=1e-10)

    def test_fourier_vs_canonical_is_one(self):
        n = 32
        f = np.fft.fft(np.eye(n), norm="ortho")
        assert basis_coherence(f, np.eye(n)) == pytest.approx(1.0, rel=1e-12)

    def test_random_basis_logarithmically_incoherent(self):
        # max over all n^2 pairs sits between sqrt(2 log n) and sqrt(4 log n),
        # far below the sqrt(n) worst case
        n = 256
        q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((n, n)))
        val = basis_coherence(q, np.eye(n))
        assert math.sqrt(2 * math.log(n)) - 1.0 <= val <= math.sqrt(4 * math.log(n)) + 1.0
        assert val < 0.5 * math.sqrt(n)

    def test_range_bounds(self):
        n = 64
        q, _ = np.linalg.qr(np.random.default_rng(2).standard_normal((n, n)))
        val = basis_coherence(q, np.eye(n))
        assert 1.0 <= val <= math.sqrt(n)

    def test_non_orthonormal_rejected(self):
        with pytest.raises(ValueError):
            basis_coherence(np.ones((3, 3)), np.eye(3))


def test_matrix_persistence_round_trip(tmp_path):
    a = gen_achlioptas(12, 30, seed=13)
    path = tmp_path / "matrix.bin"
    save_matrix(a, path)
    b = load_matrix(path)
    assert np.array_equal(a.base, b.base)
    assert (b.m, b.n, b.kind, b.seed) == (12, 30, "achlioptas", 13)
