import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from seqrank.errors import InputError, NonFiniteError, ZeroEmbeddingError
from seqrank.spectral import (
    SingularSpectrum,
    effective_rank,
    rankme,
    singular_values,
)

from oracles import entropy_rank


def random_orthogonal(rng, n, k=None):
    q, r = np.linalg.qr(rng.standard_normal((n, k or n)))
    return q * np.sign(np.diag(r))


class TestSingularValues:
    def test_identity(self):
        np.testing.assert_array_equal(singular_values(np.eye(5)).values, np.ones(5))

    def test_zero_matrix(self):
        s = singular_values(np.zeros((3, 2)))
        np.testing.assert_array_equal(s.values, [0.0, 0.0])
        assert s.source_dims == (3, 2)

    @pytest.mark.parametrize("method", ["svd", "gram", "auto"])
    def test_planted_diagonal(self, method):
        rng = np.random.default_rng(11)
        u = random_orthogonal(rng, 8, 4)
        v = random_orthogonal(rng, 4)
        z = u @ np.diag([4.0, 2.0, 1.0, 1.0]) @ v.T
        np.testing.assert_allclose(singular_values(z, method).values, [4, 2, 1, 1], atol=1e-9)

    def test_float32_input_computed_in_float64(self):
        z = np.arange(12, dtype=np.float32).reshape(4, 3)
        s = singular_values(z)
        assert s.values.dtype == np.float64
        np.testing.assert_allclose(s.values, np.linalg.svd(z.astype(np.float64), compute_uv=False))

    def test_sorted_and_nonnegative(self):
        z = np.random.default_rng(3).standard_normal((50, 7))
        vals = singular_values(z, "gram").values
        assert np.all(np.diff(vals) <= 0) and np.all(vals >= 0)
        assert len(vals) == 7

    def test_non_finite_names_position(self):
        z = np.ones((4, 3))
        z[2, 1] = np.nan
        with pytest.raises(NonFiniteError, match="row 2, column 1"):
            singular_values(z)

    def test_rejects_bad_shapes(self):
        with pytest.raises(InputError):
            singular_values(np.ones(3))
        with pytest.raises(InputError):
            singular_values(np.ones((0, 3)))

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            singular_values(np.eye(2), method="qr")


class TestEffectiveRank:
    def test_uniform(self):
        assert effective_rank([1, 1, 1, 1, 1]).value == pytest.approx(5.0, abs=1e-12)

    def test_rank_one(self):
        r = effective_rank([3, 0, 0])
        assert r.value == 1.0 and r.retained_count == 1

    def test_hand_example(self):
        # p = [1/2, 1/4, 1/8, 1/8]: entropy = 1.75 ln 2, rank = 2 ** 1.75
        r = effective_rank([4, 2, 1, 1])
        assert r.value == pytest.approx(2**1.75, abs=1e-12)
        assert r.value == pytest.approx(3.363586, abs=1e-6)
        assert math.log(r.value) == pytest.approx(1.213008, abs=1e-6)
        assert r.retained_count == 4

    def test_all_zero(self):
        with pytest.raises(ZeroEmbeddingError, match="zero embedding: rank undefined"):
            effective_rank([0.0, 0.0])

    def test_truncates_numerical_zeros(self):
        r = effective_rank([1.0, 1.0, 1e-13])
        assert r.retained_count == 2
        assert r.value == pytest.approx(2.0, abs=1e-12)
        # just above the cutoff survives
        assert effective_rank([1.0, 1.0, 2e-12]).retained_count == 3

    def test_rejects_unsorted_or_negative(self):
        with pytest.raises(InputError):
            effective_rank([1, 2])
        with pytest.raises(InputError):
            effective_rank([1, -1])
        with pytest.raises(InputError):
            SingularSpectrum(np.array([1.0, 0.5]), (3, 3))

    @given(arrays(np.float64, st.integers(1, 40), elements=st.floats(0, 1e6)))
    def test_matches_plain_python_oracle(self, raw):
        sig = np.sort(raw)[::-1]
        if sig[0] == 0:
            return
        kept = [s for s in sig if s >= 1e-12 * sig[0]]
        r = effective_rank(sig)
        assert r.value == pytest.approx(entropy_rank(kept), rel=1e-12)
        assert 1.0 <= r.value <= r.retained_count <= len(sig)


class TestRankme:
    def test_identity(self):
        assert rankme(np.eye(10)).value == pytest.approx(10.0, abs=1e-12)

    @pytest.mark.parametrize("shape", [(1, 1), (1, 9), (9, 1), (40, 3), (3, 40)])
    def test_outer_product(self, shape):
        rng = np.random.default_rng(shape[0] * 100 + shape[1])
        z = np.outer(rng.standard_normal(shape[0]) + 3, rng.standard_normal(shape[1]) + 3)
        assert rankme(z).value == 1.0

    def test_two_by_two_diagonal(self):
        h = -(2 / 3 * math.log(2 / 3) + 1 / 3 * math.log(1 / 3))
        assert h == pytest.approx(0.636514, abs=1e-6)
        r = rankme(np.diag([2.0, 1.0]))
        assert r.value == pytest.approx(math.exp(h), abs=1e-12)
        assert r.value == pytest.approx(1.889882, abs=1e-6)

    def test_zero_matrix_rejected(self):
        with pytest.raises(ZeroEmbeddingError):
            rankme(np.zeros((4, 4)))


matrices = st.tuples(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1)).map(
    lambda t: np.random.default_rng(t[2]).standard_normal((t[0], t[1]))
)


class TestInvariants:
    @settings(max_examples=60)
    @given(matrices, st.sampled_from([1e-3, -0.5, 7.0, 1e3]))
    def test_scale_invariance(self, z, c):
        assert abs(rankme(c * z).value - rankme(z).value) <= 1e-9

    @settings(max_examples=60)
    @given(matrices, st.integers(0, 2**32 - 1))
    def test_orthogonal_invariance(self, z, seed):
        rng = np.random.default_rng(seed)
        q1 = random_orthogonal(rng, z.shape[0])
        q2 = random_orthogonal(rng, z.shape[1])
        assert abs(rankme(q1 @ z @ q2).value - rankme(z).value) <= 1e-8

    @settings(max_examples=60)
    @given(matrices, st.integers(0, 2**32 - 1))
    def test_row_permutation(self, z, seed):
        perm = np.random.default_rng(seed).permutation(z.shape[0])
        assert abs(rankme(z[perm]).value - rankme(z).value) <= 1e-9

    @settings(max_examples=60)
    @given(matrices)
    def test_bounds(self, z):
        r = rankme(z)
        nonzero = np.count_nonzero(np.linalg.svd(z, compute_uv=False) > 0)
        assert 1.0 <= r.value <= r.retained_count <= nonzero <= min(z.shape)

    @pytest.mark.parametrize("cond", [1.0, 1e2, 1e4, 1e6])
    def test_gram_matches_svd(self, cond):
        rng = np.random.default_rng(int(cond))
        n, d = 600, 40
        u = random_orthogonal(rng, n, d)
        v = random_orthogonal(rng, d)
        sig = np.logspace(0, -np.log10(cond), d)
        z = (u * sig) @ v.T
        a = rankme(z, "gram").value
        b = rankme(z, "svd").value
        assert abs(a - b) <= 1e-6 * b

    def test_gram_rank_one_is_exact(self):
        rng = np.random.default_rng(5)
        z = np.outer(rng.standard_normal(2000), rng.standard_normal(64))
        assert rankme(z, "gram").value == 1.0

    def test_gram_on_wide_matrix(self):
        z = np.random.default_rng(6).standard_normal((5, 40))
        g = singular_values(z, "gram").values
        assert g.shape == (5,)
        np.testing.assert_allclose(g, np.linalg.svd(z, compute_uv=False), rtol=1e-12)

    def test_auto_falls_back_on_ill_conditioned_tall(self):
        # spectrum spanning 1e12: Gram-path values near 1e-9 * s_1 are inflated
        rng = np.random.default_rng(7)
        n, d = 300, 48
        sig = np.exp(-0.6 * np.arange(d))
        z = (random_orthogonal(rng, n, d) * sig) @ random_orthogonal(rng, d).T
        assert abs(rankme(z, "auto").value - rankme(z, "svd").value) <= 1e-12
        assert abs(rankme(z, "gram").value - rankme(z, "svd").value) > 1e-7

    def test_auto_keeps_gram_when_well_conditioned(self):
        rng = np.random.default_rng(8)
        z = rng.standard_normal((400, 20))
        np.testing.assert_array_equal(singular_values(z, "auto").values, singular_values(z, "gram").values)
