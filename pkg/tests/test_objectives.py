import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradcheck import numeric_grad, rel_error
from tripletgan import objectives as obj
from tripletgan.errors import ContractError, DimensionError
from tripletgan.tensor import Tensor, backward

LN2 = math.log(2.0)
finite = st.floats(-50, 50, allow_nan=False)


def direct_triplet_prob(d_pos, d_neg):
    """exp(d-)/(exp(d-)+exp(d+)) in 50-digit arithmetic."""
    with mpmath.workdps(50):
        a, b = mpmath.exp(mpmath.mpf(d_neg)), mpmath.exp(mpmath.mpf(d_pos))
        return a / (a + b)


def dists(d_pos, d_neg):
    return obj.TripletDistances(Tensor(np.atleast_1d(d_pos)), Tensor(np.atleast_1d(d_neg)))


class TestTripletProb:
    def test_equal_distances(self):
        assert obj.triplet_prob(dists(1.3, 1.3)).data[0] == 0.5

    def test_one_two(self):
        expected = float(direct_triplet_prob(1.0, 2.0))
        assert expected == pytest.approx(0.7310585786, abs=1e-10)
        assert obj.triplet_prob(dists(1.0, 2.0)).data[0] == pytest.approx(expected, rel=1e-14)

    @settings(max_examples=200, deadline=None)
    @given(finite, finite)
    def test_complement(self, a, b):
        p = obj.triplet_prob(dists(a, b)).data[0]
        q = obj.triplet_prob(dists(b, a)).data[0]
        assert abs(p + q - 1.0) < 1e-12
        assert 0.0 <= p <= 1.0

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 20), st.floats(0, 20), st.floats(-5, 5))
    def test_shift_invariance(self, a, b, c):
        p = obj.triplet_prob(dists(a, b)).data[0]
        q = obj.triplet_prob(dists(a + c, b + c)).data[0]
        assert p == pytest.approx(q, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 10), st.floats(0, 10), st.floats(1e-3, 5))
    def test_monotone_in_negative_distance(self, a, b, step):
        p = obj.triplet_prob(dists(a, b)).data[0]
        q = obj.triplet_prob(dists(a, b + step)).data[0]
        assert q > p

    def test_matches_direct_formula(self, rng):
        for _ in range(50):
            a, b = rng.uniform(0, 5, 2)
            assert obj.triplet_prob(dists(a, b)).data[0] == pytest.approx(
                float(direct_triplet_prob(a, b)), rel=1e-12)


class TestTripletLoss:
    def test_equidistant_is_ln2(self):
        q = np.zeros((3, 2))
        p = np.array([[1.0, 0.0], [0.0, 2.0], [0.0, -0.5]])
        n = np.array([[0.0, 1.0], [-2.0, 0.0], [0.5, 0.0]])
        assert obj.triplet_loss(q, p, n).item() == pytest.approx(LN2, abs=1e-12)

    def test_large_margin(self):
        q = np.zeros((2, 1))
        p = np.array([[1.0], [-2.0]])
        n = np.array([[21.0], [22.0]])
        with mpmath.workdps(50):
            expected = float(-mpmath.log(1 / (1 + mpmath.exp(-20))))
        assert expected == pytest.approx(2.06e-9, rel=1e-2)
        assert obj.triplet_loss(q, p, n).item() == pytest.approx(expected, rel=1e-10)

    def test_strictly_positive(self, rng):
        q, p, n = (rng.standard_normal((4, 3)) for _ in range(3))
        assert obj.triplet_loss(q, p, n).item() > 0

    def test_gradient_two_triplets(self, rng):
        f = [Tensor(rng.standard_normal((2, 3)), requires_grad=True) for _ in range(3)]
        backward(obj.triplet_loss(*f))
        nums = numeric_grad(lambda: obj.triplet_loss(*[t.data for t in f]).item(),
                            [t.data for t in f])
        for t, n in zip(f, nums):
            assert rel_error(t.grad, n) < 1e-6

    def test_empty_batch(self):
        with pytest.raises(ContractError):
            obj.triplet_loss(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros((0, 2)))


class TestDiscriminator:
    def test_single_zero_feature(self):
        assert obj.disc_prob(np.zeros((1, 1))).data[0] == pytest.approx(0.5, abs=1e-15)

    def test_two_zero_features(self):
        assert obj.disc_prob(np.zeros((1, 2))).data[0] == pytest.approx(2 / 3, abs=1e-15)

    def test_huge_features(self):
        t = np.full((1, 4), 1000.0)
        assert math.isfinite(obj.log_disc_fake(t).item())
        assert obj.log_disc_fake(t).item() == pytest.approx(-(1000 + math.log(4)), rel=1e-12)
        assert obj.disc_prob(t).data[0] == 1.0
        assert obj.log_disc_real(t).item() == pytest.approx(0.0, abs=1e-300)

    def test_all_very_negative(self):
        t = np.full((1, 3), -1000.0)
        assert obj.disc_prob(t).data[0] < 1e-300
        assert math.isfinite(obj.log_disc_real(t).item())

    def test_four_forms_consistent(self, rng):
        t = rng.standard_normal((10, 5)) * 3
        ell = obj.disc_logit(t).data
        s = np.exp(t).sum(axis=1)
        np.testing.assert_allclose(ell, np.log(s), rtol=1e-12)
        d = obj.disc_prob(t).data
        np.testing.assert_allclose(d, s / (s + 1), rtol=1e-12)
        np.testing.assert_allclose(obj.log_disc_real(t).data, np.log(s / (s + 1)), rtol=1e-10)
        np.testing.assert_allclose(obj.log_disc_fake(t).data, np.log(1 / (s + 1)), rtol=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-6, 6), min_size=1, max_size=6))
    def test_log_and_direct_agree(self, feats):
        t = np.array([feats])
        s = np.exp(t).sum()
        assert obj.disc_prob(t).data[0] == pytest.approx(s / (s + 1), abs=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=6), st.data())
    def test_increasing_in_each_feature(self, feats, data):
        t = np.array([feats])
        m = data.draw(st.integers(0, len(feats) - 1))
        bumped = t.copy()
        bumped[0, m] += 0.5
        assert obj.disc_logit(bumped).data[0] > obj.disc_logit(t).data[0]


class TestUnsupervised:
    def test_half_half(self):
        real = fake = np.zeros((3, 1))
        assert obj.unsup_disc_loss(real, fake).item() == pytest.approx(2 * LN2, abs=1e-12)

    def test_separated(self):
        real = np.full((2, 1), 40.0)
        fake = np.full((2, 1), -40.0)
        with mpmath.workdps(50):
            expected = float(2 * mpmath.log1p(mpmath.exp(-40)))
        val = obj.unsup_disc_loss(real, fake).item()
        assert val == pytest.approx(expected, rel=1e-10)
        assert val == pytest.approx(8.5e-18, rel=1e-2)

    def test_gradient(self, rng):
        r = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
        f = Tensor(rng.standard_normal((3, 3)), requires_grad=True)
        backward(obj.unsup_disc_loss(r, f))
        nr, nf = numeric_grad(lambda: obj.unsup_disc_loss(r.data, f.data).item(), [r.data, f.data])
        assert rel_error(r.grad, nr) < 1e-6
        assert rel_error(f.grad, nf) < 1e-6

    def test_empty(self):
        with pytest.raises(ContractError):
            obj.unsup_disc_loss(np.zeros((0, 2)), np.zeros((1, 2)))


class TestFeatureMatching:
    def test_identical_batches(self, rng):
        x = rng.standard_normal((5, 3))
        assert obj.feature_matching_loss(x, x).item() == 0.0

    def test_unit_offset(self):
        real = np.array([[1.0, 1.0], [3.0, 3.0]])
        fake = np.array([[1.0, 1.0]])
        assert obj.feature_matching_loss(real, fake).item() == 2.0

    def test_two_pass_oracle(self, rng):
        for _ in range(20):
            real, fake = rng.standard_normal((7, 4)), rng.standard_normal((3, 4))
            mr = [sum(real[i, j] for i in range(7)) / 7 for j in range(4)]
            mf = [sum(fake[i, j] for i in range(3)) / 3 for j in range(4)]
            expected = sum((a - b) ** 2 for a, b in zip(mr, mf))
            assert obj.feature_matching_loss(real, fake).item() == pytest.approx(expected, rel=1e-12)

    def test_permutation_of_rows_is_zero(self, rng):
        x = rng.standard_normal((6, 2))
        assert obj.feature_matching_loss(x, x[::-1]).item() == pytest.approx(0.0, abs=1e-28)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            obj.feature_matching_loss(np.zeros((2, 3)), np.zeros((2, 4)))


class TestCombined:
    def test_additivity(self):
        q = np.zeros((1, 2))
        trip = (q, np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
        loss, rep = obj.combined_disc_loss(trip, np.zeros((2, 2)), np.zeros((2, 2)))
        assert rep.l_ts == pytest.approx(LN2, abs=1e-12)
        assert rep.l_td == rep.l_ts + rep.l_tu
        assert loss.item() == rep.l_td

    def test_components_sum_to_three_ln2(self):
        trip = (np.zeros((1, 1)), np.ones((1, 1)), -np.ones((1, 1)))
        _, rep = obj.combined_disc_loss(trip, np.zeros((3, 1)), np.zeros((3, 1)))
        assert rep.l_ts == pytest.approx(LN2, abs=1e-12)
        assert rep.l_tu == pytest.approx(2 * LN2, abs=1e-12)
        assert rep.l_td == pytest.approx(3 * LN2, abs=1e-12)

    def test_gan_only(self, rng):
        _, rep = obj.combined_disc_loss(None, rng.standard_normal((3, 2)), rng.standard_normal((3, 2)))
        assert rep.l_ts is None and rep.l_td == rep.l_tu

    def test_triplet_only(self, rng):
        trip = tuple(rng.standard_normal((3, 2)) for _ in range(3))
        _, rep = obj.combined_disc_loss(trip)
        assert rep.l_tu is None and rep.l_td == rep.l_ts
        assert rep.d_real_mean is None

    def test_needs_something(self):
        with pytest.raises(ContractError):
            obj.combined_disc_loss()
