import math

import numpy as np
import pytest
from scipy import stats

from llpgauss.numkit import NotPositiveDefiniteError, RngStream, gaussian_cdf
from llpgauss.oracle import (
    Bag,
    GaussianSpec,
    LTF,
    OracleConfig,
    bag_label_proportion_check,
    exact_oracle,
    householder_to_e1,
    load_bags,
    mixed_oracle,
    noisy_oracle,
    normalize_ltf,
    random_gaussian_spec,
    random_unit_vector,
    sample_bag,
    sample_bags,
    sample_conditional,
    save_bags,
)
from llpgauss.oracle import _sample_bags_arrays


def e(i, d):
    v = np.zeros(d)
    v[i] = 1.0
    return v


class TestTypes:
    def test_ltf_requires_unit_normal(self):
        with pytest.raises(ValueError):
            LTF(np.array([1.0, 1.0]), 0.0)

    def test_ltf_strict_positive_boundary(self):
        f = LTF(e(0, 2), 0.0)
        assert f.predict(np.array([0.0, 5.0])) == 0  # pos(0) = 0
        assert f.predict(np.array([1e-12, 0.0])) == 1

    def test_complement_flips_everywhere_off_boundary(self):
        f = LTF(random_unit_vector(4, RngStream(0)), 0.7)
        x = RngStream(1).gen.standard_normal((100, 4))
        np.testing.assert_array_equal(f.complement().predict(x), 1 - f.predict(x))

    def test_gaussian_spec_square_root(self):
        dist = random_gaussian_spec(6, RngStream(2), centered=False)
        np.testing.assert_allclose(dist.gamma @ dist.gamma, dist.sigma, atol=1e-8)
        np.testing.assert_allclose(dist.gamma @ dist.inv_gamma, np.eye(6), atol=1e-8)

    def test_gaussian_spec_rejects_rank_deficient(self):
        with pytest.raises(NotPositiveDefiniteError):
            GaussianSpec(np.zeros(2), np.diag([1.0, 0.0]))

    def test_invalid_k(self):
        dist = GaussianSpec.standard(3)
        f = LTF(e(0, 3))
        with pytest.raises(ValueError):
            exact_oracle(f, dist, q=4, k=0)
        with pytest.raises(ValueError):
            exact_oracle(f, dist, q=4, k=4)

    def test_mixed_p_validation(self):
        dist = GaussianSpec.standard(3)
        f = LTF(e(0, 3))
        with pytest.raises(ValueError):
            mixed_oracle(f, dist, q=3, p=[0.5, 0.5])  # wrong length


class TestNormalization:
    def test_homogeneous_identity(self):
        ell, u = normalize_ltf(LTF(e(0, 4)), GaussianSpec.standard(4))
        assert ell == 0.0
        np.testing.assert_allclose(u, e(0, 4))

    def test_negative_offset(self):
        ell, _ = normalize_ltf(LTF(e(0, 3), -1.0), GaussianSpec.standard(3))
        assert ell == pytest.approx(1.0)
        # positive mass is 1 - cdf(ell)
        assert 1 - gaussian_cdf(ell) == pytest.approx(1 - gaussian_cdf(1.0))

    def test_shifted_mean(self):
        dist = GaussianSpec(2.0 * e(0, 3), np.eye(3))
        ell, _ = normalize_ltf(LTF(e(0, 3), 0.0), dist)
        assert ell == pytest.approx(-2.0)

    def test_householder_maps_both_ways(self):
        u = random_unit_vector(7, RngStream(5))
        h = householder_to_e1(u)
        np.testing.assert_allclose(h @ u, e(0, 7), atol=1e-12)
        np.testing.assert_allclose(h @ e(0, 7), u, atol=1e-12)
        np.testing.assert_allclose(h @ h.T, np.eye(7), atol=1e-12)

    def test_positive_class_mass(self):
        # empirical share of positive labels on unconditional draws ~ 1 - cdf(ell)
        rng = RngStream(6)
        dist = random_gaussian_spec(5, rng.child(0), centered=False)
        target = LTF(random_unit_vector(5, rng.child(1)), 0.8)
        ell, _ = normalize_ltf(target, dist)
        x = dist.sample(200_000, rng.child(2))
        share = float(target.predict(x).mean())
        expect = 1 - gaussian_cdf(ell)
        assert abs(share - expect) <= 3 * math.sqrt(expect * (1 - expect) / 200_000)


class TestConditionalSampling:
    def test_labels_always_match(self):
        rng = RngStream(7)
        dist = random_gaussian_spec(6, rng.child(0), centered=False)
        target = LTF(random_unit_vector(6, rng.child(1)), -0.4)
        for label in (0, 1):
            x = sample_conditional(dist, target, label, rng.child(2 + label), size=5000)
            assert (target.predict(x) == label).all()

    def test_homogeneous_positive_mean(self):
        # half-normal mean sqrt(2/pi) along the normal direction
        d, n = 8, 1_000_000
        rng = RngStream(8)
        r = random_unit_vector(d, rng.child(0))
        dist = GaussianSpec.standard(d)
        x = sample_conditional(dist, LTF(r), 1, rng.child(1), size=n)
        mean = x.mean(axis=0)
        expect = math.sqrt(2 / math.pi) * r
        # per-coordinate 3-sigma with conservative unit variance
        assert np.abs(mean - expect).max() <= 3.0 / math.sqrt(n)

    def test_orthogonal_whitened_coordinate_is_standard_normal(self):
        rng = RngStream(9)
        d, n = 5, 100_000
        dist = random_gaussian_spec(d, rng.child(0), centered=False)
        target = LTF(random_unit_vector(d, rng.child(1)), 0.3)
        ell, u_star = normalize_ltf(target, dist)
        x = sample_conditional(dist, target, 1, rng.child(2), size=n)
        z = (x - dist.mu) @ dist.inv_gamma
        w = np.zeros(d)
        w[-1] = 1.0
        w = w - (w @ u_star) * u_star
        w /= np.linalg.norm(w)
        stat = stats.kstest(z @ w, "norm")
        assert stat.pvalue > 1e-3

    def test_first_whitened_coordinate_is_truncated(self):
        rng = RngStream(10)
        d, n = 5, 100_000
        dist = random_gaussian_spec(d, rng.child(0), centered=False)
        target = LTF(random_unit_vector(d, rng.child(1)), 0.3)
        ell, u_star = normalize_ltf(target, dist)
        x = sample_conditional(dist, target, 1, rng.child(2), size=n)
        z1 = (x - dist.mu) @ dist.inv_gamma @ u_star
        assert (z1 > ell).all()
        mass = 1 - gaussian_cdf(ell)

        def cdf(t):
            return np.clip((gaussian_cdf(t) - gaussian_cdf(ell)) / mass, 0.0, 1.0)

        stat = stats.kstest(z1, cdf)
        assert stat.pvalue > 1e-3


class TestBagSampling:
    def _cfg(self, q=4, k=2, d=5, seed=11, kind="exact", **kw):
        rng = RngStream(seed)
        dist = random_gaussian_spec(d, rng.child(0), centered=False)
        target = LTF(random_unit_vector(d, rng.child(1)), 0.2)
        if kind == "exact":
            return exact_oracle(target, dist, q, k), target
        if kind == "noisy":
            return noisy_oracle(target, dist, q, k, kw["flip_p"]), target
        return mixed_oracle(target, dist, q, kw["p"]), target

    def test_exact_counts(self):
        cfg, target = self._cfg()
        bags = sample_bags(cfg, 300, RngStream(12))
        for b in bags:
            assert b.label_count == 2
            assert bag_label_proportion_check(b, target) == 2

    def test_order_is_shuffled(self):
        cfg, target = self._cfg(q=2, k=1)
        bags = sample_bags(cfg, 2000, RngStream(13))
        first_positive = np.mean(
            [target.predict(b.instances[0]) == 1 for b in bags]
        )
        assert 0.42 <= first_positive <= 0.58

    def test_noisy_zero_flip_matches_exact_bytewise(self):
        cfg_e, _ = self._cfg(seed=14)
        cfg_n, _ = self._cfg(seed=14, kind="noisy", flip_p=0.0)
        be = sample_bags(cfg_e, 50, RngStream(15))
        bn = sample_bags(cfg_n, 50, RngStream(15))
        for x, y in zip(be, bn):
            np.testing.assert_array_equal(x.instances, y.instances)
            assert x.label_count == y.label_count

    def test_degenerate_mixture_matches_exact_bytewise(self):
        cfg_e, _ = self._cfg(seed=16, q=4, k=3)
        p = [0.0, 0.0, 0.0, 1.0, 0.0]
        cfg_m, _ = self._cfg(seed=16, q=4, kind="mixed", p=p)
        be = sample_bags(cfg_e, 50, RngStream(17))
        bm = sample_bags(cfg_m, 50, RngStream(17))
        for x, y in zip(be, bm):
            np.testing.assert_array_equal(x.instances, y.instances)

    def test_noisy_label_count_is_realized(self):
        cfg, target = self._cfg(seed=18, kind="noisy", flip_p=0.25)
        bags = sample_bags(cfg, 400, RngStream(19))
        for b in bags:
            assert bag_label_proportion_check(b, target) == b.label_count
        counts = np.array([b.label_count for b in bags])
        assert counts.std() > 0  # flips actually happen

    def test_noisy_flip_rate(self):
        q, k, flip = 4, 2, 0.3
        cfg, _ = self._cfg(seed=20, q=q, k=k, kind="noisy", flip_p=flip)
        n = 4000
        bags = sample_bags(cfg, n, RngStream(21))
        mean_count = np.mean([b.label_count for b in bags])
        expect = k * (1 - flip) + (q - k) * flip
        sd = math.sqrt(q * flip * (1 - flip) / n)
        assert abs(mean_count - expect) <= 4 * sd

    def test_mixture_count_distribution(self):
        q = 3
        p = np.array([0.1, 0.4, 0.3, 0.2])
        cfg, _ = self._cfg(seed=22, q=q, kind="mixed", p=p)
        n = 5000
        bags = sample_bags(cfg, n, RngStream(23))
        counts = np.bincount([b.label_count for b in bags], minlength=q + 1) / n
        for j in range(q + 1):
            sd = math.sqrt(p[j] * (1 - p[j]) / n)
            assert abs(counts[j] - p[j]) <= 4 * sd

    def test_sample_bag_single(self):
        cfg, target = self._cfg(seed=24)
        b = sample_bag(cfg, RngStream(25))
        assert isinstance(b, Bag) and b.size == 4

    def test_hand_built_straddling_bag(self):
        f = LTF(e(0, 2))
        bag = Bag(np.array([[1.0, 0.0], [-1.0, 0.0]]), 1)
        assert bag_label_proportion_check(bag, f) == 1


class TestOracleMoments:
    def test_bag_mean_converges_to_scaled_direction(self):
        # u.a.r.-selected instances across bags average to eta(q,k) r
        d, q, k, m = 10, 3, 1, 20_000
        rng = RngStream(26)
        r = random_unit_vector(d, rng.child(0))
        cfg = exact_oracle(LTF(r), GaussianSpec.standard(d), q, k)
        x, _ = _sample_bags_arrays(cfg, m, rng.child(1))
        picks = rng.child(2).gen.integers(0, q, size=m)
        mu_hat = x[np.arange(m), picks].mean(axis=0)
        eta = (2 * k / q - 1) * math.sqrt(2 / math.pi)
        assert np.linalg.norm(mu_hat - eta * r) <= 5 * math.sqrt(d / m)

    def test_pair_label_disagreement_probability(self):
        q, k, m = 5, 2, 20_000
        rng = RngStream(27)
        d = 4
        r = random_unit_vector(d, rng.child(0))
        target = LTF(r, 0.1)
        dist = random_gaussian_spec(d, rng.child(1), centered=False)
        cfg = exact_oracle(target, dist, q, k)
        x, _ = _sample_bags_arrays(cfg, m, rng.child(2))
        gen = rng.child(3).gen
        i = gen.integers(0, q, size=m)
        j = (i + 1 + gen.integers(0, q - 1, size=m)) % q
        rows = np.arange(m)
        la = target.predict(x[rows, i])
        lb = target.predict(x[rows, j])
        p_emp = float(np.mean(la != lb))
        p_true = 2 * (k / q) * (1 - k / q) / (1 - 1 / q)
        assert abs(p_emp - p_true) <= 3 * math.sqrt(p_true * (1 - p_true) / m)


class TestSerialization:
    @pytest.mark.parametrize("fmt", ["binary", "csv"])
    def test_round_trip(self, tmp_path, fmt):
        rng = RngStream(28)
        dist = random_gaussian_spec(3, rng.child(0))
        cfg = exact_oracle(LTF(random_unit_vector(3, rng.child(1))), dist, q=4, k=1)
        bags = sample_bags(cfg, 7, rng.child(2))
        path = tmp_path / f"bags.{fmt}"
        save_bags(path, bags, fmt=fmt)
        loaded = load_bags(path, fmt=fmt)
        assert len(loaded) == 7
        for a, b in zip(bags, loaded):
            assert a.label_count == b.label_count
            np.testing.assert_array_equal(a.instances, b.instances)

    def test_empty_list_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            save_bags(tmp_path / "x.bin", [])
