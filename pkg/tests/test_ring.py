import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linagg import ring as rg
from linagg.errors import DimensionError, ParameterError

H17 = 17


def make_parm(d=4, h=None, l=16, sigma=3.2, bound=20, dim=0):
    if h is None:
        h = rg.find_modulus(20, d)
    a = rg.zero_element(d, h)
    blocks = -(-dim // d) if dim else 0
    return rg.Params(d=d, h=h, l=l, sigma=sigma, bound=bound, a=a, dim=dim, blocks=blocks)


def schoolbook_mul(a, b, d, h):
    """Independent naive negacyclic multiply oracle."""
    t = [0] * (2 * d)
    for i in range(d):
        for j in range(d):
            t[i + j] += a[i] * b[j]
    return [rg.reduce_centered(t[i] - t[i + d], h) for i in range(d)]


def centered_scan(x, h):
    """Brute-force search for the centered residue."""
    for r in range(-h, h + 1):
        if -h < 2 * r <= h and (x - r) % h == 0:
            return r
    raise AssertionError("no residue found")


class TestReduceCentered:
    def test_zero(self):
        assert rg.reduce_centered(0, 17) == 0

    def test_wraps_high_half(self):
        assert rg.reduce_centered(9, 17) == -8

    def test_negative_input_matches_scan(self):
        assert rg.reduce_centered(-26, 17) == centered_scan(-26, 17) == 8

    @given(st.integers(-10**6, 10**6), st.integers(2, 997))
    def test_range_and_congruence(self, x, h):
        r = rg.reduce_centered(x, h)
        assert -h < 2 * r <= h
        assert (r - x) % h == 0

    @given(st.integers(-10**6, 10**6), st.integers(-10**6, 10**6), st.integers(2, 97))
    def test_idempotent_and_homomorphic(self, a, b, h):
        ra = rg.reduce_centered(a, h)
        assert rg.reduce_centered(ra, h) == ra
        assert rg.reduce_centered(a + b, h) == rg.reduce_centered(
            rg.reduce_centered(a, h) + rg.reduce_centered(b, h), h
        )


class TestRingLinear:
    def test_identity(self):
        p = rg.ring_from_coeffs([3, -2, 5, 1], H17)
        assert rg.ring_linear([(1, p)], H17) == p

    def test_zero_coefficients(self):
        p = rg.ring_from_coeffs([3, -2, 5, 1], H17)
        q = rg.ring_from_coeffs([1, 1, 1, 1], H17)
        assert rg.ring_linear([(0, p), (0, q)], H17) == rg.zero_element(4, H17)

    def test_weighted_sum(self):
        p = rg.ring_from_coeffs([1, 1, 0, 0], H17)  # 1 + x
        q = rg.ring_from_coeffs([0, 0, 1, 0], H17)  # x^2
        got = rg.ring_linear([(2, p), (3, q)], H17)
        assert got.coeffs == (2, 2, 3, 0)

    def test_dimension_error(self):
        p = rg.ring_from_coeffs([1, 2], H17)
        q = rg.ring_from_coeffs([1, 2, 3, 4], H17)
        with pytest.raises(DimensionError):
            rg.ring_linear([(1, p), (1, q)], H17)

    def test_ring_element_coefficient(self):
        p = rg.ring_from_coeffs([1, 2, 3, 4], H17)
        alpha = rg.ring_from_coeffs([0, 1, 0, 0], H17)  # x
        got = rg.ring_linear([(alpha, p)], H17)
        assert got == rg.ring_mul(alpha, p)


class TestRingMul:
    def test_square_of_one_plus_x(self):
        p = rg.ring_from_coeffs([1, 1, 0, 0], H17)
        assert rg.ring_mul(p, p).coeffs == (1, 2, 1, 0)

    def test_negacyclic_wrap(self):
        x3 = rg.ring_from_coeffs([0, 0, 0, 1], H17)
        x2 = rg.ring_from_coeffs([0, 0, 1, 0], H17)
        assert rg.ring_mul(x3, x2).coeffs == (0, -1, 0, 0)

    def test_matches_schoolbook_oracle_d8(self):
        rng = np.random.default_rng(7)
        h = 1009
        for _ in range(50):
            a = [int(c) for c in rng.integers(-h // 2, h // 2, 8)]
            b = [int(c) for c in rng.integers(-h // 2, h // 2, 8)]
            got = rg.ring_mul(rg.ring_from_coeffs(a, h), rg.ring_from_coeffs(b, h))
            assert list(got.coeffs) == schoolbook_mul(a, b, 8, h)

    def test_commutes_and_oracle_on_many_random_pairs(self):
        rng = np.random.default_rng(11)
        h = rg.find_modulus(28, 64)
        for _ in range(1000):
            d = int(rng.choice([4, 8, 16, 32, 64]))
            a = rg.ring_from_coeffs([int(c) for c in rng.integers(0, h, d)], h)
            b = rg.ring_from_coeffs([int(c) for c in rng.integers(0, h, d)], h)
            ab = rg.ring_mul(a, b)
            assert ab == rg.ring_mul(b, a)
            assert list(ab.coeffs) == schoolbook_mul(a.coeffs, b.coeffs, d, h)

    def test_expansion_factor_bound(self):
        rng = np.random.default_rng(3)
        h = rg.find_modulus(30, 16)
        for _ in range(100):
            a = rg.ring_from_coeffs([int(c) for c in rng.integers(0, h, 16)], h)
            b = rg.ring_from_coeffs([int(c) for c in rng.integers(0, h, 16)], h)
            prod_norm = rg.infinity_norm(rg.ring_mul(a, b))
            assert prod_norm <= 16 * rg.infinity_norm(a) * rg.infinity_norm(b)

    def test_modulus_mismatch(self):
        a = rg.ring_from_coeffs([1, 2, 3, 4], 17)
        b = rg.ring_from_coeffs([1, 2, 3, 4], 19)
        with pytest.raises(DimensionError):
            rg.ring_mul(a, b)


class TestInfinityNorm:
    def test_zero(self):
        assert rg.infinity_norm(rg.zero_element(4, H17)) == 0

    def test_example(self):
        v = rg.RingElement((-8, 3, 0, 5), H17)
        assert rg.infinity_norm(v) == 8

    @given(st.lists(st.integers(-50, 50), min_size=1, max_size=16))
    def test_matches_scan(self, coeffs):
        v = rg.RingElement(tuple(coeffs), 101)
        assert rg.infinity_norm(v) == max(abs(c) for c in coeffs)


class TestSamplers:
    def test_ternary_range(self):
        parm = make_parm(d=64)
        v = rg.sample(parm, "ternary", np.random.default_rng(0))
        assert set(v.coeffs) <= {-1, 0, 1}

    def test_gaussian_bounded(self):
        parm = make_parm(d=256)
        for seed in range(10):
            v = rg.sample(parm, "gaussian", np.random.default_rng(seed))
            assert rg.infinity_norm(v) <= parm.bound

    def test_gaussian_mean(self):
        # 10^4 coefficients: sample mean within 5*sigma/sqrt(N) of zero
        parm = make_parm(d=256)
        rng = np.random.default_rng(42)
        total, count = 0, 0
        while count < 10**4:
            v = rg.sample(parm, "gaussian", rng)
            total += sum(v.coeffs)
            count += parm.d
        assert abs(total / count) < 5 * parm.sigma / math.sqrt(count)

    def test_uniform_range(self):
        parm = make_parm(d=64)
        v = rg.sample(parm, "uniform_h", np.random.default_rng(1))
        assert all(-parm.h < 2 * c <= parm.h for c in v.coeffs)

    def test_unknown_distribution(self):
        with pytest.raises(ParameterError):
            rg.sample(make_parm(), "cauchy", np.random.default_rng(0))


class TestRoundScale:
    def test_noiseless_identity(self):
        h, l = 65537, 16
        delta = h // l
        for m in range(l):
            x = rg.ring_from_coeffs([delta * m], h)
            assert rg.round_scale(x, h, l) == [m]

    def test_zero(self):
        assert rg.round_scale(rg.zero_element(4, 65537), 65537, 16) == [0, 0, 0, 0]

    def test_exhaustive_noise_sweep(self):
        # Exact correctness region: decoding l*(delta*m + e)/h recovers m iff
        # |l*e - r*m| < h/2, where r = h - l*delta is the scaling deficit.
        # The nominal budget |e| < h/(2l) (= 2048.03 here) overshoots by the
        # r*m/l term at the negative boundary: e = -2048 slips to m-1.
        h, l = 65537, 16
        delta = h // l
        r = h - l * delta
        assert r == 1
        for m in range(l):
            for e in range(-2048, 2049):
                x = rg.ring_from_coeffs([delta * m + e], h)
                got = rg.round_scale(x, h, l)
                if 2 * abs(l * e - r * m) < h:
                    assert got == [m], (m, e)
                else:
                    assert m >= 1 and e == -2048
                    assert got == [(m - 1) % l], (m, e)

    def test_strict_interior_always_decodes(self):
        h, l = 65537, 16
        delta = h // l
        for m in range(l):
            for e in (-2047, -1, 0, 1, 2047, 2048):
                x = rg.ring_from_coeffs([delta * m + e], h)
                assert rg.round_scale(x, h, l) == [m]


class TestValidateNoiseBound:
    def test_small_config_satisfied(self):
        parm = make_parm(d=4, h=1048601, l=16, sigma=0.125, bound=1)  # smallest 21-bit prime = 1 mod 8
        report = rg.validate_noise_bound(parm, n=2, a_max=1, mode="worst_case")
        assert report.bound == 138
        assert report.satisfied

    def test_zero_noise(self):
        parm = make_parm(d=4, h=1048601, l=16, sigma=0.0, bound=0)
        report = rg.validate_noise_bound(parm, n=1, a_max=1)
        assert report.bound == 0 and report.satisfied
        with pytest.raises(ParameterError):
            rg.validate_noise_bound(parm, n=1, a_max=0)

    def test_paper_defaults_fail_worst_case(self):
        rng = np.random.default_rng(0)
        h = rg.find_modulus(54, 2048)
        parm = rg.Params(d=2048, h=h, l=65537, sigma=3.2, bound=20,
                         a=rg.zero_element(2048, h))
        report = rg.validate_noise_bound(parm, n=35, a_max=255, mode="worst_case")
        expected = 35 * 20 * (1 + 2048 * 255 * (1 + 2 * 2048 * 35))
        assert report.bound == expected
        assert not report.satisfied

    def test_report_invariant(self):
        parm = make_parm(d=4, h=1048601, l=16, sigma=0.125, bound=1)  # smallest 21-bit prime = 1 mod 8
        for mode in ("worst_case", "heuristic"):
            r = rg.validate_noise_bound(parm, n=3, a_max=5, mode=mode)
            assert r.satisfied == (r.bound < r.budget)


class TestSerialization:
    def test_word_roundtrip(self):
        h = rg.find_modulus(20, 8)
        v = rg.ring_from_coeffs(list(range(-4, 4)), h)
        assert rg.RingElement.from_bytes(v.to_bytes(), 8, h) == v
        assert len(v.to_bytes()) == 64

    def test_packed_roundtrip(self):
        h = rg.find_modulus(54, 16)
        rng = np.random.default_rng(5)
        v = rg.ring_from_coeffs([int(c) for c in rng.integers(0, h, 16)], h)
        data = rg.element_to_packed(v)
        assert len(data) == 16 * 54 // 8 == rg.packed_size(16, h)
        assert rg.element_from_packed(data, 16, h) == v

    @settings(max_examples=50)
    @given(st.integers(1, 63))
    def test_pack_unpack_bits(self, bits):
        rng = np.random.default_rng(bits)
        count = 8
        vals = [int(v) for v in rng.integers(0, 1 << bits, count, dtype=np.uint64)]
        packed = rg.pack_coeffs(vals, bits)
        assert len(packed) == count * bits // 8
        assert rg.unpack_coeffs(packed, count, bits) == vals

    def test_pack_matches_bigint_reference(self):
        vals = [3, 1 << 50, 7, (1 << 54) - 1]
        bits = 54
        acc = 0
        for i, v in enumerate(vals):
            acc |= v << (bits * i)
        assert rg.pack_coeffs(vals, bits) == acc.to_bytes(len(vals) * bits // 8, "little")


class TestParams:
    def test_find_modulus(self):
        h = rg.find_modulus(54, 2048)
        assert h.bit_length() == 54 and h % 4096 == 1

    def test_power_of_two_required(self):
        with pytest.raises(ParameterError):
            make_parm(d=6)

    def test_composite_modulus_rejected(self):
        with pytest.raises(ParameterError):
            rg.Params(d=4, h=3 * 5 * 7 * 8 + 1, l=16, sigma=3.2, bound=20,
                      a=rg.zero_element(4, 841))
