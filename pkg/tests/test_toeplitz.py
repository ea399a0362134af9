import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homodyne_qrng import toeplitz
from homodyne_qrng.toeplitz import (
    BlockTooSmallError,
    ExtractorParams,
    ToeplitzSeed,
    extract_blocked,
    extract_naive,
    extract_packed,
    extract_stream,
    output_length,
    seed_generate,
    toeplitz_matrix,
)


def _definition_oracle(x, seed_bits, n, m):
    """y_i = XOR_j T[i][j] x_j with T[i][j] = s[i - j + n - 1], plain Python."""
    return [sum(seed_bits[i - j + n - 1] & x[j] for j in range(n)) % 2 for i in range(m)]


@st.composite
def cases(draw, max_n=600, max_batch=40):
    n = draw(st.integers(2, max_n))
    m = draw(st.integers(1, n - 1))
    batch = draw(st.integers(1, max_batch))
    key = draw(st.integers(0, 2**32 - 1))
    g = np.random.default_rng(key)
    density = draw(st.sampled_from([0.0, 0.05, 0.5, 0.95, 1.0]))
    seed = ToeplitzSeed(g.integers(0, 2, n + m - 1))
    x = (g.random((batch, n)) < density).astype(np.uint8)
    return ExtractorParams(n, m, 1.0), seed, x


class TestSizing:
    def test_examples(self):
        assert output_length(1000, 5.92, 2**-50) == 5820
        assert output_length(1000, 8.0, 1.0) == 8000
        assert ExtractorParams(8000, 5820).seed_length == 13819

    def test_too_small(self):
        with pytest.raises(BlockTooSmallError):
            output_length(10, 5.92, 2**-50)

    @pytest.mark.parametrize("h,eps", [(0.0, 0.5), (1.0, 0.0), (1.0, 1.5)])
    def test_invalid(self, h, eps):
        with pytest.raises(ValueError):
            output_length(100, h, eps)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            ExtractorParams(10, 10)
        with pytest.raises(ValueError):
            ExtractorParams.for_source(10, 1, 1.5)

    @given(st.integers(1, 5000), st.floats(0.1, 8), st.integers(1, 80))
    def test_formula(self, k, h, log_inv_eps):
        eps = 2.0**-log_inv_eps
        bound = k * h - 2 * log_inv_eps
        if bound < 1:
            with pytest.raises(BlockTooSmallError):
                output_length(k, h, eps)
        else:
            m = output_length(k, h, eps)
            assert m == math.floor(bound + 1e-9)


class TestSeed:
    def test_deterministic(self):
        a = seed_generate(10, "prng", 42)
        np.testing.assert_array_equal(a.bits, [0, 1, 1, 0, 1, 1, 0, 1, 0, 1])
        assert a == seed_generate(10, "prng", 42)
        assert a.provenance == "pcg64:42"

    def test_different_seeds(self):
        assert seed_generate(64, "prng", 1) != seed_generate(64, "prng", 2)

    def test_system(self):
        s = seed_generate(100, "system")
        assert len(s) == 100 and s.provenance == "os.urandom"

    @pytest.mark.parametrize("args", [(0, "prng", 1), (5, "prng", None), (5, "dice", 1)])
    def test_errors(self, args):
        with pytest.raises(ValueError):
            seed_generate(*args)

    @given(st.integers(1, 300), st.integers(0, 2**63))
    def test_hex_roundtrip(self, n, key):
        s = seed_generate(n, "prng", key)
        assert ToeplitzSeed.from_hex(s.to_hex(), n) == s

    def test_bad_bits(self):
        with pytest.raises(ValueError):
            ToeplitzSeed([0, 2, 1])


class TestNaive:
    def test_hand_example(self):
        p = ExtractorParams(3, 2, 1.0)
        s = ToeplitzSeed([1, 0, 1, 1])
        np.testing.assert_array_equal(toeplitz_matrix(s, p), [[1, 0, 1], [1, 1, 0]])
        np.testing.assert_array_equal(extract_naive([1, 1, 0], s, p), [1, 0])

    def test_known_answers(self):
        p = ExtractorParams(64, 32, 1.0)
        alt = ToeplitzSeed(np.arange(95) % 2)
        x = np.unpackbits(np.frombuffer(bytes.fromhex("8000000000000000"), np.uint8))
        assert np.packbits(extract_naive(x, alt, p)).tobytes().hex() == "aaaaaaaa"
        s = ToeplitzSeed.from_hex("39a9a84f19be329743358536", 95)
        assert s == seed_generate(95, "prng", 2024)
        x = np.unpackbits(np.frombuffer(bytes.fromhex("d00dfeedc0ffee01"), np.uint8))
        y = extract_naive(x, s, p)
        assert np.packbits(y).tobytes().hex() == "7b048a77"
        assert np.packbits(extract_blocked(x, s, p)).tobytes().hex() == "7b048a77"
        assert list(y) == _definition_oracle(list(x), list(s.bits), 64, 32)

    @settings(max_examples=60)
    @given(cases(max_n=80, max_batch=1))
    def test_matches_definition(self, case):
        p, s, x = case
        assert list(extract_naive(x[0], s, p)) == _definition_oracle(list(x[0]), list(s.bits), p.n_in, p.m_out)

    def test_zero_input(self):
        p = ExtractorParams(50, 20, 1.0)
        s = seed_generate(p.seed_length, "prng", 3)
        assert not extract_naive(np.zeros(50), s, p).any()
        assert not extract_blocked(np.zeros(50), s, p).any()

    def test_shape_errors(self):
        p = ExtractorParams(50, 20, 1.0)
        s = seed_generate(p.seed_length, "prng", 3)
        with pytest.raises(ValueError):
            extract_naive(np.zeros(49), s, p)
        with pytest.raises(ValueError):
            extract_naive(np.zeros(50), seed_generate(10, "prng", 3), p)
        with pytest.raises(ValueError):
            extract_packed(np.zeros((2, 6), np.uint8), s, p)


class TestBlocked:
    @settings(max_examples=150)
    @given(cases())
    def test_equals_naive(self, case):
        p, s, x = case
        want = np.array([extract_naive(row, s, p) for row in x])
        np.testing.assert_array_equal(extract_blocked(x, s, p), want)
        np.testing.assert_array_equal(extract_blocked(x[0], s, p), want[0])

    @settings(max_examples=40)
    @given(cases(max_n=300, max_batch=3), st.integers(0, 2**32 - 1))
    def test_linearity(self, case, key):
        p, s, x = case
        other = np.random.default_rng(key).integers(0, 2, x.shape).astype(np.uint8)
        np.testing.assert_array_equal(
            extract_blocked(x ^ other, s, p), extract_blocked(x, s, p) ^ extract_blocked(other, s, p)
        )

    def test_both_kernels_agree(self):
        p = ExtractorParams(1001, 517, 1.0)
        s = seed_generate(p.seed_length, "prng", 5)
        x = np.random.default_rng(5).integers(0, 2, (toeplitz.BATCH_THRESHOLD + 3, 1001)).astype(np.uint8)
        batch = extract_blocked(x, s, p)
        singles = np.array([extract_blocked(r, s, p) for r in x])
        np.testing.assert_array_equal(batch, singles)

    def test_operating_size(self):
        p = ExtractorParams(8000, 5820)
        s = seed_generate(p.seed_length, "prng", 6)
        x = np.random.default_rng(6).integers(0, 2, (20, 8000)).astype(np.uint8)
        want = np.array([extract_naive(r, s, p) for r in x[:3]])
        np.testing.assert_array_equal(extract_blocked(x, s, p)[:3], want)

    def test_stream(self):
        p = ExtractorParams(24, 10, 1.0)
        s = seed_generate(p.seed_length, "prng", 7)
        data = bytes(range(20))  # 160 bits: six blocks and a 16-bit remainder
        bits = np.unpackbits(np.frombuffer(data, np.uint8))[: 6 * 24].reshape(6, 24)
        want = np.packbits(np.array([extract_naive(b, s, p) for b in bits])).tobytes()
        assert extract_stream(data, s, p) == want
        p2 = ExtractorParams(21, 10, 1.0)
        s2 = seed_generate(p2.seed_length, "prng", 7)
        bits = np.unpackbits(np.frombuffer(data, np.uint8))[: 7 * 21].reshape(7, 21)
        want = np.packbits(np.array([extract_naive(b, s2, p2) for b in bits])).tobytes()
        assert extract_stream(data, s2, p2) == want

    def test_output_bias_removed(self):
        # heavily biased input (p(1) = 0.2, H about 0.32 bits per bit) still yields balanced output
        n = 4000
        m = output_length(n, 0.3, 2**-20)
        p = ExtractorParams(n, m, 2**-20)
        s = seed_generate(p.seed_length, "prng", 8)
        x = (np.random.default_rng(8).random((64, n)) < 0.2).astype(np.uint8)
        y = extract_blocked(x, s, p)
        assert abs(y.mean() - 0.5) < 5 * 0.5 / math.sqrt(y.size)
