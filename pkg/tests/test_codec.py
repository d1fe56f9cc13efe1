import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levyquant import amplitude as A
from levyquant.codec import (MAGIC, Bitstream, CodecError, ContainerHeader, decode,
                             decode_container, encode, encode_container, rate_report,
                             read_container, write_container)
from levyquant.entropy_engine import Correction, plugin_entropy
from levyquant.noise_models import GaussianLK, PoissonParams, StableParams
from levyquant.pmf import EmpiricalPmf
from levyquant.quantization import quantize_array
from levyquant.sampling import IncrementSpec, RngStream, sample_increments


def roundtrip(values):
    values = np.asarray(values, dtype=np.int64)
    return decode(encode(values), values.size)


class TestExamples:
    def test_all_zero(self):
        b = encode(np.zeros(10_000, dtype=np.int64))
        assert b.bit_length < 100
        assert np.array_equal(decode(b, 10_000), np.zeros(10_000))

    def test_empty(self):
        b = encode([])
        assert roundtrip([]).size == 0 and b.bit_length == 72

    def test_three_index(self):
        idx = quantize_array([0.74, -0.06, 0.05], 10)
        assert idx.tolist() == [7, -1, 1]
        assert roundtrip(idx).tolist() == [7, -1, 1]

    def test_uniform16(self, gen):
        x = gen.integers(0, 16, 100_000)
        b = encode(x)
        assert abs(b.bit_length - 400_000) <= 0.01 * 400_000 + 64
        assert np.array_equal(decode(b, x.size), x)

    @pytest.mark.parametrize("value", [0, 1, -1, 2**62, -(2**63), 2**63 - 1, 12345])
    def test_extreme_indices(self, value):
        assert roundtrip([value, value, 0, value]).tolist() == [value, value, 0, value]

    def test_first_byte_zero(self, gen):
        assert encode(gen.integers(-50, 50, 1000)).data[0] == 0

    def test_deterministic(self, gen):
        x = gen.integers(-5, 5, 5000)
        assert encode(x).data == encode(x.copy()).data

    def test_unknown_prior(self):
        with pytest.raises(ValueError):
            encode([1], prior=7)
        with pytest.raises(ValueError):
            decode(encode([1]), 1, prior=7)


class TestRoundTrip:
    @settings(max_examples=80)
    @given(st.lists(st.integers(-(2**63), 2**63 - 1), max_size=200))
    def test_arbitrary(self, values):
        assert roundtrip(values).tolist() == values

    @settings(max_examples=25)
    @given(st.sampled_from(["gauss", "cauchy", "stable", "poisson"]), st.sampled_from([1, 16, 1024]),
           st.sampled_from([1, 4, 32]), st.integers(0, 2**32 - 1))
    def test_model_streams(self, kind, m, n, seed):
        model = {"gauss": GaussianLK(1.0), "cauchy": StableParams(1.0), "stable": StableParams(0.7, 0.5),
                 "poisson": PoissonParams(1.0, A.uniform(0, 1))}[kind]
        idx = quantize_array(sample_increments(IncrementSpec(model, n), 2000, RngStream(seed)), m)
        assert np.array_equal(roundtrip(idx), idx)


class TestCorruption:
    @pytest.mark.parametrize("seed", range(25))
    def test_bit_flip(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.geometric(0.3, 400) - 3
        data = bytearray(encode(x).data)
        pos = int(rng.integers(0, len(data) * 8))
        data[pos // 8] ^= 1 << (pos % 8)
        try:
            y = decode(Bitstream(bytes(data)), x.size)
        except CodecError:
            return
        assert not np.array_equal(y, x) or encode(y).data != bytes(data)

    def test_truncated(self):
        data = encode(np.arange(100)).data
        with pytest.raises(CodecError):
            decode(Bitstream(data[:-3]), 100)

    def test_trailing_bytes(self):
        data = encode(np.arange(100)).data
        with pytest.raises(CodecError):
            decode(Bitstream(data + b"\x00"), 100)

    def test_wrong_length(self):
        b = encode(np.arange(100))
        with pytest.raises(CodecError):
            decode(b, 150)


class TestContainer:
    def test_roundtrip(self, gen):
        x = gen.integers(-3, 3, 777)
        blob = encode_container(x, 64.0, 4, seed=99)
        assert blob[:4] == MAGIC
        header, y = decode_container(blob)
        assert header == ContainerHeader(64.0, 4, 777, 99, 1)
        assert np.array_equal(y, x)

    def test_layout(self):
        blob = write_container(ContainerHeader(2.5, 3, 0, 7), encode([]))
        magic, prior, m, n, count, seed, plen = struct.unpack_from("<4sBdQQQQ", blob)
        assert (magic, prior, m, n, count, seed, plen) == (MAGIC, 1, 2.5, 3, 0, 7, 9)

    def test_bad_magic(self):
        blob = bytearray(encode_container([1, 2], 1.0, 1))
        blob[0] ^= 0xFF
        with pytest.raises(CodecError):
            read_container(bytes(blob))

    def test_crc(self):
        blob = bytearray(encode_container(list(range(50)), 1.0, 1))
        blob[-2] ^= 0x10
        with pytest.raises(CodecError):
            read_container(bytes(blob))

    def test_short(self):
        with pytest.raises(CodecError):
            read_container(b"LVQ1")
        with pytest.raises(CodecError):
            read_container(encode_container([1], 1.0, 1)[:-1])


class TestRate:
    def test_deterministic_source(self):
        r = rate_report(np.zeros(100_000, dtype=np.int64), 1, reference=1.5)
        assert r.per_unit_time_nats < 1e-3
        assert r.gap == pytest.approx(-1.5, abs=1e-3)

    def test_no_reference(self):
        r = rate_report([1, 2, 3], 1)
        assert math.isnan(r.gap) and r.roundtrip_ok

    def test_per_unit_time(self, gen):
        x = gen.integers(0, 4, 10_000)
        r = rate_report(x, 8)
        assert r.per_unit_time_nats == pytest.approx(r.payload_bits * math.log(2) * 8 / 10_000)
        assert r.total_nats == pytest.approx(r.payload_bits * math.log(2))

    @pytest.mark.parametrize("model, m, n", [(GaussianLK(1.0), 64, 1), (StableParams(1.0), 16, 4),
                                             (PoissonParams(1.0, A.uniform(0, 1)), 64, 4)])
    def test_sandwich(self, model, m, n):
        idx = quantize_array(sample_increments(IncrementSpec(model, n), 100_000, RngStream(5)), m)
        ref = plugin_entropy(EmpiricalPmf.from_indices(idx), Correction.MILLER_MADOW).scaled(n)
        r = rate_report(idx, n, ref)
        assert r.roundtrip_ok
        assert r.per_unit_time_nats >= ref.value - 3 * ref.std_error
        assert r.within(0.02, 64)
