"""Lossless coding of quantization-index streams.

Bit-exact description (enough for an independent reimplementation):

Range coder
    64-bit carry-propagating range coder with byte output.  Encoder state:
    ``low`` (65 bits, bit 64 is the carry), ``range`` = 2**64 - 1,
    ``cache`` = 0, ``cache_size`` = 1.  Coding ``(start, freq, total)``
    sets ``r = range // total``, ``low += r*start``, ``range = r*freq``,
    then while ``range < 2**56``: ``range <<= 8`` and shift_low.

    shift_low: if ``low mod 2**64 < 0xFF * 2**56`` or ``low >= 2**64``,
    emit ``cache + carry`` followed by ``cache_size - 1`` bytes of
    ``0xFF + carry`` (all mod 256), set ``cache = (low >> 56) & 0xFF`` and
    ``cache_size = 0``; in every case ``cache_size += 1`` and
    ``low = (low << 8) mod 2**64``.  Finishing calls shift_low nine times.
    The first payload byte is always 0.

    The decoder reads nine bytes into ``code`` and, for each symbol with
    ``r = range // total``, takes ``v = code // r`` (``v >= total`` means
    corruption), locates the symbol whose interval holds ``v``, then
    ``code -= r*start``, ``range = r*freq`` and renormalizes by shifting in
    one byte per ``range <<= 8``.  A valid payload is consumed exactly.

Model (prior id 1, "uniform escape")
    Adaptive order-0.  Known indices occupy slots in order of first
    appearance, with counts starting at 1 and growing by 1 per occurrence;
    slot intervals are laid out in slot order from 0.  An escape symbol
    follows them with frequency ``distinct + 1``.  An unseen index ``i``
    is sent as an escape followed by ``z = 2i`` (``i >= 0``) or
    ``z = -2i - 1`` (``i < 0``): first its bit length ``L`` in 0..64 with
    an adaptive 65-symbol model (all counts start at 1, +1 per use), then
    the low ``L - 1`` bits of ``z`` most-significant chunk first, each
    chunk of at most 16 bits coded uniformly.  Counts stay below 2**31
    because streams are limited to 2**31 - 1 symbols.

Container
    Little-endian: magic ``b"LVQ1"``, prior id (u8), m (f64), n (u64),
    symbol count (u64), seed (u64), payload length (u64), CRC-32 of the
    payload (u32), payload.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

MASK64 = (1 << 64) - 1
TOP = 1 << 56
CARRY_LIMIT = 0xFF << 56
PRIOR_UNIFORM_ESCAPE = 1
MAX_SYMBOLS = (1 << 31) - 1
MAGIC = b"LVQ1"
_HEADER = struct.Struct("<4sBdQQQQI")
_CHUNK = 16


class CodecError(ValueError):
    """Malformed or corrupted coded data."""


@dataclass(frozen=True)
class Bitstream:
    data: bytes

    @property
    def bit_length(self) -> int:
        return 8 * len(self.data)


class _Fenwick:
    """Cumulative counts over slots, growable by doubling."""

    def __init__(self, capacity: int = 64):
        self.size = capacity
        self.tree = [0] * (capacity + 1)
        self.counts = []

    def append(self, count: int) -> int:
        slot = len(self.counts)
        if slot >= self.size:
            self._grow()
        self.counts.append(0)
        self.add(slot, count)
        return slot

    def _grow(self):
        counts = self.counts
        self.size *= 2
        self.tree = [0] * (self.size + 1)
        self.counts = []
        for c in counts:
            slot = len(self.counts)
            self.counts.append(0)
            self.add(slot, c)

    def add(self, slot: int, delta: int):
        self.counts[slot] += delta
        tree, i, size = self.tree, slot + 1, self.size
        while i <= size:
            tree[i] += delta
            i += i & -i

    def prefix(self, slot: int) -> int:
        tree, i, s = self.tree, slot, 0
        while i > 0:
            s += tree[i]
            i -= i & -i
        return s

    def find(self, v: int) -> tuple:
        """Slot whose interval contains ``v`` and the interval start."""
        tree, pos, step, rem = self.tree, 0, self.size, v
        while step:
            nxt = pos + step
            if nxt <= self.size and tree[nxt] <= rem:
                pos = nxt
                rem -= tree[nxt]
            step >>= 1
        return pos, v - rem


class _Encoder:
    def __init__(self):
        self.low = 0
        self.range = MASK64
        self.cache = 0
        self.cache_size = 1
        self.out = bytearray()

    def _shift_low(self):
        low = self.low
        if (low & MASK64) < CARRY_LIMIT or low > MASK64:
            carry = low >> 64
            out = self.out
            out.append((self.cache + carry) & 0xFF)
            if self.cache_size > 1:
                out.extend(bytes([(0xFF + carry) & 0xFF]) * (self.cache_size - 1))
            self.cache = (low >> 56) & 0xFF
            self.cache_size = 0
        self.cache_size += 1
        self.low = (low << 8) & MASK64

    def encode(self, start: int, freq: int, total: int):
        r = self.range // total
        self.low += r * start
        self.range = r * freq
        while self.range < TOP:
            self.range <<= 8
            self._shift_low()

    def finish(self) -> bytes:
        for _ in range(9):
            self._shift_low()
        return bytes(self.out)


class _Decoder:
    def __init__(self, data: bytes):
        if len(data) < 9 or data[0] != 0:
            raise CodecError("payload too short or bad leading byte")
        self.data = data
        self.pos = 9
        self.code = int.from_bytes(data[:9], "big")
        self.range = MASK64
        self._r = 0

    def target(self, total: int) -> int:
        self._r = self.range // total
        v = self.code // self._r
        if v >= total:
            raise CodecError("code value outside the coded interval")
        return v

    def consume(self, start: int, freq: int):
        r = self._r
        self.code -= r * start
        self.range = r * freq
        while self.range < TOP:
            if self.pos >= len(self.data):
                raise CodecError("payload ended early")
            self.code = ((self.code << 8) | self.data[self.pos]) & MASK64
            self.range <<= 8
            self.pos += 1

    def close(self):
        if self.pos != len(self.data):
            raise CodecError(f"{len(self.data) - self.pos} trailing payload bytes")


def _zigzag(i: int) -> int:
    return 2 * i if i >= 0 else -2 * i - 1


def _unzigzag(z: int) -> int:
    return z >> 1 if z % 2 == 0 else -((z + 1) >> 1)


def _chunks(nbits: int):
    """Chunk widths for the low bits, most-significant chunk first."""
    widths = []
    while nbits > 0:
        w = min(_CHUNK, nbits)
        widths.append(w)
        nbits -= w
    return widths


def encode(indices, prior: int = PRIOR_UNIFORM_ESCAPE) -> Bitstream:
    """Adaptive order-0 arithmetic code of an integer index stream."""
    if prior != PRIOR_UNIFORM_ESCAPE:
        raise ValueError(f"unknown prior id {prior}")
    values = np.asarray(indices, dtype=np.int64).ravel().tolist()
    if len(values) > MAX_SYMBOLS:
        raise ValueError("stream too long")
    enc = _Encoder()
    code = enc.encode
    fw = _Fenwick()
    slots = {}
    known_total = 0
    lengths = _Fenwick(128)
    for _ in range(65):
        lengths.append(1)
    len_total = 65
    for s in values:
        slot = slots.get(s)
        esc = len(slots) + 1
        if slot is not None:
            code(fw.prefix(slot), fw.counts[slot], known_total + esc)
            fw.add(slot, 1)
        else:
            code(known_total, esc, known_total + esc)
            z = _zigzag(s)
            nbits = z.bit_length()
            code(lengths.prefix(nbits), lengths.counts[nbits], len_total)
            lengths.add(nbits, 1)
            len_total += 1
            rest = nbits - 1
            for w in _chunks(rest):
                rest -= w
                code((z >> rest) & ((1 << w) - 1), 1, 1 << w)
            slots[s] = fw.append(1)
        known_total += 1
    return Bitstream(enc.finish())


def decode(b: Bitstream, length: int, prior: int = PRIOR_UNIFORM_ESCAPE) -> np.ndarray:
    """Inverse of ``encode``; raises ``CodecError`` on malformed payloads."""
    if prior != PRIOR_UNIFORM_ESCAPE:
        raise ValueError(f"unknown prior id {prior}")
    data = b.data if isinstance(b, Bitstream) else bytes(b)
    dec = _Decoder(data)
    fw = _Fenwick()
    symbols = []
    known_total = 0
    lengths = _Fenwick(128)
    for _ in range(65):
        lengths.append(1)
    len_total = 65
    out = np.empty(length, dtype=np.int64)
    for t in range(length):
        esc = len(symbols) + 1
        v = dec.target(known_total + esc)
        if v < known_total:
            slot, start = fw.find(v)
            dec.consume(start, fw.counts[slot])
            fw.add(slot, 1)
            out[t] = symbols[slot]
        else:
            dec.consume(known_total, esc)
            v = dec.target(len_total)
            nbits, start = lengths.find(v)
            dec.consume(start, lengths.counts[nbits])
            lengths.add(nbits, 1)
            len_total += 1
            z = 1 if nbits else 0
            for w in _chunks(nbits - 1):
                chunk = dec.target(1 << w)
                dec.consume(chunk, 1)
                z = (z << w) | chunk
            s = _unzigzag(z)
            if not -(1 << 63) <= s < (1 << 63):
                raise CodecError("decoded index outside int64")
            fw.append(1)
            symbols.append(s)
            out[t] = s
        known_total += 1
    dec.close()
    return out


@dataclass(frozen=True)
class ContainerHeader:
    m: float
    n: int
    symbol_count: int
    seed: int = 0
    prior_id: int = PRIOR_UNIFORM_ESCAPE


def write_container(header: ContainerHeader, payload: Bitstream) -> bytes:
    data = payload.data
    head = _HEADER.pack(MAGIC, header.prior_id, float(header.m), header.n, header.symbol_count,
                        header.seed, len(data), zlib.crc32(data))
    return head + data


def read_container(blob: bytes) -> tuple:
    """Parse and verify a container; returns ``(header, Bitstream)``."""
    if len(blob) < _HEADER.size:
        raise CodecError("container shorter than its header")
    magic, prior, m, n, count, seed, plen, crc = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CodecError("bad magic")
    data = blob[_HEADER.size:]
    if len(data) != plen:
        raise CodecError("payload length mismatch")
    if zlib.crc32(data) != crc:
        raise CodecError("payload CRC mismatch")
    return ContainerHeader(m, n, count, seed, prior), Bitstream(data)


def encode_container(indices, m: float, n: int, seed: int = 0) -> bytes:
    values = np.asarray(indices, dtype=np.int64).ravel()
    return write_container(ContainerHeader(m, n, int(values.size), seed), encode(values))


def decode_container(blob: bytes) -> tuple:
    header, payload = read_container(blob)
    return header, decode(payload, header.symbol_count, header.prior_id)


@dataclass(frozen=True)
class RateReport:
    """Coded rate against a reference entropy, all in nats."""

    symbols: int
    payload_bits: int
    total_nats: float
    per_unit_time_nats: float
    reference_nats: Optional[float]
    roundtrip_ok: bool = True

    @property
    def gap(self) -> float:
        if self.reference_nats is None:
            return math.nan
        return self.per_unit_time_nats - self.reference_nats

    def within(self, rel: float = 0.02, overhead_bits: float = 64) -> bool:
        """Rate at most ``(1 + rel) * reference + overhead_bits * ln 2``."""
        return self.per_unit_time_nats <= (1 + rel) * self.reference_nats + overhead_bits * math.log(2)


def rate_report(indices, n: int, reference=None, verify: bool = True) -> RateReport:
    """Code ``indices`` and express the payload size per unit time.

    ``reference`` may be an ``EntropyEstimate`` or a plain number (nats per
    unit time); both describe ``n`` times the per-symbol entropy.
    """
    values = np.asarray(indices, dtype=np.int64).ravel()
    bits = encode(values)
    ok = True
    if verify:
        ok = bool(np.array_equal(decode(bits, values.size), values))
    total = bits.bit_length * math.log(2)
    per_unit = total * n / values.size if values.size else 0.0
    ref = getattr(reference, "value", reference)
    return RateReport(int(values.size), bits.bit_length, total, per_unit,
                      None if ref is None else float(ref), ok)
