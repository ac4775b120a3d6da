"""Model persistence, clause statistics, interpretability dump, energy ratio.

The model file carries a fixed little-endian header and one run-length
encoded include bitmap per clause; that is all inference needs.  Raw TA
states can be appended optionally for resumable training.  Round-tripping a
file reproduces it byte for byte.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .core import ClauseBank, TMModel, literal_name

MAGIC = b"CSCTM\x00"
VERSION = 1
_FLAG_TA_STATES = 0x01
_HEADER = struct.Struct("<HBBIIIIIId")  # version, flags, boost, o, q, n, T, b, N, s


class ModelIOError(Exception):
    pass


class BadMagic(ModelIOError):
    pass


class VersionMismatch(ModelIOError):
    pass


class Corrupt(ModelIOError):
    pass


class UndefinedEnergyRatio(ValueError):
    pass


def rle_encode(bits):
    """Runs of a bit vector as (value, length) pairs, starting at bit 0."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size == 0:
        return []
    boundaries = np.flatnonzero(np.diff(bits)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [bits.size]])
    return [(int(bits[s]), int(e - s)) for s, e in zip(starts, ends)]


def rle_decode(runs):
    """Inverse of rle_encode."""
    if not runs:
        return np.zeros(0, dtype=np.uint8)
    return np.concatenate(
        [np.full(length, value, dtype=np.uint8) for value, length in runs]
    )


def _write_varint(buf, value):
    if value < 0:
        raise ValueError("varint must be non-negative")
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            buf.write(bytes([byte | 0x80]))
        else:
            buf.write(bytes([byte]))
            return


def _read_varint(buf):
    result = 0
    shift = 0
    while True:
        chunk = buf.read(1)
        if not chunk:
            raise Corrupt("truncated varint")
        byte = chunk[0]
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result
        shift += 7
        if shift > 63:
            raise Corrupt("varint overflow")


def _write_bitmap(buf, bits):
    runs = rle_encode(bits)
    _write_varint(buf, len(runs))
    if runs:
        buf.write(bytes([runs[0][0]]))
        for _, length in runs:
            _write_varint(buf, length)


def _read_bitmap(buf, expected_length):
    n_runs = _read_varint(buf)
    if n_runs == 0:
        if expected_length != 0:
            raise Corrupt("empty run list for non-empty bitmap")
        return np.zeros(0, dtype=np.uint8)
    first = buf.read(1)
    if not first:
        raise Corrupt("truncated bitmap")
    value = first[0]
    if value not in (0, 1):
        raise Corrupt(f"bad run value {value}")
    runs = []
    for _ in range(n_runs):
        length = _read_varint(buf)
        if length < 1:
            raise Corrupt("run length must be >= 1")
        runs.append((value, length))
        value ^= 1
    bits = rle_decode(runs)
    if bits.size != expected_length:
        raise Corrupt(f"bitmap length {bits.size}, declared {expected_length}")
    return bits


def encode_model(model: TMModel, include_ta_states=False) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    flags = _FLAG_TA_STATES if include_ta_states else 0
    buf.write(
        _HEADER.pack(
            VERSION,
            flags,
            int(model.boost_true_positive),
            model.n_features,
            len(model.banks),
            model.n_clauses,
            model.T,
            model.budget,
            model.n_states,
            model.s,
        )
    )
    for bank in model.banks:
        for row in bank.include_bitmaps():
            _write_bitmap(buf, row)
    if include_ta_states:
        for bank in model.banks:
            buf.write(bank.states.astype("<i2").tobytes())
    return buf.getvalue()


def decode_model(data: bytes) -> TMModel:
    buf = io.BytesIO(data)
    magic = buf.read(len(MAGIC))
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    header = buf.read(_HEADER.size)
    if len(header) != _HEADER.size:
        raise Corrupt("truncated header")
    version, flags, boost, o, q, n, T, budget, n_states, s = _HEADER.unpack(header)
    if version != VERSION:
        raise VersionMismatch(f"file version {version}, reader supports {VERSION}")
    if q < 1 or n < 2 or n % 2 or o < 1:
        raise Corrupt("implausible header dimensions")
    bitmaps = [
        np.stack([_read_bitmap(buf, 2 * o) for _ in range(n)]) for _ in range(q)
    ]
    banks = []
    for bank_bitmaps in bitmaps:
        if flags & _FLAG_TA_STATES:
            raw = buf.read(n * 2 * o * 2)
            if len(raw) != n * 2 * o * 2:
                raise Corrupt("truncated TA states")
            states = np.frombuffer(raw, dtype="<i2").reshape(n, 2 * o)
        else:
            states = np.where(bank_bitmaps, n_states + 1, n_states).astype(np.int16)
        bank = ClauseBank(n, o, n_states)
        try:
            bank.set_states(states)
        except ValueError as exc:
            raise Corrupt(str(exc)) from None
        if not np.array_equal(bank.include_bitmaps(), bank_bitmaps):
            raise Corrupt("TA states disagree with include bitmaps")
        banks.append(bank)
    if buf.read(1):
        raise Corrupt("trailing bytes after model payload")
    return TMModel(
        banks=banks,
        n_features=o,
        n_classes=2 if q == 1 else q,
        T=T,
        s=s,
        budget=budget,
        n_states=n_states,
        boost_true_positive=bool(boost),
    )


def save_model(model, path, include_ta_states=False):
    data = encode_model(model, include_ta_states)
    with open(path, "wb") as f:
        f.write(data)
    return len(data)


def load_model(path) -> TMModel:
    with open(path, "rb") as f:
        return decode_model(f.read())


@dataclass
class ClauseStats:
    sizes: np.ndarray
    l_ave: float
    over_budget_count: int
    model_size_bytes: int


def clause_stats(model, budget=None) -> ClauseStats:
    """Exact per-clause literal counts recomputed from the include bitmaps."""
    b = model.budget if budget is None else budget
    sizes = np.concatenate(
        [bank.include_bitmaps().sum(axis=1) for bank in model.banks]
    ).astype(np.int64)
    return ClauseStats(
        sizes=sizes,
        l_ave=float(sizes.mean()),
        over_budget_count=int((sizes > b).sum()),
        model_size_bytes=len(encode_model(model, include_ta_states=False)),
    )


def energy_ratio(budget, l_ave):
    """Estimated clause-logic energy fraction budget / l_ave.

    l_ave is taken from the unconstrained model; the ratio is a rough
    switching-activity proxy, not a measured figure.
    """
    if l_ave == 0:
        raise UndefinedEnergyRatio("l_ave is 0; ratio undefined")
    return budget / l_ave


def dump_clauses(model, feature_names=None, top_k=None):
    """Render clauses as text rules, smallest first; one clause per line."""
    o = model.n_features
    if feature_names is not None and len(feature_names) != o:
        raise ValueError(f"expected {o} feature names")
    entries = []
    for b, bank in enumerate(model.banks):
        for j in range(bank.n_clauses):
            clause = bank.clause(j)
            includes = sorted(clause.include_indices(), key=lambda k: (k % o, k >= o))
            if includes:
                body = " ∧ ".join(
                    literal_name(k, o, feature_names) for k in includes
                )
            else:
                body = "(empty)"
            sign = "+" if clause.polarity > 0 else "-"
            entries.append((len(includes), b, j, f"Class {b} [{sign}] : {body}"))
    entries.sort(key=lambda e: (e[0], e[1], e[2]))
    if top_k is not None:
        entries = entries[:top_k]
    return "\n".join(e[3] for e in entries)
