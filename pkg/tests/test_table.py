import numpy as np
import pytest

from tablebdd.codec import Advisory, QuantizationGrid
from tablebdd.table import (
    HEADER_SIZE, MAGIC, AdvisoryTable, BadMagicError, GridMismatchError,
    InvalidEntryError, TableFormatError, TruncatedPayloadError,
    VersionMismatchError, constant_table, generate_synthetic, random_table,
    read_header, read_table, stream_chunks, write_table)

REDUCED = QuantizationGrid.linear((4, 8, 8, 8, 4, 4))
TINY = QuantizationGrid.linear((2, 2, 2, 2, 2, 2))


def test_round_trip(tmp_path):
    t = generate_synthetic(REDUCED, Advisory.WL, seed=5)
    path = tmp_path / 't.lut'
    write_table(t, path)
    assert path.stat().st_size == HEADER_SIZE + REDUCED.n_states
    assert read_header(path) == (REDUCED.cardinalities, Advisory.WL)
    assert read_table(path, REDUCED) == t
    assert read_table(path) == t  # linear default ranges


def test_malformed_files(tmp_path):
    t = random_table(TINY, 0)
    path = tmp_path / 't.lut'
    write_table(t, path)
    raw = path.read_bytes()

    def load(data):
        path.write_bytes(data)
        return read_table(path)

    with pytest.raises(BadMagicError):
        load(b'X' + raw[1:])
    with pytest.raises(VersionMismatchError):
        load(raw[:12] + (2).to_bytes(4, 'little') + raw[16:])
    with pytest.raises(TruncatedPayloadError):
        load(raw[:-1])
    with pytest.raises(TruncatedPayloadError):
        load(raw[:20])
    with pytest.raises(InvalidEntryError):
        load(raw[:-1] + b'\x05')
    with pytest.raises(InvalidEntryError):
        load(raw[:40] + b'\x07' + raw[41:])
    with pytest.raises(TableFormatError):
        load(raw + b'\x00')
    path.write_bytes(raw)
    with pytest.raises(GridMismatchError):
        read_table(path, REDUCED)
    assert raw.startswith(MAGIC)


def test_chunks_cover_the_table():
    t = random_table(QuantizationGrid.linear((1, 1, 1, 1, 2, 5)), 1)
    chunks = list(stream_chunks(t, 3))
    assert [len(c) for c in chunks] == [3, 3, 3, 1]
    assert [c.start_offset for c in chunks] == [0, 3, 6, 9]
    assert np.array_equal(np.concatenate([c.entries for c in chunks]), t.entries)
    assert len(list(stream_chunks(t, 100))) == 1
    with pytest.raises(ValueError):
        list(stream_chunks(t, 0))


def test_synthetic_is_deterministic_and_total():
    a = generate_synthetic(REDUCED, Advisory.SR, seed=42)
    b = generate_synthetic(REDUCED, Advisory.SR, seed=42)
    c = generate_synthetic(REDUCED, Advisory.SR, seed=43)
    assert a == b
    assert a != c
    assert a.entries.max() < len(Advisory)
    assert len(a) == REDUCED.n_states
    counts = a.counts()
    assert sum(counts.values()) == REDUCED.n_states
    assert all(n > 0 for n in counts.values())


def test_perturbation_fraction():
    clean = generate_synthetic(REDUCED, Advisory.COC, seed=1, perturbation=0.0)
    noisy = generate_synthetic(REDUCED, Advisory.COC, seed=1, perturbation=0.01)
    assert (clean.entries != noisy.entries).sum() == round(0.01 * REDUCED.n_states)
    with pytest.raises(ValueError):
        generate_synthetic(REDUCED, Advisory.COC, seed=1, perturbation=1.5)


def test_a_prev_changes_the_table():
    a = generate_synthetic(REDUCED, Advisory.COC, seed=42, perturbation=0.0)
    b = generate_synthetic(REDUCED, Advisory.SR, seed=42, perturbation=0.0)
    # a previous turn lowers the clear-of-conflict score
    assert b.counts()[Advisory.COC] <= a.counts()[Advisory.COC]


def test_lookup_and_item():
    t = random_table(REDUCED, 9)
    states = t.all_states()
    assert np.array_equal(t.lookup(states), t.entries)
    s = (3, 7, 0, 5, 1, 2)
    assert t[s] == t.entries[REDUCED.offset(s)]
    u = t.with_entry(s, Advisory((t[s] + 1) % 5))
    assert (u.entries != t.entries).sum() == 1
    with pytest.raises(GridMismatchError):
        AdvisoryTable(REDUCED, Advisory.COC, t.entries[:-1])
    assert constant_table(TINY, Advisory.WR).counts()[Advisory.WR] == 64


@pytest.mark.slow
def test_full_size_table(tmp_path):
    g = QuantizationGrid.default()
    t = generate_synthetic(g, Advisory.SR, seed=42)
    assert len(t) == 89_799_840
    # golden distribution for the default grid, seed 42
    assert t.counts() == {
        Advisory.COC: 69_534_617, Advisory.WL: 2_204_332, Advisory.WR: 1_847_466,
        Advisory.SL: 8_409_434, Advisory.SR: 7_803_991}
    path = tmp_path / 'full.lut'
    write_table(t, path)
    assert path.stat().st_size == HEADER_SIZE + 89_799_840
    assert read_header(path) == ((10, 41, 39, 39, 12, 12), Advisory.SR)
