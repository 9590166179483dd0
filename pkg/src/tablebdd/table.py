"""Dense advisory tables: file format, synthetic generation, chunking.

File layout (little endian)::

    offset  size  field
    0       12    magic  b"TABLEBDD-LUT"
    12      4     format version (uint32, currently 1)
    16      24    cardinalities, 6 x uint32, order tau rho theta psi v_own v_int
    40      1     a_prev advisory code
    41      N     one byte per state, row-major in the same dimension order

Advisory codes are COC=0, WL=1, WR=2, SL=3, SR=4.
"""
from __future__ import annotations

import math
import struct
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tablebdd.codec import Advisory, CARDINALITIES, QuantizationGrid

MAGIC = b'TABLEBDD-LUT'
VERSION = 1
_HEADER = struct.Struct('<12sI6IB')
HEADER_SIZE = _HEADER.size
DEFAULT_CHUNK_SIZE = 1 << 20
DEFAULT_PERTURBATION = 0.001


class TableFormatError(ValueError):
    pass


class BadMagicError(TableFormatError):
    pass


class VersionMismatchError(TableFormatError):
    pass


class TruncatedPayloadError(TableFormatError):
    pass


class InvalidEntryError(TableFormatError):
    pass


class GridMismatchError(TableFormatError):
    pass


@dataclass(eq=False)
class AdvisoryTable:
    """Advisory for every state of `grid`, for one previous advisory."""

    grid: QuantizationGrid
    a_prev: Advisory
    entries: np.ndarray

    def __post_init__(self):
        self.a_prev = Advisory(self.a_prev)
        self.entries = np.ascontiguousarray(self.entries, dtype=np.uint8).reshape(-1)
        if self.entries.size != self.grid.n_states:
            raise GridMismatchError(
                f'{self.entries.size} entries for a grid of {self.grid.n_states} states')

    def __len__(self):
        return self.entries.size

    def __getitem__(self, s) -> Advisory:
        return Advisory(int(self.entries[self.grid.offset(s)]))

    def __eq__(self, other):
        if not isinstance(other, AdvisoryTable):
            return NotImplemented
        return (
            self.a_prev == other.a_prev and self.grid == other.grid
            and np.array_equal(self.entries, other.entries))

    def lookup(self, states: np.ndarray) -> np.ndarray:
        """Entries for an ``(n, 6)`` array of state indices."""
        states = np.asarray(states)
        return self.entries[np.ravel_multi_index(states.T, self.grid.cardinalities)]

    def nd(self) -> np.ndarray:
        return self.entries.reshape(self.grid.cardinalities)

    def counts(self) -> dict[Advisory, int]:
        c = np.bincount(self.entries, minlength=len(Advisory))
        return {a: int(c[a]) for a in Advisory}

    def with_entry(self, s, a: Advisory) -> AdvisoryTable:
        entries = self.entries.copy()
        entries[self.grid.offset(s)] = int(a)
        return AdvisoryTable(self.grid, self.a_prev, entries)

    def all_states(self) -> np.ndarray:
        """Every state index tuple, row-major, as an ``(n, 6)`` array."""
        idx = np.indices(self.grid.cardinalities, dtype=np.int16)
        return idx.reshape(len(CARDINALITIES), -1).T


@dataclass
class TableChunk:
    start_offset: int
    entries: np.ndarray

    def __len__(self):
        return self.entries.size


def stream_chunks(t: AdvisoryTable, chunk_size: int = DEFAULT_CHUNK_SIZE) -> Iterator[TableChunk]:
    if chunk_size < 1:
        raise ValueError('chunk_size must be at least 1')
    for start in range(0, len(t), chunk_size):
        yield TableChunk(start, t.entries[start:start + chunk_size])


# ----------------------------------------------------------------------
# synthetic tables

_SHIFT = {
    Advisory.COC: 0.0, Advisory.WL: 0.04, Advisory.WR: 0.04,
    Advisory.SL: 0.08, Advisory.SR: 0.08}
_THRESHOLD = 0.9


def _norm(c: int) -> np.ndarray:
    return np.arange(c) / max(c - 1, 1)


def geometric_rule(grid: QuantizationGrid, a_prev: Advisory, tau_slice=slice(None)) -> np.ndarray:
    """Noise-free advisories for a block of tau values.

    A pseudo-range score grows with range, time to loss of separation,
    bearing away from dead ahead and ownship speed advantage. States
    scoring above a threshold are clear of conflict; the others turn away
    from the intruder's side of the bearing grid, hard when the range
    index falls in the closest quarter.
    """
    c_tau, c_rho, c_th, c_psi, c_vo, c_vi = grid.cardinalities
    tau = _norm(c_tau)[tau_slice][:, None, None, None, None, None]
    rho = _norm(c_rho)[None, :, None, None, None, None]
    th = (2 * _norm(c_th) - 1)[None, None, :, None, None, None]
    psi = (2 * _norm(c_psi) - 1)[None, None, None, :, None, None]
    vo = _norm(c_vo)[None, None, None, None, :, None]
    vi = _norm(c_vi)[None, None, None, None, None, :]
    score = (
        1.5 * rho + 0.5 * tau + 0.6 * np.abs(th) + 0.1 * np.abs(psi)
        + 0.3 * np.maximum(vo - vi, 0.0) - _SHIFT[Advisory(a_prev)])
    coc = score > _THRESHOLD
    # intruder bearing index above the grid centre: turn right, else left
    right = np.arange(c_th)[None, None, :, None, None, None] > (c_th - 1) / 2
    strong = np.arange(c_rho)[None, :, None, None, None, None] < c_rho / 4
    out = np.where(
        right,
        np.where(strong, Advisory.SR, Advisory.WR),
        np.where(strong, Advisory.SL, Advisory.WL))
    return np.where(coc, Advisory.COC, out).astype(np.uint8)


def generate_synthetic(
        grid: QuantizationGrid, a_prev: Advisory, seed: int,
        perturbation: float = DEFAULT_PERTURBATION) -> AdvisoryTable:
    """Deterministic stand-in table shaped by a geometric rule.

    A fraction `perturbation` of the states, drawn from a generator
    seeded by ``(seed, a_prev)``, gets a different advisory chosen
    uniformly among the other four.
    """
    if not 0.0 <= perturbation <= 1.0:
        raise ValueError('perturbation must lie in [0, 1]')
    a_prev = Advisory(a_prev)
    entries = np.empty(grid.n_states, dtype=np.uint8)
    slab = grid.n_states // grid.cardinalities[0]
    for t in range(grid.cardinalities[0]):
        entries[t * slab:(t + 1) * slab] = geometric_rule(grid, a_prev, slice(t, t + 1)).reshape(-1)
    k = int(round(perturbation * grid.n_states))
    if k:
        rng = np.random.default_rng([seed, int(a_prev)])
        where = rng.choice(grid.n_states, size=k, replace=False)
        bump = rng.integers(1, len(Advisory), size=k, dtype=np.uint8)
        entries[where] = (entries[where] + bump) % len(Advisory)
    return AdvisoryTable(grid, a_prev, entries)


def constant_table(grid: QuantizationGrid, a: Advisory, a_prev: Advisory = Advisory.COC) -> AdvisoryTable:
    return AdvisoryTable(grid, a_prev, np.full(grid.n_states, int(a), dtype=np.uint8))


def random_table(grid: QuantizationGrid, seed: int, a_prev: Advisory = Advisory.COC) -> AdvisoryTable:
    """Uniformly random entries; no geometric structure."""
    rng = np.random.default_rng(seed)
    return AdvisoryTable(grid, a_prev, rng.integers(0, len(Advisory), grid.n_states, dtype=np.uint8))


# ----------------------------------------------------------------------
# file IO

def write_table(t: AdvisoryTable, path):
    header = _HEADER.pack(MAGIC, VERSION, *t.grid.cardinalities, int(t.a_prev))
    with open(path, 'wb') as f:
        f.write(header)
        f.write(t.entries.tobytes())


def read_header(path) -> tuple[tuple[int, ...], Advisory]:
    with open(path, 'rb') as f:
        raw = f.read(HEADER_SIZE)
    return _parse_header(raw)[1:]


def _parse_header(raw: bytes):
    if len(raw) < len(MAGIC) or raw[:len(MAGIC)] != MAGIC:
        raise BadMagicError('not an advisory table file')
    if len(raw) < HEADER_SIZE:
        raise TruncatedPayloadError('truncated header')
    magic, version, *rest = _HEADER.unpack(raw[:HEADER_SIZE])
    if version != VERSION:
        raise VersionMismatchError(f'table format version {version}, expected {VERSION}')
    cards, code = tuple(rest[:6]), rest[6]
    if code >= len(Advisory):
        raise InvalidEntryError(f'a_prev byte {code} outside 0..4')
    return version, cards, Advisory(code)


def read_table(path, grid: QuantizationGrid | None = None) -> AdvisoryTable:
    """Load a table; without `grid`, a linear default grid of the stored size is used."""
    raw = Path(path).read_bytes()
    _, cards, a_prev = _parse_header(raw)
    if grid is None:
        grid = QuantizationGrid.linear(cards)
    elif grid.cardinalities != cards:
        raise GridMismatchError(f'file cardinalities {cards} differ from grid {grid.cardinalities}')
    n = math.prod(cards)
    payload = np.frombuffer(raw, dtype=np.uint8, offset=HEADER_SIZE)
    if payload.size < n:
        raise TruncatedPayloadError(f'payload holds {payload.size} of {n} entries')
    if payload.size > n:
        raise TableFormatError(f'{payload.size - n} trailing bytes after payload')
    bad = np.nonzero(payload >= len(Advisory))[0]
    if bad.size:
        raise InvalidEntryError(f'entry byte {payload[bad[0]]} at offset {bad[0]} outside 0..4')
    return AdvisoryTable(grid, a_prev, payload.copy())

