"""Discrete encounter state space and its Gray-coded Boolean embedding.

Six dimensions, each quantized on a grid of breakpoints. A state is a
tuple of grid indices; each index is Gray-encoded on a fixed number of
bits, most significant bit first. Two selector bits sit above the 30
state bits in the initial variable order.
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from tablebdd.bdd import TRUE, Manager
from tablebdd.reorder import freeze

DIMS = ('tau', 'rho', 'theta', 'psi', 'v_own', 'v_int')
CARDINALITIES = (10, 41, 39, 39, 12, 12)
WIDTHS = (4, 6, 6, 6, 4, 4)
UNITS = ('s', 'ft', 'rad', 'rad', 'ft/s', 'ft/s')
# synthetic defaults, inclusive ranges for linear grids
DEFAULT_RANGES = (
    (0.0, 100.0),
    (0.0, 62000.0),
    (-math.pi, math.pi),
    (-math.pi, math.pi),
    (60.0, 1200.0),
    (60.0, 1200.0),
)
SELECTORS = ('bdd1', 'bdd0')
_BIT_PREFIX = ('tau', 'rho', 'theta', 'psi', 'vown', 'vint')


class Advisory(enum.IntEnum):
    COC = 0
    WL = 1
    WR = 2
    SL = 3
    SR = 4


class GridError(ValueError):
    pass


class StateIndex(NamedTuple):
    tau: int
    rho: int
    theta: int
    psi: int
    v_own: int
    v_int: int


def dim_index(d: str | int) -> int:
    if isinstance(d, str):
        try:
            return DIMS.index(d)
        except ValueError:
            raise GridError(f'unknown dimension {d!r}') from None
    if not 0 <= d < len(DIMS):
        raise GridError(f'unknown dimension {d!r}')
    return d


# ----------------------------------------------------------------------
# Gray code

def gray_encode(i: int, width: int) -> tuple[int, ...]:
    """Reflected-binary Gray code of `i`, MSB first, `width` bits."""
    if not 0 <= i < 1 << width:
        raise ValueError(f'index {i} does not fit in {width} bits')
    g = i ^ (i >> 1)
    return tuple((g >> (width - 1 - k)) & 1 for k in range(width))


def gray_decode(bits) -> int:
    i = 0
    acc = 0
    for b in bits:
        acc ^= int(b)
        i = (i << 1) | acc
    return i


def gray_codes(indices: np.ndarray) -> np.ndarray:
    indices = np.asarray(indices)
    return indices ^ (indices >> 1)


def gray_decode_int(g: np.ndarray | int, width: int):
    """Inverse of ``i ^ (i >> 1)`` on integers."""
    i = g
    shift = 1
    while shift < width:
        i = i ^ (i >> shift)
        shift <<= 1
    return i


# ----------------------------------------------------------------------
# quantization grid

@dataclass(frozen=True, eq=False)
class QuantizationGrid:
    """Per-dimension breakpoints, strictly increasing."""

    breakpoints: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.breakpoints) != len(DIMS):
            raise GridError(f'expected {len(DIMS)} dimensions')
        for d, bp in zip(DIMS, self.breakpoints):
            bp.setflags(write=False)
            if bp.ndim != 1 or len(bp) == 0:
                raise GridError(f'{d}: empty grid')
            if np.any(np.diff(bp) <= 0):
                raise GridError(f'{d}: breakpoints must be strictly increasing')
        for d, c, w in zip(DIMS, self.cardinalities, WIDTHS):
            if c > 1 << w:
                raise GridError(f'{d}: {c} values do not fit in {w} bits')

    @classmethod
    def from_lists(cls, values) -> QuantizationGrid:
        return cls(tuple(np.asarray(v, dtype=np.float64) for v in values))

    @classmethod
    def linear(cls, cardinalities=CARDINALITIES, ranges=DEFAULT_RANGES) -> QuantizationGrid:
        """Evenly spaced grid over each range, endpoints included."""
        return cls(tuple(
            np.linspace(lo, hi, c) if c > 1 else np.array([lo])
            for c, (lo, hi) in zip(cardinalities, ranges)))

    @classmethod
    def default(cls) -> QuantizationGrid:
        return cls.linear()

    @classmethod
    def from_config(cls, source, relaxed: bool = False) -> QuantizationGrid:
        """Load a grid from a JSON config (path or already-parsed dict).

        Each dimension maps to either ``{"breakpoints": [...]}`` or
        ``{"min": lo, "max": hi, "count": n}``; missing dimensions take
        the default grid. Cardinalities must match the full-size grid
        unless `relaxed`.
        """
        if isinstance(source, (str, Path)):
            config = json.loads(Path(source).read_text())
        else:
            config = dict(source)
        unknown = set(config) - set(DIMS)
        if unknown:
            raise GridError(f'unknown dimensions in grid config: {sorted(unknown)}')
        values = []
        for d, c, (lo, hi) in zip(DIMS, CARDINALITIES, DEFAULT_RANGES):
            spec = config.get(d, {'min': lo, 'max': hi, 'count': c})
            if 'breakpoints' in spec:
                values.append(spec['breakpoints'])
            else:
                n = int(spec['count'])
                values.append(np.linspace(spec['min'], spec['max'], n) if n > 1 else [spec['min']])
        grid = cls.from_lists(values)
        if not relaxed:
            grid.validate_full_size()
        return grid

    def to_config(self) -> dict:
        return {d: {'breakpoints': bp.tolist()} for d, bp in zip(DIMS, self.breakpoints)}

    def validate_full_size(self):
        if self.cardinalities != CARDINALITIES:
            raise GridError(
                f'grid cardinalities {self.cardinalities} differ from {CARDINALITIES}'
                ' (use a relaxed grid for reduced tables)')

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(len(bp) for bp in self.breakpoints)

    @property
    def n_states(self) -> int:
        return math.prod(self.cardinalities)

    def values(self, d) -> np.ndarray:
        return self.breakpoints[dim_index(d)]

    def physical(self, s: StateIndex) -> dict[str, float]:
        return {d: float(bp[i]) for d, bp, i in zip(DIMS, self.breakpoints, s)}

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for bp in self.breakpoints:
            h.update(len(bp).to_bytes(4, 'little'))
            h.update(np.ascontiguousarray(bp, dtype='<f8').tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, QuantizationGrid):
            return NotImplemented
        return self.cardinalities == other.cardinalities and all(
            np.array_equal(a, b) for a, b in zip(self.breakpoints, other.breakpoints))

    def check_state(self, s) -> StateIndex:
        s = StateIndex(*(int(i) for i in s))
        for d, c, i in zip(DIMS, self.cardinalities, s):
            if not 0 <= i < c:
                raise GridError(f'{d} index {i} outside [0, {c})')
        return s

    def offset(self, s) -> int:
        """Row-major offset of a state, dimensions in `DIMS` order."""
        s = self.check_state(s)
        return int(np.ravel_multi_index(s, self.cardinalities))

    def state_at(self, offset: int) -> StateIndex:
        return StateIndex(*(int(i) for i in np.unravel_index(offset, self.cardinalities)))


def value_bounds_to_index_set(grid: QuantizationGrid, d, lo: float, hi: float) -> list[int]:
    """Indices whose breakpoint lies in the closed interval ``[lo, hi]``."""
    if lo > hi:
        raise ValueError(f'empty interval [{lo}, {hi}]')
    bp = grid.values(d)
    return [int(i) for i in np.nonzero((bp >= lo) & (bp <= hi))[0]]


# ----------------------------------------------------------------------
# bit layout

@dataclass(frozen=True)
class BitLayout:
    """Variable ids for the selector and state bits.

    Variable ids follow the initial order: ``bdd1, bdd0``, then each
    dimension MSB first.
    """

    widths: tuple[int, ...] = WIDTHS

    @property
    def n_vars(self) -> int:
        return len(SELECTORS) + sum(self.widths)

    @property
    def names(self) -> list[str]:
        names = list(SELECTORS)
        for prefix, w in zip(_BIT_PREFIX, self.widths):
            names.extend(f'{prefix}{k}' for k in range(w))
        return names

    @property
    def selector_vars(self) -> tuple[int, int]:
        return (0, 1)

    def dim_vars(self, d) -> list[int]:
        d = dim_index(d)
        start = len(SELECTORS) + sum(self.widths[:d])
        return list(range(start, start + self.widths[d]))

    def state_vars(self) -> list[int]:
        return list(range(len(SELECTORS), self.n_vars))

    def new_manager(self) -> Manager:
        """Manager with all layout variables declared and selectors frozen on top."""
        m = Manager(self.names)
        freeze(m, list(SELECTORS))
        return m

    def state_bits(self, s, selector=(0, 0)) -> list[int]:
        """Full assignment, indexed by variable id."""
        bits = list(selector)
        for i, w in zip(s, self.widths):
            bits.extend(gray_encode(int(i), w))
        return bits

    def states_to_bits(self, states: np.ndarray, selector=(0, 0)) -> np.ndarray:
        """Vectorized `state_bits` for an ``(n, 6)`` index array."""
        states = np.asarray(states, dtype=np.int64)
        out = np.empty((len(states), self.n_vars), dtype=np.uint8)
        out[:, 0], out[:, 1] = selector
        col = len(SELECTORS)
        for d, w in enumerate(self.widths):
            g = gray_codes(states[:, d])
            for k in range(w):
                out[:, col + k] = (g >> (w - 1 - k)) & 1
            col += w
        return out

    def bits_to_state(self, assignment) -> tuple[int, ...]:
        """Decode the state indices from an assignment (mapping or sequence)."""
        return tuple(
            gray_decode(int(bool(assignment[v])) for v in self.dim_vars(d))
            for d in range(len(DIMS)))


def dim_cube(m: Manager, layout: BitLayout, d, i: int) -> int:
    """Cube fixing the bits of dimension `d` to the Gray code of index `i`."""
    d = dim_index(d)
    bits = gray_encode(i, layout.widths[d])
    return m.cube(dict(zip(layout.dim_vars(d), bits)))


def state_to_cube(m: Manager, layout: BitLayout, s, grid: QuantizationGrid | None = None) -> int:
    """Conjunction of the 30 state-bit literals of `s`."""
    if grid is not None:
        s = grid.check_state(s)
    lits = {}
    for d, (i, w) in enumerate(zip(s, layout.widths)):
        lits.update(zip(layout.dim_vars(d), gray_encode(int(i), w)))
    return m.cube(lits)


def dim_index_set(m: Manager, layout: BitLayout, d, indices) -> int:
    """Disjunction of the dimension cubes of `indices`."""
    d = dim_index(d)
    w = layout.widths[d]
    leaves = np.zeros(1 << w, dtype=np.int64)
    for i in indices:
        leaves[gray_codes(int(i))] = TRUE
    return mux_rows(m, layout.dim_vars(d), leaves[None, :])[0]


def mux_rows(m: Manager, dvars: list[int], leaves: np.ndarray) -> np.ndarray:
    """Build one diagram per row of `leaves` over the bits `dvars`.

    Column ``g`` of a row is the function selected when the bits, read
    MSB first, spell the integer ``g``. Rows are reduced pairwise from the
    least significant bit up, so identical sub-muxes are shared.
    """
    cur = np.asarray(leaves, dtype=np.int64)
    for v in reversed(dvars):
        hi = cur[:, 1::2]
        lo = cur[:, 0::2]
        out = hi.copy()
        diff = hi != lo
        if diff.any():
            pairs = np.stack([hi[diff], lo[diff]], axis=1)
            uniq, inv = np.unique(pairs, axis=0, return_inverse=True)
            compose = m.compose_var
            made = np.fromiter(
                (compose(v, int(h), int(l)) for h, l in uniq),
                dtype=np.int64, count=len(uniq))
            out[diff] = made[inv.ravel()]
        cur = out
    return cur[:, 0]


def dim_valid(m: Manager, layout: BitLayout, d, cardinality: int) -> int:
    """Predicate "the bits of `d` encode an index below `cardinality`"."""
    return dim_index_set(m, layout, d, range(cardinality))


def domain_validity(m: Manager, layout: BitLayout, grid: QuantizationGrid) -> int:
    """States whose every dimension carries a valid Gray code."""
    u = TRUE
    for d in reversed(range(len(DIMS))):
        u = m.apply_and(dim_valid(m, layout, d, grid.cardinalities[d]), u)
    return u


def code_table(width: int, cardinality: int) -> np.ndarray:
    """Index decoded from each code ``0 .. 2**width - 1``; -1 for unused codes."""
    codes = np.arange(1 << width)
    idx = gray_decode_int(codes, width)
    return np.where(idx < cardinality, idx, -1)

