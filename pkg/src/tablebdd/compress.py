"""Compress an advisory table into a single-root, selector-guarded diagram.

Pipeline: one root per advisory (chunked construction), partition proof,
elimination of the largest root by complementation, assembly under two
frozen selector variables, and a final sift.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from tablebdd.bdd import FALSE, Manager
from tablebdd.codec import (
    DIMS, SELECTORS, Advisory, BitLayout, QuantizationGrid,
    domain_validity, gray_codes, mux_rows, state_to_cube)
from tablebdd.reorder import ReorderReport, sift
from tablebdd.table import DEFAULT_CHUNK_SIZE, AdvisoryTable, stream_chunks

logger = logging.getLogger(__name__)

PATTERNS = ((1, 1), (0, 1), (1, 0), (0, 0))
# selector convention for the table with previous advisory SR
SR_SELECTORS = {
    Advisory.COC: (1, 1), Advisory.SL: (0, 1),
    Advisory.WR: (1, 0), Advisory.SR: (0, 0)}
REORDER_POLICIES = ('none', 'final', 'auto')
# sifting is not worth triggering below this many live nodes
REORDER_START = 1000


class CompressionError(Exception):
    pass


class TableGridMismatchError(CompressionError):
    pass


class PartitionNotVerifiedError(CompressionError):
    pass


class DuplicateSelectorError(CompressionError):
    pass


class PartitionFailure(CompressionError):
    def __init__(self, report):
        super().__init__(f'partition check failed: {report.failures()}')
        self.report = report


@dataclass
class AdvisoryRoots:
    manager: Manager
    roots: dict[Advisory, int]
    domain: int
    grid: QuantizationGrid
    a_prev: Advisory
    layout: BitLayout = field(default_factory=BitLayout)
    chunks: int = 0
    reorder_reports: list[ReorderReport] = field(default_factory=list)
    partition_verified: bool = False

    def __getitem__(self, a) -> int:
        return self.roots[Advisory(a)]

    def node_counts(self) -> dict[Advisory, int]:
        return {a: self.manager.node_count(u) for a, u in self.roots.items()}


@dataclass
class GlobalRoot:
    manager: Manager
    root: int
    selector_map: dict[Advisory, tuple[int, int]]
    eliminated: Advisory
    domain: int
    grid: QuantizationGrid
    a_prev: Advisory
    layout: BitLayout = field(default_factory=BitLayout)

    @property
    def kept_order(self) -> list[Advisory]:
        return list(self.selector_map)

    def region(self, a: Advisory) -> int:
        """States for which the diagram issues `a`."""
        m = self.manager
        a = Advisory(a)
        if a == self.eliminated:
            return m.apply_and(m.negate(m.disjoin(self.kept_roots().values())), self.domain)
        return self.kept_root(a)

    def kept_root(self, a: Advisory) -> int:
        v1, v0 = self.selector_map[Advisory(a)]
        return self.manager.restrict_many(self.root, {'bdd1': v1, 'bdd0': v0})

    def kept_roots(self) -> dict[Advisory, int]:
        return {a: self.kept_root(a) for a in self.selector_map}


# ----------------------------------------------------------------------
# construction

def _range_blocks(cards, start, end):
    """Split the row-major range ``[start, end)`` into aligned blocks.

    Each block is ``(prefix, d, i, j)``: dimensions before `d` fixed to
    `prefix`, dimension `d` ranging over ``i..j``, later dimensions free.
    Blocks come out in ascending offset order.
    """
    size = [math.prod(cards[d:]) for d in range(len(cards) + 1)]
    blocks = []

    def rec(prefix, d, lo, hi):
        sub = size[d + 1]
        first, last = lo // sub, (hi - 1) // sub
        if first == last:
            s, e = lo - first * sub, hi - first * sub
            if s == 0 and e == sub:
                blocks.append((prefix, d, first, first))
            else:
                rec(prefix + (first,), d + 1, s, e)
            return
        i, j = first, last
        if lo - first * sub:
            rec(prefix + (first,), d + 1, lo - first * sub, sub)
            i = first + 1
        tail = hi - last * sub
        if tail != sub:
            j = last - 1
        if i <= j:
            blocks.append((prefix, d, i, j))
        if tail != sub:
            rec(prefix + (last,), d + 1, 0, tail)

    if start < end:
        rec((), 0, start, end)
    return blocks


def _unique_rows(rows: np.ndarray, binary: bool):
    if binary and rows.shape[1] < 63:
        keys = np.zeros(len(rows), dtype=np.int64)
        for j in range(rows.shape[1]):
            keys |= rows[:, j].astype(np.int64) << j
        ukeys, first, inv = np.unique(keys, return_index=True, return_inverse=True)
        return rows[first].astype(np.int64), inv.ravel()
    uniq, inv = np.unique(rows, axis=0, return_inverse=True)
    return uniq.astype(np.int64), inv.ravel()


def _rows_to_nodes(m, layout, d, rows, indices, binary=False):
    """Node per row, where column k of a row is the function at index ``indices[k]``."""
    uniq, inv = _unique_rows(rows, binary)
    w = layout.widths[d]
    leaves = np.zeros((len(uniq), 1 << w), dtype=np.int64)
    leaves[:, gray_codes(np.asarray(indices))] = uniq
    nodes = mux_rows(m, layout.dim_vars(d), leaves)
    return nodes[inv]


def dense_to_node(m: Manager, layout: BitLayout, mask: np.ndarray, d: int = 0, first_index: int = 0) -> int:
    """Diagram of a Boolean array over dimensions ``d ..`` of the layout.

    Axis 0 of `mask` covers indices ``first_index ..`` of dimension `d`;
    the remaining axes cover later dimensions in full. Unused codes and
    indices outside the covered range map to FALSE.
    """
    cur = np.asarray(mask)
    binary = True
    for e in range(len(DIMS) - 1, d, -1):
        rows = cur.reshape(-1, cur.shape[-1])
        cur = _rows_to_nodes(m, layout, e, rows, np.arange(rows.shape[1]), binary).reshape(cur.shape[:-1])
        binary = False
    idx = np.arange(first_index, first_index + cur.shape[0])
    return int(_rows_to_nodes(m, layout, d, cur.reshape(1, -1), idx, binary)[0])


def _prefix_guard(m, layout, prefix, u):
    """Conjoin `u` with the cube fixing the leading dimensions to `prefix`."""
    for d in reversed(range(len(prefix))):
        g = int(gray_codes(prefix[d]))
        w = layout.widths[d]
        for k, v in reversed(list(enumerate(layout.dim_vars(d)))):
            if (g >> (w - 1 - k)) & 1:
                u = m.compose_var(v, u, FALSE)
            else:
                u = m.compose_var(v, FALSE, u)
    return u


def chunk_nodes(m: Manager, layout: BitLayout, grid: QuantizationGrid, start: int,
                entries: np.ndarray, method: str = 'blocks') -> dict[Advisory, int]:
    """Temporary per-advisory diagrams for the states ``start .. start + len(entries)``."""
    cards = grid.cardinalities
    if method == 'cubes':
        cubes: dict[Advisory, list[int]] = {a: [] for a in Advisory}
        for k, code in enumerate(entries.tolist()):
            s = grid.state_at(start + k)
            cubes[Advisory(code)].append(state_to_cube(m, layout, s))
        return {a: m.disjoin(us) for a, us in cubes.items()}
    if method != 'blocks':
        raise ValueError(f'unknown construction method {method!r}')
    parts: dict[Advisory, list[int]] = {a: [] for a in Advisory}
    pos = 0
    for prefix, d, i, j in _range_blocks(cards, start, start + len(entries)):
        n = (j - i + 1) * math.prod(cards[d + 1:])
        block = entries[pos:pos + n].reshape((j - i + 1,) + tuple(cards[d + 1:]))
        pos += n
        present = np.unique(block)
        for code in present.tolist():
            u = dense_to_node(m, layout, block == code, d, i)
            parts[Advisory(code)].append(_prefix_guard(m, layout, prefix, u))
    return {a: m.disjoin(us) for a, us in parts.items()}


def _check_layout(m: Manager, layout: BitLayout, t: AdvisoryTable):
    if m.var_names != layout.names:
        raise TableGridMismatchError('manager variables do not match the bit layout')
    for d, c, w in zip(DIMS, t.grid.cardinalities, layout.widths):
        if c > 1 << w:
            raise TableGridMismatchError(f'{d}: {c} grid values exceed {w} bits')


def build_roots(m: Manager, t: AdvisoryTable, chunk_size: int = DEFAULT_CHUNK_SIZE,
                reorder_policy: str = 'auto', layout: BitLayout | None = None,
                method: str = 'blocks') -> AdvisoryRoots:
    """One root per advisory, built chunk by chunk.

    Each chunk yields a temporary diagram per advisory which is then
    disjoined into that advisory's root. With ``reorder_policy='auto'``
    the manager is sifted whenever it doubles past its size at the last
    sift, and once at the end; ``'final'`` only sifts at the end.

    All roots and the domain-validity function stay registered.
    """
    layout = layout or BitLayout()
    if reorder_policy not in REORDER_POLICIES:
        raise ValueError(f'unknown reorder policy {reorder_policy!r}')
    _check_layout(m, layout, t)
    domain = domain_validity(m, layout, t.grid)
    m.incref(domain)
    roots = {a: FALSE for a in Advisory}
    result = AdvisoryRoots(m, roots, domain, t.grid, t.a_prev, layout)
    last = REORDER_START
    for chunk in stream_chunks(t, chunk_size):
        temp = chunk_nodes(m, layout, t.grid, chunk.start_offset, chunk.entries, method)
        for a in Advisory:
            new = m.apply_or(roots[a], temp[a])
            m.incref(new)
            m.decref(roots[a])
            roots[a] = new
        m.clear_cache()
        result.chunks += 1
        if reorder_policy == 'auto' and len(m) > 2 * last:
            report = sift(m)
            result.reorder_reports.append(report)
            last = max(report.nodes_after, REORDER_START)
    if reorder_policy != 'none':
        result.reorder_reports.append(sift(m))
    logger.info(f'built roots over {result.chunks} chunks: {result.node_counts()}')
    return result


# ----------------------------------------------------------------------
# partition

@dataclass
class PartitionCheck:
    name: str
    ok: bool
    witness: tuple[int, ...] | None = None

    def to_dict(self):
        return {'check': self.name, 'ok': self.ok, 'witness': self.witness}


@dataclass
class PartitionReport:
    mode: str
    pairwise: list[PartitionCheck]
    coverage: PartitionCheck

    @property
    def ok(self) -> bool:
        return self.coverage.ok and all(c.ok for c in self.pairwise)

    def failures(self) -> list[PartitionCheck]:
        return [c for c in self.pairwise + [self.coverage] if not c.ok]

    def to_dict(self):
        return {
            'mode': self.mode, 'ok': self.ok,
            'pairwise': [c.to_dict() for c in self.pairwise],
            'coverage': self.coverage.to_dict()}


def _witness(m, layout, u):
    a = m.pick_sat(u)
    return None if a is None else layout.bits_to_state(a)


def check_partition(m: Manager, r: AdvisoryRoots, mode: str = 'valid') -> PartitionReport:
    """Pairwise disjointness and coverage of the five roots.

    In ``valid`` mode coverage is required on valid Gray codes only; in
    ``all`` mode on every bit pattern. Failures carry a decoded witness,
    which may lie outside the grid in ``all`` mode.
    """
    if mode not in ('valid', 'all'):
        raise ValueError(f'unknown coverage mode {mode!r}')
    pairwise = []
    advs = list(Advisory)
    for k, a in enumerate(advs):
        for b in advs[k + 1:]:
            both = m.apply_and(r[a], r[b])
            pairwise.append(PartitionCheck(
                f'{a.name} & {b.name}', both == FALSE, _witness(m, r.layout, both)))
    union = m.disjoin(r.roots.values())
    missing = m.negate(union)
    if mode == 'valid':
        missing = m.apply_and(missing, r.domain)
    coverage = PartitionCheck(f'coverage ({mode})', missing == FALSE, _witness(m, r.layout, missing))
    report = PartitionReport(mode, pairwise, coverage)
    if report.ok:
        r.partition_verified = True
    return report


# ----------------------------------------------------------------------
# elimination and assembly

def reconstruct(m: Manager, kept, domain: int) -> int:
    """The implicit root: valid states covered by none of the kept roots."""
    return m.apply_and(m.negate(m.disjoin(kept)), domain)


def eliminate_largest(m: Manager, r: AdvisoryRoots) -> tuple[dict[Advisory, int], Advisory]:
    """Drop the root with the most nodes; ties go to the earliest advisory."""
    if not r.partition_verified:
        raise PartitionNotVerifiedError('check_partition must pass before elimination')
    counts = r.node_counts()
    eliminated = max(Advisory, key=lambda a: (counts[a], -int(a)))
    kept = {a: u for a, u in r.roots.items() if a != eliminated}
    if reconstruct(m, kept.values(), r.domain) != r.roots[eliminated]:
        raise CompressionError(f'complement of the kept roots differs from {eliminated.name}')
    return kept, eliminated


def default_selector_map(kept, a_prev: Advisory) -> dict[Advisory, tuple[int, int]]:
    kept = sorted(Advisory(a) for a in kept)
    if a_prev == Advisory.SR and set(kept) == set(SR_SELECTORS):
        return {a: SR_SELECTORS[a] for a in kept}
    return dict(zip(kept, PATTERNS))


def assemble_global(m: Manager, r: AdvisoryRoots, kept: dict[Advisory, int],
                    eliminated: Advisory, selector_map=None) -> GlobalRoot:
    """OR of ``selector_cube(a) & root(a)`` over the kept advisories."""
    if selector_map is None:
        selector_map = default_selector_map(kept, r.a_prev)
    selector_map = {Advisory(a): tuple(int(b) for b in p) for a, p in selector_map.items()}
    if set(selector_map) != set(kept):
        raise CompressionError('selector map must cover exactly the kept advisories')
    if len(set(selector_map.values())) != len(selector_map):
        raise DuplicateSelectorError(f'duplicate selector patterns in {selector_map}')
    if m.order[:2] != list(SELECTORS) or m.frozen < 2:
        raise CompressionError('selectors must be frozen on the two top levels')
    guarded = [
        m.apply_and(m.cube({'bdd1': v1, 'bdd0': v0}), kept[a])
        for a, (v1, v0) in selector_map.items()]
    root = m.disjoin(guarded)
    m.incref(root)
    return GlobalRoot(m, root, selector_map, Advisory(eliminated), r.domain, r.grid, r.a_prev, r.layout)


def classify(g: GlobalRoot, s, kept_order=None) -> Advisory:
    """Advisory issued for state `s`: first kept predicate that holds, else the eliminated one."""
    s = g.grid.check_state(s)
    m = g.manager
    for a in kept_order or g.kept_order:
        bits = g.layout.state_bits(s, g.selector_map[a])
        if m.eval(g.root, bits):
            return a
    return g.eliminated


def classify_many(g: GlobalRoot, states: np.ndarray) -> np.ndarray:
    """Vectorized `classify` over an ``(n, 6)`` array of valid states."""
    states = np.asarray(states)
    out = np.full(len(states), int(g.eliminated), dtype=np.uint8)
    bits = g.layout.states_to_bits(states)
    decided = np.zeros(len(states), dtype=bool)
    for a, (v1, v0) in g.selector_map.items():
        bits[:, 0], bits[:, 1] = v1, v0
        hit = g.manager.eval_many(g.root, bits) & ~decided
        out[hit] = int(a)
        decided |= hit
    return out


# ----------------------------------------------------------------------
# whole pipeline

@dataclass
class BuildReport:
    a_prev: Advisory
    grid_fingerprint: str
    cardinalities: tuple[int, ...]
    chunks: int
    root_nodes: dict[str, int]
    partition: dict
    eliminated: str
    selector_map: dict[str, list[int]]
    build_reorders: list[dict]
    global_nodes_before_sift: int
    global_nodes_after_sift: int
    final_reorder: dict | None
    variable_order: list[str]

    def to_dict(self) -> dict:
        return {
            'a_prev': self.a_prev.name,
            'grid_fingerprint': self.grid_fingerprint,
            'cardinalities': list(self.cardinalities),
            'chunks': self.chunks,
            'root_nodes': self.root_nodes,
            'partition': self.partition,
            'eliminated': self.eliminated,
            'selector_map': self.selector_map,
            'build_reorders': self.build_reorders,
            'global_nodes_before_sift': self.global_nodes_before_sift,
            'global_nodes_after_sift': self.global_nodes_after_sift,
            'final_reorder': self.final_reorder,
            'variable_order': self.variable_order,
        }


def compress(t: AdvisoryTable, chunk_size: int = DEFAULT_CHUNK_SIZE, reorder_policy: str = 'auto',
             coverage: str = 'valid', final_sift: bool = True, method: str = 'blocks',
             manager: Manager | None = None) -> tuple[GlobalRoot, BuildReport]:
    """Table to deployable diagram; raises `PartitionFailure` with witnesses."""
    layout = BitLayout()
    m = manager or layout.new_manager()
    roots = build_roots(m, t, chunk_size, reorder_policy, layout, method)
    counts = roots.node_counts()
    partition = check_partition(m, roots, coverage)
    if not partition.ok:
        raise PartitionFailure(partition)
    kept, eliminated = eliminate_largest(m, roots)
    g = assemble_global(m, roots, kept, eliminated)
    m.decref(roots[eliminated])
    before = m.node_count(g.root)
    final = None
    if final_sift and reorder_policy != 'none':
        final = sift(m, [g.root]).to_dict()
    report = BuildReport(
        a_prev=t.a_prev,
        grid_fingerprint=t.grid.fingerprint(),
        cardinalities=t.grid.cardinalities,
        chunks=roots.chunks,
        root_nodes={a.name: n for a, n in counts.items()},
        partition=partition.to_dict(),
        eliminated=eliminated.name,
        selector_map={a.name: list(p) for a, p in g.selector_map.items()},
        build_reorders=[r.to_dict() for r in roots.reorder_reports],
        global_nodes_before_sift=before,
        global_nodes_after_sift=m.node_count(g.root),
        final_reorder=final,
        variable_order=m.order)
    return g, report

