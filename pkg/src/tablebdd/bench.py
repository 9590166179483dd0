"""Per-query latency measurement over a stream of random states.

Three backends answer the same queries: the in-process diagram
(``bdd-eval``), the dense table (``table-lookup``) and the compiled
emitted evaluator (``emitted-evaluator``). Each query is timed on its own
with a monotonic clock; reports give min, max and mean in microseconds.
The table is fully loaded in memory before timing starts.
"""
from __future__ import annotations

import ctypes
import hashlib
import platform
import subprocess
import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from tablebdd.codec import QuantizationGrid, gray_encode
from tablebdd.compress import GlobalRoot
from tablebdd.emit import CompiledEvaluator, emit_evaluator, find_compiler
from tablebdd.table import AdvisoryTable

BACKENDS = ('bdd-eval', 'table-lookup', 'emitted-evaluator')
DEFAULT_QUERIES = 10_000_000
_BLOCK = 1 << 20


class BenchError(RuntimeError):
    pass


@dataclass
class BenchReport:
    backend: str
    n_queries: int
    seed: int
    t_min_us: float
    t_max_us: float
    t_mean_us: float
    advisories_sha256: str
    agreement_with_table: bool | None
    platform: str

    def __post_init__(self):
        if self.n_queries < 1:
            raise ValueError('a benchmark needs at least one query')

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ('t_min_us', 't_max_us', 't_mean_us'):
            d[k] = round(d[k], 3)
        return d

    def text(self) -> str:
        agree = {None: 'not checked', True: 'yes', False: 'NO'}[self.agreement_with_table]
        return (
            f'backend {self.backend}: {self.n_queries} queries, seed {self.seed}\n'
            f'  t_min  {self.t_min_us:.3f} us\n'
            f'  t_max  {self.t_max_us:.3f} us\n'
            f'  t_mean {self.t_mean_us:.3f} us\n'
            f'  agrees with table: {agree}\n'
            f'  platform: {self.platform}\n')


def platform_note() -> str:
    return f'{platform.machine()} {platform.system()} python {platform.python_version()}'


def query_stream(grid: QuantizationGrid, n: int, seed: int) -> np.ndarray:
    """``(n, 6)`` valid state indices, uniform per dimension.

    Drawn in fixed-size blocks, so a shorter stream is a prefix of a
    longer one with the same seed.
    """
    if n < 1:
        raise ValueError('n must be at least 1')
    rng = np.random.default_rng(seed)
    high = np.array(grid.cardinalities, dtype=np.int64)
    out = np.empty((n, len(high)), dtype=np.intc)
    for start in range(0, n, _BLOCK):
        k = min(_BLOCK, n - start)
        block = rng.integers(0, high, size=(_BLOCK, len(high)), dtype=np.int64)
        out[start:start + k] = block[:k]
    return out


def _digest(advisories: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(advisories, dtype=np.uint8).tobytes()).hexdigest()


# ----------------------------------------------------------------------
# backends

def diagram_walker(g: GlobalRoot):
    """Plain-Python classifier over a frozen diagram, for per-query timing.

    Same semantics as `classify`: Gray-encode the state, walk the root
    once per kept selector pattern, fall back to the eliminated advisory.
    """
    m = g.manager
    var, hi, lo = (a.tolist() for a in m.arrays())
    layout = g.layout
    # bits of variable v for dimension index i, per dimension
    codes = []
    for d, c in enumerate(g.grid.cardinalities):
        dvars = layout.dim_vars(d)
        codes.append([dict(zip(dvars, gray_encode(i, len(dvars)))) for i in range(c)])
    tests = [(a, {0: v1, 1: v0}) for a, (v1, v0) in g.selector_map.items()]
    root, eliminated = g.root, int(g.eliminated)

    def walk(s):
        bits = {}
        for table, i in zip(codes, s):
            bits.update(table[i])
        for a, sel in tests:
            bits.update(sel)
            u = root
            while u > 1:
                u = hi[u] if bits[var[u]] else lo[u]
            if u:
                return int(a)
        return eliminated

    return walk


def time_bdd_eval(g: GlobalRoot, states: np.ndarray):
    walk = diagram_walker(g)
    out = np.empty(len(states), dtype=np.uint8)
    t_min, t_max, total = float('inf'), 0.0, 0
    clock = time.perf_counter_ns
    for k, s in enumerate(states.tolist()):
        t0 = clock()
        a = walk(s)
        dt = clock() - t0
        out[k] = a
        total += dt
        if dt < t_min:
            t_min = dt
        if dt > t_max:
            t_max = dt
    return out, t_min / 1e3, t_max / 1e3, total / 1e3 / len(states)


_TABLE_SOURCE = r'''
#define _POSIX_C_SOURCE 199309L
#include <time.h>

static double now_us(void)
{
    struct timespec t;
    clock_gettime(CLOCK_MONOTONIC, &t);
    return t.tv_sec * 1e6 + t.tv_nsec / 1e3;
}

void table_bench(const unsigned char *table, const int *cards, const int *states,
                 long n, unsigned char *out, double *stats)
{
    long k, off;
    int d;
    double t0, dt;
    stats[0] = 1e300;
    stats[1] = 0.0;
    stats[2] = 0.0;
    for (k = 0; k < n; k++) {
        t0 = now_us();
        off = 0;
        for (d = 0; d < 6; d++)
            off = off * cards[d] + states[6 * k + d];
        out[k] = table[off];
        dt = now_us() - t0;
        if (dt < stats[0]) stats[0] = dt;
        if (dt > stats[1]) stats[1] = dt;
        stats[2] += dt;
    }
}
'''


class _TableTimer:
    def __init__(self):
        cc = find_compiler()
        if cc is None:
            raise BenchError('no C compiler for the table-lookup timing loop')
        self._tmp = tempfile.TemporaryDirectory(prefix='tablebdd-bench-')
        src = Path(self._tmp.name) / 'table.c'
        lib = Path(self._tmp.name) / 'table.so'
        src.write_text(_TABLE_SOURCE)
        done = subprocess.run(
            [cc, '-O1', '-std=c89', '-shared', '-fPIC', '-o', str(lib), str(src)],
            capture_output=True, text=True)
        if done.returncode:
            raise BenchError(f'compilation failed:\n{done.stderr}')
        self._lib = ctypes.CDLL(str(lib))
        self._lib.table_bench.argtypes = [ctypes.c_void_p] * 3 + [ctypes.c_long] + [ctypes.c_void_p] * 2

    def run(self, t: AdvisoryTable, states: np.ndarray):
        states = np.ascontiguousarray(states, dtype=np.intc)
        cards = np.array(t.grid.cardinalities, dtype=np.intc)
        out = np.empty(len(states), dtype=np.uint8)
        stats = np.zeros(3)
        self._lib.table_bench(
            t.entries.ctypes.data, cards.ctypes.data, states.ctypes.data,
            len(states), out.ctypes.data, stats.ctypes.data)
        return out, float(stats[0]), float(stats[1]), float(stats[2]) / len(states)


def time_table_lookup(t: AdvisoryTable, states: np.ndarray):
    if find_compiler() is None:
        # interpreted fallback, same protocol
        out = np.empty(len(states), dtype=np.uint8)
        t_min, t_max, total = float('inf'), 0.0, 0
        cards = t.grid.cardinalities
        entries = t.entries
        clock = time.perf_counter_ns
        for k, s in enumerate(states.tolist()):
            t0 = clock()
            off = 0
            for c, i in zip(cards, s):
                off = off * c + i
            out[k] = entries[off]
            dt = clock() - t0
            total += dt
            t_min, t_max = min(t_min, dt), max(t_max, dt)
        return out, t_min / 1e3, t_max / 1e3, total / 1e3 / len(states)
    return _TableTimer().run(t, states)


def time_emitted(g: GlobalRoot, states: np.ndarray, style: str = 'threaded'):
    if find_compiler() is None:
        raise BenchError('emitted-evaluator backend needs a C compiler')
    return CompiledEvaluator(emit_evaluator(g, style)).bench(states)


def run_bench(backend: str, n: int = DEFAULT_QUERIES, seed: int = 0,
              diagram: GlobalRoot | None = None, table: AdvisoryTable | None = None,
              style: str = 'threaded') -> tuple[BenchReport, np.ndarray]:
    """Time `backend` on `n` queries; with a `table`, also check every answer against it."""
    if backend not in BACKENDS:
        raise ValueError(f'unknown backend {backend!r}; expected one of {BACKENDS}')
    if backend == 'table-lookup':
        if table is None:
            raise BenchError('table-lookup backend needs a table')
        grid = table.grid
    else:
        if diagram is None:
            raise BenchError(f'{backend} backend needs a diagram')
        grid = diagram.grid
    if table is not None and table.grid != grid:
        raise BenchError('table and diagram grids differ')
    states = query_stream(grid, n, seed)
    if backend == 'bdd-eval':
        out, t_min, t_max, t_mean = time_bdd_eval(diagram, states)
    elif backend == 'table-lookup':
        out, t_min, t_max, t_mean = time_table_lookup(table, states)
    else:
        out, t_min, t_max, t_mean = time_emitted(diagram, states, style)
    agreement = None
    if table is not None:
        agreement = bool(np.array_equal(out, table.lookup(states)))
    # guard against clock granularity breaking the order at equal values
    t_mean = min(max(t_mean, t_min), t_max)
    report = BenchReport(backend, n, seed, t_min, t_max, t_mean, _digest(out), agreement, platform_note())
    return report, out
