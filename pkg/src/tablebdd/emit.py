"""Diagram files and standalone evaluators.

Diagram file (text, one directive per line)::

    .ver TABLEBDD-DIAGRAM 1
    .nvars 32
    .varnames bdd1 bdd0 tau0 ...          declared variables, by id
    .order bdd1 bdd0 ...                  current order, top level first
    .frozen 2
    .selectors WL:11 WR:01 SL:10 SR:00    kept advisory and bdd1/bdd0 pattern
    .eliminated COC
    .aprev SR
    .cards 10 41 39 39 12 12
    .grid tau 0.0 11.11111111111111 ...   one line per dimension
    .fingerprint <sha256 of the grid>
    .nnodes N
    .nodes
    0 F
    1 T
    2 vint3 1 0                           id, variable, then-id, else-id
    ...
    .root 57
    .end

Node ids in the file are local: 0 and 1 are the constants, internal
nodes are numbered from 2 in depth-first post-order from the root, so
children always precede parents and equal diagrams give equal files.
Files holding several named roots (per-advisory dumps) write
``.root <name> <id>`` once per root and omit the advisory directives.

References
==========

Fabio Somenzi
    "CUDD: CU Decision Diagram Package"
    (the DDDMP dump format is the model for this one)

Randal E. Bryant
    "Graph-based algorithms for Boolean function manipulation"
    IEEE Transactions on Computers, 1986
"""
from __future__ import annotations

import ctypes
import hashlib
import logging
import re
import shutil
import subprocess
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tablebdd.bdd import FALSE, TRUE, Manager
from tablebdd.codec import DIMS, Advisory, BitLayout, QuantizationGrid, domain_validity
from tablebdd.compress import GlobalRoot
from tablebdd.reorder import reorder_to

logger = logging.getLogger(__name__)

FORMAT = 'TABLEBDD-DIAGRAM'
FORMAT_VERSION = 1
DEFAULT_EMISSION_CAP = 5_000_000
STYLES = ('threaded', 'table')
ENTRY = 'tablebdd_eval'


class DiagramFormatError(ValueError):
    pass


class VersionMismatchError(DiagramFormatError):
    pass


class TruncatedDiagramError(DiagramFormatError):
    pass


class DanglingReferenceError(DiagramFormatError):
    pass


class CyclicReferenceError(DiagramFormatError):
    pass


class GridFingerprintMismatchError(DiagramFormatError):
    pass


class GridFingerprintWarning(UserWarning):
    pass


class EmissionCapError(ValueError):
    pass


# ----------------------------------------------------------------------
# node numbering

def postorder(m: Manager, roots) -> list[int]:
    """Internal nodes below `roots`, children first, then-branch before else-branch."""
    seen = {FALSE, TRUE}
    out = []
    for r in roots:
        if r in seen:
            continue
        stack = [(r, False)]
        while stack:
            u, expanded = stack.pop()
            if expanded:
                out.append(u)
                continue
            if u in seen:
                continue
            seen.add(u)
            stack.append((u, True))
            for c in (m.else_of(u), m.then_of(u)):
                if c not in seen:
                    stack.append((c, False))
    return out


def _numbering(m, roots):
    nodes = postorder(m, roots)
    local = {FALSE: 0, TRUE: 1}
    for k, u in enumerate(nodes):
        local[u] = k + 2
    return nodes, local


# ----------------------------------------------------------------------
# diagram files

def _format_float(x: float) -> str:
    return repr(float(x))


def dumps_roots(m: Manager, roots: dict[str, int], header: list[str] | None = None) -> str:
    """Text of a file holding the named `roots` of `m`."""
    nodes, local = _numbering(m, roots.values())
    lines = [
        f'.ver {FORMAT} {FORMAT_VERSION}',
        f'.nvars {m.n_vars}',
        '.varnames ' + ' '.join(m.var_names),
        '.order ' + ' '.join(m.order),
        f'.frozen {m.frozen}',
    ]
    lines.extend(header or [])
    lines.append(f'.nnodes {len(nodes)}')
    lines.append('.nodes')
    lines.append('0 F')
    lines.append('1 T')
    names = m.var_names
    for u in nodes:
        lines.append(f'{local[u]} {names[m.var_of(u)]} {local[m.then_of(u)]} {local[m.else_of(u)]}')
    for name, r in roots.items():
        lines.append(f'.root {name} {local[r]}' if name else f'.root {local[r]}')
    lines.append('.end')
    return '\n'.join(lines) + '\n'


def _global_header(g: GlobalRoot) -> list[str]:
    selectors = ' '.join(f'{a.name}:{v1}{v0}' for a, (v1, v0) in g.selector_map.items())
    lines = [
        f'.selectors {selectors}' if selectors else '.selectors -',
        f'.eliminated {g.eliminated.name}',
        f'.aprev {g.a_prev.name}',
        '.cards ' + ' '.join(map(str, g.grid.cardinalities)),
    ]
    for d, bp in zip(DIMS, g.grid.breakpoints):
        lines.append(f'.grid {d} ' + ' '.join(map(_format_float, bp)))
    lines.append(f'.fingerprint {g.grid.fingerprint()}')
    return lines


def dumps(g: GlobalRoot) -> str:
    return dumps_roots(g.manager, {'': g.root}, _global_header(g))


def save(g: GlobalRoot, path):
    Path(path).write_text(dumps(g))


def save_roots(m: Manager, roots: dict, path):
    """Dump several named roots, e.g. one per advisory during construction."""
    Path(path).write_text(dumps_roots(m, {str(getattr(k, 'name', k)): u for k, u in roots.items()}))


def diagram_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class _Parsed:
    directives: dict[str, list[str]]
    grid_lines: dict[str, list[float]]
    records: list[tuple[int, str, int, int]]
    roots: list[tuple[str, int]]


def _parse(text: str) -> _Parsed:
    lines = text.splitlines()
    if not lines or not lines[0].startswith('.ver'):
        raise DiagramFormatError('missing .ver line')
    parts = lines[0].split()
    if len(parts) != 3 or parts[1] != FORMAT:
        raise DiagramFormatError(f'not a diagram file: {lines[0]!r}')
    if parts[2] != str(FORMAT_VERSION):
        raise VersionMismatchError(f'diagram format version {parts[2]}, expected {FORMAT_VERSION}')
    directives: dict[str, list[str]] = {}
    grid_lines: dict[str, list[float]] = {}
    records = []
    roots = []
    in_nodes = False
    ended = False
    for no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if ended:
            raise DiagramFormatError(f'line {no}: content after .end')
        if line.startswith('.'):
            key, *rest = line.split()
            if key == '.nodes':
                in_nodes = True
            elif key == '.root':
                in_nodes = False
                if len(rest) == 1:
                    roots.append(('', int(rest[0])))
                elif len(rest) == 2:
                    roots.append((rest[0], int(rest[1])))
                else:
                    raise DiagramFormatError(f'line {no}: malformed .root')
            elif key == '.end':
                ended = True
            elif key == '.grid':
                grid_lines[rest[0]] = [float(x) for x in rest[1:]]
            else:
                directives[key[1:]] = rest
            continue
        if not in_nodes:
            raise DiagramFormatError(f'line {no}: node record outside .nodes')
        fields = line.split()
        if fields in (['0', 'F'], ['1', 'T']):
            continue
        if len(fields) != 4:
            raise DiagramFormatError(f'line {no}: malformed node record {line!r}')
        try:
            records.append((int(fields[0]), fields[1], int(fields[2]), int(fields[3])))
        except ValueError:
            raise DiagramFormatError(f'line {no}: malformed node record {line!r}') from None
    if not ended:
        raise TruncatedDiagramError('missing .end')
    if not roots:
        raise TruncatedDiagramError('missing .root')
    if 'nnodes' in directives and int(directives['nnodes'][0]) != len(records):
        raise TruncatedDiagramError(
            f'.nnodes says {directives["nnodes"][0]}, found {len(records)} records')
    return _Parsed(directives, grid_lines, records, roots)


def _rebuild(m: Manager, p: _Parsed) -> dict[str, int]:
    defined = {r[0] for r in p.records}
    built = {0: FALSE, 1: TRUE}
    for id_, var, hi, lo in p.records:
        if id_ in built:
            raise DiagramFormatError(f'node id {id_} defined twice')
        for c in (hi, lo):
            if c not in built:
                if c in defined:
                    raise CyclicReferenceError(f'node {id_} refers to {c}, which is not defined before it')
                raise DanglingReferenceError(f'node {id_} refers to undefined node {c}')
        v = m.var_id(var)
        h, l = built[hi], built[lo]
        if m.level_of_var(v) >= min(m.level(h), m.level(l)):
            raise DiagramFormatError(f'node {id_} violates the variable order')
        built[id_] = m.mk(v, h, l)
    roots = {}
    for name, r in p.roots:
        if r not in built:
            raise DanglingReferenceError(f'root {name or r} refers to undefined node {r}')
        roots[name] = built[r]
    return roots


def _prepare_manager(m: Manager | None, p: _Parsed) -> Manager:
    names = p.directives.get('varnames')
    order = p.directives.get('order')
    if names is None or order is None:
        raise TruncatedDiagramError('missing .varnames or .order')
    if m is None:
        m = Manager(names, order=order)
        frozen = int(p.directives.get('frozen', ['0'])[0])
        if frozen:
            from tablebdd.reorder import freeze
            freeze(m, order[:frozen])
        return m
    if m.var_names != names:
        raise DiagramFormatError('manager variables differ from the file')
    reorder_to(m, order)
    return m


def loads_roots(text: str, m: Manager | None = None) -> tuple[Manager, dict[str, int]]:
    p = _parse(text)
    m = _prepare_manager(m, p)
    roots = _rebuild(m, p)
    for u in roots.values():
        m.incref(u)
    return m, roots


def load_roots(path, m: Manager | None = None) -> tuple[Manager, dict[str, int]]:
    return loads_roots(Path(path).read_text(), m)


def loads(text: str, m: Manager | None = None, grid: QuantizationGrid | None = None,
          force: bool = False) -> GlobalRoot:
    """Parse a global diagram file.

    Without `m` a fresh manager is created; otherwise `m` is first
    reordered to the file's order. When `grid` is given its fingerprint
    must match the file's, unless `force`, which downgrades the mismatch
    to a `GridFingerprintWarning`.
    """
    p = _parse(text)
    d = p.directives
    for key in ('selectors', 'eliminated', 'aprev', 'fingerprint'):
        if key not in d:
            raise TruncatedDiagramError(f'missing .{key}')
    file_grid = QuantizationGrid.from_lists([p.grid_lines[dim] for dim in DIMS])
    if file_grid.fingerprint() != d['fingerprint'][0]:
        raise GridFingerprintMismatchError('grid values do not match the stored fingerprint')
    if grid is not None and grid.fingerprint() != d['fingerprint'][0]:
        msg = 'diagram was built on a different grid'
        if not force:
            raise GridFingerprintMismatchError(msg)
        # the diagram only makes sense on its own grid
        warnings.warn(msg, GridFingerprintWarning, stacklevel=2)
    grid = file_grid
    selector_map = {}
    if d['selectors'] != ['-']:
        for item in d['selectors']:
            name, bits = item.split(':')
            selector_map[Advisory[name]] = (int(bits[0]), int(bits[1]))
    layout = BitLayout()
    m = _prepare_manager(m, p)
    roots = _rebuild(m, p)
    if len(roots) != 1:
        raise DiagramFormatError('a global diagram has exactly one root')
    (root,) = roots.values()
    m.incref(root)
    domain = domain_validity(m, layout, grid)
    m.incref(domain)
    return GlobalRoot(m, root, selector_map, Advisory[d['eliminated'][0]], domain, grid,
                      Advisory[d['aprev'][0]], layout)


def load(path, m: Manager | None = None, grid: QuantizationGrid | None = None,
         force: bool = False) -> GlobalRoot:
    return loads(Path(path).read_text(), m, grid, force)


# ----------------------------------------------------------------------
# evaluator emission

@dataclass
class EmittedEvaluator:
    source: str
    style: str
    n_vars: int
    n_nodes: int
    diagram_hash: str
    has_classify: bool

    def write(self, path):
        Path(path).write_text(self.source)


_GRAY_WRAPPER = '''
static void tablebdd_gray(unsigned char *x, int pos, int width, int i)
{
    int g = i ^ (i >> 1);
    int k;
    for (k = 0; k < width; k++)
        x[pos + k] = (unsigned char)((g >> (width - 1 - k)) & 1);
}

/* selector pattern (bdd1, bdd0) and six state indices */
int tablebdd_eval_state(int bdd1, int bdd0, const int s[6])
{
    static const int pos[6] = {%(pos)s};
    static const int width[6] = {%(width)s};
    unsigned char x[%(nvars)d];
    int d;
    x[0] = (unsigned char)bdd1;
    x[1] = (unsigned char)bdd0;
    for (d = 0; d < 6; d++)
        tablebdd_gray(x, pos[d], width[d], s[d]);
    return tablebdd_eval(x);
}

/* advisory code: COC=0 WL=1 WR=2 SL=3 SR=4 */
int tablebdd_classify(const int s[6])
{
%(tests)s    return %(eliminated)d;
}
'''


def _c_header(style, m, n_nodes, h, extra=()):
    lines = [
        '/* Standalone decision diagram evaluator, generated by tablebdd.',
        f' * style: {style}',
        f' * diagram sha256: {h}',
        f' * internal nodes: {n_nodes}',
        f' * entry point: int {ENTRY}(const unsigned char x[{m.n_vars}])',
        ' * input bit x[i] is the value of variable i:',
    ]
    names = m.var_names
    for k in range(0, len(names), 8):
        chunk = ', '.join(f'{i}={names[i]}' for i in range(k, min(k + 8, len(names))))
        lines.append(f' *   {chunk}')
    lines.append(' * test order, top level first:')
    order = m.order
    for k in range(0, len(order), 8):
        lines.append(' *   ' + ' '.join(order[k:k + 8]))
    lines.extend(extra)
    lines.append(' */')
    return '\n'.join(lines) + '\n'


def _threaded_body(m, root, nodes, local):
    out = [f'int {ENTRY}(const unsigned char *x)', '{']
    if root <= TRUE:
        out.append(f'    (void)x;\n    return {root};')
        out.append('}')
        return out

    def target(c):
        return f't{c}' if c <= TRUE else f'n{local[c]}'

    # root first, then parents before children
    for u in reversed(nodes):
        out.append(f'n{local[u]}: if (x[{m.var_of(u)}]) goto {target(m.then_of(u))}; '
                   f'goto {target(m.else_of(u))};')
    out.append('t0: return 0;')
    out.append('t1: return 1;')
    out.append('}')
    return out


def _table_body(m, root, nodes, local):
    n = len(nodes) + 2

    def array(name, values):
        rows = [', '.join(map(str, values[k:k + 16])) for k in range(0, len(values), 16)]
        return [f'static const long {name}[{n}] = {{'] + [f'    {r},' for r in rows] + ['};']

    var = [0, 0] + [m.var_of(u) for u in nodes]
    hi = [0, 1] + [local[m.then_of(u)] for u in nodes]
    lo = [0, 1] + [local[m.else_of(u)] for u in nodes]
    out = []
    out += array('tb_var', var)
    out += array('tb_hi', hi)
    out += array('tb_lo', lo)
    out += [
        '',
        f'int {ENTRY}(const unsigned char *x)',
        '{',
        f'    long u = {local[root]};',
        '    while (u > 1)',
        '        u = x[tb_var[u]] ? tb_hi[u] : tb_lo[u];',
        '    return (int)u;',
        '}',
    ]
    return out


def emit_function(m: Manager, root: int, style: str = 'threaded',
                  cap: int = DEFAULT_EMISSION_CAP, diagram_text: str | None = None,
                  extra_header=()) -> EmittedEvaluator:
    """C89 evaluator of one Boolean function of the manager's variables."""
    if style not in STYLES:
        raise ValueError(f'unknown style {style!r}; expected one of {STYLES}')
    nodes, local = _numbering(m, [root])
    if len(nodes) > cap:
        raise EmissionCapError(f'{len(nodes)} nodes exceed the emission cap of {cap}')
    if diagram_text is None:
        diagram_text = dumps_roots(m, {'': root})
    h = diagram_hash(diagram_text)
    body = (_threaded_body if style == 'threaded' else _table_body)(m, root, nodes, local)
    source = _c_header(style, m, len(nodes), h, extra_header) + '\n' + '\n'.join(body) + '\n'
    return EmittedEvaluator(source, style, m.n_vars, len(nodes), h, False)


def emit_evaluator(g: GlobalRoot, style: str = 'threaded',
                   cap: int = DEFAULT_EMISSION_CAP) -> EmittedEvaluator:
    """Evaluator for a global diagram, plus state-level wrappers.

    Besides the bit-level entry point the source defines
    ``tablebdd_eval_state(bdd1, bdd0, s)``, which Gray-encodes six state
    indices inline, and ``tablebdd_classify(s)``, which tries the kept
    advisories' selector patterns in order and falls back to the
    eliminated advisory.
    """
    m = g.manager
    selectors = ', '.join(f'{a.name}={v1}{v0}' for a, (v1, v0) in g.selector_map.items())
    extra = [
        f' * selectors (bdd1 bdd0): {selectors or "none"}',
        f' * eliminated advisory: {g.eliminated.name}',
        f' * previous advisory: {g.a_prev.name}',
        f' * grid cardinalities: {" ".join(map(str, g.grid.cardinalities))}',
    ]
    ev = emit_function(m, g.root, style, cap, dumps(g), extra)
    layout = g.layout
    tests = ''.join(
        f'    if (tablebdd_eval_state({v1}, {v0}, s)) return {int(a)};\n'
        for a, (v1, v0) in g.selector_map.items())
    wrapper = _GRAY_WRAPPER % {
        'pos': ', '.join(str(layout.dim_vars(d)[0]) for d in range(len(DIMS))),
        'width': ', '.join(map(str, layout.widths)),
        'nvars': layout.n_vars,
        'tests': tests,
        'eliminated': int(g.eliminated),
    }
    ev.source += wrapper
    ev.has_classify = True
    return ev


# ----------------------------------------------------------------------
# running emitted code

_HARNESS = r'''
#define _POSIX_C_SOURCE 199309L
#include <time.h>

int tablebdd_eval(const unsigned char *x);
int tablebdd_classify(const int s[6]);

void harness_eval(const unsigned char *bits, long n, int nvars, unsigned char *out)
{
    long k;
    for (k = 0; k < n; k++)
        out[k] = (unsigned char)tablebdd_eval(bits + k * nvars);
}

#ifdef HAS_CLASSIFY
void harness_classify(const int *states, long n, unsigned char *out)
{
    long k;
    for (k = 0; k < n; k++)
        out[k] = (unsigned char)tablebdd_classify(states + 6 * k);
}

static double now_us(void)
{
    struct timespec t;
    clock_gettime(CLOCK_MONOTONIC, &t);
    return t.tv_sec * 1e6 + t.tv_nsec / 1e3;
}

/* per-query wall time; stats[0..2] = min, max, sum in microseconds */
void harness_bench(const int *states, long n, unsigned char *out, double *stats)
{
    long k;
    double t0, dt;
    stats[0] = 1e300;
    stats[1] = 0.0;
    stats[2] = 0.0;
    for (k = 0; k < n; k++) {
        t0 = now_us();
        out[k] = (unsigned char)tablebdd_classify(states + 6 * k);
        dt = now_us() - t0;
        if (dt < stats[0]) stats[0] = dt;
        if (dt > stats[1]) stats[1] = dt;
        stats[2] += dt;
    }
}
#endif
'''


# above this many nodes the optimizer costs more than it saves
OPTIMIZE_LIMIT = 20_000


def find_compiler() -> str | None:
    # clang copes far better than gcc with one very large threaded function
    for cc in ('clang', 'cc', 'gcc'):
        path = shutil.which(cc)
        if path:
            return path
    return None


class CompiledEvaluator:
    """Emitted source compiled into a shared library and loaded via ctypes."""

    def __init__(self, ev: EmittedEvaluator, workdir=None, cc: str | None = None, opt: str | None = None):
        cc = cc or find_compiler()
        if opt is None:
            opt = '-O1' if ev.n_nodes <= OPTIMIZE_LIMIT else '-O0'
        if cc is None:
            raise RuntimeError('no C compiler found')
        self.evaluator = ev
        self._tmp = None
        if workdir is None:
            self._tmp = tempfile.TemporaryDirectory(prefix='tablebdd-')
            workdir = self._tmp.name
        work = Path(workdir)
        src = work / 'evaluator.c'
        harness = work / 'harness.c'
        lib = work / 'evaluator.so'
        ev.write(src)
        harness.write_text(_HARNESS)
        flags = ['-DHAS_CLASSIFY'] if ev.has_classify else []
        cmd = [cc, opt, '-std=c89', '-w', '-shared', '-fPIC', *flags, '-o', str(lib), str(src), str(harness)]
        logger.info('compiling evaluator: %s', ' '.join(cmd))
        done = subprocess.run(cmd, capture_output=True, text=True)
        if done.returncode:
            raise RuntimeError(f'compilation failed:\n{done.stderr}')
        self._lib = ctypes.CDLL(str(lib))
        self._lib.harness_eval.argtypes = [
            ctypes.c_void_p, ctypes.c_long, ctypes.c_int, ctypes.c_void_p]
        if ev.has_classify:
            self._lib.harness_classify.argtypes = [ctypes.c_void_p, ctypes.c_long, ctypes.c_void_p]
            self._lib.harness_bench.argtypes = [
                ctypes.c_void_p, ctypes.c_long, ctypes.c_void_p, ctypes.c_void_p]

    def eval_bits(self, bits: np.ndarray) -> np.ndarray:
        bits = np.ascontiguousarray(bits, dtype=np.uint8)
        out = np.empty(len(bits), dtype=np.uint8)
        self._lib.harness_eval(bits.ctypes.data, len(bits), bits.shape[1], out.ctypes.data)
        return out.astype(bool)

    def classify(self, states: np.ndarray) -> np.ndarray:
        states = np.ascontiguousarray(states, dtype=np.intc)
        out = np.empty(len(states), dtype=np.uint8)
        self._lib.harness_classify(states.ctypes.data, len(states), out.ctypes.data)
        return out

    def bench(self, states: np.ndarray) -> tuple[np.ndarray, float, float, float]:
        """Advisories and per-query (min, max, mean) wall time in microseconds."""
        states = np.ascontiguousarray(states, dtype=np.intc)
        out = np.empty(len(states), dtype=np.uint8)
        stats = np.zeros(3, dtype=np.float64)
        self._lib.harness_bench(states.ctypes.data, len(states), out.ctypes.data, stats.ctypes.data)
        n = max(len(states), 1)
        return out, float(stats[0]), float(stats[1]), float(stats[2] / n)


_THREADED_LINE = re.compile(r'^n(\d+): if \(x\[(\d+)\]\) goto ([nt])(\d+); goto ([nt])(\d+);$')
_ARRAY = re.compile(r'static const long (tb_\w+)\[\d+\] = \{(.*?)\};', re.S)
_CLASSIFY_TEST = re.compile(r'if \(tablebdd_eval_state\((\d), (\d), s\)\) return (\d);')
_CLASSIFY_FALLBACK = re.compile(r'return (\d);\n}\s*$')


class SimulatedEvaluator:
    """Runs emitted source by reading its node structure back from the text.

    Used when no C compiler is available: the branches of the threaded
    style or the arrays of the table style are parsed and interpreted
    exactly as the C code would execute them.
    """

    def __init__(self, ev: EmittedEvaluator):
        self.evaluator = ev
        src = ev.source
        body = src[src.index(f'int {ENTRY}('):]
        if ev.style == 'table':
            arrays = {name: np.array([int(x) for x in vals.replace('\n', ' ').split(',') if x.strip()])
                      for name, vals in _ARRAY.findall(src)}
            self.var, self.hi, self.lo = arrays['tb_var'], arrays['tb_hi'], arrays['tb_lo']
            self.root = int(re.search(r'long u = (\d+);', body).group(1))
        else:
            records = []
            for line in body.splitlines():
                match = _THREADED_LINE.match(line)
                if match:
                    records.append(match.groups())
            n = max((int(r[0]) for r in records), default=1) + 1
            self.var = np.zeros(n, dtype=np.int64)
            self.hi = np.arange(n, dtype=np.int64)
            self.lo = np.arange(n, dtype=np.int64)
            for node, v, _, h, _, l in records:
                self.var[int(node)], self.hi[int(node)], self.lo[int(node)] = int(v), int(h), int(l)
            if records:
                self.root = int(records[0][0])
            else:
                self.root = int(re.search(r'return (\d);', body).group(1))
        self.tests = [(int(a), int(b), int(c)) for a, b, c in _CLASSIFY_TEST.findall(src)]
        fallback = _CLASSIFY_FALLBACK.search(src)
        self.fallback = int(fallback.group(1)) if ev.has_classify else None
        self.layout = BitLayout()

    def eval_bits(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.uint8)
        u = np.full(len(bits), self.root, dtype=np.int64)
        rows = np.arange(len(bits))
        active = np.nonzero(u > 1)[0]
        while active.size:
            cur = u[active]
            take = bits[rows[active], self.var[cur]].astype(bool)
            u[active] = np.where(take, self.hi[cur], self.lo[cur])
            active = active[u[active] > 1]
        return u.astype(bool)

    def classify(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states)
        out = np.full(len(states), self.fallback, dtype=np.uint8)
        decided = np.zeros(len(states), dtype=bool)
        for v1, v0, a in self.tests:
            hit = self.eval_bits(self.layout.states_to_bits(states, (v1, v0))) & ~decided
            out[hit] = a
            decided |= hit
        return out


def runner(ev: EmittedEvaluator, compile: bool | None = None, **kw):
    """Compiled evaluator when a compiler is available (or `compile` is True), else a simulation."""
    if compile is None:
        compile = find_compiler() is not None
    return CompiledEvaluator(ev, **kw) if compile else SimulatedEvaluator(ev)
