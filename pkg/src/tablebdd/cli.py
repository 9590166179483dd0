"""Command line: ``tablebdd {generate,compress,verify,emit,bench}``.

Exit codes::

    0  success, every property Valid
    1  some property Invalid
    2  usage error
    3  file missing or unreadable
    4  partition check failed
    5  malformed input (table, diagram, grid or property file)
    6  backends or checkers disagree

Reports go to stdout as text. A JSON copy is written to ``--report``
if given, else to ``$TABLEBDD_REPORT_DIR/<verb>.json`` when that
variable is set.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

from tablebdd.bench import BACKENDS, DEFAULT_QUERIES, BenchError, run_bench
from tablebdd.codec import Advisory, GridError, QuantizationGrid
from tablebdd.compress import REORDER_POLICIES, PartitionFailure, compress
from tablebdd.emit import (
    DEFAULT_EMISSION_CAP, STYLES, DiagramFormatError, EmissionCapError,
    emit_evaluator, load, save, save_roots)
from tablebdd.table import (
    DEFAULT_CHUNK_SIZE, TableFormatError, generate_synthetic, read_table, write_table)
from tablebdd.verify import (
    NotApplicableError, PropertyError, VacuousConstraintWarning, brute_force_check,
    check, load_properties)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_PARTITION = 4
EXIT_FORMAT = 5
EXIT_MISMATCH = 6

# named grids for tests and quick runs; config files go through --relaxed-grid
PRESETS = {
    'default': (10, 41, 39, 39, 12, 12),
    'reduced': (4, 8, 8, 8, 4, 4),
    'tiny': (2, 2, 2, 2, 2, 2),
}

logger = logging.getLogger('tablebdd')


class CommandError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def load_grid(args) -> QuantizationGrid | None:
    if args.grid is None:
        return None
    if args.grid in PRESETS:
        return QuantizationGrid.linear(PRESETS[args.grid])
    path = Path(args.grid)
    if not path.exists():
        raise CommandError(f'grid config {path} not found', EXIT_IO)
    return QuantizationGrid.from_config(path, relaxed=args.relaxed_grid)


def emit_report(args, verb: str, data: dict, text: str):
    sys.stdout.write(text)
    target = args.report
    if target is None and os.environ.get('TABLEBDD_REPORT_DIR'):
        target = Path(os.environ['TABLEBDD_REPORT_DIR']) / f'{verb}.json'
    if target is not None:
        target = Path(target)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(json.dumps(data, indent=2, sort_keys=True) + '\n')
        target.with_suffix('.txt').write_text(text)


# ----------------------------------------------------------------------
# verbs

def cmd_generate(args) -> int:
    grid = load_grid(args) or QuantizationGrid.default()
    t = generate_synthetic(grid, Advisory[args.a_prev], args.seed, args.perturbation)
    write_table(t, args.out)
    counts = {a.name: n for a, n in t.counts().items()}
    data = {
        'out': str(args.out), 'a_prev': t.a_prev.name, 'seed': args.seed,
        'cardinalities': list(grid.cardinalities), 'states': len(t),
        'grid_fingerprint': grid.fingerprint(), 'counts': counts}
    text = (f'wrote {len(t)} entries ({" x ".join(map(str, grid.cardinalities))}) to {args.out}\n'
            + ''.join(f'  {a:3s} {n}\n' for a, n in counts.items()))
    emit_report(args, 'generate', data, text)
    return EXIT_OK


def cmd_compress(args) -> int:
    t = read_table(args.table, load_grid(args))
    try:
        g, report = compress(
            t, chunk_size=args.chunk_size, reorder_policy=args.reorder_policy,
            coverage=args.coverage)
    except PartitionFailure as e:
        lines = ['partition check failed:\n']
        for f in e.report.failures():
            lines.append(f'  {f.name}: witness state {f.witness}\n')
        emit_report(args, 'compress', {'partition': e.report.to_dict()}, ''.join(lines))
        return EXIT_PARTITION
    save(g, args.out)
    if args.dump_roots:
        kept = g.kept_roots()
        kept[g.eliminated] = g.region(g.eliminated)
        save_roots(g.manager, kept, args.dump_roots)
    data = report.to_dict()
    data['out'] = str(args.out)
    text = (
        f'diagram written to {args.out}\n'
        f'  root nodes: {", ".join(f"{a}={n}" for a, n in data["root_nodes"].items())}\n'
        f'  eliminated: {data["eliminated"]}\n'
        f'  selectors:  {", ".join(f"{a}={p[0]}{p[1]}" for a, p in data["selector_map"].items())}\n'
        f'  nodes before sift: {data["global_nodes_before_sift"]}\n'
        f'  nodes after sift:  {data["global_nodes_after_sift"]}\n'
        f'  order: {" ".join(data["variable_order"])}\n')
    emit_report(args, 'compress', data, text)
    return EXIT_OK


def cmd_verify(args) -> int:
    g = load(args.diagram, grid=load_grid(args), force=args.force)
    t = read_table(args.table, g.grid) if args.table else None
    results = []
    lines = []
    code = EXIT_OK
    for p in load_properties(args.properties):
        entry = {'property': p.name}
        try:
            with warnings.catch_warnings():
                warnings.simplefilter('ignore', VacuousConstraintWarning)
                v = check(g, p)
                entry.update(v.to_dict())
                if t is not None:
                    bf = brute_force_check(t, p)
                    entry['enumeration_status'] = bf.status
                    if bf.status != v.status:
                        code = max(code, EXIT_MISMATCH)
        except NotApplicableError:
            entry['status'] = 'N/A'
            lines.append(f'{p.name}: N/A (a_prev {g.a_prev.name})\n')
            results.append(entry)
            continue
        if v.status == 'Invalid':
            code = max(code, EXIT_INVALID)
            cex = v.counterexample
            lines.append(
                f'{p.name}: Invalid\n  state {tuple(cex.state)} issues {cex.actual.name},'
                f' expected {"/".join(sorted(a.name for a in cex.expected))}\n'
                f'  physical {cex.physical}\n')
        else:
            lines.append(f'{p.name}: Valid\n')
        for w in v.warnings:
            lines.append(f'  warning: {w}\n')
        if 'enumeration_status' in entry and entry['enumeration_status'] != v.status:
            lines.append(f'  enumeration disagrees: {entry["enumeration_status"]}\n')
        results.append(entry)
    emit_report(args, 'verify', {'diagram': str(args.diagram), 'results': results}, ''.join(lines))
    return code


def cmd_emit(args) -> int:
    g = load(args.diagram, grid=load_grid(args), force=args.force)
    try:
        ev = emit_evaluator(g, args.style, args.cap)
    except EmissionCapError as e:
        raise CommandError(str(e), EXIT_FORMAT) from None
    ev.write(args.out)
    data = {'out': str(args.out), 'style': ev.style, 'nodes': ev.n_nodes, 'diagram_sha256': ev.diagram_hash}
    emit_report(args, 'emit', data, f'{ev.style} evaluator with {ev.n_nodes} nodes written to {args.out}\n')
    return EXIT_OK


def cmd_bench(args) -> int:
    grid = load_grid(args)
    g = load(args.diagram, grid=grid, force=args.force) if args.diagram else None
    t = None
    if args.table:
        t = read_table(args.table, g.grid if g is not None else grid)
    try:
        report, _ = run_bench(args.backend, args.queries, args.seed, g, t, args.style)
    except BenchError as e:
        raise CommandError(str(e), EXIT_IO) from None
    emit_report(args, 'bench', report.to_dict(), report.text())
    return EXIT_MISMATCH if report.agreement_with_table is False else EXIT_OK


# ----------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--grid', help=f'grid config JSON, or one of {sorted(PRESETS)}')
    common.add_argument('--relaxed-grid', action='store_true',
                        help='accept grid configs whose cardinalities differ from the full size')
    common.add_argument('--seed', type=int, default=0)
    common.add_argument('--chunk-size', type=int, default=DEFAULT_CHUNK_SIZE)
    common.add_argument('--coverage', choices=('valid', 'all'), default='valid')
    common.add_argument('--force', action='store_true',
                        help='downgrade grid fingerprint mismatches to warnings')
    common.add_argument('--report', type=Path, help='write the JSON report here')
    common.add_argument('-v', '--verbose', action='store_true')

    parser = argparse.ArgumentParser(prog='tablebdd', description=__doc__.split('\n')[0])
    sub = parser.add_subparsers(dest='verb', required=True)

    p = sub.add_parser('generate', parents=[common], help='write a synthetic advisory table')
    p.add_argument('-o', '--out', type=Path, required=True)
    p.add_argument('--a-prev', choices=[a.name for a in Advisory], default='COC')
    p.add_argument('--perturbation', type=float, default=0.001)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser('compress', parents=[common], help='table to diagram file')
    p.add_argument('table', type=Path)
    p.add_argument('-o', '--out', type=Path, required=True)
    p.add_argument('--reorder-policy', choices=REORDER_POLICIES, default='auto')
    p.add_argument('--dump-roots', type=Path, help='also dump the five advisory roots here')
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser('verify', parents=[common], help='check properties on a diagram')
    p.add_argument('diagram', type=Path)
    p.add_argument('properties', type=Path)
    p.add_argument('--table', type=Path, help='cross-check every verdict by enumeration')
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser('emit', parents=[common], help='generate a standalone C evaluator')
    p.add_argument('diagram', type=Path)
    p.add_argument('-o', '--out', type=Path, required=True)
    p.add_argument('--style', choices=STYLES, default='threaded')
    p.add_argument('--cap', type=int, default=DEFAULT_EMISSION_CAP)
    p.set_defaults(func=cmd_emit)

    p = sub.add_parser('bench', parents=[common], help='per-query latency over random states')
    p.add_argument('--backend', choices=BACKENDS, required=True)
    p.add_argument('--diagram', type=Path)
    p.add_argument('--table', type=Path)
    p.add_argument('-n', '--queries', type=int, default=DEFAULT_QUERIES)
    p.add_argument('--style', choices=STYLES, default='threaded')
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        return args.func(args)
    except CommandError as e:
        print(f'tablebdd: {e}', file=sys.stderr)
        return e.code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f'tablebdd: {e}', file=sys.stderr)
        return EXIT_IO
    except (TableFormatError, DiagramFormatError, GridError, PropertyError,
            json.JSONDecodeError, KeyError, ValueError) as e:
        print(f'tablebdd: {type(e).__name__}: {e}', file=sys.stderr)
        return EXIT_FORMAT


if __name__ == '__main__':
    sys.exit(main())
