import itertools
import re

import numpy as np
import pytest

from tablebdd.bdd import FALSE, TRUE, Manager
from tablebdd.codec import Advisory, QuantizationGrid
from tablebdd.compress import classify_many, compress
from tablebdd.emit import (
    CompiledEvaluator, CyclicReferenceError, DanglingReferenceError,
    DiagramFormatError, EmissionCapError, GridFingerprintMismatchError,
    GridFingerprintWarning, SimulatedEvaluator, TruncatedDiagramError,
    VersionMismatchError, dumps, dumps_roots, emit_evaluator, emit_function,
    find_compiler, load, load_roots, loads, loads_roots, save, save_roots)
from tablebdd.reorder import reorder_to
from tablebdd.table import constant_table, generate_synthetic, random_table

REDUCED = QuantizationGrid.linear((4, 8, 8, 8, 4, 4))
TINY = QuantizationGrid.linear((2, 2, 2, 2, 2, 2))

needs_cc = pytest.mark.skipif(find_compiler() is None, reason='no C compiler')


@pytest.fixture(scope='module')
def reduced():
    t = generate_synthetic(REDUCED, Advisory.SR, seed=42)
    g, _ = compress(t)
    return t, g


def fig3_yxz():
    m = Manager(['x', 'y', 'z'], order=['y', 'x', 'z'])
    f = m.apply_or(m.apply_and(m.var('x'), m.var('y')), m.apply_and(m.var('y'), m.var('z')))
    m.incref(f)
    return m, f


def test_false_file_has_only_constants():
    m = Manager(['a', 'b'])
    text = dumps_roots(m, {'': FALSE})
    body = text[text.index('.nodes\n') + 7:text.index('.root')]
    assert body.splitlines() == ['0 F', '1 T']
    assert '.root 0\n' in text
    m2, roots = loads_roots(text)
    assert roots == {'': FALSE}


def test_fig3_round_trip(tmp_path):
    m, f = fig3_yxz()
    path = tmp_path / 'f.dd'
    save_roots(m, {'f': f}, path)
    m2, roots = load_roots(path)
    assert m2.order == ['y', 'x', 'z']
    assert m2.node_count(roots['f']) == 3
    for bits in itertools.product((0, 1), repeat=3):
        assert m2.eval(roots['f'], bits) == m.eval(f, bits)
    # loading into a manager with another order reorders it first
    m3 = Manager(['x', 'y', 'z'])
    _, roots3 = load_roots(path, m3)
    assert m3.order == ['y', 'x', 'z']
    assert m3.node_count(roots3['f']) == 3


def test_global_round_trip(tmp_path, reduced):
    t, g = reduced
    path = tmp_path / 'g.dd'
    save(g, path)
    g2 = load(path)
    assert g2.selector_map == g.selector_map
    assert (g2.eliminated, g2.a_prev, g2.grid) == (g.eliminated, g.a_prev, g.grid)
    assert np.array_equal(classify_many(g2, t.all_states()), t.entries)
    assert dumps(g2) == path.read_text()
    # into the original manager the canonical rebuild lands on the same id
    assert load(path, g.manager).root == g.root


def test_per_advisory_dump(tmp_path):
    from tablebdd.codec import BitLayout
    from tablebdd.compress import build_roots
    t = random_table(TINY, 3)
    layout = BitLayout()
    m = layout.new_manager()
    r = build_roots(m, t, reorder_policy='none')
    path = tmp_path / 'roots.dd'
    save_roots(m, r.roots, path)
    m2, roots = load_roots(path)
    assert set(roots) == {a.name for a in Advisory}
    bits = layout.states_to_bits(t.all_states())
    for a in Advisory:
        assert np.array_equal(m2.eval_many(roots[a.name], bits), t.entries == a)


def test_files_are_deterministic(reduced):
    t, _ = reduced
    texts = {dumps(compress(t)[0]) for _ in range(2)}
    assert len(texts) == 1


def _text(reduced):
    return dumps(reduced[1])


def test_malformed_files(reduced):
    text = _text(reduced)
    lines = text.splitlines(keepends=True)
    node_start = lines.index('.nodes\n') + 3
    with pytest.raises(VersionMismatchError):
        loads(text.replace('TABLEBDD-DIAGRAM 1', 'TABLEBDD-DIAGRAM 2', 1))
    with pytest.raises(DiagramFormatError):
        loads('hello\n')
    with pytest.raises(TruncatedDiagramError):
        loads(''.join(lines[:len(lines) // 2]))
    with pytest.raises(TruncatedDiagramError):
        loads(''.join(lines[:-1]))
    # a parent pointing at a node that is never defined
    dangling = re.sub(r'^(\d+ \S+) (\d+) (\d+)$', r'\1 999999 \3', lines[node_start + 3].rstrip(), flags=re.M)
    with pytest.raises(DanglingReferenceError):
        loads(''.join(lines[:node_start + 3] + [dangling + '\n'] + lines[node_start + 4:]))
    # a node pointing at itself
    id_ = lines[node_start + 3].split()[0]
    fields = lines[node_start + 3].split()
    cyclic = f'{id_} {fields[1]} {id_} {fields[3]}\n'
    with pytest.raises(CyclicReferenceError):
        loads(''.join(lines[:node_start + 3] + [cyclic] + lines[node_start + 4:]))
    # swapped records: a forward reference
    a, b = lines[node_start + 2], lines[node_start + 3]
    if b.split()[2] == a.split()[0] or b.split()[3] == a.split()[0]:
        with pytest.raises(CyclicReferenceError):
            loads(''.join(lines[:node_start + 2] + [b, a] + lines[node_start + 4:]))


def test_grid_fingerprint(reduced):
    text = _text(reduced)
    other = QuantizationGrid.linear((4, 8, 8, 8, 4, 5))
    with pytest.raises(GridFingerprintMismatchError):
        loads(text, grid=other)
    with pytest.warns(GridFingerprintWarning):
        loads(text, grid=other, force=True)
    assert loads(text, grid=REDUCED).grid == REDUCED
    tampered = re.sub(r'^\.grid tau 0\.0', '.grid tau -1.0', text, flags=re.M)
    with pytest.raises(GridFingerprintMismatchError):
        loads(tampered)


def test_fig3_threaded_shape():
    m, f = fig3_yxz()
    src = emit_function(m, f, 'threaded').source
    labels = re.findall(r'^n\d+: if', src, flags=re.M)
    returns = re.findall(r'^t[01]: return [01];', src, flags=re.M)
    assert len(labels) == 3 and len(returns) == 2
    assert 'order, top level first:\n *   y x z' in src


def test_constant_evaluators():
    m = Manager(['a', 'b'])
    for style in ('threaded', 'table'):
        sim = SimulatedEvaluator(emit_function(m, TRUE, style))
        assert sim.eval_bits(np.array([[0, 0], [1, 0], [0, 1], [1, 1]])).all()
        sim = SimulatedEvaluator(emit_function(m, FALSE, style))
        assert not sim.eval_bits(np.array([[0, 0], [1, 1]])).any()


def test_emission_cap_and_style(reduced):
    _, g = reduced
    with pytest.raises(EmissionCapError):
        emit_evaluator(g, cap=10)
    with pytest.raises(ValueError):
        emit_evaluator(g, style='switch')


@pytest.mark.parametrize('style', ['threaded', 'table'])
def test_simulated_evaluator_matches(style, reduced):
    t, g = reduced
    ev = emit_evaluator(g, style)
    assert ev.source == emit_evaluator(g, style).source
    sim = SimulatedEvaluator(ev)
    assert np.array_equal(sim.classify(t.all_states()), t.entries)


def _exhaustive_function(rng, n):
    from conftest import random_function
    m = Manager([f'v{i}' for i in range(n)])
    f = random_function(m, rng, n, 12)
    m.incref(f)
    reorder_to(m, list(reversed(m.order)))
    bits = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.uint8)
    return m, f, bits


@needs_cc
@pytest.mark.parametrize('style', ['threaded', 'table'])
def test_compiled_evaluator_exhaustive(style, rng, tmp_path):
    m, f, bits = _exhaustive_function(rng, 14)
    c = CompiledEvaluator(emit_function(m, f, style), workdir=tmp_path)
    assert np.array_equal(c.eval_bits(bits), m.eval_many(f, bits))


@needs_cc
@pytest.mark.parametrize('style', ['threaded', 'table'])
def test_compiled_classify_and_bench(style, reduced):
    t, g = reduced
    c = CompiledEvaluator(emit_evaluator(g, style))
    states = t.all_states()
    assert np.array_equal(c.classify(states), t.entries)
    out, t_min, t_max, t_mean = c.bench(states)
    assert np.array_equal(out, t.entries)
    assert 0 <= t_min <= t_mean <= t_max
    bits = np.random.default_rng(0).integers(0, 2, (50_000, 32), dtype=np.uint8)
    assert np.array_equal(c.eval_bits(bits), g.manager.eval_many(g.root, bits))


@needs_cc
def test_constant_table_compiles():
    t = constant_table(TINY, Advisory.WR)
    g, _ = compress(t)
    assert g.root == FALSE
    c = CompiledEvaluator(emit_evaluator(g, 'threaded'))
    assert (c.classify(t.all_states()) == Advisory.WR).all()
