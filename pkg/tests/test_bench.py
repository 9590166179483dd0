import numpy as np
import pytest

from tablebdd.bench import (
    BACKENDS, BenchError, BenchReport, diagram_walker, query_stream, run_bench)
from tablebdd.codec import Advisory, QuantizationGrid
from tablebdd.compress import classify, compress
from tablebdd.emit import find_compiler
from tablebdd.table import generate_synthetic

REDUCED = QuantizationGrid.linear((4, 8, 8, 8, 4, 4))


@pytest.fixture(scope='module')
def built():
    t = generate_synthetic(REDUCED, Advisory.WL, seed=3)
    g, _ = compress(t)
    return t, g


def test_query_stream_is_valid_and_prefix_stable():
    g = QuantizationGrid.default()
    a = query_stream(g, 1_500_000, seed=7)
    b = query_stream(g, 1000, seed=7)
    assert np.array_equal(a[:1000], b)
    assert (a >= 0).all() and (a < np.array(g.cardinalities)).all()
    # every index of every dimension is drawn
    for d, c in enumerate(g.cardinalities):
        assert len(np.unique(a[:, d])) == c
    assert not np.array_equal(query_stream(g, 1000, seed=8), b)
    with pytest.raises(ValueError):
        query_stream(g, 0, 1)


def test_walker_matches_classify(built):
    t, g = built
    walk = diagram_walker(g)
    for s in t.all_states()[::37].tolist():
        assert walk(s) == classify(g, s) == t[s]


@pytest.mark.parametrize('backend', BACKENDS)
def test_backends_agree(backend, built):
    t, g = built
    if backend != 'bdd-eval' and find_compiler() is None:
        pytest.skip('no C compiler')
    report, out = run_bench(backend, 5000, seed=2, diagram=g, table=t)
    assert report.agreement_with_table is True
    assert report.t_min_us <= report.t_mean_us <= report.t_max_us
    assert np.array_equal(out, t.lookup(query_stream(REDUCED, 5000, 2)))
    d = report.to_dict()
    assert d['backend'] == backend and d['n_queries'] == 5000
    assert 't_mean' in report.text()


def test_same_stream_same_digest(built):
    t, g = built
    a, _ = run_bench('bdd-eval', 3000, seed=4, diagram=g)
    b, _ = run_bench('table-lookup', 3000, seed=4, table=t)
    assert a.advisories_sha256 == b.advisories_sha256
    assert a.agreement_with_table is None


def test_missing_artifacts(built):
    t, g = built
    with pytest.raises(BenchError):
        run_bench('table-lookup', 10, diagram=g)
    with pytest.raises(BenchError):
        run_bench('bdd-eval', 10, table=t)
    with pytest.raises(ValueError):
        run_bench('gpu', 10, diagram=g)
    with pytest.raises(ValueError):
        BenchReport('bdd-eval', 0, 0, 0.0, 0.0, 0.0, '', None, '')
