import itertools

import numpy as np
import pytest

from tablebdd.bdd import FALSE
from tablebdd.codec import Advisory, BitLayout, QuantizationGrid, domain_validity, state_to_cube
from tablebdd.compress import (
    PATTERNS, CompressionError, DuplicateSelectorError, GlobalRoot,
    PartitionFailure, PartitionNotVerifiedError, _range_blocks, assemble_global,
    build_roots, check_partition, chunk_nodes, classify, classify_many,
    compress, default_selector_map, eliminate_largest, reconstruct)
from tablebdd.reorder import sift
from tablebdd.table import AdvisoryTable, constant_table, generate_synthetic, random_table

TINY = QuantizationGrid.linear((2, 2, 2, 2, 2, 2))
SMALL = QuantizationGrid.linear((2, 3, 3, 2, 3, 2))
REDUCED = QuantizationGrid.linear((4, 8, 8, 8, 4, 4))


def exhaustive_agree(g, t):
    return np.array_equal(classify_many(g, t.all_states()), t.entries)


@pytest.mark.parametrize('cards', [(2, 3, 5, 1, 2, 3), (10, 41, 39, 39, 12, 12)])
def test_range_blocks_tile_the_range(cards):
    rng = np.random.default_rng(0)
    n = int(np.prod(cards))
    for _ in range(20):
        start, end = sorted(rng.integers(0, n + 1, 2).tolist())
        covered = []
        for prefix, d, i, j in _range_blocks(cards, start, end):
            sub = int(np.prod(cards[d + 1:]))
            base = int(np.ravel_multi_index(prefix + (0,) * (6 - len(prefix)), cards)) if prefix else 0
            covered.extend(range(base + i * sub, base + (j + 1) * sub))
        assert covered == list(range(start, end))


@pytest.mark.parametrize('start,length', [(0, 216), (5, 100), (37, 1), (100, 116)])
def test_block_and_cube_builders_agree(start, length):
    t = random_table(SMALL, 4)
    layout = BitLayout()
    m = layout.new_manager()
    entries = t.entries[start:start + length]
    fast = chunk_nodes(m, layout, SMALL, start, entries, 'blocks')
    slow = chunk_nodes(m, layout, SMALL, start, entries, 'cubes')
    assert fast == slow
    with pytest.raises(ValueError):
        chunk_nodes(m, layout, SMALL, start, entries, 'rows')


@pytest.mark.parametrize('seed', range(3))
def test_tiny_grid_exhaustive(seed):
    t = random_table(TINY, seed, Advisory.WL)
    g, report = compress(t, chunk_size=7)
    assert exhaustive_agree(g, t)
    for s in itertools.islice(itertools.product(range(2), repeat=6), 0, 64, 5):
        assert classify(g, s) == t[s]
    assert report.chunks == 10
    assert report.global_nodes_after_sift <= report.global_nodes_before_sift


@pytest.mark.parametrize('policy', ['none', 'final', 'auto'])
def test_reduced_grid_exhaustive(policy):
    t = generate_synthetic(REDUCED, Advisory.SR, seed=42)
    g, report = compress(t, chunk_size=5000, reorder_policy=policy)
    assert exhaustive_agree(g, t)
    assert report.variable_order[:2] == ['bdd1', 'bdd0']
    assert set(report.selector_map) == {a.name for a in Advisory} - {report.eliminated}


def test_chunk_size_does_not_change_roots():
    t = generate_synthetic(SMALL, Advisory.COC, seed=2, perturbation=0.05)
    layout = BitLayout()
    m = layout.new_manager()
    a = build_roots(m, t, chunk_size=len(t), reorder_policy='none')
    b = build_roots(m, t, chunk_size=11, reorder_policy='none')
    assert a.roots == b.roots
    assert a.chunks == 1 and b.chunks == 20


def test_constant_table_root_is_the_domain():
    t = constant_table(SMALL, Advisory.COC)
    layout = BitLayout()
    m = layout.new_manager()
    r = build_roots(m, t, chunk_size=50)
    assert r[Advisory.COC] == r.domain == domain_validity(m, layout, SMALL)
    assert all(r[a] == FALSE for a in Advisory if a != Advisory.COC)
    assert check_partition(m, r).ok
    kept, eliminated = eliminate_largest(m, r)
    assert eliminated == Advisory.COC
    g = assemble_global(m, r, kept, eliminated)
    assert g.root == FALSE
    assert exhaustive_agree(g, t)


def test_single_entry_difference():
    base = constant_table(SMALL, Advisory.COC)
    s = (1, 2, 0, 1, 2, 1)
    t = base.with_entry(s, Advisory.SL)
    layout = BitLayout()
    m = layout.new_manager()
    r = build_roots(m, t, chunk_size=30, reorder_policy='none')
    assert r[Advisory.SL] == state_to_cube(m, layout, s)
    g, _ = compress(t)
    assert classify(g, s) == Advisory.SL
    assert exhaustive_agree(g, t)


def _roots(t, **kw):
    layout = BitLayout()
    m = layout.new_manager()
    return m, layout, build_roots(m, t, **kw)


def test_partition_detects_overlap_with_witness():
    t = generate_synthetic(REDUCED, Advisory.WL, seed=3)
    m, layout, r = _roots(t, chunk_size=4096, reorder_policy='none')
    assert check_partition(m, r).ok
    s = (2, 5, 1, 7, 0, 3)
    victim = Advisory((t[s] + 1) % 5)
    r.roots[victim] = m.apply_or(r[victim], state_to_cube(m, layout, s))
    report = check_partition(m, r)
    assert not report.ok
    (failure,) = report.failures()
    assert failure.witness == s
    assert {t[s].name, victim.name} == set(failure.name.split(' & '))


def test_partition_detects_gap_with_witness():
    t = generate_synthetic(REDUCED, Advisory.WL, seed=3)
    m, layout, r = _roots(t, chunk_size=4096, reorder_policy='none')
    s = (0, 0, 4, 4, 3, 3)
    a = t[s]
    r.roots[a] = m.apply_and(r[a], m.negate(state_to_cube(m, layout, s)))
    report = check_partition(m, r)
    assert [f.name for f in report.failures()] == ['coverage (valid)']
    assert report.coverage.witness == s
    assert not r.partition_verified
    with pytest.raises(PartitionNotVerifiedError):
        eliminate_largest(m, r)


def test_partition_all_mode_witness_lies_outside_the_grid():
    t = random_table(SMALL, 0)
    m, layout, r = _roots(t, chunk_size=100, reorder_policy='none')
    report = check_partition(m, r, mode='all')
    assert report.failures() == [report.coverage]
    w = report.coverage.witness
    assert any(i >= c for i, c in zip(w, SMALL.cardinalities))
    assert check_partition(m, r, mode='valid').ok
    with pytest.raises(ValueError):
        check_partition(m, r, mode='some')
    with pytest.raises(PartitionFailure) as info:
        compress(t, coverage='all')
    assert info.value.report.coverage.witness is not None


@pytest.mark.parametrize('seed', range(4))
def test_complement_identity(seed):
    t = generate_synthetic(REDUCED, Advisory(seed % 5), seed=seed, perturbation=0.01)
    m, layout, r = _roots(t, chunk_size=9000)
    assert check_partition(m, r).ok
    for a in Advisory:
        kept = [r[b] for b in Advisory if b != a]
        assert reconstruct(m, kept, r.domain) == r[a]
    kept, eliminated = eliminate_largest(m, r)
    counts = r.node_counts()
    assert counts[eliminated] == max(counts.values())


def test_elimination_tie_goes_to_earliest():
    # WL and WR are mirror images, so their roots have equal size
    t = constant_table(TINY, Advisory.COC)
    entries = t.entries.reshape(TINY.cardinalities).copy()
    entries[:, :, 0] = Advisory.WL
    entries[:, :, 1] = Advisory.WR
    t = AdvisoryTable(TINY, Advisory.COC, entries)
    m, layout, r = _roots(t, chunk_size=64, reorder_policy='none')
    check_partition(m, r)
    counts = r.node_counts()
    assert counts[Advisory.WL] == counts[Advisory.WR]
    _, eliminated = eliminate_largest(m, r)
    assert eliminated == Advisory.WL


def test_selector_isolation_before_and_after_sift():
    t = generate_synthetic(REDUCED, Advisory.SR, seed=11)
    m, layout, r = _roots(t, chunk_size=20000)
    check_partition(m, r)
    kept, eliminated = eliminate_largest(m, r)
    g = assemble_global(m, r, kept, eliminated)
    for a, u in kept.items():
        m.incref(u)
    for phase in ('before', 'after'):
        for a, u in kept.items():
            assert g.kept_root(a) == u, phase
        assert g.region(eliminated) == r[eliminated]
        sift(m, [g.root])
    assert exhaustive_agree(g, t)


def test_selector_maps():
    sr_kept = [Advisory.COC, Advisory.WR, Advisory.SL, Advisory.SR]
    assert default_selector_map(sr_kept, Advisory.SR) == {
        Advisory.COC: (1, 1), Advisory.WR: (1, 0), Advisory.SL: (0, 1), Advisory.SR: (0, 0)}
    assert list(default_selector_map(sr_kept, Advisory.WL).values()) == list(PATTERNS)
    t = generate_synthetic(REDUCED, Advisory.SR, seed=1)
    m, layout, r = _roots(t, chunk_size=70000, reorder_policy='none')
    check_partition(m, r)
    kept, eliminated = eliminate_largest(m, r)
    bad = dict.fromkeys(kept, (0, 0))
    with pytest.raises(DuplicateSelectorError):
        assemble_global(m, r, kept, eliminated, bad)
    with pytest.raises(CompressionError):
        assemble_global(m, r, kept, eliminated, {Advisory.COC: (0, 0)})


def test_custom_selector_map_and_order_independence():
    t = generate_synthetic(REDUCED, Advisory.COC, seed=8)
    m, layout, r = _roots(t, chunk_size=70000, reorder_policy='none')
    check_partition(m, r)
    kept, eliminated = eliminate_largest(m, r)
    patterns = dict(zip(sorted(kept, reverse=True), PATTERNS))
    g = assemble_global(m, r, kept, eliminated, patterns)
    assert isinstance(g, GlobalRoot)
    assert exhaustive_agree(g, t)
    rng = np.random.default_rng(0)
    for _ in range(5):
        order = list(rng.permutation(g.kept_order))
        for s in t.all_states()[::997]:
            assert classify(g, s, [Advisory(a) for a in order]) == t[s]


def test_layout_mismatch():
    from tablebdd.bdd import Manager
    from tablebdd.compress import TableGridMismatchError
    t = random_table(TINY, 0)
    with pytest.raises(TableGridMismatchError):
        build_roots(Manager(['a', 'b']), t)
    with pytest.raises(ValueError):
        compress(t, reorder_policy='sometimes')
