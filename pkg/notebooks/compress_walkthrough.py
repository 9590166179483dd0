"""
From advisory table to a single-root diagram
============================================

Build a small synthetic table, turn it into one diagram per advisory,
check that the five diagrams partition the state space, drop the largest
one and glue the rest together under two selector bits.

Run with ``python3 notebooks/compress_walkthrough.py``.
"""

from tablebdd.codec import Advisory, BitLayout, QuantizationGrid
from tablebdd.compress import (
    assemble_global, build_roots, check_partition, classify_many,
    eliminate_largest, reconstruct)
from tablebdd.reorder import sift
from tablebdd.table import generate_synthetic

grid = QuantizationGrid.linear((4, 8, 8, 8, 4, 4))
t = generate_synthetic(grid, Advisory.SR, seed=42)
print(f'{len(t)} states')
for a, n in t.counts().items():
    print(f'  {a.name:3s} {n}')

###############################################################################
# One root per advisory. Chunks of the table are turned into diagrams and
# OR-ed into the running roots.

layout = BitLayout()
m = layout.new_manager()
roots = build_roots(m, t, reorder_policy='none')
print({a.name: n for a, n in roots.node_counts().items()})

###############################################################################
# The five roots must be pairwise disjoint and cover every valid state.

report = check_partition(m, roots)
print('partition ok:', report.ok)

###############################################################################
# The largest root is redundant: it is whatever the others leave uncovered.

kept, eliminated = eliminate_largest(m, roots)
print('eliminated', eliminated.name)
assert reconstruct(m, kept.values(), roots.domain) == roots[eliminated]

###############################################################################
# Two selector bits sit on top of the kept roots.

g = assemble_global(m, roots, kept, eliminated)
print({a.name: f'{v1}{v0}' for a, (v1, v0) in g.selector_map.items()})
before = m.node_count(g.root)
sift(m, [g.root])
print(f'global root: {before} nodes, {m.node_count(g.root)} after sifting')
print('order:', ' '.join(m.order))

###############################################################################
# Every state classifies as in the table.

same = classify_many(g, t.all_states()) == t.entries
print(f'agreement {same.mean():.2%}')
