"""
Checking an operational property
================================

A property names a box of physical states, optional relations between
the two speeds and the advisories allowed there. It holds when no state in
the box gets an advisory outside that set.

Run with ``python3 notebooks/verify_property.py``.
"""
from tablebdd.codec import Advisory, QuantizationGrid
from tablebdd.compress import compress
from tablebdd.table import AdvisoryTable, generate_synthetic
from tablebdd.verify import PROPERTY_11, PropertySpec, brute_force_check, check, constraint_mask

# odd theta and psi counts put grid points at 0 and close to -pi
grid = QuantizationGrid.linear((4, 8, 9, 9, 4, 4))
t = generate_synthetic(grid, Advisory.SR, seed=42)
print(PROPERTY_11.to_dict())

###############################################################################
# Force the property region to COC, so it holds by construction.

mask = constraint_mask(grid, PROPERTY_11).reshape(-1)
print(f'{mask.sum()} states fall in the property region')
entries = t.entries.copy()
entries[mask] = int(Advisory.COC)
good = AdvisoryTable(grid, Advisory.SR, entries)
g, _ = compress(good)
print('constructed instance:', check(g, PROPERTY_11).status)

###############################################################################
# Break one state and read back the counterexample in physical units.

entries[mask.nonzero()[0][len(mask.nonzero()[0]) // 2]] = int(Advisory.SL)
bad = AdvisoryTable(grid, Advisory.SR, entries)
g, _ = compress(bad)
v = check(g, PROPERTY_11)
print('broken instance:', v.status)
print(v.counterexample.to_dict())
print('enumeration agrees:', brute_force_check(bad, PROPERTY_11).status == v.status)

###############################################################################
# Properties tied to another previous advisory do not apply.

other = PropertySpec('after_wl', {'WL', 'COC'}, {'tau': (0, 20)}, a_prev={'WL'})
print(other.name, 'applies:', other.applies_to(g.a_prev))
