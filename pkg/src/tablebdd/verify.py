"""Property checking by intersection emptiness.

A property constrains the encounter state (closed intervals on physical
values, comparisons between same-unit dimensions) and names the set of
advisories allowed there. It holds iff no constrained state is issued an
advisory outside that set; any state in the difference is a
counterexample.
"""
from __future__ import annotations

import json
import math
import operator
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from tablebdd.bdd import FALSE, Manager
from tablebdd.codec import (
    DIMS, UNITS, Advisory, BitLayout, QuantizationGrid, StateIndex, dim_index,
    dim_index_set, gray_codes, mux_rows, value_bounds_to_index_set)
from tablebdd.compress import GlobalRoot, classify
from tablebdd.table import AdvisoryTable

COMPARATORS = {
    '<=': operator.le, '<': operator.lt, '=': operator.eq,
    '>=': operator.ge, '>': operator.gt}
_RELATION = re.compile(r'^\s*(\w+)\s*(<=|>=|<|>|=)\s*(\w+)\s*$')


class PropertyError(ValueError):
    pass


class NotApplicableError(PropertyError):
    """The property does not apply to the diagram's previous advisory."""


class VacuousConstraintWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Relation:
    left: str
    op: str
    right: str

    def __post_init__(self):
        if self.op not in COMPARATORS:
            raise PropertyError(f'unknown comparator {self.op!r}')
        a, b = dim_index(self.left), dim_index(self.right)
        if a == b:
            raise PropertyError(f'relation compares {self.left} with itself')
        if UNITS[a] != UNITS[b]:
            raise PropertyError(f'{self.left} and {self.right} have different units')

    @classmethod
    def parse(cls, text: str) -> Relation:
        match = _RELATION.match(text)
        if not match:
            raise PropertyError(f'cannot parse relation {text!r}')
        return cls(*match.groups())

    def __str__(self):
        return f'{self.left} {self.op} {self.right}'


@dataclass
class PropertySpec:
    name: str
    expected: frozenset[Advisory]
    intervals: dict[str, tuple[float, float]] = field(default_factory=dict)
    relations: list[Relation] = field(default_factory=list)
    a_prev: frozenset[Advisory] | None = None

    def __post_init__(self):
        self.expected = frozenset(_advisory(a) for a in self.expected)
        if not self.expected or len(self.expected) == len(Advisory):
            raise PropertyError(f'{self.name}: expected set must be a nonempty strict subset')
        if self.a_prev is not None:
            self.a_prev = frozenset(_advisory(a) for a in self.a_prev)
        intervals = {}
        for d, (lo, hi) in self.intervals.items():
            dim_index(d)
            if lo > hi:
                raise PropertyError(f'{self.name}: empty interval on {d}')
            intervals[d] = (float(lo), float(hi))
        self.intervals = intervals
        self.relations = [r if isinstance(r, Relation) else Relation.parse(r) for r in self.relations]

    def applies_to(self, a_prev: Advisory) -> bool:
        return self.a_prev is None or Advisory(a_prev) in self.a_prev

    def with_interval(self, d: str, lo: float, hi: float) -> PropertySpec:
        """Add a constraint on `d`, intersected with any existing one."""
        if d in self.intervals:
            old_lo, old_hi = self.intervals[d]
            lo, hi = max(lo, old_lo), min(hi, old_hi)
            if lo > hi:
                # disjoint bounds: keep an interval that no grid value can satisfy
                lo, hi = math.inf, math.inf
        return PropertySpec(self.name, self.expected, {**self.intervals, d: (lo, hi)},
                            list(self.relations), self.a_prev)

    def with_relation(self, rel) -> PropertySpec:
        rel = rel if isinstance(rel, Relation) else Relation.parse(rel)
        return PropertySpec(self.name, self.expected, dict(self.intervals),
                            self.relations + [rel], self.a_prev)

    @classmethod
    def from_dict(cls, d: dict) -> PropertySpec:
        unknown = set(d) - {'name', 'expected', 'intervals', 'relations', 'a_prev'}
        if unknown:
            raise PropertyError(f'unknown property keys {sorted(unknown)}')
        return cls(
            name=d['name'],
            expected=d['expected'],
            intervals={k: tuple(v) for k, v in d.get('intervals', {}).items()},
            relations=list(d.get('relations', [])),
            a_prev=d.get('a_prev'))

    def to_dict(self) -> dict:
        out = {
            'name': self.name,
            'expected': sorted(a.name for a in self.expected),
            'intervals': {k: list(v) for k, v in self.intervals.items()},
            'relations': [str(r) for r in self.relations],
        }
        if self.a_prev is not None:
            out['a_prev'] = sorted(a.name for a in self.a_prev)
        return out


def _advisory(a) -> Advisory:
    if isinstance(a, str):
        try:
            return Advisory[a]
        except KeyError:
            raise PropertyError(f'unknown advisory {a!r}') from None
    return Advisory(a)


def load_properties(path) -> list[PropertySpec]:
    """Properties from a JSON file: one object, a list, or ``{"properties": [...]}``."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict) and 'properties' in data:
        data = data['properties']
    if isinstance(data, dict):
        data = [data]
    return [PropertySpec.from_dict(d) for d in data]


def save_properties(props, path):
    Path(path).write_text(json.dumps({'properties': [p.to_dict() for p in props]}, indent=2) + '\n')


# intruder approaching from behind at a lower speed: clear of conflict
PROPERTY_11 = PropertySpec(
    name='property_11',
    expected={Advisory.COC},
    intervals={
        'rho': (8500.0, 62000.0),
        'theta': (-3.1416, -3.1416 + 0.01),
        'psi': (-0.06, 0.06)},
    relations=[Relation('v_int', '<=', 'v_own')])


@dataclass
class Counterexample:
    state: StateIndex
    physical: dict[str, float]
    actual: Advisory
    expected: frozenset[Advisory]

    def to_dict(self):
        return {
            'state': dict(zip(DIMS, self.state)),
            'physical': self.physical,
            'actual': self.actual.name,
            'expected': sorted(a.name for a in self.expected)}


@dataclass
class Verdict:
    name: str
    status: str
    counterexample: Counterexample | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.status == 'Valid'

    def to_dict(self):
        return {
            'property': self.name, 'status': self.status,
            'counterexample': self.counterexample and self.counterexample.to_dict(),
            'warnings': list(self.warnings)}


# ----------------------------------------------------------------------
# symbolic route

def relation_node(m: Manager, layout: BitLayout, grid: QuantizationGrid, rel: Relation) -> int:
    """Disjunction over index pairs ``(i, j)`` with ``left[i] op right[j]``."""
    a, b = dim_index(rel.left), dim_index(rel.right)
    va, vb = grid.values(a), grid.values(b)
    cmp = COMPARATORS[rel.op]
    leaves = np.zeros(1 << layout.widths[a], dtype=np.int64)
    for i, x in enumerate(va):
        js = [j for j, y in enumerate(vb) if cmp(x, y)]
        leaves[gray_codes(i)] = dim_index_set(m, layout, b, js)
    return int(mux_rows(m, layout.dim_vars(a), leaves[None, :])[0])


def _compile(m, grid, layout, p, domain):
    notes = []
    u = domain
    for d, (lo, hi) in p.intervals.items():
        idx = value_bounds_to_index_set(grid, d, lo, hi)
        if not idx:
            notes.append(f'vacuous constraint: no {d} grid value in [{lo}, {hi}]')
        u = m.apply_and(u, dim_index_set(m, layout, d, idx))
    for rel in p.relations:
        r = relation_node(m, layout, grid, rel)
        if r == FALSE:
            notes.append(f'vacuous constraint: no grid pair satisfies {rel}')
        u = m.apply_and(u, r)
    return u, notes


def compile_property(m: Manager, grid: QuantizationGrid, layout: BitLayout, p: PropertySpec,
                     domain: int | None = None) -> int:
    """Valid states satisfying every constraint of `p`.

    Emits `VacuousConstraintWarning` when a constraint selects nothing.
    """
    if domain is None:
        from tablebdd.codec import domain_validity
        domain = domain_validity(m, layout, grid)
    u, notes = _compile(m, grid, layout, p, domain)
    for note in notes:
        warnings.warn(note, VacuousConstraintWarning, stacklevel=2)
    return u


def compile_expected(g: GlobalRoot, expected) -> int:
    """States for which the diagram issues an advisory in `expected`."""
    return g.manager.disjoin(g.region(_advisory(a)) for a in expected)


def check(g: GlobalRoot, p: PropertySpec) -> Verdict:
    """Decide `p` on the diagram; Invalid verdicts carry a decoded counterexample."""
    if not p.applies_to(g.a_prev):
        raise NotApplicableError(f'{p.name} does not apply to a_prev={g.a_prev.name}')
    m = g.manager
    prop, notes = _compile(m, g.grid, g.layout, p, g.domain)
    for note in notes:
        warnings.warn(note, VacuousConstraintWarning, stacklevel=2)
    bad = m.apply_and(prop, m.negate(compile_expected(g, p.expected)))
    if bad == FALSE:
        return Verdict(p.name, 'Valid', None, notes)
    state = g.grid.check_state(g.layout.bits_to_state(m.pick_sat(bad)))
    cex = Counterexample(state, g.grid.physical(state), classify(g, state), p.expected)
    return Verdict(p.name, 'Invalid', cex, notes)


# ----------------------------------------------------------------------
# enumeration route

def constraint_mask(grid: QuantizationGrid, p: PropertySpec) -> np.ndarray:
    """Boolean array over the grid: states satisfying every constraint of `p`."""
    cards = grid.cardinalities
    mask = np.ones(cards, dtype=bool)
    for d, (lo, hi) in p.intervals.items():
        k = dim_index(d)
        v = grid.values(k)
        shape = [1] * len(cards)
        shape[k] = cards[k]
        mask &= ((v >= lo) & (v <= hi)).reshape(shape)
    for rel in p.relations:
        a, b = dim_index(rel.left), dim_index(rel.right)
        sa = [1] * len(cards)
        sa[a] = cards[a]
        sb = [1] * len(cards)
        sb[b] = cards[b]
        mask &= COMPARATORS[rel.op](grid.values(a).reshape(sa), grid.values(b).reshape(sb))
    return mask


def brute_force_check(t: AdvisoryTable, p: PropertySpec) -> Verdict:
    """Scan every state; the counterexample is the first violation in row-major order."""
    if not p.applies_to(t.a_prev):
        raise NotApplicableError(f'{p.name} does not apply to a_prev={t.a_prev.name}')
    mask = constraint_mask(t.grid, p).reshape(-1)
    notes = []
    if not mask.any():
        notes.append('vacuous constraint: no state satisfies the constraints')
    allowed = np.isin(t.entries, [int(a) for a in p.expected])
    bad = mask & ~allowed
    if not bad.any():
        return Verdict(p.name, 'Valid', None, notes)
    offset = int(np.argmax(bad))
    state = t.grid.state_at(offset)
    cex = Counterexample(state, t.grid.physical(state), Advisory(int(t.entries[offset])), p.expected)
    return Verdict(p.name, 'Invalid', cex, notes)


def validate_counterexample(t: AdvisoryTable, p: PropertySpec, cex: Counterexample) -> bool:
    """Does `cex` satisfy every constraint of `p` while `t` issues an advisory outside the expected set?"""
    inside = bool(constraint_mask(t.grid, p)[tuple(cex.state)])
    return inside and t[cex.state] not in p.expected
