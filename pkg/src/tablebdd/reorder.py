"""Dynamic variable reordering by adjacent swaps and sifting.

Swaps rewrite nodes in place, so node ids held by callers keep denoting
the same function across any reorder sequence. Reference counts must be
accurate for the size measurements to mean anything, which is why
:func:`sift` collects garbage before it starts.

Reference
=========

Richard Rudell
    "Dynamic variable ordering for ordered binary decision diagrams"
    IEEE/ACM ICCAD, 1993, pages 42--47
"""
from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from tablebdd.bdd import TRUE, BDDError, Manager, _SHIFT

logger = logging.getLogger(__name__)


class FrozenVariableError(BDDError):
    """A reorder step would move a frozen variable."""


@dataclass
class ReorderReport:
    nodes_before: int
    nodes_after: int
    order_before: list[str]
    order_after: list[str]
    swaps_performed: int = 0
    sizes: dict[str, list[int]] = field(default_factory=dict)

    @property
    def reduction(self) -> float:
        if not self.nodes_before:
            return 0.0
        return 1.0 - self.nodes_after / self.nodes_before

    def to_dict(self) -> dict:
        return {
            'nodes_before': self.nodes_before,
            'nodes_after': self.nodes_after,
            'order_before': list(self.order_before),
            'order_after': list(self.order_after),
            'swaps_performed': self.swaps_performed,
        }


def swap_adjacent(m: Manager, level: int):
    """Exchange the variables at `level` and `level + 1`.

    Every live node keeps its id and its function.
    """
    n = m.n_vars
    if not 0 <= level < n - 1:
        raise ValueError(f'no adjacent level pair at {level}')
    if level < m.frozen:
        raise FrozenVariableError(
            f'level {level} holds frozen variable {m.var_names[m._var_at[level]]}')
    m.clear_cache()
    var, hi, lo, ref = m._var, m._hi, m._lo, m._ref
    x = m._var_at[level]
    y = m._var_at[level + 1]
    tx = m._unique[x]
    ty = m._unique[y]
    movers = []
    for key, u in list(tx.items()):
        if var[hi[u]] == y or var[lo[u]] == y:
            movers.append(u)
            del tx[key]
    m._var_at[level], m._var_at[level + 1] = y, x
    m._level[x], m._level[y] = level + 1, level
    m._version += 1
    for u in movers:
        f1, f0 = hi[u], lo[u]
        if var[f1] == y:
            f11, f10 = hi[f1], lo[f1]
        else:
            f11 = f10 = f1
        if var[f0] == y:
            f01, f00 = hi[f0], lo[f0]
        else:
            f01 = f00 = f0
        a = m.mk(x, f11, f01)
        b = m.mk(x, f10, f00)
        ref[a] += 1
        ref[b] += 1
        var[u] = y
        hi[u] = a
        lo[u] = b
        ty[(a << _SHIFT) | b] = u
        for c in (f1, f0):
            ref[c] -= 1
            if c > TRUE and ref[c] == 0:
                m._free_node(c)


def _bubble_to(m: Manager, v: int, target: int) -> int:
    swaps = 0
    while m._level[v] > target:
        swap_adjacent(m, m._level[v] - 1)
        swaps += 1
    while m._level[v] < target:
        swap_adjacent(m, m._level[v])
        swaps += 1
    return swaps


def reorder_to(m: Manager, order: Sequence[int | str]) -> int:
    """Permute levels by adjacent swaps until the order equals `order`.

    Returns the number of swaps.
    """
    ids = [m.var_id(v) for v in order]
    if sorted(ids) != list(range(m.n_vars)):
        raise ValueError('order must be a permutation of the declared variables')
    if ids[:m.frozen] != m._var_at[:m.frozen]:
        raise FrozenVariableError('target order moves a frozen variable')
    swaps = 0
    for target, v in enumerate(ids):
        swaps += _bubble_to(m, v, target)
    return swaps


def _sift_var(m: Manager, v: int, top: int, bottom: int):
    """Move `v` through levels [top, bottom] and park it at its best level."""
    start = m._level[v]
    sizes = {start: len(m)}
    swaps = 0
    if start - top < bottom - start:
        ends = (top, bottom)
    else:
        ends = (bottom, top)
    for end in ends:
        step = -1 if end < m._level[v] else 1
        while m._level[v] != end:
            lvl = m._level[v]
            swap_adjacent(m, lvl if step > 0 else lvl - 1)
            swaps += 1
            sizes[m._level[v]] = len(m)
    best = min(sizes, key=lambda lvl: (sizes[lvl], lvl))
    swaps += _bubble_to(m, v, best)
    return swaps, sizes[best]


def sift(m: Manager, roots: Iterable[int] = ()) -> ReorderReport:
    """Sift every unfrozen variable to the level minimizing manager size.

    `roots` are registered for the duration of the call; any other node not
    reachable from a registered root is reclaimed first. Variables are
    processed from the most populated level down; ties between equally
    good levels go to the topmost one.
    """
    roots = list(roots)
    for u in roots:
        m.incref(u)
    try:
        m.collect()
        before = len(m)
        order_before = m.order
        top, bottom = m.frozen, m.n_vars - 1
        swaps = 0
        if bottom - top >= 1:
            counts = {v: len(m._unique[v]) for v in m._var_at[top:]}
            for v in sorted(counts, key=lambda v: (-counts[v], v)):
                s, size = _sift_var(m, v, top, bottom)
                swaps += s
                logger.debug(
                    f'{size} nodes with "{m.var_names[v]}" at level {m._level[v]}')
        after = len(m)
    finally:
        for u in roots:
            m.decref(u)
    if after > before:
        raise AssertionError(f'sifting grew the diagram: {before} -> {after}')
    logger.info(f'sifting: {before} -> {after} nodes, {swaps} swaps')
    return ReorderReport(before, after, order_before, m.order, swaps)


def freeze(m: Manager, vars: Sequence[int | str], rotate: bool = False):
    """Pin `vars` to the top levels so that no reorder step moves them.

    `vars` must already occupy levels ``0 .. len(vars) - 1`` in the given
    order, unless `rotate` is set, in which case they are moved there
    first.
    """
    ids = [m.var_id(v) for v in vars]
    if not ids:
        return
    if m._var_at[:len(ids)] != ids:
        if not rotate:
            raise FrozenVariableError(
                f'{[m.var_names[v] for v in ids]} do not occupy the top levels')
        if m.frozen:
            raise FrozenVariableError('cannot rotate past already frozen variables')
        for target, v in enumerate(ids):
            _bubble_to(m, v, target)
    if m._var_at[:m.frozen] != ids[:m.frozen]:
        raise FrozenVariableError('new frozen prefix conflicts with the current one')
    m.frozen = max(m.frozen, len(ids))
