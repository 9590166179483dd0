"""Reduced ordered binary decision diagrams.

Nodes are plain integers. ``FALSE`` is 0 and ``TRUE`` is 1; every other
id names an internal node ``(var, then, else)`` stored exactly once in a
per-variable unique table, so two ids are equal iff they denote the same
Boolean function under the current variable order.

There are no complement edges. Each internal node keeps a reference
count (parents plus external registrations); nodes that nobody
references survive until :meth:`Manager.collect` is called.

References
==========

Randal E. Bryant
    "Graph-based algorithms for Boolean function manipulation"
    IEEE Transactions on Computers, C-35(8), 1986, pages 677--690

Karl S. Brace, Richard L. Rudell, Randal E. Bryant
    "Efficient implementation of a BDD package"
    27th ACM/IEEE Design Automation Conference, 1990, pages 40--45
"""
from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

FALSE = 0
TRUE = 1

_SHIFT = 32
_MASK = (1 << _SHIFT) - 1
# refcount given to terminals so they are never reclaimed
_PINNED = 1 << 40


class BDDError(Exception):
    """Base class for diagram manager errors."""


class UnknownVariableError(BDDError, KeyError):
    pass


class InvalidNodeError(BDDError, ValueError):
    """Node id is not alive in this manager (freed, or from another manager)."""


class MissingAssignmentError(BDDError, KeyError):
    pass


class Manager:
    """Shared ROBDD store with hash-consing and memoized operations.

    Variables are declared once, at creation, and are addressed either by
    integer id (their declaration position) or by name. The initial order
    places variable ``i`` at level ``i`` unless ``order`` is given.

    Attributes:
      - `var_names`: declared names, indexed by variable id
      - `cache_enabled`: set to False to bypass the operation cache
      - `stats`: counters for cache lookups and hits
    """

    def __init__(self, var_names: Sequence[str], order: Sequence[str] | None = None):
        names = list(var_names)
        if len(set(names)) != len(names):
            raise ValueError('duplicate variable names')
        self.var_names = names
        self._index = {name: i for i, name in enumerate(names)}
        n = len(names)
        # node -> var, then, else, refcount
        # the terminals carry the sentinel var `n`, which sits at level `n`
        self._var = [n, n]
        self._hi = [FALSE, TRUE]
        self._lo = [FALSE, TRUE]
        self._ref = [_PINNED, _PINNED]
        self._free: list[int] = []
        self._unique: list[dict[int, int]] = [dict() for _ in range(n)]
        self._n_nodes = 0
        # var -> level (sentinel included) and level -> var
        self._level = list(range(n + 1))
        self._var_at = list(range(n))
        if order is not None:
            self._set_initial_order(order)
        self.frozen = 0
        self.cache_enabled = True
        self._cache: dict[str, dict] = {
            'and': {}, 'or': {}, 'xor': {}, 'not': {}, 'ite': {}}
        self.stats = {'cache_lookups': 0, 'cache_hits': 0}
        self._version = 0
        self._snapshot = None

    def _set_initial_order(self, order):
        ids = [self.var_id(v) for v in order]
        if sorted(ids) != list(range(len(self.var_names))):
            raise ValueError('order must be a permutation of the declared variables')
        self._var_at = ids
        for level, v in enumerate(ids):
            self._level[v] = level

    # ------------------------------------------------------------------
    # variables and levels

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    def var_id(self, v: int | str) -> int:
        if isinstance(v, str):
            try:
                return self._index[v]
            except KeyError:
                raise UnknownVariableError(v) from None
        if isinstance(v, (int, np.integer)) and 0 <= v < len(self.var_names):
            return int(v)
        raise UnknownVariableError(v)

    def level_of_var(self, v: int | str) -> int:
        return self._level[self.var_id(v)]

    def var_at_level(self, level: int) -> int:
        return self._var_at[level]

    @property
    def order(self) -> list[str]:
        """Variable names from the top level down."""
        return [self.var_names[v] for v in self._var_at]

    def level(self, u: int) -> int:
        """Level of node `u`; terminals sit at level `n_vars`."""
        return self._level[self._var[u]]

    def var_of(self, u: int) -> int:
        if u <= TRUE:
            raise ValueError('terminals have no variable')
        return self._var[u]

    def then_of(self, u: int) -> int:
        return self._hi[u]

    def else_of(self, u: int) -> int:
        return self._lo[u]

    # ------------------------------------------------------------------
    # node store

    def __len__(self):
        """Number of stored internal nodes, dead or alive."""
        return self._n_nodes

    def __contains__(self, u) -> bool:
        return (
            isinstance(u, (int, np.integer))
            and 0 <= u < len(self._var)
            and (u <= TRUE or self._var[u] < len(self.var_names)))

    def _check(self, u):
        if u not in self:
            raise InvalidNodeError(u)

    def mk(self, v: int, hi: int, lo: int) -> int:
        """Return the node testing variable id `v` with children `hi`, `lo`.

        Both children must sit strictly below `v` in the current order.
        """
        if hi == lo:
            return hi
        key = (hi << _SHIFT) | lo
        table = self._unique[v]
        u = table.get(key)
        if u is not None:
            return u
        if self._free:
            u = self._free.pop()
            self._var[u] = v
            self._hi[u] = hi
            self._lo[u] = lo
            self._ref[u] = 0
        else:
            u = len(self._var)
            self._var.append(v)
            self._hi.append(hi)
            self._lo.append(lo)
            self._ref.append(0)
        self._ref[hi] += 1
        self._ref[lo] += 1
        table[key] = u
        self._n_nodes += 1
        self._version += 1
        return u

    def compose_var(self, v: int | str, hi: int, lo: int) -> int:
        """Return ``ite(v, hi, lo)`` for a single variable `v`.

        Takes the direct `mk` path when `v` is above both children, which is
        always the case when building bottom-up in order.
        """
        v = self.var_id(v)
        lv = self._level[v]
        if lv < self._level[self._var[hi]] and lv < self._level[self._var[lo]]:
            return self.mk(v, hi, lo)
        return self._ite(self.mk(v, TRUE, FALSE), hi, lo)

    def var(self, v: int | str) -> int:
        """Return the function "variable `v` is true"."""
        return self.mk(self.var_id(v), TRUE, FALSE)

    mk_var = var

    def cube(self, literals: Mapping[int | str, bool]) -> int:
        """Conjunction of literals, built bottom-up in level order."""
        lits = sorted(
            ((self.var_id(v), bool(b)) for v, b in literals.items()),
            key=lambda x: self._level[x[0]], reverse=True)
        u = TRUE
        for v, b in lits:
            u = self.compose_var(v, u, FALSE) if b else self.compose_var(v, FALSE, u)
        return u

    # ------------------------------------------------------------------
    # reference counting and garbage collection

    def incref(self, u: int):
        self._check(u)
        self._ref[u] += 1

    def decref(self, u: int):
        self._check(u)
        if u > TRUE and self._ref[u] <= 0:
            raise BDDError(f'reference count of node {u} would become negative')
        self._ref[u] -= 1

    register_root = incref
    release_root = decref

    def _free_node(self, u: int):
        # caller guarantees u is internal with refcount 0
        stack = [u]
        var, hi, lo, ref = self._var, self._hi, self._lo, self._ref
        sentinel = len(self.var_names)
        while stack:
            u = stack.pop()
            h, l = hi[u], lo[u]
            del self._unique[var[u]][(h << _SHIFT) | l]
            var[u] = sentinel + 1
            hi[u] = lo[u] = FALSE
            self._free.append(u)
            self._n_nodes -= 1
            for c in (h, l):
                ref[c] -= 1
                if c > TRUE and ref[c] == 0:
                    stack.append(c)
        self._version += 1

    def collect(self) -> int:
        """Reclaim every node not reachable from a registered root.

        Clears the operation cache. Returns the number of nodes freed.
        Ids of unregistered nodes become invalid and may be reused.
        """
        before = self._n_nodes
        dead = [
            u for table in self._unique for u in table.values()
            if self._ref[u] == 0]
        for u in dead:
            # may already be gone through a cascade
            if self._ref[u] == 0 and self._var[u] < len(self.var_names):
                self._free_node(u)
        self.clear_cache()
        freed = before - self._n_nodes
        logger.debug(f'collect freed {freed} nodes')
        return freed

    def clear_cache(self):
        for c in self._cache.values():
            c.clear()

    # ------------------------------------------------------------------
    # Boolean operations

    def _lookup(self, op, key):
        if not self.cache_enabled:
            return None
        self.stats['cache_lookups'] += 1
        r = self._cache[op].get(key)
        if r is not None:
            self.stats['cache_hits'] += 1
        return r

    def _store(self, op, key, r):
        if self.cache_enabled:
            self._cache[op][key] = r

    def _cofactors(self, u, level):
        if self._level[self._var[u]] == level:
            return self._hi[u], self._lo[u]
        return u, u

    def negate(self, f: int) -> int:
        self._check(f)
        return self._not(f)

    def _not(self, f):
        if f <= TRUE:
            return 1 - f
        r = self._lookup('not', f)
        if r is not None:
            return r
        r = self.mk(self._var[f], self._not(self._hi[f]), self._not(self._lo[f]))
        self._store('not', f, r)
        return r

    def apply_and(self, f: int, g: int) -> int:
        self._check(f)
        self._check(g)
        return self._and(f, g)

    def _and(self, f, g):
        if f == g or g == TRUE:
            return f
        if f == FALSE or g == FALSE:
            return FALSE
        if f == TRUE:
            return g
        if f > g:
            f, g = g, f
        key = (f << _SHIFT) | g
        r = self._lookup('and', key)
        if r is not None:
            return r
        r = self._binary(self._and, f, g)
        self._store('and', key, r)
        return r

    def apply_or(self, f: int, g: int) -> int:
        self._check(f)
        self._check(g)
        return self._or(f, g)

    def _or(self, f, g):
        if f == g or g == FALSE:
            return f
        if f == TRUE or g == TRUE:
            return TRUE
        if f == FALSE:
            return g
        if f > g:
            f, g = g, f
        key = (f << _SHIFT) | g
        r = self._lookup('or', key)
        if r is not None:
            return r
        r = self._binary(self._or, f, g)
        self._store('or', key, r)
        return r

    def apply_xor(self, f: int, g: int) -> int:
        self._check(f)
        self._check(g)
        return self._xor(f, g)

    def _xor(self, f, g):
        if f == g:
            return FALSE
        if f == FALSE:
            return g
        if g == FALSE:
            return f
        if f == TRUE:
            return self._not(g)
        if g == TRUE:
            return self._not(f)
        if f > g:
            f, g = g, f
        key = (f << _SHIFT) | g
        r = self._lookup('xor', key)
        if r is not None:
            return r
        r = self._binary(self._xor, f, g)
        self._store('xor', key, r)
        return r

    def _binary(self, op, f, g):
        level = self._level
        vf, vg = self._var[f], self._var[g]
        lf, lg = level[vf], level[vg]
        if lf <= lg:
            top, lvl = vf, lf
        else:
            top, lvl = vg, lg
        f1, f0 = self._cofactors(f, lvl)
        g1, g0 = self._cofactors(g, lvl)
        return self.mk(top, op(f1, g1), op(f0, g0))

    def ite(self, f: int, g: int, h: int) -> int:
        """If `f` then `g` else `h`."""
        for u in (f, g, h):
            self._check(u)
        return self._ite(f, g, h)

    def _ite(self, f, g, h):
        if f == TRUE:
            return g
        if f == FALSE:
            return h
        if g == h:
            return g
        if g == TRUE and h == FALSE:
            return f
        if g == FALSE and h == TRUE:
            return self._not(f)
        if g == TRUE:
            return self._or(f, h)
        if h == FALSE:
            return self._and(f, g)
        key = (f, g, h)
        r = self._lookup('ite', key)
        if r is not None:
            return r
        level = self._level
        lvl = min(level[self._var[f]], level[self._var[g]], level[self._var[h]])
        top = self._var_at[lvl]
        f1, f0 = self._cofactors(f, lvl)
        g1, g0 = self._cofactors(g, lvl)
        h1, h0 = self._cofactors(h, lvl)
        r = self.mk(top, self._ite(f1, g1, h1), self._ite(f0, g0, h0))
        self._store('ite', key, r)
        return r

    def conjoin(self, us: Iterable[int]) -> int:
        r = TRUE
        for u in us:
            r = self.apply_and(r, u)
        return r

    def disjoin(self, us: Iterable[int]) -> int:
        """Disjunction, merged pairwise to keep intermediate results small."""
        items = list(us)
        for u in items:
            self._check(u)
        if not items:
            return FALSE
        while len(items) > 1:
            nxt = [self._or(a, b) for a, b in zip(items[::2], items[1::2])]
            if len(items) % 2:
                nxt.append(items[-1])
            items = nxt
        return items[0]

    # ------------------------------------------------------------------
    # cofactors, evaluation, satisfiability

    def restrict(self, f: int, v: int | str, value: bool) -> int:
        """Cofactor of `f` with variable `v` fixed to `value`."""
        self._check(f)
        v = self.var_id(v)
        target = self._level[v]
        memo: dict[int, int] = {}

        def rec(u):
            lu = self._level[self._var[u]]
            if lu > target:
                return u
            if lu == target:
                return self._hi[u] if value else self._lo[u]
            r = memo.get(u)
            if r is None:
                r = self.compose_var(self._var[u], rec(self._hi[u]), rec(self._lo[u]))
                memo[u] = r
            return r

        return rec(f)

    def restrict_many(self, f: int, values: Mapping[int | str, bool]) -> int:
        for v, b in values.items():
            f = self.restrict(f, v, b)
        return f

    def eval(self, f: int, assignment) -> bool:
        """Truth value of `f` under `assignment`.

        `assignment` is a mapping from variable ids or names to bools, or a
        sequence indexed by variable id. Only variables on the traversed
        path are consulted.
        """
        self._check(f)
        u = f
        var, hi, lo, names = self._var, self._hi, self._lo, self.var_names
        is_map = isinstance(assignment, Mapping)
        while u > TRUE:
            v = var[u]
            if is_map:
                if v in assignment:
                    b = assignment[v]
                elif names[v] in assignment:
                    b = assignment[names[v]]
                else:
                    raise MissingAssignmentError(names[v])
            else:
                try:
                    b = assignment[v]
                except IndexError:
                    raise MissingAssignmentError(names[v]) from None
            u = hi[u] if b else lo[u]
        return u == TRUE

    def arrays(self):
        """Numpy snapshot ``(var, then, else)`` of the node store.

        Cached until the store changes. Freed slots carry an out-of-range var.
        """
        if self._snapshot is None or self._snapshot[0] != self._version:
            arrs = (
                np.asarray(self._var, dtype=np.int32),
                np.asarray(self._hi, dtype=np.int64),
                np.asarray(self._lo, dtype=np.int64))
            self._snapshot = (self._version, arrs)
        return self._snapshot[1]

    def eval_many(self, f: int, bits: np.ndarray) -> np.ndarray:
        """Vectorized `eval` over the rows of a ``(n, n_vars)`` 0/1 array."""
        self._check(f)
        bits = np.asarray(bits)
        var, hi, lo = self.arrays()
        cur = np.full(len(bits), f, dtype=np.int64)
        active = np.arange(len(bits)) if f > TRUE else np.arange(0)
        while active.size:
            u = cur[active]
            b = bits[active, var[u]].astype(bool)
            cur[active] = np.where(b, hi[u], lo[u])
            active = active[cur[active] > TRUE]
        return cur == TRUE

    def sat_count(self, f: int, n_vars: int | None = None) -> int:
        """Number of satisfying assignments over `n_vars` variables.

        The support of `f` must fit within the counted variables; by
        default every declared variable is counted.
        """
        self._check(f)
        n = len(self.var_names)
        if n_vars is None:
            n_vars = n
        if n_vars < len(self.support(f)):
            raise ValueError(f'{n_vars} variables cannot cover the support of {f}')
        level = self._level
        memo = {FALSE: 0, TRUE: 1}

        def rec(u):
            r = memo.get(u)
            if r is None:
                lu = level[self._var[u]]
                h, l = self._hi[u], self._lo[u]
                r = (rec(h) << (level[self._var[h]] - lu - 1)) + (
                    rec(l) << (level[self._var[l]] - lu - 1))
                memo[u] = r
            return r

        total = rec(f) << level[self._var[f]]
        if n_vars >= n:
            return total << (n_vars - n)
        return total >> (n - n_vars)

    def pick_sat(self, f: int) -> dict[int, bool] | None:
        """One satisfying total assignment, or None when `f` is FALSE.

        Walks from the root preferring then-branches; variables off the
        path are set to False.
        """
        self._check(f)
        if f == FALSE:
            return None
        out = {v: False for v in range(len(self.var_names))}
        u = f
        while u > TRUE:
            if self._hi[u] != FALSE:
                out[self._var[u]] = True
                u = self._hi[u]
            else:
                u = self._lo[u]
        return out

    def support(self, f: int) -> set[int]:
        self._check(f)
        return {self._var[u] for u in self.descendants([f])}

    def descendants(self, roots: Iterable[int]) -> set[int]:
        """Internal nodes reachable from `roots`."""
        seen: set[int] = set()
        stack = [u for u in roots if u > TRUE]
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            for c in (self._hi[u], self._lo[u]):
                if c > TRUE and c not in seen:
                    stack.append(c)
        return seen

    def node_count(self, f: int) -> int:
        """Internal nodes reachable from `f`; terminals are not counted."""
        self._check(f)
        return len(self.descendants([f]))

    def dag_size(self, roots: Iterable[int]) -> int:
        """Shared node count of several roots."""
        roots = list(roots)
        for u in roots:
            self._check(u)
        return len(self.descendants(roots))

    def level_sizes(self) -> list[int]:
        """Stored node count per level."""
        return [len(self._unique[v]) for v in self._var_at]

    def assert_consistent(self):
        """Check reduction, ordering and unique-table invariants."""
        n = len(self.var_names)
        count = 0
        for v, table in enumerate(self._unique):
            for key, u in table.items():
                count += 1
                h, l = self._hi[u], self._lo[u]
                assert self._var[u] == v, (u, v)
                assert key == (h << _SHIFT) | l, u
                assert h != l, f'redundant node {u}'
                assert self._level[v] < self.level(h), f'order violated at {u}'
                assert self._level[v] < self.level(l), f'order violated at {u}'
        assert count == self._n_nodes
        assert sorted(self._var_at) == list(range(n))
        for level, v in enumerate(self._var_at):
            assert self._level[v] == level
