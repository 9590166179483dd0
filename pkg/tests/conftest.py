import itertools
import random

import pytest

from tablebdd.bdd import Manager


def truth_table(m, f, n):
    return tuple(m.eval(f, bits) for bits in itertools.product((0, 1), repeat=n))


def random_function(m, rng, n_vars, n_terms=None):
    """Random DNF over the first `n_vars` declared variables."""
    if n_terms is None:
        n_terms = rng.randint(0, 6)
    f = 0
    for _ in range(n_terms):
        lits = {
            v: rng.random() < 0.5
            for v in rng.sample(range(n_vars), rng.randint(1, n_vars))}
        f = m.apply_or(f, m.cube(lits))
    return f


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def fig3():
    """Manager over x, y, z holding f = (x and y) or (y and z)."""
    m = Manager(['x', 'y', 'z'])
    x, y, z = m.var('x'), m.var('y'), m.var('z')
    f = m.apply_or(m.apply_and(x, y), m.apply_and(y, z))
    return m, f


# ----------------------------------------------------------------------
# acceptance summary: one line per criterion

CRITERIA = {
    1: 'exactness (reduced grid exhaustive, full grid sampled)',
    2: 'partition (20 seeds, corrupted root witness)',
    3: 'complement identity',
    4: 'selector semantics before and after sifting',
    5: 'reordering (monotone, small example optimum, exhaustive equality, median reduction)',
    6: 'Gray coding (adjacency, round trip)',
    7: 'verification soundness (200 instances, constructed fixtures)',
    8: 'emitted evaluator (compiled vs in-process, deterministic emission)',
    9: 'serialization (round trip, malformed files)',
    10: 'benchmark protocol (10^7 queries, order statistics, agreement)',
}
_outcomes: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line('markers', 'criterion(n): acceptance criterion number')


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker('criterion')
    if marker is None:
        return
    if report.when == 'call' or (report.when == 'setup' and not report.passed):
        _outcomes.setdefault(marker.args[0], []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section('acceptance criteria')
    for n, desc in CRITERIA.items():
        results = _outcomes.get(n)
        if results is None:
            status = 'NOT RUN'
        else:
            status = 'PASS' if all(results) else 'FAIL'
        terminalreporter.write_line(f'criterion {n:2d}: {status:7s} {desc}')
