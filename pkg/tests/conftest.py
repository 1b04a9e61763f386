import itertools
from collections import defaultdict

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> str:
    line = f"ACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE[number] = line
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])


def brute_stats(sizes, edges):
    """Degree statistics recounted from the raw edge list, without the library's CSR."""
    part = []
    for i, s in enumerate(sizes):
        part += [i] * s
    per = defaultdict(int)
    deg = defaultdict(int)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
        per[(u, part[v])] += 1
        per[(v, part[u])] += 1
    k = len(sizes)
    n_total = sum(sizes)
    pmd = min(
        (per[(v, j)] for v in range(n_total) for j in range(k) if j != part[v]),
        default=0,
    )
    return {
        "max_degree": max(deg.values(), default=0),
        "local_degree": max(per.values(), default=0),
        "partite_min_degree": pmd if k >= 2 else 0,
    }


def brute_transversals(sizes, edges):
    """All independent transversals by itertools.product."""
    es = {frozenset(e) for e in edges}
    offs = list(itertools.accumulate([0] + list(sizes)))
    out = []
    for combo in itertools.product(*[range(offs[i], offs[i + 1]) for i in range(len(sizes))]):
        if all(frozenset((a, b)) not in es for a, b in itertools.combinations(combo, 2)):
            out.append(combo)
    return out


@pytest.fixture
def tmp_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path
