import numpy as np
import pytest

from bigrw.graph import from_arrays, from_edge_list


@pytest.fixture
def triangle():
    return from_edge_list([(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], directed=False)


@pytest.fixture
def chain():
    return from_edge_list([("a", "b"), ("b", "c")], directed=True)


def random_graph(n, mean_degree, rng, directed=True):
    """Directed graph where every node gets at least one out-arc (no dangling nodes)."""
    src, dst = [], []
    p = mean_degree / (n - 1)
    for u in range(n):
        nbrs = [v for v in range(n) if v != u and rng.random() < p]
        if not nbrs:
            nbrs = [int(rng.choice([v for v in range(n) if v != u]))]
        src += [u] * len(nbrs)
        dst += nbrs
    w = rng.uniform(0.5, 2.0, len(src))
    return from_arrays(n, np.array(src), np.array(dst), w, directed=directed)


_acceptance = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "acceptance" in report.keywords:
        detail = dict(report.user_properties).get("detail", "")
        if report.failed and not detail:
            detail = str(report.longrepr).strip().splitlines()[-1]
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome, detail))
    elif report.when == "setup" and report.outcome != "passed" and "acceptance" in report.keywords:
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome, ""))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, detail in _acceptance:
        tag = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"{tag}  {name}  {detail}")
