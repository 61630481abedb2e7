import numpy as np
import pytest

from influence_surprise.temporal_graph import GraphSnapshot, NodeIndex


def random_digraph(rng: np.random.Generator, n: int, p: float, weighted: bool = True):
    """Random simple digraph without self-loops as (src, dst, weight) triples."""
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    src, dst = np.nonzero(mask)
    w = rng.integers(1, 10, size=src.size) if weighted else np.ones(src.size, dtype=int)
    return list(zip(src.tolist(), dst.tolist(), w.tolist()))


def snapshot_from_edges(n: int, edges, t: int = 0) -> GraphSnapshot:
    index = NodeIndex(f"v{i:03d}" for i in range(n))
    if edges:
        s, d, w = (np.array(c) for c in zip(*edges))
    else:
        s = d = w = np.empty(0, dtype=np.int64)
    return GraphSnapshot(t, index, s, d, w)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Five nodes over four yearly snapshots; D enters in 2001 and E in 2002.
FIXTURE_ROWS = [
    ("B", "A", 2000), ("C", "A", 2000), ("C", "B", 2000),
    ("D", "B", 2001), ("D", "C", 2001),
    ("E", "D", 2002), ("E", "A", 2002), ("B", "D", 2002),
    ("A", "E", 2003), ("C", "E", 2003), ("D", "E", 2003), ("B", "E", 2003),
]


def fixture_series():
    from influence_surprise.temporal_graph import SnapshotConfig, TemporalEdgeList, build_snapshots

    return build_snapshots(TemporalEdgeList.from_rows(FIXTURE_ROWS), SnapshotConfig(1, 2000, 2003))


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
