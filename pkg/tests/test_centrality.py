import numpy as np
import pytest

from conftest import random_digraph, snapshot_from_edges
from influence_surprise.centrality import (
    CentralityError,
    PagerankConfig,
    disruption,
    disruption_all,
    pagerank,
    read_score_table,
    write_score_table,
)
from oracles import brute_disruption, dense_pagerank


def test_cycle_is_uniform():
    table = pagerank(snapshot_from_edges(3, [(0, 1, 1), (1, 2, 1), (2, 0, 1)]))
    assert np.allclose(table.scores, 1 / 3, atol=1e-12, rtol=0)
    assert table.converged


def test_two_node_dangling_matches_oracle():
    table = pagerank(snapshot_from_edges(2, [(0, 1, 1)]))
    oracle = dense_pagerank(2, [(0, 1, 1.0)])
    # closed form: x_A = 20/57, x_B = 37/57
    assert np.allclose(oracle, [20 / 57, 37 / 57], atol=1e-14, rtol=0)
    assert np.allclose(table.scores, oracle, atol=1e-10, rtol=0)


def test_weight_proportional_transitions():
    table = pagerank(snapshot_from_edges(3, [(0, 1, 3), (0, 2, 1)]))
    oracle = dense_pagerank(3, [(0, 1, 3.0), (0, 2, 1.0)])
    assert np.allclose(table.scores, oracle, atol=1e-10, rtol=0)
    assert table.score_of("v001") > table.score_of("v002")


def test_random_graphs_match_dense_oracle(rng):
    for _ in range(10):
        n = int(rng.integers(2, 80))
        edges = random_digraph(rng, n, float(rng.uniform(0.01, 0.2)))
        if not edges:
            continue
        snap = snapshot_from_edges(n, edges)
        table = pagerank(snap)
        oracle = dense_pagerank(n, edges)[table.nodes]
        oracle /= oracle.sum()  # isolated indices are not part of the snapshot
        if table.nodes.size == n:
            assert np.max(np.abs(table.scores - oracle)) <= 1e-8
        assert abs(table.scores.sum() - 1) <= 1e-9


def test_weight_scaling_invariance(rng):
    edges = random_digraph(rng, 40, 0.1)
    a = pagerank(snapshot_from_edges(40, edges))
    b = pagerank(snapshot_from_edges(40, [(s, d, 7 * w) for s, d, w in edges]))
    assert np.max(np.abs(a.scores - b.scores)) <= 1e-10


def test_nonconvergence_flagged():
    table = pagerank(snapshot_from_edges(3, [(0, 1, 1), (1, 2, 1)]), PagerankConfig(max_iterations=2))
    assert not table.converged
    assert table.iterations == 2


def test_empty_snapshot_errors():
    with pytest.raises(CentralityError):
        pagerank(snapshot_from_edges(0, []))
    with pytest.raises(CentralityError):
        disruption_all(snapshot_from_edges(0, []))


@pytest.mark.parametrize("kwargs", [{"damping": 1.0}, {"damping": 0.0}, {"tolerance": 0}, {"max_iterations": 0}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        PagerankConfig(**kwargs)


# node ids: focal=0, x=1, y=2, z=3
def test_disruption_isolated_citers():
    snap = snapshot_from_edges(4, [(1, 0, 1), (2, 0, 1), (0, 3, 1)])
    assert disruption(snap, "v000") == 1.0


def test_disruption_consolidating_citers():
    snap = snapshot_from_edges(4, [(1, 0, 1), (2, 0, 1), (0, 3, 1), (1, 3, 1), (2, 3, 1)])
    assert disruption(snap, "v000") == -1.0


def test_disruption_bypass_variants():
    # w (4) cites the influence z only: bypass group
    snap = snapshot_from_edges(5, [(1, 0, 1), (0, 3, 1), (4, 3, 1)])
    assert disruption(snap, "v000") == 0.5
    assert disruption(snap, "v000", include_bypass=False) == 1.0


def test_disruption_zero_denominator():
    snap = snapshot_from_edges(2, [(0, 1, 1)])
    assert disruption(snap, "v000") == 0.0


def test_disruption_absent_node():
    snap = snapshot_from_edges(3, [(0, 1, 1)])
    with pytest.raises(CentralityError):
        disruption(snap, "v002")


def test_disruption_all_coverage():
    table = disruption_all(snapshot_from_edges(2, [(0, 1, 1)]))
    assert set(table.as_dict()) == {"v000", "v001"}


@pytest.mark.parametrize("include_bypass", [True, False])
def test_disruption_matches_brute_force(rng, include_bypass):
    for n in (20, 30):
        edges = random_digraph(rng, n, 0.12, weighted=False)
        snap = snapshot_from_edges(n, edges)
        pairs = {(s, d) for s, d, _ in edges}
        table = disruption_all(snap, include_bypass)
        for node, value in zip(table.nodes.tolist(), table.scores):
            assert value == brute_disruption(n, pairs, node, include_bypass)
            assert value == disruption(snap, f"v{node:03d}", include_bypass)
            assert -1.0 <= value <= 1.0


def test_disruption_monotone_in_new_citers(rng):
    edges = random_digraph(rng, 25, 0.1, weighted=False)
    base = snapshot_from_edges(27, edges)
    for focal in range(25):
        influences = [d for s, d, _ in edges if s == focal]
        before = disruption(base, f"v{focal:03d}") if base.has_node(focal) else None
        if before is None:
            continue
        isolated = snapshot_from_edges(27, edges + [(25, focal, 1)])
        assert disruption(isolated, f"v{focal:03d}") >= before
        if influences:
            both = snapshot_from_edges(27, edges + [(26, focal, 1), (26, influences[0], 1)])
            assert disruption(both, f"v{focal:03d}") <= before


def test_score_table_csv_round_trip(tmp_path, rng):
    edges = random_digraph(rng, 15, 0.2)
    table = pagerank(snapshot_from_edges(15, edges, t=1999))
    path = tmp_path / "s.csv"
    write_score_table(table, path, "# tool=x")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# tool=x snapshot=1999 measure=pagerank")
    assert lines[1] == "node,score"
    assert [l.split(",")[0] for l in lines[2:]] == sorted(table.as_dict())
    back = read_score_table(path)
    assert back.t == 1999 and back.measure == "pagerank"
    assert back.as_dict() == table.as_dict()
