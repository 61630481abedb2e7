"""Per-snapshot node scores: weighted PageRank and Disruption."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .temporal_graph import GraphSnapshot

MEASURES = ("pagerank", "disruption")


class CentralityError(ValueError):
    pass


@dataclass(frozen=True)
class PagerankConfig:
    damping: float = 0.85
    tolerance: float = 1e-10
    max_iterations: int = 10_000

    def __post_init__(self):
        if not 0.0 < self.damping < 1.0:
            raise ValueError(f"damping must lie in (0, 1), got {self.damping}")
        if not self.tolerance > 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")


@dataclass(frozen=True, eq=False)
class ScoreTable:
    """Scores for every node of one snapshot under one measure.

    ``nodes`` are global node indices in ascending order, aligned with
    ``scores``. ``converged``/``iterations`` are only meaningful for PageRank.
    """

    t: int
    measure: str
    nodes: np.ndarray
    scores: np.ndarray
    labels: tuple[str, ...] = ()
    converged: bool = True
    iterations: int = 0

    def __len__(self) -> int:
        return int(self.nodes.size)

    def as_dict(self) -> dict[str, float]:
        return {self.labels[n]: float(s) for n, s in zip(self.nodes.tolist(), self.scores)}

    def score_of(self, label: str) -> float:
        idx = self.labels.index(label)
        pos = np.searchsorted(self.nodes, idx)
        if pos >= self.nodes.size or self.nodes[pos] != idx:
            raise KeyError(label)
        return float(self.scores[pos])

    @classmethod
    def from_mapping(cls, scores: dict[str, float], t: int = 0, measure: str = "pagerank") -> "ScoreTable":
        """Build a table from label -> score, labels indexed in sorted order."""
        labels = tuple(sorted(scores))
        return cls(
            t, measure, np.arange(len(labels), dtype=np.int64),
            np.array([scores[k] for k in labels], dtype=np.float64), labels,
        )


def _require_nonempty(snapshot: GraphSnapshot) -> None:
    if snapshot.n_nodes == 0:
        raise CentralityError(f"snapshot t={snapshot.t} is empty")


def pagerank(snapshot: GraphSnapshot, config: PagerankConfig = PagerankConfig()) -> ScoreTable:
    """Weighted PageRank by power iteration.

    The walker leaves a node along an out-edge with probability proportional
    to the edge weight, teleports uniformly with probability ``1 - damping``,
    and dangling nodes spread their mass uniformly. Iteration stops when the
    L1 change drops below ``config.tolerance``; otherwise the table comes
    back with ``converged=False``.
    """
    _require_nonempty(snapshot)
    nodes = snapshot.nodes
    n = nodes.size
    src = np.searchsorted(nodes, snapshot.src)
    dst = np.searchsorted(nodes, snapshot.dst)
    w = snapshot.weight.astype(np.float64)
    out_weight = np.bincount(src, weights=w, minlength=n)
    # Column-stochastic transpose: P[dst, src] = w / out_weight[src].
    P = sparse.csr_matrix((w / out_weight[src], (dst, src)), shape=(n, n))
    dangling = out_weight == 0.0
    d = config.damping

    x = np.full(n, 1.0 / n)
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        nxt = d * (P @ x) + (d * x[dangling].sum() + (1.0 - d)) / n
        nxt /= nxt.sum()
        delta = np.abs(nxt - x).sum()
        x = nxt
        if delta < config.tolerance:
            converged = True
            break
    return ScoreTable(snapshot.t, "pagerank", nodes, x, snapshot.index.labels, converged, it)


def _disruption_counts(snapshot: GraphSnapshot, focal: int) -> tuple[int, int, int]:
    influences = snapshot.out_sets.get(focal, frozenset())
    citers = snapshot.in_sets.get(focal, frozenset())
    out_sets = snapshot.out_sets
    n_only = n_both = 0
    for c in citers:
        if out_sets[c].isdisjoint(influences):
            n_only += 1
        else:
            n_both += 1
    in_sets = snapshot.in_sets
    touching: set[int] = set()
    for i in influences:
        touching.update(in_sets.get(i, ()))
    touching.discard(focal)
    n_bypass = len(touching - citers)
    return n_only, n_both, n_bypass


def _disruption_value(counts: tuple[int, int, int], include_bypass: bool) -> float:
    n_only, n_both, n_bypass = counts
    denom = n_only + n_both + (n_bypass if include_bypass else 0)
    if denom == 0:
        return 0.0
    return (n_only - n_both) / denom


def disruption(snapshot: GraphSnapshot, focal: str, include_bypass: bool = True) -> float:
    """Disruption of ``focal`` in [-1, 1].

    Among the focal node's citers, those citing none of its influences count
    for it and those citing at least one count against it. Nodes that cite
    an influence but not the focal node (the bypass group) only enlarge the
    denominator, and only when ``include_bypass`` is set. Edge weights are
    ignored; a zero denominator gives 0.
    """
    if focal not in snapshot:
        raise CentralityError(f"node {focal!r} not present at t={snapshot.t}")
    return _disruption_value(_disruption_counts(snapshot, snapshot.index[focal]), include_bypass)


def disruption_all(snapshot: GraphSnapshot, include_bypass: bool = True) -> ScoreTable:
    _require_nonempty(snapshot)
    scores = np.array(
        [_disruption_value(_disruption_counts(snapshot, int(n)), include_bypass) for n in snapshot.nodes],
        dtype=np.float64,
    )
    return ScoreTable(snapshot.t, "disruption", snapshot.nodes, scores, snapshot.index.labels)


def score(snapshot: GraphSnapshot, measure: str, pagerank_config: PagerankConfig = PagerankConfig(),
          include_bypass: bool = True) -> ScoreTable:
    if measure == "pagerank":
        return pagerank(snapshot, pagerank_config)
    if measure == "disruption":
        return disruption_all(snapshot, include_bypass)
    raise CentralityError(f"unknown measure {measure!r}; expected one of {MEASURES}")


def write_score_table(table: ScoreTable, path: str | Path, header: str = "") -> None:
    """CSV ``node,score`` ordered by node label, after a ``#`` metadata line."""
    rows = sorted(zip((table.labels[n] for n in table.nodes.tolist()), table.scores.tolist()))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        meta = f"# snapshot={table.t} measure={table.measure}"
        if table.measure == "pagerank":
            meta += f" converged={str(table.converged).lower()} iterations={table.iterations}"
        fh.write((header + " " if header else "# ") + meta[2:] + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node", "score"])
        for label, s in rows:
            writer.writerow([label, repr(float(s))])


def read_score_table(path: str | Path) -> ScoreTable:
    meta: dict[str, str] = {}
    scores: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            break
        reader = csv.DictReader([line] + fh.readlines())
        for row in reader:
            scores[row["node"]] = float(row["score"])
    return ScoreTable.from_mapping(scores, int(meta.get("snapshot", 0)), meta.get("measure", "pagerank"))
