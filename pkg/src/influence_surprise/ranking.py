"""Rank tables and rank correlation between score tables.

A node's count ``g`` is the number of nodes (itself included) whose score is
greater than or equal to its own; its relative position is ``x = g / n``.
Small ``x`` is the top of the ranking: for scores ``a3 > a1 > a2`` we get
``x(a3) = 1/3``, ``x(a1) = 2/3`` and ``x(a2) = 1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.stats import rankdata

from .centrality import ScoreTable


class RankingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RankTable:
    t: int
    measure: str
    nodes: np.ndarray
    g: np.ndarray
    n: int
    labels: tuple[str, ...] = ()

    @property
    def x(self) -> np.ndarray:
        return self.g / self.n

    def g_of(self, label: str) -> int:
        return int(self.g[self._pos(label)])

    def x_of(self, label: str) -> Fraction:
        return Fraction(self.g_of(label), self.n)

    def _pos(self, label: str) -> int:
        idx = self.labels.index(label)
        pos = int(np.searchsorted(self.nodes, idx))
        if pos >= self.nodes.size or self.nodes[pos] != idx:
            raise KeyError(label)
        return pos

    def as_dict(self) -> dict[str, int]:
        return {self.labels[i]: int(v) for i, v in zip(self.nodes.tolist(), self.g)}

    def x_dict(self) -> dict[str, Fraction]:
        return {self.labels[i]: Fraction(int(v), self.n) for i, v in zip(self.nodes.tolist(), self.g)}


def rank(scores: ScoreTable) -> RankTable:
    """g_i = |{j : s_j >= s_i}|, compared exactly (no epsilon)."""
    s = np.asarray(scores.scores, dtype=np.float64)
    if s.size == 0:
        raise RankingError("cannot rank an empty score table")
    if np.isnan(s).any():
        raise RankingError(f"NaN score in {scores.measure} table at t={scores.t}")
    ordered = np.sort(s)
    g = s.size - np.searchsorted(ordered, s, side="left")
    return RankTable(scores.t, scores.measure, scores.nodes, g.astype(np.int64), int(s.size), scores.labels)


def _paired(r1: ScoreTable, r2: ScoreTable) -> tuple[np.ndarray, np.ndarray]:
    l1 = [r1.labels[i] for i in r1.nodes.tolist()]
    l2 = [r2.labels[i] for i in r2.nodes.tolist()]
    if l1 == l2:
        return np.asarray(r1.scores, dtype=np.float64), np.asarray(r2.scores, dtype=np.float64)
    if set(l1) != set(l2) or len(l1) != len(l2):
        raise RankingError("score tables cover different node sets")
    pos = {label: k for k, label in enumerate(l2)}
    order = np.array([pos[label] for label in l1])
    return np.asarray(r1.scores, dtype=np.float64), np.asarray(r2.scores, dtype=np.float64)[order]


def _tie_pairs(values: np.ndarray) -> int:
    _, counts = np.unique(values, return_counts=True, axis=0)
    return int((counts * (counts - 1) // 2).sum())


def _count_inversions(seq: np.ndarray) -> int:
    """Pairs i < j with seq[i] > seq[j], via a Fenwick tree over dense ranks."""
    dense = np.unique(seq, return_inverse=True)[1].ravel() + 1
    size = int(dense.max()) if dense.size else 0
    tree = [0] * (size + 1)
    inversions = 0
    seen = 0
    for v in dense.tolist():
        # elements already seen that are <= v
        k, le = v, 0
        while k > 0:
            le += tree[k]
            k -= k & -k
        inversions += seen - le
        k = v
        while k <= size:
            tree[k] += 1
            k += k & -k
        seen += 1
    return inversions


def kendall_counts(x: np.ndarray, y: np.ndarray) -> tuple[int, int, int, int, int]:
    """Return (concordant - discordant, n0, x-tied pairs, y-tied pairs, joint ties)."""
    n = x.size
    n0 = n * (n - 1) // 2
    order = np.lexsort((y, x))
    discordant = _count_inversions(y[order])
    n1 = _tie_pairs(x)
    n2 = _tie_pairs(y)
    n3 = _tie_pairs(np.column_stack([x, y]))
    concordant = n0 - n1 - n2 + n3 - discordant
    return concordant - discordant, n0, n1, n2, n3


def kendall_tau(r1: ScoreTable, r2: ScoreTable) -> float:
    """Kendall's tau-b between two score tables over the same nodes."""
    x, y = _paired(r1, r2)
    diff, n0, n1, n2, _ = kendall_counts(x, y)
    if n0 - n1 == 0 or n0 - n2 == 0:
        raise RankingError("tau-b undefined: one table has all scores equal")
    return diff / math.sqrt((n0 - n1) * (n0 - n2))


def spearman_rho(r1: ScoreTable, r2: ScoreTable) -> float:
    """Pearson correlation of mid-ranks (ties share their average rank)."""
    x, y = _paired(r1, r2)
    rx = rankdata(x, method="average") - (x.size + 1) / 2.0
    ry = rankdata(y, method="average") - (y.size + 1) / 2.0
    sxx = float(rx @ rx)
    syy = float(ry @ ry)
    if sxx == 0.0 or syy == 0.0:
        raise RankingError("Spearman undefined: one table has all scores equal")
    return float(rx @ ry) / math.sqrt(sxx * syy)


@dataclass(frozen=True)
class CorrelationRow:
    dataset: str
    snapshot: int
    kendall: float | None
    spearman: float | None


def correlation_row(dataset: str, a: ScoreTable, b: ScoreTable) -> CorrelationRow:
    """Correlations for one snapshot; undefined coefficients become ``None``."""
    try:
        tau = kendall_tau(a, b)
    except RankingError:
        tau = None
    try:
        rho = spearman_rho(a, b)
    except RankingError:
        rho = None
    return CorrelationRow(dataset, a.t, tau, rho)


def write_correlations(rows: Iterable[CorrelationRow], path: str | Path, header: str = "") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header:
            fh.write(header + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset", "snapshot", "kendall", "spearman"])
        for r in rows:
            writer.writerow([
                r.dataset, r.snapshot,
                "" if r.kendall is None else repr(r.kendall),
                "" if r.spearman is None else repr(r.spearman),
            ])
