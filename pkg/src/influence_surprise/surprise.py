"""Bayesian surprise of rank movement.

Each hypothesis turns a node's rank history into a Beta prior over its
relative position. The current observation (``g`` of ``n`` nodes at or above
it) updates the prior to ``Beta(alpha + g, beta + n - g)`` and the surprise
is ``KL(posterior || prior)`` in bits. Totals add up across hypotheses and
measures.

Hypotheses:

``past_rank``
    ``Beta(g[t-1], n[t-1] - g[t-1])``: the node keeps its previous position.
    Needs the node at t-1.
``regular_growth``
    alpha ``= g[t-1]**2 / g[t-2]``, beta ``= n[t-1] - alpha``: the last rate
    of change persists. Needs the node at t-1 and t-2.
``uniform``
    ``Beta(1, 1)``; opt-in, applies to every node including newcomers.

Degenerate parameters are clamped to at least ``clamp_epsilon``; the growth
prior's alpha is additionally capped at ``n[t-1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .centrality import MEASURES, PagerankConfig, score
from .ranking import RankTable, rank
from .special import digamma, log_beta
from .temporal_graph import SnapshotSeries

HYPOTHESES = ("past_rank", "regular_growth", "uniform")
DEFAULT_HYPOTHESES = ("past_rank", "regular_growth")
DEFAULT_EPS = 1e-6
_LN2 = math.log(2.0)


class SurpriseError(ValueError):
    pass


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0.0 and self.beta > 0.0):
            raise SurpriseError(f"Beta parameters must be positive, got ({self.alpha}, {self.beta})")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class Hypothesis:
    kind: str
    clamp_epsilon: float = DEFAULT_EPS

    def __post_init__(self):
        if self.kind not in HYPOTHESES:
            raise SurpriseError(f"unknown hypothesis {self.kind!r}; valid: {', '.join(HYPOTHESES)}")
        if not 0.0 < self.clamp_epsilon < 1.0:
            raise SurpriseError(f"clamp_epsilon must lie in (0, 1), got {self.clamp_epsilon}")

    @property
    def history(self) -> int:
        """Number of previous snapshots the prior needs."""
        return {"past_rank": 1, "regular_growth": 2, "uniform": 0}[self.kind]


def parse_hypotheses(names: str | Iterable[str], eps: float = DEFAULT_EPS) -> tuple[Hypothesis, ...]:
    if isinstance(names, str):
        names = [n for n in (p.strip() for p in names.split(",")) if n]
    hyps = tuple(Hypothesis(n, eps) for n in names)
    if not hyps:
        raise SurpriseError("hypothesis set is empty")
    return hyps


def posterior_update(prior: BetaParams, g: int, n: int) -> BetaParams:
    """Conjugate update with ``g`` successes out of ``n`` trials."""
    if not 1 <= g <= n:
        raise SurpriseError(f"need 1 <= g <= n, got g={g}, n={n}")
    return BetaParams(prior.alpha + g, prior.beta + (n - g))


def kl_beta_bits(pa, pb, qa, qb):
    """Vectorized KL(Beta(pa, pb) || Beta(qa, qb)) in bits."""
    pa, pb, qa, qb = (np.asarray(v, dtype=np.float64) for v in (pa, pb, qa, qb))
    with np.errstate(over="ignore", invalid="ignore"):
        nats = (
            log_beta(qa, qb) - log_beta(pa, pb)
            + (pa - qa) * digamma(pa)
            + (pb - qb) * digamma(pb)
            + (qa - pa + qb - pb) * digamma(pa + pb)
        )
    if not np.all(np.isfinite(nats)):
        bad = np.flatnonzero(~np.isfinite(np.atleast_1d(nats)))[0]
        params = [float(np.atleast_1d(np.broadcast_to(v, np.shape(nats)))[bad]) for v in (pa, pb, qa, qb)]
        raise SurpriseError(f"KL overflow for posterior Beta{tuple(params[:2])}, prior Beta{tuple(params[2:])}")
    # Rounding can leave identical distributions a hair below zero.
    bits = np.maximum(nats, 0.0) / _LN2
    return float(bits) if bits.ndim == 0 else bits


def kl_beta(p: BetaParams, q: BetaParams) -> float:
    """KL(p || q) in bits, with ``p`` the posterior and ``q`` the prior."""
    return kl_beta_bits(p.alpha, p.beta, q.alpha, q.beta)


def _check_rank(g: int, n: int) -> None:
    if not 1 <= g <= n:
        raise SurpriseError(f"need 1 <= g <= n, got g={g}, n={n}")


def past_rank_prior(g_prev: int, n_prev: int, eps: float = DEFAULT_EPS) -> BetaParams:
    _check_rank(g_prev, n_prev)
    return BetaParams(max(float(g_prev), eps), max(float(n_prev - g_prev), eps))


def regular_growth_prior(g_prev: int, g_prev2: int, n_prev: int, eps: float = DEFAULT_EPS) -> BetaParams:
    _check_rank(g_prev, n_prev)
    if g_prev2 < 1:
        raise SurpriseError(f"g at t-2 must be >= 1, got {g_prev2}")
    alpha = min(max(g_prev * g_prev / g_prev2, eps), float(n_prev))
    return BetaParams(alpha, max(n_prev - alpha, eps))


def _priors(kind: str, eps: float, g1, n1, g2):
    """Array form of the three prior constructors (history assumed present)."""
    g1 = np.asarray(g1, dtype=np.float64)
    n1 = np.asarray(n1, dtype=np.float64)
    if kind == "past_rank":
        return np.maximum(g1, eps), np.maximum(n1 - g1, eps)
    if kind == "regular_growth":
        alpha = np.minimum(np.maximum(g1 * g1 / np.asarray(g2, dtype=np.float64), eps), n1)
        return alpha, np.maximum(n1 - alpha, eps)
    return np.ones_like(g1), np.ones_like(g1)


@dataclass(frozen=True)
class SurpriseRecord:
    node: str
    t: int
    measure: str
    hypothesis: str
    prior: BetaParams | None
    posterior: BetaParams | None
    kl_bits: float | None
    applicable: bool


def _history_index(rank_history: Sequence[RankTable], t: int) -> int:
    for k, table in enumerate(rank_history):
        if table.t == t:
            return k
    raise SurpriseError(f"no rank table at t={t}")


def _lookup(table: RankTable, node: str) -> int | None:
    try:
        return table.g_of(node)
    except (KeyError, ValueError):
        return None


def node_surprise(
    rank_history: Sequence[RankTable],
    node: str,
    t: int,
    hypotheses: Iterable[Hypothesis] = (Hypothesis("past_rank"), Hypothesis("regular_growth")),
) -> list[SurpriseRecord]:
    """Surprise records for one node at time ``t`` under each hypothesis.

    ``rank_history`` is the ordered list of rank tables for one measure, one
    per non-empty snapshot; the table before ``t`` plays the role of t-1.
    """
    k = _history_index(rank_history, t)
    table = rank_history[k]
    g = _lookup(table, node)
    if g is None:
        raise SurpriseError(f"node {node!r} not present at t={t}")
    g1 = _lookup(rank_history[k - 1], node) if k >= 1 else None
    n1 = rank_history[k - 1].n if k >= 1 else None
    g2 = _lookup(rank_history[k - 2], node) if k >= 2 else None

    records = []
    for hyp in hypotheses:
        eps = hyp.clamp_epsilon
        if hyp.kind == "past_rank":
            prior = past_rank_prior(g1, n1, eps) if g1 is not None else None
        elif hyp.kind == "regular_growth":
            prior = regular_growth_prior(g1, g2, n1, eps) if g1 is not None and g2 is not None else None
        else:
            prior = BetaParams(1.0, 1.0)
        if prior is None:
            records.append(SurpriseRecord(node, t, table.measure, hyp.kind, None, None, None, False))
            continue
        post = posterior_update(prior, g, table.n)
        records.append(SurpriseRecord(node, t, table.measure, hyp.kind, prior, post, kl_beta(post, prior), True))
    return records


class SurpriseTotal(NamedTuple):
    bits: float
    no_evidence: bool


def total_surprise(records: Sequence[SurpriseRecord]) -> SurpriseTotal:
    """Sum of applicable ``kl_bits``; ``no_evidence`` when none applied."""
    keys = {(r.node, r.t) for r in records}
    if len(keys) > 1:
        raise SurpriseError(f"records span several (node, t) pairs: {sorted(keys)}")
    bits = [r.kl_bits for r in records if r.applicable]
    return SurpriseTotal(float(sum(bits)), not bits)


@dataclass(frozen=True)
class TrajectoryPoint:
    node: str
    t: int
    x: dict[str, float | None]
    kl_bits: dict[tuple[str, str], float | None]
    total_bits: float
    no_evidence: bool
    partial: bool = False
    g: dict[str, int | None] = field(default_factory=dict)

    @property
    def x_pagerank(self) -> float | None:
        return self.x.get("pagerank")

    @property
    def x_disruption(self) -> float | None:
        return self.x.get("disruption")


def rank_histories(
    series: SnapshotSeries,
    measures: Sequence[str] = MEASURES,
    pagerank_config: PagerankConfig = PagerankConfig(),
    include_bypass: bool = True,
):
    """Score and rank every non-empty snapshot.

    Returns ``(scores, ranks)``, each a dict measure -> list aligned with the
    non-empty snapshots of ``series``.
    """
    scores: dict[str, list] = {m: [] for m in measures}
    ranks: dict[str, list[RankTable]] = {m: [] for m in measures}
    for snap in series:
        if snap.n_nodes == 0:
            continue
        for m in measures:
            table = score(snap, m, pagerank_config, include_bypass)
            scores[m].append(table)
            ranks[m].append(rank(table))
    return scores, ranks


def trajectories_from_ranks(
    ranks: dict[str, Sequence[RankTable]],
    hypotheses: Sequence[Hypothesis] = (Hypothesis("past_rank"), Hypothesis("regular_growth")),
    partial_times: Iterable[int] = (),
) -> list[TrajectoryPoint]:
    """Vectorized surprise for every node at every snapshot, ordered by (node, t)."""
    measures = list(ranks)
    if not measures:
        raise SurpriseError("no measures given")
    first = ranks[measures[0]]
    if len(first) < 2:
        raise SurpriseError(f"need at least 2 non-empty snapshots, got {len(first)}")
    labels = first[-1].labels
    if any(t.labels is not labels and t.labels != labels for m in measures for t in ranks[m]):
        raise SurpriseError("rank tables do not share one node index")
    size = len(labels)
    partial_times = set(partial_times)

    # per measure, per snapshot: dense arrays over global node index
    x_cols: dict[str, list[np.ndarray]] = {}
    g_cols: dict[str, list[np.ndarray]] = {}
    kl_cols: dict[tuple[str, str], list[np.ndarray]] = {}
    for m in measures:
        tables = ranks[m]
        dense_g = []
        for table in tables:
            g = np.zeros(size, dtype=np.int64)
            g[table.nodes] = table.g
            dense_g.append(g)
        g_cols[m] = dense_g
        x_cols[m] = [dg / table.n for dg, table in zip(dense_g, tables)]
        for hyp in hypotheses:
            cols = []
            for k, table in enumerate(tables):
                kl = np.full(size, np.nan)
                g_now = dense_g[k]
                mask = g_now > 0
                if hyp.history >= 1:
                    mask &= (dense_g[k - 1] > 0) if k >= 1 else False
                if hyp.history >= 2:
                    mask &= (dense_g[k - 2] > 0) if k >= 2 else False
                if np.any(mask):
                    g1 = dense_g[k - 1][mask] if k >= 1 else np.ones(mask.sum())
                    n1 = np.full(g1.shape, tables[k - 1].n if k >= 1 else 1, dtype=np.float64)
                    g2 = dense_g[k - 2][mask] if k >= 2 else None
                    qa, qb = _priors(hyp.kind, hyp.clamp_epsilon, g1, n1, g2)
                    gt = g_now[mask].astype(np.float64)
                    pa, pb = qa + gt, qb + (table.n - gt)
                    kl[mask] = kl_beta_bits(pa, pb, qa, qb)
                cols.append(kl)
            kl_cols[(m, hyp.kind)] = cols

    times = [table.t for table in first]
    points = []
    present = np.zeros((len(times), size), dtype=bool)
    for m in measures:
        for k, dg in enumerate(g_cols[m]):
            present[k] |= dg > 0
    for idx in sorted(range(size), key=lambda i: labels[i]):
        for k, t in enumerate(times):
            if not present[k, idx]:
                continue
            x = {}
            g = {}
            for m in measures:
                gv = int(g_cols[m][k][idx])
                g[m] = gv or None
                x[m] = float(x_cols[m][k][idx]) if gv else None
            kl = {}
            total = 0.0
            evidence = False
            for key, cols in kl_cols.items():
                v = cols[k][idx]
                if np.isnan(v):
                    kl[key] = None
                else:
                    kl[key] = float(v)
                    total += float(v)
                    evidence = True
            points.append(TrajectoryPoint(labels[idx], t, x, kl, total, not evidence, t in partial_times, g))
    return points


def trajectories(
    series: SnapshotSeries,
    measures: Sequence[str] = MEASURES,
    hypotheses: Sequence[Hypothesis] = (Hypothesis("past_rank"), Hypothesis("regular_growth")),
    pagerank_config: PagerankConfig = PagerankConfig(),
    include_bypass: bool = True,
) -> list[TrajectoryPoint]:
    """Centrality -> rank -> surprise for every node and snapshot of ``series``."""
    nonempty = [s for s in series if s.n_nodes]
    if len(nonempty) < 2:
        raise SurpriseError(f"need at least 2 non-empty snapshots, got {len(nonempty)}")
    _, ranks = rank_histories(series, measures, pagerank_config, include_bypass)
    return trajectories_from_ranks(ranks, hypotheses, [s.t for s in series if s.partial])
