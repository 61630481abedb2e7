"""Synthetic growing influence networks with an optional citation burst.

Every step is one year. Step 1 seeds a random tree over the initial nodes;
at every step each new arrival cites ``edges_per_arrival`` distinct nodes
that existed before the step, chosen with probability proportional to
``(in_degree + 1) ** attachment_bias``. A shock adds ``burst_edges`` new
nodes at its step, each citing only the shock target.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .surprise import TrajectoryPoint
from .temporal_graph import EdgeEvent, TemporalEdgeList

RNG_NAME = "numpy.random.Generator(PCG64)"
SELECTORS = ("low", "median", "random")


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class Shock:
    """Burst of isolated citers at ``step``.

    ``target`` is a node label or a selector over nodes born by ``step - 2``:
    ``low`` (minimal in-degree), ``median`` (median in-degree) or ``random``.
    """

    step: int
    target: str = "low"
    burst_edges: int = 50


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    initial_nodes: int = 10
    steps: int = 10
    arrivals_per_step: int = 20
    edges_per_arrival: int = 2
    attachment_bias: float = 1.0
    shock: Shock | None = None
    start_year: int = 2000

    def __post_init__(self):
        if self.initial_nodes < 2:
            raise SynthError("initial_nodes must be >= 2")
        if self.steps < 3:
            raise SynthError("insufficient snapshots: steps must be >= 3")
        if self.arrivals_per_step < 1 or self.edges_per_arrival < 1:
            raise SynthError("arrivals_per_step and edges_per_arrival must be >= 1")
        if self.attachment_bias < 0:
            raise SynthError("attachment_bias must be >= 0")
        if self.edges_per_arrival > self.initial_nodes:
            raise SynthError(
                f"edge budget impossible: {self.edges_per_arrival} distinct targets per arrival "
                f"but only {self.initial_nodes} nodes exist at step 1"
            )
        if self.shock is not None:
            if not 2 <= self.shock.step <= self.steps:
                raise SynthError(f"shock step {self.shock.step} outside [2, {self.steps}]")
            if self.shock.burst_edges < 1:
                raise SynthError("burst_edges must be >= 1")

    def year(self, step: int) -> int:
        return self.start_year + step - 1

    def expected_nodes(self) -> int:
        burst = self.shock.burst_edges if self.shock else 0
        return self.initial_nodes + self.steps * self.arrivals_per_step + burst

    def expected_edges(self) -> int:
        burst = self.shock.burst_edges if self.shock else 0
        return self.initial_nodes - 1 + self.steps * self.arrivals_per_step * self.edges_per_arrival + burst

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        data = dict(data)
        if data.get("shock") is not None:
            data["shock"] = Shock(**data["shock"])
        return cls(**data)


@dataclass(frozen=True)
class SyntheticNetwork:
    config: SynthConfig
    edges: TemporalEdgeList
    shock_target: str | None = None
    shock_year: int | None = None
    target_prior_in_degree: int | None = None
    births: dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def metadata(self) -> dict:
        return {
            "generator": "influence_surprise.synth",
            "rng": RNG_NAME,
            "config": self.config.to_dict(),
            "nodes": self.config.expected_nodes(),
            "edges": self.config.expected_edges(),
            "shock_target": self.shock_target,
            "shock_year": self.shock_year,
            "target_prior_in_degree": self.target_prior_in_degree,
        }

    def metadata_json(self) -> str:
        return json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n"


def _label(i: int) -> str:
    return f"n{i:05d}"


def choose_targets(rng: np.random.Generator, in_degree: np.ndarray, k: int, bias: float) -> np.ndarray:
    """Draw ``k`` distinct indices with weight ``(in_degree + 1) ** bias``."""
    w = (in_degree + 1.0) ** bias
    return rng.choice(in_degree.size, size=k, replace=False, p=w / w.sum())


def _pick_target(rng, shock: Shock, in_degree, births, step, labels) -> int:
    if shock.target not in SELECTORS:
        if shock.target not in labels:
            raise SynthError(f"shock target {shock.target!r} does not exist before step {shock.step}")
        return labels[shock.target]
    # born early enough for every hypothesis to have history at the shock step
    oldest = max(1, step - 2)
    candidates = np.flatnonzero(births <= oldest)
    if shock.target == "random":
        return int(rng.choice(candidates))
    degs = in_degree[candidates]
    if shock.target == "low":
        return int(rng.choice(candidates[degs == degs.min()]))
    median = np.sort(degs)[(degs.size - 1) // 2]
    pool = candidates[degs == median]
    return int(rng.choice(pool))


def generate(config: SynthConfig) -> SyntheticNetwork:
    rng = np.random.Generator(np.random.PCG64(config.seed))
    total = config.initial_nodes + config.steps * config.arrivals_per_step
    in_degree = np.zeros(total, dtype=np.float64)
    births = np.zeros(total, dtype=np.int64)
    events: list[EdgeEvent] = []
    labels: dict[str, int] = {}

    year = config.year(1)
    for i in range(config.initial_nodes):
        labels[_label(i)] = i
        births[i] = 1
        if i:
            j = int(rng.integers(0, i))
            events.append(EdgeEvent(_label(i), _label(j), year))
            in_degree[j] += 1
    n_existing = config.initial_nodes

    target = target_label = target_deg = None
    for step in range(1, config.steps + 1):
        year = config.year(step)
        shock = config.shock if config.shock and config.shock.step == step else None
        if shock is not None:
            target = _pick_target(rng, shock, in_degree[:n_existing], births[:n_existing], step, labels)
            target_label = _label(target)
            target_deg = int(in_degree[target])
        pool = n_existing
        for a in range(config.arrivals_per_step):
            node = n_existing + a
            labels[_label(node)] = node
            births[node] = step
            for j in choose_targets(rng, in_degree[:pool], config.edges_per_arrival, config.attachment_bias):
                events.append(EdgeEvent(_label(node), _label(int(j)), year))
                in_degree[j] += 1
        n_existing += config.arrivals_per_step
        if shock is not None:
            for b in range(shock.burst_edges):
                events.append(EdgeEvent(f"burst{step:03d}-{b:05d}", target_label, year))
            in_degree[target] += shock.burst_edges

    edges = TemporalEdgeList.from_rows([(e.src, e.dst, e.time) for e in events])
    return SyntheticNetwork(
        config, edges, target_label,
        config.year(config.shock.step) if config.shock else None,
        target_deg,
        {label: int(births[i]) for label, i in labels.items()},
    )


@dataclass(frozen=True)
class ShockReport:
    target: str | None
    shock_t: int | None
    detectable: bool
    reason: str
    target_bits: float | None = None
    shock_step_rank: int | None = None
    applicable_steps: int = 0
    is_argmax: bool = False
    control_count: int = 0
    control_p90: float | None = None
    target_percentile: float | None = None
    exceeds_p90: bool = False
    control_argmax_fraction: float | None = None

    @property
    def detected(self) -> bool:
        """Shock step is the target's peak and beats 90% of controls."""
        return self.detectable and self.is_argmax and self.exceeds_p90

    def to_dict(self) -> dict:
        d = asdict(self)
        d["detected"] = self.detected
        return d


def _by_node(points: Sequence[TrajectoryPoint]) -> dict[str, list[TrajectoryPoint]]:
    out: dict[str, list[TrajectoryPoint]] = {}
    for p in points:
        out.setdefault(p.node, []).append(p)
    return out


def _step_rank(history: list[TrajectoryPoint], t: int) -> tuple[int, int]:
    """1-based rank of the total at ``t`` among applicable steps, and their count."""
    applicable = [p for p in history if not p.no_evidence]
    at = next(p.total_bits for p in applicable if p.t == t)
    return 1 + sum(p.total_bits > at for p in applicable), len(applicable)


def shock_report(points: Sequence[TrajectoryPoint], target: str | None, shock_t: int | None) -> ShockReport:
    """Where the target's shock-step surprise falls, against itself and the other nodes.

    Controls are every other node with evidence at the shock step.
    """
    if target is None or shock_t is None:
        return ShockReport(target, shock_t, False, "no shock injected")
    nodes = _by_node(points)
    history = nodes.get(target)
    if not history:
        return ShockReport(target, shock_t, False, "target absent from trajectories")
    at = next((p for p in history if p.t == shock_t), None)
    if at is None or at.no_evidence:
        return ShockReport(target, shock_t, False, "insufficient history")

    step_rank, n_steps = _step_rank(history, shock_t)
    controls = []
    control_argmax = 0
    for node, hist in nodes.items():
        if node == target:
            continue
        p = next((q for q in hist if q.t == shock_t), None)
        if p is None or p.no_evidence:
            continue
        controls.append(p.total_bits)
        control_argmax += _step_rank(hist, shock_t)[0] == 1
    if controls:
        arr = np.asarray(controls)
        p90 = float(np.percentile(arr, 90))
        pct = float((arr < at.total_bits).mean())
        frac = control_argmax / len(controls)
    else:
        p90 = pct = frac = None
    return ShockReport(
        target, shock_t, True, "ok", at.total_bits, step_rank, n_steps, step_rank == 1,
        len(controls), p90, pct, p90 is not None and at.total_bits > p90, frac,
    )
