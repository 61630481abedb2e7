"""End-to-end runs: ingest, snapshot, score, rank, surprise, and artifact files.

Every artifact starts with a metadata line carrying the tool version and a
hash of the analysis configuration. Nothing time- or host-dependent is
written, so identical inputs and configs give byte-identical outputs.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .centrality import MEASURES, PagerankConfig, ScoreTable, read_score_table, write_score_table
from .ranking import correlation_row, rank, write_correlations
from .surprise import (
    HYPOTHESES,
    TrajectoryPoint,
    parse_hypotheses,
    rank_histories,
    trajectories_from_ranks,
)
from .synth import ShockReport, SynthConfig, SyntheticNetwork, generate, shock_report
from .temporal_graph import (
    SnapshotConfig,
    SnapshotSeries,
    SnapshotStats,
    TemporalEdgeList,
    build_snapshots,
    cache_key,
    file_digest,
    ingest_edge_list,
    load_series,
    save_series,
    snapshot_stats,
    write_edge_list,
)

logger = logging.getLogger(__name__)

TOOL = "influence-surprise"
TRAJECTORY_SCHEMA = "trajectories/1"


class ConfigError(ValueError):
    """Bad configuration or usage (exit code 1)."""


@dataclass(frozen=True)
class RunConfig:
    input: str | None = None
    delta: int = 1
    start: int | None = None
    end: int | None = None
    weighted: bool | None = None
    reverse_edges: bool = False
    delimiter: str | None = None
    damping: float = 0.85
    tolerance: float = 1e-10
    max_iterations: int = 10_000
    include_bypass: bool = True
    hypotheses: tuple[str, ...] = ("past_rank", "regular_growth")
    clamp_epsilon: float = 1e-6
    out_dir: str = "out"
    format: str = "csv"
    dataset: str | None = None
    svg_nodes: tuple[str, ...] = ()

    def validate(self) -> "RunConfig":
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}; expected csv or json")
        if not self.hypotheses:
            raise ConfigError("hypothesis set is empty")
        bad = [h for h in self.hypotheses if h not in HYPOTHESES]
        if bad:
            raise ConfigError(f"unknown hypothesis {bad[0]!r}; valid names: {', '.join(HYPOTHESES)}")
        if self.delta < 1:
            raise ConfigError("delta must be >= 1")
        try:
            self.pagerank_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def pagerank_config(self) -> PagerankConfig:
        return PagerankConfig(self.damping, self.tolerance, self.max_iterations)

    def analysis_fields(self) -> dict[str, Any]:
        """Fields that influence artifact contents (paths excluded)."""
        d = asdict(self)
        for key in ("input", "out_dir", "svg_nodes"):
            d.pop(key)
        d["hypotheses"] = list(self.hypotheses)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.analysis_fields(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def header(self, kind: str) -> str:
        return f"# tool={TOOL} version={__version__} config={self.config_hash()} artifact={kind}"


_BOOL = {"true": True, "yes": True, "1": True, "on": True,
         "false": False, "no": False, "0": False, "off": False}

# section -> key -> (RunConfig field, parser)
_FILE_KEYS = {
    "input": {"path": ("input", str), "weighted": ("weighted", "bool"),
              "reverse_edges": ("reverse_edges", "bool"), "delimiter": ("delimiter", str),
              "dataset": ("dataset", str)},
    "snapshots": {"delta": ("delta", int), "start": ("start", int), "end": ("end", int)},
    "pagerank": {"damping": ("damping", float), "tolerance": ("tolerance", float),
                 "max_iterations": ("max_iterations", int)},
    "disruption": {"include_bypass": ("include_bypass", "bool")},
    "surprise": {"hypotheses": ("hypotheses", "list"), "clamp_epsilon": ("clamp_epsilon", float)},
    "output": {"out_dir": ("out_dir", str), "format": ("format", str), "svg_nodes": ("svg_nodes", "list")},
}


def _parse_value(kind, raw: str):
    raw = raw.strip()
    if kind == "bool":
        if raw.lower() not in _BOOL:
            raise ConfigError(f"not a boolean: {raw!r}")
        return _BOOL[raw.lower()]
    if kind == "list":
        return tuple(p.strip() for p in raw.split(",") if p.strip())
    return kind(raw)


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Read an INI-style config (sections input, snapshots, pagerank, disruption, surprise, output)."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    out: dict[str, Any] = {}
    for section in parser.sections():
        keys = _FILE_KEYS.get(section)
        if keys is None:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in keys:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            name, kind = keys[key]
            try:
                out[name] = _parse_value(kind, raw)
            except ValueError as exc:
                raise ConfigError(f"{path}: [{section}] {key}: {exc}") from None
    return out


def make_config(file_values: dict[str, Any] | None = None, **overrides) -> RunConfig:
    """Defaults, then config-file values, then explicit overrides (flags win)."""
    values = dict(file_values or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    if isinstance(values.get("hypotheses"), str):
        values["hypotheses"] = tuple(h.strip() for h in values["hypotheses"].split(",") if h.strip())
    return RunConfig(**values).validate()


def load_edges(cfg: RunConfig) -> TemporalEdgeList:
    if not cfg.input:
        raise ConfigError("no input file given (--input)")
    return ingest_edge_list(cfg.input, delimiter=cfg.delimiter, weighted=cfg.weighted, reverse=cfg.reverse_edges)


def load_snapshots(cfg: RunConfig, use_cache: bool = True) -> tuple[TemporalEdgeList, SnapshotSeries]:
    edges = load_edges(cfg)
    snap_cfg = SnapshotConfig.covering(edges, cfg.delta, cfg.start, cfg.end)
    cache = Path(cfg.out_dir) / "snapshots.json"
    key = cache_key(file_digest(cfg.input), snap_cfg, cfg.reverse_edges, edges.weighted)
    if use_cache and cache.is_file():
        try:
            series = load_series(cache, key)
        except (ValueError, KeyError, json.JSONDecodeError):
            series = None
        if series is not None:
            logger.info("using snapshot cache %s", cache)
            return edges, series
    return edges, build_snapshots(edges, snap_cfg)


def _ensure_dir(path: str | Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_stats(stats: Sequence[SnapshotStats], path: Path, header: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(header + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "nodes", "edges", "total_weight", "partial"])
        for s in stats:
            writer.writerow([s.t, s.nodes, s.edges, s.total_weight, str(s.partial).lower()])


def run_snapshot(cfg: RunConfig) -> list[SnapshotStats]:
    """Ingest, build snapshots, write the stats table and the snapshot cache."""
    edges, series = load_snapshots(cfg, use_cache=False)
    out = _ensure_dir(cfg.out_dir)
    stats = snapshot_stats(series)
    key = cache_key(file_digest(cfg.input), series.config, cfg.reverse_edges, edges.weighted)
    save_series(series, out / "snapshots.json", key)
    write_stats(stats, out / "snapshot_stats.csv", cfg.header("snapshot_stats"))
    return stats


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def trajectory_fields(measures: Sequence[str], hypotheses: Sequence[str]) -> list[str]:
    cols = ["node", "t", "x_pagerank", "x_disruption"]
    cols += [f"kl_{m}_{h}" for m in MEASURES if m in measures for h in HYPOTHESES if h in hypotheses]
    return cols + ["total_bits", "flags"]


def trajectory_record(p: TrajectoryPoint, hypotheses: Sequence[str], measures: Sequence[str]) -> dict:
    rec: dict[str, Any] = {"node": p.node, "t": p.t, "x_pagerank": p.x_pagerank, "x_disruption": p.x_disruption}
    for m in MEASURES:
        if m not in measures:
            continue
        for h in HYPOTHESES:
            if h in hypotheses:
                rec[f"kl_{m}_{h}"] = p.kl_bits.get((m, h))
    flags = []
    if p.no_evidence:
        flags.append("no_evidence")
    if p.partial:
        flags.append("partial")
    rec["total_bits"] = p.total_bits
    rec["flags"] = ";".join(flags)
    return rec


def write_trajectories(points, path: Path, cfg: RunConfig, measures=MEASURES) -> None:
    cols = trajectory_fields(measures, cfg.hypotheses)
    records = [trajectory_record(p, cfg.hypotheses, measures) for p in points]
    if cfg.format == "json":
        doc = {
            "meta": {"tool": TOOL, "version": __version__, "config": cfg.config_hash(),
                     "schema": TRAJECTORY_SCHEMA, "settings": cfg.analysis_fields()},
            "fields": cols,
            "records": records,
        }
        path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(cfg.header("trajectories") + f" schema={TRAJECTORY_SCHEMA}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for rec in records:
            writer.writerow([_fmt(rec[c]) for c in cols])


def read_trajectories(path: str | Path) -> list[dict[str, Any]]:
    """Read a trajectory CSV or JSON file back into dict records."""
    path = Path(path)
    if path.suffix == ".json":
        return json.loads(path.read_text(encoding="utf-8"))["records"]
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        rec: dict[str, Any] = {}
        for k, v in row.items():
            if k in ("node", "flags"):
                rec[k] = v
            elif k == "t":
                rec[k] = int(v)
            else:
                rec[k] = float(v) if v != "" else None
        out.append(rec)
    return out


def write_positions(points, path: Path, header: str, measures=MEASURES) -> None:
    """Long-format (1 - x) position curves, one row per node, t and measure."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(header + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node", "t", "measure", "g", "x", "position"])
        for p in points:
            for m in measures:
                x = p.x.get(m)
                if x is None:
                    continue
                writer.writerow([p.node, p.t, m, p.g.get(m), repr(x), repr(1.0 - x)])


def write_scatter(points, path: Path, header: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(header + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node", "t", "x_pagerank", "x_disruption", "total_bits"])
        for p in points:
            writer.writerow([p.node, p.t, _fmt(p.x_pagerank), _fmt(p.x_disruption), repr(p.total_bits)])


def scatter_svg(node: str, points: Sequence[TrajectoryPoint], size: int = 320) -> str:
    """Connected scatter of (1 - x_pagerank, 1 - x_disruption), radius by surprise."""
    pad = 30
    span = size - 2 * pad
    pts = [p for p in points if p.x_pagerank is not None and p.x_disruption is not None]
    biggest = max((p.total_bits for p in pts), default=0.0) or 1.0
    coords = []
    for p in pts:
        cx = pad + (1.0 - p.x_pagerank) * span
        cy = size - pad - (1.0 - p.x_disruption) * span
        r = 2.0 + 10.0 * math.sqrt(p.total_bits / biggest)
        coords.append((cx, cy, r, p.t))
    out = io.StringIO()
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
              f'viewBox="0 0 {size} {size}">\n')
    out.write(f"<title>{_xml(node)}</title>\n")
    out.write(f'<rect x="{pad}" y="{pad}" width="{span}" height="{span}" fill="none" stroke="#999"/>\n')
    out.write(f'<text x="{size / 2:.1f}" y="{size - 6}" font-size="11" text-anchor="middle">'
              f"PageRank position</text>\n")
    out.write(f'<text x="10" y="{size / 2:.1f}" font-size="11" text-anchor="middle" '
              f'transform="rotate(-90 10 {size / 2:.1f})">Disruption position</text>\n')
    if len(coords) > 1:
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y, _, _ in coords)
        out.write(f'<polyline points="{path}" fill="none" stroke="#555" stroke-width="1"/>\n')
    for x, y, r, t in coords:
        out.write(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r:.2f}" fill="#1f77b4" fill-opacity="0.6">'
                  f"<title>{t}</title></circle>\n")
    out.write("</svg>\n")
    return out.getvalue()


def _xml(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _safe_name(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in label)


@dataclass
class AnalysisResult:
    config: RunConfig
    series: SnapshotSeries
    scores: dict[str, list[ScoreTable]]
    points: list[TrajectoryPoint]
    artifacts: list[Path] = field(default_factory=list)


def analyze_series(series: SnapshotSeries, cfg: RunConfig, dataset: str = "dataset",
                   write: bool = True) -> AnalysisResult:
    hyps = parse_hypotheses(cfg.hypotheses, cfg.clamp_epsilon)
    nonempty = [s for s in series if s.n_nodes]
    if len(nonempty) < 2:
        raise ValueError(f"insufficient snapshots: need at least 2 non-empty, got {len(nonempty)}")
    scores, ranks = rank_histories(series, MEASURES, cfg.pagerank_config(), cfg.include_bypass)
    for table in scores["pagerank"]:
        if not table.converged:
            logger.warning("PageRank did not converge at t=%d after %d iterations", table.t, table.iterations)
    points = trajectories_from_ranks(ranks, hyps, [s.t for s in series if s.partial])
    result = AnalysisResult(cfg, series, scores, points)
    if not write:
        return result

    out = _ensure_dir(cfg.out_dir)
    ext = "json" if cfg.format == "json" else "csv"
    traj = out / f"trajectories.{ext}"
    write_trajectories(points, traj, cfg)
    result.artifacts.append(traj)

    rows = [correlation_row(dataset, a, b) for a, b in zip(scores["pagerank"], scores["disruption"])]
    corr = out / "correlations.csv"
    write_correlations(rows, corr, cfg.header("correlations"))
    result.artifacts.append(corr)

    pos = out / "positions.csv"
    write_positions(points, pos, cfg.header("positions"))
    scatter = out / "scatter.csv"
    write_scatter(points, scatter, cfg.header("scatter"))
    result.artifacts += [pos, scatter]

    score_dir = _ensure_dir(out / "scores")
    for m in MEASURES:
        for table in scores[m]:
            p = score_dir / f"{m}_{table.t}.csv"
            write_score_table(table, p, cfg.header("scores"))
            result.artifacts.append(p)

    if cfg.svg_nodes:
        svg_dir = _ensure_dir(out / "svg")
        by_node: dict[str, list[TrajectoryPoint]] = {}
        for p in points:
            by_node.setdefault(p.node, []).append(p)
        for node in cfg.svg_nodes:
            if node not in by_node:
                raise ValueError(f"node {node!r} not in any snapshot")
            p = svg_dir / f"{_safe_name(node)}.svg"
            p.write_text(scatter_svg(node, by_node[node]), encoding="utf-8")
            result.artifacts.append(p)

    run = out / "run.json"
    run.write_text(json.dumps({
        "tool": TOOL, "version": __version__, "config": cfg.config_hash(),
        "settings": cfg.analysis_fields(), "dataset": dataset,
        "snapshots": [s.t for s in series], "scored_snapshots": [s.t for s in nonempty],
        "trajectories": traj.name,
    }, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    result.artifacts.append(run)
    return result


def run_analysis(cfg: RunConfig) -> AnalysisResult:
    _, series = load_snapshots(cfg)
    dataset = cfg.dataset or Path(cfg.input).stem
    return analyze_series(series, cfg, dataset)


@dataclass
class SimulationResult:
    network: SyntheticNetwork
    analysis: AnalysisResult
    report: ShockReport


def run_simulation(synth: SynthConfig, cfg: RunConfig) -> SimulationResult:
    """Generate a network, write it as an edge list, analyze it, and report on the shock."""
    out = _ensure_dir(cfg.out_dir)
    net = generate(synth)
    edges_path = out / "edges.csv"
    write_edge_list(net.edges, edges_path)
    (out / "edges.meta.json").write_text(net.metadata_json(), encoding="utf-8")
    cfg = replace(cfg, input=str(edges_path), delta=1, start=None, end=None, weighted=None)
    analysis = run_analysis(replace(cfg, dataset=cfg.dataset or "synthetic"))
    report = shock_report(analysis.points, net.shock_target, net.shock_year)
    doc = {"meta": {"tool": TOOL, "version": __version__, "config": cfg.config_hash()}}
    doc.update(report.to_dict())
    doc["target_prior_in_degree"] = net.target_prior_in_degree
    (out / "shock_report.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return SimulationResult(net, analysis, report)


@dataclass(frozen=True)
class TopRow:
    node: str
    score: float
    g: int
    x: float
    kl: dict[str, float | None]
    total_bits: float | None


def top_nodes(out_dir: str | Path, measure: str, t: int, k: int) -> list[TopRow]:
    """Top ``k`` nodes by ``measure`` at snapshot ``t`` from a finished analysis.

    Nodes tied with the k-th score are all included, so more than ``k`` rows
    may come back.
    """
    out = Path(out_dir)
    run_path = out / "run.json"
    if not run_path.is_file():
        raise FileNotFoundError(f"no analysis found in {out} (missing run.json); run `analyze` first")
    run = json.loads(run_path.read_text(encoding="utf-8"))
    if measure not in MEASURES:
        raise ConfigError(f"unknown measure {measure!r}; expected one of {MEASURES}")
    if t not in run["scored_snapshots"]:
        raise ConfigError(f"t={t} is not a snapshot; available: {run['scored_snapshots']}")
    if k < 1:
        raise ConfigError("k must be >= 1")
    table = read_score_table(out / "scores" / f"{measure}_{t}.csv")
    ranks = rank(table)
    order = sorted(range(len(table)), key=lambda i: (-table.scores[i], table.labels[table.nodes[i]]))
    if len(order) > k:
        cutoff = table.scores[order[k - 1]]
        order = [i for i in order if table.scores[i] >= cutoff]

    surprise = {}
    for rec in read_trajectories(out / run["trajectories"]):
        if rec["t"] == t:
            surprise[rec["node"]] = rec
    rows = []
    for i in order:
        label = table.labels[table.nodes[i]]
        rec = surprise.get(label, {})
        kl = {key[len(f"kl_{measure}_"):]: rec.get(key) for key in rec if key.startswith(f"kl_{measure}_")}
        rows.append(TopRow(label, float(table.scores[i]), int(ranks.g[i]), float(ranks.g[i]) / ranks.n,
                           kl, rec.get("total_bits")))
    return rows
