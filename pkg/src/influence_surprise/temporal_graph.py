"""Timestamped edge ingestion and cumulative snapshot construction.

An edge ``(src, dst)`` means *src cites dst as an influence*, so influence
mass flows toward ``dst``. Snapshots are cumulative: the snapshot labelled
``t`` holds every event with ``time <= t``, with weights summed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

CACHE_FORMAT = "influence-surprise/snapshots"
CACHE_VERSION = 1

ROLES = ("src", "dst", "year", "weight")


class IngestError(ValueError):
    """Raised when an edge file cannot be parsed."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class SnapshotError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class EdgeEvent:
    src: str
    dst: str
    time: int
    weight: int = 1

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError(f"self-loop on {self.src!r}")
        if self.weight < 1:
            raise ValueError(f"weight must be >= 1, got {self.weight}")


@dataclass(frozen=True)
class TemporalEdgeList:
    """Ingested events, sorted by (time, src, dst).

    The counters describe what ingestion discarded or merged and do not take
    part in equality.
    """

    events: tuple[EdgeEvent, ...]
    weighted: bool = False
    self_loops_dropped: int = field(default=0, compare=False)
    rows_merged: int = field(default=0, compare=False)
    rows_out_of_range: int = field(default=0, compare=False)

    @property
    def time_range(self) -> tuple[int, int] | None:
        if not self.events:
            return None
        times = [e.time for e in self.events]
        return min(times), max(times)

    def __len__(self) -> int:
        return len(self.events)

    @classmethod
    def from_rows(
        cls,
        rows: Iterable[tuple],
        weighted: bool = False,
        reverse: bool = False,
        min_year: int | None = None,
        max_year: int | None = None,
    ) -> "TemporalEdgeList":
        """Build from ``(src, dst, year[, weight])`` tuples applying the ingest rules."""
        merged: dict[tuple[str, str, int], int] = defaultdict(int)
        loops = dup = skipped = 0
        for row in rows:
            src, dst, year = str(row[0]), str(row[1]), int(row[2])
            weight = int(row[3]) if weighted and len(row) > 3 else 1
            if weight < 1:
                raise IngestError(f"non-positive weight {weight}")
            if reverse:
                src, dst = dst, src
            if (min_year is not None and year < min_year) or (max_year is not None and year > max_year):
                skipped += 1
                continue
            if src == dst:
                loops += 1
                continue
            key = (src, dst, year)
            if key in merged:
                dup += 1
            merged[key] += weight
        events = tuple(
            sorted(
                (EdgeEvent(s, d, y, w) for (s, d, y), w in merged.items()),
                key=lambda e: (e.time, e.src, e.dst),
            )
        )
        return cls(events, weighted, loops, dup, skipped)


def _sniff_delimiter(path: Path, sample: str) -> str:
    if path.suffix.lower() in (".tsv", ".tab"):
        return "\t"
    try:
        return csv.Sniffer().sniff(sample, delimiters=",\t;| ").delimiter
    except csv.Error:
        return ","


def _is_int(text: str) -> bool:
    try:
        int(text.strip())
    except ValueError:
        return False
    return True


def ingest_edge_list(
    path: str | Path,
    delimiter: str | None = None,
    columns: Mapping[str, int | str] | None = None,
    header: bool | None = None,
    weighted: bool | None = None,
    min_year: int | None = None,
    max_year: int | None = None,
    reverse: bool = False,
) -> TemporalEdgeList:
    """Read a delimited ``src,dst,year[,weight]`` file.

    Parameters
    ----------
    path : path to a CSV/TSV file (UTF-8).
    delimiter : field separator; sniffed from the file when omitted.
    columns : role -> column index or header name, for roles
        ``src``, ``dst``, ``year`` and optionally ``weight``. Defaults to
        positional order.
    header : whether the first row is a header; auto-detected when ``None``
        (a first row whose year field is not an integer is a header).
    weighted : read the weight column. ``None`` means "if one exists".
    min_year, max_year : rows outside these bounds are skipped and counted.
    reverse : swap src and dst for every row.

    Self-loops are dropped and duplicate ``(src, dst, year)`` rows are merged
    by summing weights; both are counted on the result.
    """
    path = Path(path)
    if not path.is_file():
        raise IngestError("no such file", path=str(path))
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        raise IngestError("empty file", path=str(path))
    if delimiter is None:
        delimiter = _sniff_delimiter(path, text[:4096])

    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    lines = [(i + 1, row) for i, row in enumerate(reader) if row and any(c.strip() for c in row)]
    if not lines:
        raise IngestError("empty file", path=str(path))

    first_line, first = lines[0]
    column_map = dict(columns or {})
    names_given = any(isinstance(v, str) for v in column_map.values())
    if header is None:
        if names_given:
            header = True
        else:
            year_col = column_map.get("year", 2)
            header = not (len(first) > year_col and _is_int(first[year_col]))

    index: dict[str, int] = {}
    if header:
        names = [c.strip() for c in first]
        lines = lines[1:]
        lookup = {n.lower(): i for i, n in enumerate(names)}
        for role in ROLES:
            want = column_map.get(role, role)
            pos = ROLES.index(role)
            if not isinstance(want, str):
                index[role] = int(want)
            elif want.lower() in lookup:
                index[role] = lookup[want.lower()]
            elif role not in column_map and len(names) > pos:
                index[role] = pos
            elif role != "weight":
                raise IngestError(f"column {want!r} not in header {names}", first_line, str(path))
    else:
        for pos, role in enumerate(ROLES):
            index[role] = int(column_map.get(role, pos))
        if "weight" not in column_map and len(first) <= 3:
            del index["weight"]

    has_weight = "weight" in index
    if weighted is None:
        weighted = has_weight
    elif weighted and not has_weight:
        raise IngestError("weighted input requested but no weight column", path=str(path))

    width = max(index.values()) + 1
    rows = []
    for lineno, row in lines:
        need = width if weighted else max(index["src"], index["dst"], index["year"]) + 1
        if len(row) < need:
            raise IngestError(f"expected at least {need} fields, got {len(row)}", lineno, str(path))
        src, dst = row[index["src"]].strip(), row[index["dst"]].strip()
        if not src or not dst:
            raise IngestError("empty node label", lineno, str(path))
        try:
            year = int(row[index["year"]].strip())
            weight = int(row[index["weight"]].strip()) if weighted else 1
        except ValueError as exc:
            raise IngestError(f"malformed number ({exc})", lineno, str(path)) from None
        if weight < 1:
            raise IngestError(f"non-positive weight {weight}", lineno, str(path))
        rows.append((src, dst, year, weight))

    edges = TemporalEdgeList.from_rows(
        rows, weighted=weighted, reverse=reverse, min_year=min_year, max_year=max_year
    )
    if edges.self_loops_dropped or edges.rows_merged or edges.rows_out_of_range:
        logger.info(
            "%s: dropped %d self-loops, merged %d duplicate rows, skipped %d out-of-range rows",
            path, edges.self_loops_dropped, edges.rows_merged, edges.rows_out_of_range,
        )
    return edges


def write_edge_list(edges: TemporalEdgeList, path: str | Path, delimiter: str = ",") -> None:
    """Write events in the layout :func:`ingest_edge_list` reads back.

    Unweighted lists have no weight column, so a merged count ``w`` is
    written as ``w`` identical rows.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        if edges.weighted:
            writer.writerow(["src", "dst", "year", "weight"])
            writer.writerows([e.src, e.dst, e.time, e.weight] for e in edges.events)
        else:
            writer.writerow(["src", "dst", "year"])
            for e in edges.events:
                writer.writerows([[e.src, e.dst, e.time]] * e.weight)


@dataclass(frozen=True)
class SnapshotConfig:
    delta: int = 1
    start_year: int = 1940
    end_year: int = 2019

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError(f"delta must be >= 1, got {self.delta}")
        if self.start_year > self.end_year:
            raise ValueError(f"start_year {self.start_year} > end_year {self.end_year}")

    def boundaries(self) -> list[tuple[int, bool]]:
        """Inclusive upper-bound years, each with a flag for a short final period."""
        out = []
        t = self.start_year + self.delta - 1
        while t < self.end_year:
            out.append((t, False))
            t += self.delta
        out.append((self.end_year, t != self.end_year))
        return out

    @classmethod
    def covering(
        cls, edges: TemporalEdgeList, delta: int = 1, start_year: int | None = None, end_year: int | None = None
    ) -> "SnapshotConfig":
        """Config spanning the edge list, with the start aligned to a multiple of ``delta``."""
        rng = edges.time_range
        if rng is None and (start_year is None or end_year is None):
            raise SnapshotError("cannot infer a year range from an empty edge list")
        if start_year is None:
            start_year = (rng[0] // delta) * delta
        if end_year is None:
            end_year = rng[1]
        return cls(delta, start_year, end_year)


class NodeIndex:
    """Injective label -> dense integer mapping shared by a whole series."""

    def __init__(self, labels: Iterable[str] = ()):
        self._labels: list[str] = []
        self._index: dict[str, int] = {}
        for label in labels:
            self.add(label)

    def add(self, label: str) -> int:
        idx = self._index.get(label)
        if idx is None:
            idx = len(self._labels)
            self._labels.append(label)
            self._index[label] = idx
        return idx

    def __getitem__(self, label: str) -> int:
        return self._index[label]

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def __len__(self) -> int:
        return len(self._labels)

    def label(self, idx: int) -> str:
        return self._labels[idx]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._labels)


def _frozen(arr) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


class GraphSnapshot:
    """Immutable cumulative weighted digraph at one time step.

    Edges are stored as parallel arrays sorted by (src, dst) over the series'
    global node indices. ``nodes`` holds the sorted indices of nodes with at
    least one incident edge.
    """

    def __init__(self, t: int, index: NodeIndex, src, dst, weight, partial: bool = False):
        order = np.lexsort((dst, src))
        self.t = int(t)
        self.index = index
        self.partial = bool(partial)
        self.src = _frozen(np.asarray(src, dtype=np.int64)[order])
        self.dst = _frozen(np.asarray(dst, dtype=np.int64)[order])
        self.weight = _frozen(np.asarray(weight, dtype=np.int64)[order])
        if np.any(self.src == self.dst):
            raise SnapshotError("self-loop in snapshot")
        if np.any(self.weight < 1):
            raise SnapshotError("non-positive edge weight in snapshot")
        self.nodes = _frozen(np.union1d(self.src, self.dst))

    def __repr__(self) -> str:
        return f"GraphSnapshot(t={self.t}, nodes={self.n_nodes}, edges={self.n_edges})"

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.size)

    @property
    def n_edges(self) -> int:
        return int(self.src.size)

    @property
    def total_weight(self) -> int:
        return int(self.weight.sum())

    def __contains__(self, label: str) -> bool:
        return label in self.index and self.has_node(self.index[label])

    def has_node(self, idx: int) -> bool:
        pos = np.searchsorted(self.nodes, idx)
        return bool(pos < self.nodes.size and self.nodes[pos] == idx)

    def labels(self) -> list[str]:
        return [self.index.label(i) for i in self.nodes]

    def edges(self) -> Iterator[tuple[int, int, int]]:
        return zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist())

    def weight_of(self, src: str, dst: str) -> int:
        """Cumulative weight of ``src -> dst`` (0 when absent)."""
        if src not in self.index or dst not in self.index:
            return 0
        return self.out_edges.get(self.index[src], {}).get(self.index[dst], 0)

    @cached_property
    def out_edges(self) -> Mapping[int, Mapping[int, int]]:
        out: dict[int, dict[int, int]] = {}
        for s, d, w in self.edges():
            out.setdefault(s, {})[d] = w
        return out

    @cached_property
    def in_edges(self) -> Mapping[int, Mapping[int, int]]:
        inn: dict[int, dict[int, int]] = {}
        for s, d, w in self.edges():
            inn.setdefault(d, {})[s] = w
        return inn

    @cached_property
    def out_sets(self) -> dict[int, frozenset[int]]:
        return {n: frozenset(nbrs) for n, nbrs in self.out_edges.items()}

    @cached_property
    def in_sets(self) -> dict[int, frozenset[int]]:
        return {n: frozenset(nbrs) for n, nbrs in self.in_edges.items()}


@dataclass(frozen=True)
class SnapshotSeries:
    snapshots: tuple[GraphSnapshot, ...]
    index: NodeIndex
    config: SnapshotConfig

    def __post_init__(self):
        ts = [s.t for s in self.snapshots]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise SnapshotError(f"snapshot times not strictly increasing: {ts}")
        if any(s.index is not self.index for s in self.snapshots):
            raise SnapshotError("snapshots do not share one node index")

    def __len__(self) -> int:
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    def __getitem__(self, i) -> GraphSnapshot:
        return self.snapshots[i]

    @property
    def times(self) -> list[int]:
        return [s.t for s in self.snapshots]

    def at(self, t: int) -> GraphSnapshot:
        for s in self.snapshots:
            if s.t == t:
                return s
        raise KeyError(f"no snapshot at t={t}; available: {self.times}")


def build_snapshots(edges: TemporalEdgeList, config: SnapshotConfig) -> SnapshotSeries:
    """Materialize one cumulative snapshot per period boundary of ``config``."""
    if not edges.events:
        raise SnapshotError("no events to build snapshots from")
    if not any(config.start_year <= e.time <= config.end_year for e in edges.events):
        raise SnapshotError(f"no events inside [{config.start_year}, {config.end_year}]")

    index = NodeIndex()
    # Label order is first appearance in (time, src, dst) order, so it is
    # fixed by the input alone.
    for e in edges.events:
        if e.time <= config.end_year:
            index.add(e.src)
            index.add(e.dst)

    weights: dict[tuple[int, int], int] = {}
    events = iter(edges.events)
    pending = next(events, None)
    snapshots = []
    for t, partial in config.boundaries():
        while pending is not None and pending.time <= t:
            key = (index[pending.src], index[pending.dst])
            weights[key] = weights.get(key, 0) + pending.weight
            pending = next(events, None)
        if weights:
            keys = np.array(list(weights.keys()), dtype=np.int64)
            vals = np.fromiter(weights.values(), dtype=np.int64, count=len(weights))
            snap = GraphSnapshot(t, index, keys[:, 0], keys[:, 1], vals, partial)
        else:
            empty = np.empty(0, dtype=np.int64)
            snap = GraphSnapshot(t, index, empty, empty, empty, partial)
        snapshots.append(snap)
    return SnapshotSeries(tuple(snapshots), index, config)


@dataclass(frozen=True)
class SnapshotStats:
    t: int
    nodes: int
    edges: int
    total_weight: int
    partial: bool = False


def snapshot_stats(series: SnapshotSeries) -> list[SnapshotStats]:
    if not len(series):
        raise SnapshotError("empty series")
    return [SnapshotStats(s.t, s.n_nodes, s.n_edges, s.total_weight, s.partial) for s in series]


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def cache_key(input_digest: str, config: SnapshotConfig, reverse: bool = False, weighted: bool = False) -> dict:
    return {
        "input_sha256": input_digest,
        "delta": config.delta,
        "start_year": config.start_year,
        "end_year": config.end_year,
        "reverse_edges": bool(reverse),
        "weighted": bool(weighted),
    }


def save_series(series: SnapshotSeries, path: str | Path, key: Mapping) -> None:
    """Write a JSON sidecar with per-snapshot weight increments.

    Layout (version 1)::

        {"format": ..., "version": 1, "key": {...}, "labels": [...],
         "snapshots": [{"t": int, "partial": bool,
                        "added": [[src_idx, dst_idx, weight_increment], ...]}]}
    """
    prev: dict[tuple[int, int], int] = {}
    payload = []
    for snap in series:
        added = []
        for s, d, w in snap.edges():
            inc = w - prev.get((s, d), 0)
            if inc:
                added.append([s, d, inc])
            prev[(s, d)] = w
        payload.append({"t": snap.t, "partial": snap.partial, "added": added})
    doc = {
        "format": CACHE_FORMAT,
        "version": CACHE_VERSION,
        "key": dict(key),
        "config": {"delta": series.config.delta, "start_year": series.config.start_year,
                   "end_year": series.config.end_year},
        "labels": list(series.index.labels),
        "snapshots": payload,
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":"), sort_keys=True), encoding="utf-8")


def load_series(path: str | Path, key: Mapping | None = None) -> SnapshotSeries | None:
    """Load a sidecar written by :func:`save_series`.

    Returns ``None`` when ``key`` is given and does not match the stored key.
    """
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CACHE_FORMAT:
        raise SnapshotError(f"{path}: not a snapshot cache")
    if doc.get("version") != CACHE_VERSION:
        raise SnapshotError(f"{path}: unsupported cache version {doc.get('version')}")
    if key is not None and doc["key"] != dict(key):
        return None
    index = NodeIndex(doc["labels"])
    config = SnapshotConfig(**doc["config"])
    weights: dict[tuple[int, int], int] = {}
    snaps = []
    for entry in doc["snapshots"]:
        for s, d, inc in entry["added"]:
            weights[(s, d)] = weights.get((s, d), 0) + inc
        if weights:
            keys = np.array(list(weights.keys()), dtype=np.int64)
            vals = np.fromiter(weights.values(), dtype=np.int64, count=len(weights))
            snaps.append(GraphSnapshot(entry["t"], index, keys[:, 0], keys[:, 1], vals, entry["partial"]))
        else:
            empty = np.empty(0, dtype=np.int64)
            snaps.append(GraphSnapshot(entry["t"], index, empty, empty, empty, entry["partial"]))
    return SnapshotSeries(tuple(snaps), index, config)


def series_equal(a: SnapshotSeries, b: SnapshotSeries) -> bool:
    if a.index.labels != b.index.labels or a.times != b.times:
        return False
    for x, y in zip(a, b):
        if x.partial != y.partial:
            return False
        for arr in ("src", "dst", "weight"):
            if not np.array_equal(getattr(x, arr), getattr(y, arr)):
                return False
    return True


def events_from_pairs(pairs: Sequence[tuple], weighted: bool | None = None) -> TemporalEdgeList:
    """Convenience constructor for tests and small scripts."""
    if weighted is None:
        weighted = any(len(p) > 3 for p in pairs)
    return TemporalEdgeList.from_rows(pairs, weighted=weighted)
