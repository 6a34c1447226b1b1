"""Per-component metric sessions over an in-process time-series store.

Each component writes through its own :class:`Session`. Sessions hand
points to a single collector thread, the only writer to the store, so a
stalled producer never holds up another session. Timestamps are
simulation slots.

Series are keyed by ``(measurement, sorted tag items)`` and keep one
strictly slot-ordered list per field.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import queue
import socketserver
import threading
from dataclasses import dataclass, field
from typing import Iterable

AGGREGATIONS = ("raw", "mean", "max", "min", "count")
CSV_HEADER = ["measurement", "tags", "ts_slot", "field", "value"]

TagKey = tuple[tuple[str, str], ...]


class SessionError(RuntimeError):
    pass


@dataclass(frozen=True)
class MetricPoint:
    measurement: str
    tags: dict[str, str]
    fields: dict[str, float]
    ts_slot: int

    def __post_init__(self):
        if not self.measurement:
            raise ValueError("measurement must be nonempty")
        if not self.fields:
            raise ValueError("a metric point needs at least one field")
        if "component" not in self.tags:
            raise ValueError("metric point is missing the component tag")

    @property
    def tag_key(self) -> TagKey:
        return tuple(sorted(self.tags.items()))


@dataclass
class Series:
    measurement: str
    tags: dict[str, str]
    fields: dict[str, list[tuple[int, float]]] = field(default_factory=dict)

    def values(self, name: str) -> list[float]:
        return [v for _, v in self.fields.get(name, [])]


def format_tags(tags: TagKey | dict[str, str]) -> str:
    items = sorted(tags.items()) if isinstance(tags, dict) else tags
    return ";".join(f"{k}={v}" for k, v in items)


def parse_tags(text: str) -> dict[str, str]:
    if not text:
        return {}
    return dict(item.split("=", 1) for item in text.split(";"))


class Session:
    """Write handle bound to one component; tags every point with it."""

    def __init__(self, store: "MetricsStore", component: str, capacity: int):
        self.store = store
        self.component = component
        self.closed = False
        self.written = 0
        self._queue: queue.Queue = queue.Queue(maxsize=capacity)
        self._last: dict[tuple, int] = {}

    def write(self, measurement: str, fields: dict[str, float], ts_slot: int,
              tags: dict[str, str] | None = None) -> None:
        if self.closed:
            raise SessionError("session closed")
        all_tags = {**(tags or {}), "component": self.component}
        point = MetricPoint(measurement, all_tags, {k: float(v) for k, v in fields.items()}, int(ts_slot))
        key = (measurement, point.tag_key)
        for name in point.fields:
            last = self._last.get(key + (name,))
            if last is not None and point.ts_slot <= last:
                raise ValueError(
                    f"{measurement}/{name}: slot {point.ts_slot} not after {last} for {format_tags(point.tag_key)}"
                )
        for name in point.fields:
            self._last[key + (name,)] = point.ts_slot
        self.written += len(point.fields)
        self.store._submit(self, point)

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self.store._close_session(self)


class MetricsStore:
    def __init__(self, threaded: bool = True, session_capacity: int = 65536):
        self.threaded = threaded
        self.session_capacity = session_capacity
        self._series: dict[tuple[str, TagKey], dict[str, list[tuple[int, float]]]] = {}
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}
        self._cv = threading.Condition()
        self._submitted = 0
        self._ingested = 0
        self._running = False
        self._thread: threading.Thread | None = None
        if threaded:
            self._running = True
            self._thread = threading.Thread(target=self._collect, name="metrics-collector", daemon=True)
            self._thread.start()

    # -- sessions ----------------------------------------------------------

    def open_session(self, component: str) -> Session:
        with self._cv:
            if component in self._sessions and not self._sessions[component].closed:
                raise SessionError(f"session for {component!r} already open")
            session = Session(self, component, self.session_capacity)
            self._sessions[component] = session
            return session

    def _submit(self, session: Session, point: MetricPoint) -> None:
        if not self.threaded:
            self._insert(point)
            return
        session._queue.put(point)
        with self._cv:
            self._submitted += 1
            self._cv.notify_all()

    def _close_session(self, session: Session) -> None:
        self.flush()

    def _collect(self) -> None:
        while True:
            with self._cv:
                while self._running and self._ingested == self._submitted:
                    self._cv.wait()
                if not self._running and self._ingested == self._submitted:
                    return
                sessions = list(self._sessions.values())
            batch = []
            for s in sessions:
                while True:
                    try:
                        batch.append(s._queue.get_nowait())
                    except queue.Empty:
                        break
            for point in batch:
                self._insert(point)
            with self._cv:
                self._ingested += len(batch)
                self._cv.notify_all()

    def flush(self, timeout: float | None = None) -> None:
        """Block until every submitted point is in the store."""
        if not self.threaded:
            return
        with self._cv:
            self._cv.wait_for(lambda: self._ingested >= self._submitted, timeout)

    def close(self) -> None:
        for s in list(self._sessions.values()):
            s.closed = True
        if self._thread is not None:
            with self._cv:
                self._running = False
                self._cv.notify_all()
            self._thread.join()
            self._thread = None

    def _insert(self, point: MetricPoint) -> None:
        with self._lock:
            series = self._series.setdefault((point.measurement, point.tag_key), {})
            for name, value in point.fields.items():
                series.setdefault(name, []).append((point.ts_slot, value))

    # -- reading -----------------------------------------------------------

    def __len__(self) -> int:
        with self._lock:
            return sum(len(v) for fields in self._series.values() for v in fields.values())

    def snapshot(self) -> dict[tuple[str, TagKey], dict[str, list[tuple[int, float]]]]:
        with self._lock:
            return {k: {f: list(v) for f, v in fields.items()} for k, fields in self._series.items()}

    def __eq__(self, other) -> bool:
        if not isinstance(other, MetricsStore):
            return NotImplemented
        return _canonical(self.snapshot()) == _canonical(other.snapshot())

    def measurements(self) -> list[str]:
        with self._lock:
            return sorted({m for m, _ in self._series})

    def query(
        self,
        measurement: str,
        tag_filter: dict[str, str] | None = None,
        range: tuple[int, int] | None = None,
        agg: str = "raw",
        window: int | None = None,
    ) -> list[Series]:
        """Select series by measurement and tag subset, optionally windowed.

        Aggregations bucket points by ``(ts - range[0]) // window`` and report
        each bucket at its start slot; empty buckets are omitted.
        """
        if agg not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {agg!r}")
        if (agg == "raw") != (window is None):
            raise ValueError("window is required for aggregations and not allowed for raw")
        if window is not None and window < 1:
            raise ValueError("window must be >= 1")
        if range is not None:
            lo, hi = range
            if lo > hi:
                raise ValueError(f"malformed range [{lo}, {hi}]")
        else:
            lo, hi = -math.inf, math.inf
        tag_filter = tag_filter or {}
        with self._lock:
            picked = [
                (tags, {f: [p for p in pts if lo <= p[0] <= hi] for f, pts in fields.items()})
                for (m, tags), fields in self._series.items()
                if m == measurement and all(dict(tags).get(k) == v for k, v in tag_filter.items())
            ]
        picked.sort(key=lambda item: item[0])
        out = []
        origin = 0 if range is None else lo
        for tags, fields in picked:
            fields = {f: pts for f, pts in fields.items() if pts}
            if not fields:
                continue
            if agg != "raw":
                fields = {f: _aggregate(pts, origin, window, agg) for f, pts in fields.items()}
            out.append(Series(measurement, dict(tags), dict(sorted(fields.items()))))
        return out

    # -- export / import ---------------------------------------------------

    def rows(self) -> list[tuple[str, str, int, str, float]]:
        snap = self.snapshot()
        out = []
        for (measurement, tags) in sorted(snap):
            fields = snap[(measurement, tags)]
            tag_text = format_tags(tags)
            merged = sorted(
                ((ts, name, value) for name, pts in fields.items() for ts, value in pts),
                key=lambda r: (r[0], r[1]),
            )
            out.extend((measurement, tag_text, ts, name, value) for ts, name, value in merged)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for m, tags, ts, name, value in self.rows():
            writer.writerow([m, tags, ts, name, repr(value)])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [
            {"measurement": m, "tags": parse_tags(tags), "ts_slot": ts, "field": name, "value": value}
            for m, tags, ts, name, value in self.rows()
        ]
        return json.dumps({"rows": rows}, indent=None, separators=(",", ":")) + "\n"

    def export(self, format: str, path: str | os.PathLike) -> str:
        if format == "csv":
            text = self.to_csv()
        elif format == "json":
            text = self.to_json()
        else:
            raise ValueError(f"unknown export format {format!r}")
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write metrics export: {exc.strerror}", str(path)) from exc
        return str(path)

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[str, dict[str, str], int, str, float]]) -> "MetricsStore":
        store = cls(threaded=False)
        for m, tags, ts, name, value in rows:
            key = (m, tuple(sorted(tags.items())))
            store._series.setdefault(key, {}).setdefault(name, []).append((int(ts), float(value)))
        for fields in store._series.values():
            for pts in fields.values():
                pts.sort(key=lambda p: p[0])
        return store

    @classmethod
    def load_csv(cls, path) -> "MetricsStore":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != CSV_HEADER:
                raise ValueError(f"{path}: not a metrics CSV export")
            return cls.from_rows((m, parse_tags(t), int(ts), f, float(v)) for m, t, ts, f, v in reader)

    @classmethod
    def load_json(cls, path) -> "MetricsStore":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls.from_rows(
            (r["measurement"], r["tags"], r["ts_slot"], r["field"], r["value"]) for r in doc["rows"]
        )


def _canonical(snap):
    return sorted((k, sorted((f, list(v)) for f, v in fields.items())) for k, fields in snap.items())


def _aggregate(points: list[tuple[int, float]], origin, window: int, agg: str) -> list[tuple[int, float]]:
    buckets: dict[int, list[float]] = {}
    for ts, value in points:
        buckets.setdefault((ts - origin) // window, []).append(value)
    out = []
    for b in sorted(buckets):
        vals = buckets[b]
        if agg == "mean":
            value = math.fsum(vals) / len(vals)
        elif agg == "max":
            value = max(vals)
        elif agg == "min":
            value = min(vals)
        else:
            value = float(len(vals))
        out.append((int(origin + b * window), value))
    return out


# -- optional line protocol ----------------------------------------------------

def parse_line(line: str) -> MetricPoint:
    """Parse ``measurement,tag=val,... field=1.0,field2=2 slot``."""
    try:
        head, field_text, slot_text = line.strip().split(" ")
    except ValueError:
        raise ValueError(f"malformed line: {line!r}") from None
    measurement, *tag_items = head.split(",")
    tags = dict(item.split("=", 1) for item in tag_items)
    fields = {k: float(v) for k, v in (item.split("=", 1) for item in field_text.split(","))}
    return MetricPoint(measurement, tags, fields, int(slot_text))


class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self):
        server: LineProtocolServer = self.server  # type: ignore[assignment]
        for raw in self.rfile:
            line = raw.decode("utf-8", "replace").strip()
            if not line:
                continue
            try:
                point = parse_line(line)
                session = server.session_for(point.tags["component"])
                tags = {k: v for k, v in point.tags.items() if k != "component"}
                session.write(point.measurement, point.fields, point.ts_slot, tags)
                self.wfile.write(b"ok\n")
            except Exception as exc:
                self.wfile.write(f"error: {exc}\n".encode())


class LineProtocolServer(socketserver.ThreadingTCPServer):
    """Localhost TCP listener feeding the line protocol into a store."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, store: MetricsStore, port: int = 0):
        super().__init__(("127.0.0.1", port), _LineHandler)
        self.store = store
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._thread = threading.Thread(target=self.serve_forever, name="metrics-line-protocol", daemon=True)

    @property
    def port(self) -> int:
        return self.server_address[1]

    def session_for(self, component: str) -> Session:
        with self._lock:
            if component not in self._sessions:
                self._sessions[component] = self.store.open_session(component)
            return self._sessions[component]

    def start(self) -> "LineProtocolServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        for s in self._sessions.values():
            s.close()
