"""Supervised execution of a scenario.

The controller starts one worker thread per component. Workers own the
component lifecycle (init, heartbeats, stop) and talk to the controller
loop only through its inbox; the simulation runs single-threaded on its
own thread and calls into components there. Startup proceeds stage by
stage: a stage starts only after every component of the previous stage
reports Running.

State machine per component::

    Pending -> Starting -> Running -> {Degraded, Stopped, Failed}
    Starting -> Failed;  Degraded -> {Running, Failed};  Failed -> Starting
"""
from __future__ import annotations

import datetime as _dt
import enum
import itertools
import json
import logging
import math
import queue
import threading
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Iterator

from .component import ComponentError
from .config import ExecutionPlan
from .engine import create_component
from .metrics import MetricsStore
from .ransim.sim import Simulation

logger = logging.getLogger(__name__)


class State(str, enum.Enum):
    PENDING = "Pending"
    STARTING = "Starting"
    RUNNING = "Running"
    DEGRADED = "Degraded"
    STOPPED = "Stopped"
    FAILED = "Failed"

    def __str__(self) -> str:
        return self.value


LEGAL_TRANSITIONS: dict[State, frozenset[State]] = {
    State.PENDING: frozenset({State.STARTING}),
    State.STARTING: frozenset({State.RUNNING, State.FAILED}),
    State.RUNNING: frozenset({State.DEGRADED, State.STOPPED, State.FAILED}),
    State.DEGRADED: frozenset({State.RUNNING, State.FAILED}),
    State.FAILED: frozenset({State.STARTING}),
    State.STOPPED: frozenset(),
}

LOG_LEVELS = ("debug", "info", "warn", "error")


class IllegalTransition(RuntimeError):
    pass


class NotRestartable(RuntimeError):
    pass


@dataclass
class ControllerOptions:
    heartbeat_interval: float = 0.5
    degraded_after: int = 3
    failed_after: int = 6
    start_timeout: float = 10.0
    stop_timeout: float = 5.0
    log_capacity: int = 65536
    clock: Callable[[], float] = time.monotonic
    # Manual mode: no simulation thread, no automatic heartbeats or
    # supervision. Drive it with RunHandle.advance() and RunHandle.pulse().
    manual: bool = False


@dataclass
class ComponentStatus:
    state: State = State.PENDING
    reason: str | None = None
    last_heartbeat: float | None = None
    restarts: int = 0

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["state"] = self.state.value
        return d


@dataclass(frozen=True)
class Transition:
    seq: int
    ts: float
    component: str
    old: State
    new: State
    reason: str | None


class FakeClock:
    """Manually advanced clock for supervision tests."""

    def __init__(self, start: float = 0.0):
        self.now = start
        self._lock = threading.Lock()

    def __call__(self) -> float:
        with self._lock:
            return self.now

    def advance(self, dt: float) -> float:
        with self._lock:
            self.now += dt
            return self.now


class StatusBoard:
    """Component statuses plus the full, validated transition history."""

    def __init__(self, names: list[str], clock: Callable[[], float]):
        self.clock = clock
        self._cv = threading.Condition()
        self._statuses = {n: ComponentStatus() for n in names}
        self.history: list[Transition] = []
        self._seq = itertools.count()
        self.observers: list[Callable[[Transition], None]] = []

    def transition(self, name: str, new: State, reason: str | None = None) -> Transition:
        with self._cv:
            status = self._statuses[name]
            if new not in LEGAL_TRANSITIONS[status.state]:
                raise IllegalTransition(f"{name}: {status.state} -> {new}")
            if new == State.FAILED and not reason:
                raise ValueError("a Failed status needs a reason")
            t = Transition(next(self._seq), self.clock(), name, status.state, new, reason)
            status.state = new
            status.reason = reason
            self.history.append(t)
            self._cv.notify_all()
        for obs in self.observers:
            obs(t)
        return t

    def update(self, name: str, **changes) -> None:
        with self._cv:
            for k, v in changes.items():
                setattr(self._statuses[name], k, v)
            self._cv.notify_all()

    def get(self, name: str) -> ComponentStatus:
        with self._cv:
            s = self._statuses[name]
            return ComponentStatus(s.state, s.reason, s.last_heartbeat, s.restarts)

    def snapshot(self) -> dict[str, ComponentStatus]:
        with self._cv:
            return {n: ComponentStatus(s.state, s.reason, s.last_heartbeat, s.restarts)
                    for n, s in self._statuses.items()}

    def __contains__(self, name: str) -> bool:
        return name in self._statuses

    def wait_for(self, predicate: Callable[[dict[str, ComponentStatus]], bool], timeout: float | None) -> bool:
        with self._cv:
            return self._cv.wait_for(lambda: predicate(self._statuses), timeout)


class Supervisor:
    """Counts missed heartbeat intervals; pure bookkeeping, no threads."""

    def __init__(self, interval: float, degraded_after: int = 3, failed_after: int = 6):
        self.interval = interval
        self.degraded_after = degraded_after
        self.failed_after = failed_after
        self.last: dict[str, float] = {}

    def beat(self, name: str, now: float) -> None:
        self.last[name] = now

    def missed(self, name: str, now: float) -> int:
        if name not in self.last:
            return 0
        return math.floor((now - self.last[name]) / self.interval + 1e-9)

    def verdict(self, name: str, state: State, now: float) -> State | None:
        """The state the component should move to, if any."""
        if state not in (State.RUNNING, State.DEGRADED):
            return None
        missed = self.missed(name, now)
        if missed >= self.failed_after:
            return State.FAILED
        if missed >= self.degraded_after and state == State.RUNNING:
            return State.DEGRADED
        return None


# -- logging ---------------------------------------------------------------------

@dataclass(frozen=True)
class LogRecord:
    ts: int
    slot: int | None
    component: str
    level: str
    message: str
    seq: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {"ts": self.ts, "slot": self.slot, "component": self.component, "level": self.level, "msg": self.message},
            separators=(",", ":"),
        )


class LogBus:
    """Bounded log queue drained by one collector thread.

    Producers block while the queue is full. Timestamps are nanoseconds of
    wall clock, clamped so each component's records never go backwards.
    """

    def __init__(self, capacity: int = 65536):
        self._queue: queue.Queue = queue.Queue(maxsize=capacity)
        self._records: list[LogRecord] = []
        self._lock = threading.Lock()
        self._last_ts: dict[str, int] = {}
        self._seq: dict[str, int] = {}
        self._thread = threading.Thread(target=self._collect, name="log-collector", daemon=True)
        self._thread.start()
        self.closed = False

    def emit(self, component: str, level: str, message: str, slot: int | None = None) -> None:
        if level not in LOG_LEVELS:
            raise ValueError(f"unknown log level {level!r}")
        with self._lock:
            ts = max(time.time_ns(), self._last_ts.get(component, 0))
            self._last_ts[component] = ts
            seq = self._seq.get(component, 0)
            self._seq[component] = seq + 1
            # Enqueue under the lock so per-component order survives.
            self._queue.put(LogRecord(ts, slot, component, level, message, seq))

    def logger_for(self, component: str) -> Callable[..., None]:
        def log(level: str, message: str, slot: int | None = None) -> None:
            self.emit(component, level, message, slot)

        return log

    def _collect(self) -> None:
        while True:
            rec = self._queue.get()
            if rec is None:
                return
            self._records.append(rec)

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self._queue.put(None)
            self._thread.join()

    def records(self) -> list[LogRecord]:
        return sorted(list(self._records), key=lambda r: (r.ts, r.component, r.seq))


# -- workers ---------------------------------------------------------------------

class Worker(threading.Thread):
    """Lifecycle thread for one component; the in-process 'container'."""

    def __init__(self, handle: "RunHandle", name: str):
        super().__init__(name=f"worker-{name}", daemon=True)
        self.handle = handle
        self.component_name = name
        self.inbox: queue.Queue = queue.Queue()
        self.component = None
        self.session = None
        self.running = False
        self.silenced = False
        self.attempt = 0

    def post(self, *msg) -> None:
        self.handle._inbox.put(msg)

    def run(self) -> None:
        h = self.handle
        auto = not h.options.manual
        interval = h.options.heartbeat_interval
        while True:
            beating = auto and self.running and not self.silenced
            try:
                msg = self.inbox.get(timeout=interval if beating else None)
            except queue.Empty:
                self.post("heartbeat", self.component_name)
                continue
            kind = msg[0]
            if kind == "start":
                self._start_component(msg[1], msg[2])
            elif kind == "pulse":
                if self.running and not self.silenced:
                    self.post("heartbeat", self.component_name)
                msg[1].set()
            elif kind == "silence":
                self.silenced = True
            elif kind == "halt":
                if self.component is not None and msg[1] == self.attempt:
                    self.running = False
            elif kind == "stop":
                self._stop_component()
                return

    def _start_component(self, attempt: int, restarts: int) -> None:
        h = self.handle
        name = self.component_name
        self.attempt = attempt
        self.running = False
        self.silenced = False
        self.post("starting", name, attempt)
        if self.session is None:
            self.session = h.store.open_session(name)
        try:
            comp, port = create_component(
                h.spec, name, h.sim, metrics=self.session, log=h.logs.logger_for(name), restarts=restarts
            )
        except ComponentError as exc:
            reason = str(exc) if str(exc).startswith("bad params") else f"bad params: {exc}"
            self.post("init_failed", name, attempt, reason)
            return
        except Exception as exc:
            self.post("init_failed", name, attempt, f"init error: {type(exc).__name__}: {exc}")
            return
        self.component = comp
        self.running = True
        self.post("ready", name, attempt, comp, port)

    def _stop_component(self) -> None:
        name = self.component_name
        artifacts = {}
        if self.component is not None:
            self.component.stop()
            artifacts = self.component.artifacts()
        if self.session is not None:
            self.session.close()
        self.running = False
        self.post("stopped", name, self.attempt, artifacts)


# -- the run -----------------------------------------------------------------------

@dataclass
class RunReport:
    scenario_id: str
    seed: int
    started_at: str
    finished_at: str
    slots_run: int
    duration_slots: int
    statuses: dict[str, dict[str, Any]]
    counters: dict[str, int]
    event_digest: str
    stages: list[list[str]]
    exports: dict[str, str] = field(default_factory=dict)

    @property
    def any_failed(self) -> bool:
        return any(s["state"] == State.FAILED.value for s in self.statuses.values())

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def _now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="milliseconds")


class RunHandle:
    def __init__(self, plan: ExecutionPlan, options: ControllerOptions, trace=None):
        self.plan = plan
        self.spec = plan.spec
        self.options = options
        self.clock = options.clock
        self.names = plan.spec.names
        self.board = StatusBoard(self.names, self.clock)
        self.supervisor = Supervisor(options.heartbeat_interval, options.degraded_after, options.failed_after)
        self.logs = LogBus(options.log_capacity)
        self.store = MetricsStore(threaded=True)
        self.sim = Simulation(plan.spec, on_failure=self._on_sim_failure, trace=trace)
        self.artifacts: dict[str, str] = {}
        self.counters = {"heartbeats": 0, "restarts": 0, "log_records": 0}
        self.started_at = _now_iso()
        self.finished_at: str | None = None
        self._inbox: queue.Queue = queue.Queue()
        self._attempts: dict[str, int] = {n: 0 for n in self.names}
        self._sim_stop = threading.Event()
        self.done = threading.Event()
        self._sim_thread: threading.Thread | None = None
        self._report: RunReport | None = None
        self.workers = {n: Worker(self, n) for n in self.names}
        self._loop = threading.Thread(target=self._main_loop, name="controller", daemon=True)
        self._loop.start()
        for w in self.workers.values():
            w.start()

    # -- controller loop -----------------------------------------------------

    def _log(self, component: str, level: str, message: str) -> None:
        self.logs.emit(component, level, message)

    def _set(self, name: str, state: State, reason: str | None = None) -> None:
        old = self.board.get(name).state
        self.board.transition(name, state, reason)
        level = "error" if state == State.FAILED else "warn" if state == State.DEGRADED else "info"
        text = f"{old} -> {state}" + (f": {reason}" if reason else "")
        self._log(name, level, text)

    def _main_loop(self) -> None:
        auto = not self.options.manual
        period = self.options.heartbeat_interval / 4
        while True:
            try:
                msg = self._inbox.get(timeout=period if auto else None)
            except queue.Empty:
                msg = None
            if msg is not None:
                if msg[0] == "shutdown":
                    return
                try:
                    self._handle(msg)
                except Exception:
                    logger.exception("controller failed to handle %r", msg[:2])
            if auto:
                self._supervise()

    def _handle(self, msg) -> None:
        kind, name = msg[0], msg[1] if len(msg) > 1 else None
        now = self.clock()
        if kind == "call":
            try:
                msg[1]()
            finally:
                msg[2].set()
            return
        if kind == "heartbeat":
            if name not in self.board:
                self._log("controller", "warn", f"heartbeat from unknown component {name!r} ignored")
                return
            status = self.board.get(name)
            if status.state not in (State.RUNNING, State.DEGRADED):
                return
            self.counters["heartbeats"] += 1
            self.supervisor.beat(name, now)
            self.board.update(name, last_heartbeat=now)
            if status.state == State.DEGRADED:
                self._set(name, State.RUNNING, "heartbeat resumed")
            return
        attempt = msg[2] if len(msg) > 2 else None
        if kind in ("starting", "ready", "init_failed") and attempt != self._attempts[name]:
            return  # stale message from an abandoned start
        state = self.board.get(name).state
        if kind == "starting":
            self._set(name, State.STARTING)
        elif kind == "ready":
            if state != State.STARTING:
                return
            # Activate first so a waiter that sees Running can advance the sim.
            self.sim.activate(name, msg[3], msg[4])
            self.supervisor.beat(name, now)
            self.board.update(name, last_heartbeat=now)
            self._set(name, State.RUNNING)
        elif kind == "init_failed":
            if state == State.STARTING:
                self._set(name, State.FAILED, msg[3])
        elif kind == "sim_failed":
            if state in (State.RUNNING, State.DEGRADED):
                self._set(name, State.FAILED, msg[2])
                self.workers[name].inbox.put(("halt", self._attempts[name]))
        elif kind == "fail":
            if state in (State.RUNNING, State.DEGRADED, State.STARTING):
                self.sim.deactivate(name, msg[2])
                self._set(name, State.FAILED, msg[2])
                self.workers[name].inbox.put(("halt", self._attempts[name]))
        elif kind == "stopped":
            self.artifacts.update(msg[3])
            if state == State.RUNNING:
                self._set(name, State.STOPPED)
            elif state == State.DEGRADED:
                self._set(name, State.FAILED, "stopped while degraded")
            elif state == State.STARTING:
                self._set(name, State.FAILED, "stopped while starting")

    def _supervise(self) -> None:
        now = self.clock()
        for name, status in self.board.snapshot().items():
            verdict = self.supervisor.verdict(name, status.state, now)
            if verdict == State.DEGRADED:
                self._set(name, State.DEGRADED, f"{self.supervisor.missed(name, now)} heartbeats missed")
            elif verdict == State.FAILED:
                self.sim.deactivate(name, "heartbeat lost")
                self._set(name, State.FAILED, "heartbeat lost")
                self.workers[name].inbox.put(("halt", self._attempts[name]))

    def _call(self, fn: Callable[[], None]) -> None:
        done = threading.Event()
        self._inbox.put(("call", fn, done))
        done.wait()

    def _on_sim_failure(self, name: str, reason: str, slot: int) -> None:
        self.logs.emit(name, "error", f"failed at slot {slot}: {reason}", slot)
        self._inbox.put(("sim_failed", name, reason, slot))

    # -- startup --------------------------------------------------------------

    def _launch(self, name: str, restarts: int) -> None:
        self._attempts[name] += 1
        self.workers[name].inbox.put(("start", self._attempts[name], restarts))

    def _await_start(self, names: list[str]) -> None:
        settled = {State.RUNNING, State.FAILED}
        ok = self.board.wait_for(
            lambda st: all(st[n].state in settled for n in names), self.options.start_timeout
        )
        if ok:
            return

        def expire():
            for n in names:
                if self.board.get(n).state in (State.PENDING, State.STARTING):
                    if self.board.get(n).state == State.PENDING:
                        self._set(n, State.STARTING)
                    self._attempts[n] += 1  # ignore the late ready message
                    self._set(n, State.FAILED, "start timeout")

        self._call(expire)

    def _startup(self) -> None:
        blocked: set[str] = set()
        for stage in self.plan.stages:
            launch = []
            for name in stage:
                deps = self.spec.component(name).depends_on
                if any(d in blocked for d in deps):
                    blocked.add(name)
                    self.board.update(name, reason="dependency failed")
                    self._log(name, "warn", "not started: dependency failed")
                else:
                    launch.append(name)
            for name in launch:
                self._launch(name, 0)
            self._await_start(launch)
            blocked.update(n for n in launch if self.board.get(n).state != State.RUNNING)

    def _run_sim(self) -> None:
        slot_s = self.spec.slot_us / 1e6
        t0 = time.perf_counter()
        try:
            while self.sim.slot < self.spec.duration_slots and not self._sim_stop.is_set():
                self.sim.advance_slot()
                if self.spec.realtime:
                    delay = t0 + self.sim.slot * slot_s - time.perf_counter()
                    if delay > 0:
                        time.sleep(delay)
        except Exception as exc:
            logger.exception("simulation aborted")
            self.logs.emit("controller", "error", f"simulation aborted: {exc}")
        finally:
            self.done.set()

    # -- public API -------------------------------------------------------------

    def status(self, name: str) -> ComponentStatus:
        return self.board.get(name)

    def statuses(self) -> dict[str, ComponentStatus]:
        return self.board.snapshot()

    def heartbeat(self, name: str) -> None:
        self._inbox.put(("heartbeat", name))

    def silence(self, name: str) -> None:
        """Fault injection: the worker stops sending heartbeats."""
        self.workers[name].inbox.put(("silence",))

    def inject_fault(self, name: str, reason: str = "injected fault", slot: int | None = None) -> None:
        """Fail a component now, or at a slot boundary when ``slot`` is given.

        Slot-scheduled faults must be injected before the simulation passes
        that slot; they keep the run deterministic.
        """
        if slot is None:
            self._inbox.put(("fail", name, reason))
            self.board.wait_for(lambda st: st[name].state == State.FAILED, self.options.stop_timeout)
        else:
            self.sim.schedule_fault(name, slot, reason)

    def pulse(self) -> None:
        """Manual mode: one heartbeat round from every live worker, then supervise."""
        acks = []
        for w in self.workers.values():
            ev = threading.Event()
            w.inbox.put(("pulse", ev))
            acks.append(ev)
        for ev in acks:
            ev.wait()
        self._call(self._supervise)

    def advance(self, slots: int = 1) -> None:
        """Manual mode: run ``slots`` simulation slots on the calling thread."""
        if not self.options.manual:
            raise RuntimeError("advance() is only available in manual mode")
        for _ in range(slots):
            if self.sim.slot >= self.spec.duration_slots:
                self.done.set()
                break
            self.sim.advance_slot()
        self._call(lambda: None)  # let failure messages land on the board

    def wait(self, timeout: float | None = None) -> bool:
        return self.done.wait(timeout)

    def restart(self, name: str) -> ComponentStatus:
        status = self.board.get(name)
        if status.state != State.FAILED:
            raise NotRestartable(f"{name} is {status.state}: not restartable")
        restarts = status.restarts + 1
        self.board.update(name, restarts=restarts)
        self.counters["restarts"] += 1
        self._log(name, "info", f"restart #{restarts}")
        mark = len(self.board.history)
        self._launch(name, restarts)

        def settled(st):
            return any(t.component == name and t.old == State.STARTING for t in self.board.history[mark:])

        if not self.board.wait_for(settled, self.options.start_timeout):
            def expire():
                if self.board.get(name).state == State.STARTING:
                    self._attempts[name] += 1
                    self._set(name, State.FAILED, "start timeout")
            self._call(expire)
        return self.board.get(name)

    def drain_logs(self) -> Iterator[LogRecord]:
        return iter(self.logs.records())

    def live_workers(self) -> list[str]:
        return [n for n, w in self.workers.items() if w.is_alive()]

    def stop(self) -> RunReport:
        if self._report is not None:
            return self._report
        self._sim_stop.set()
        if self._sim_thread is not None:
            self._sim_thread.join()
        for stage in reversed(self.plan.stages):
            for name in reversed(stage):
                w = self.workers[name]
                w.inbox.put(("stop",))
                w.join(self.options.stop_timeout)
                if w.is_alive():
                    def mark(name=name):
                        st = self.board.get(name).state
                        if st == State.PENDING:
                            self._set(name, State.STARTING)
                            st = State.STARTING
                        if st != State.FAILED and State.FAILED in LEGAL_TRANSITIONS[st]:
                            self._set(name, State.FAILED, "stop timeout")
                    self._call(mark)
                else:
                    self._call(lambda: None)
        self._inbox.put(("shutdown",))
        self._loop.join()
        self.store.flush()
        self.store.close()
        self.logs.close()
        self.finished_at = _now_iso()
        self.counters["log_records"] = len(self.logs.records())
        self._report = RunReport(
            scenario_id=self.spec.id,
            seed=self.spec.seed,
            started_at=self.started_at,
            finished_at=self.finished_at,
            slots_run=self.sim.slot,
            duration_slots=self.spec.duration_slots,
            statuses={n: s.to_dict() for n, s in self.board.snapshot().items()},
            counters={**self.counters, "metric_values": len(self.store), "events": self.sim.event_count},
            event_digest=self.sim.digest,
            stages=[list(s) for s in self.plan.stages],
        )
        return self._report


def start_run(plan: ExecutionPlan, options: ControllerOptions | None = None, trace=None,
              faults: list[tuple[str, int]] = ()) -> RunHandle:
    """Start workers stage by stage, then the simulation (unless manual)."""
    handle = RunHandle(plan, options or ControllerOptions(), trace=trace)
    for name, slot in faults:
        handle.sim.schedule_fault(name, slot, "injected fault")
    handle._startup()
    if not handle.options.manual:
        handle._sim_thread = threading.Thread(target=handle._run_sim, name="simulation", daemon=True)
        handle._sim_thread.start()
    return handle


def stop_run(handle: RunHandle) -> RunReport:
    return handle.stop()


def heartbeat(handle: RunHandle, component: str) -> None:
    handle.heartbeat(component)


def restart(handle: RunHandle, component: str) -> ComponentStatus:
    return handle.restart(component)


def drain_logs(handle: RunHandle) -> Iterator[LogRecord]:
    return handle.drain_logs()
