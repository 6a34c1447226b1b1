"""Run a scenario in-process without the controller's worker threads.

Used for seeded sweeps and as the reference path the supervised run must
reproduce: both drive the same :class:`Simulation` with the same seeds.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .component import Component, InitContext, component_class
from .config import ScenarioSpec, build_plan, derive_component_seed
from .metrics import MetricsStore
from .ransim.commands import CommandPort
from .ransim.sim import Simulation


@dataclass
class HeadlessRun:
    spec: ScenarioSpec
    sim: Simulation
    store: MetricsStore
    components: dict[str, Component] = field(default_factory=dict)

    @property
    def failures(self):
        return self.sim.failures


def create_component(spec: ScenarioSpec, name: str, sim: Simulation, metrics=None, log=None,
                     restarts: int = 0) -> tuple[Component, CommandPort]:
    cspec = spec.component(name)
    comp = component_class(cspec.kind)()
    port = CommandPort(name)
    seed_name = name if restarts == 0 else f"{name}#{restarts}"
    ctx = InitContext(name=name, spec=cspec, seed=derive_component_seed(spec.seed, seed_name),
                      commands=port, env=sim.env)
    if metrics is not None:
        ctx.metrics = metrics
    if log is not None:
        ctx.log = log
    comp.init(ctx)
    return comp, port


def run_headless(spec: ScenarioSpec, slots: int | None = None, faults=(), trace=None,
                 threaded_metrics: bool = False) -> HeadlessRun:
    """Initialise every component in plan order and advance the simulation.

    ``faults`` is an iterable of ``(name, slot)`` pairs failing a component
    at a slot boundary.
    """
    plan = build_plan(spec)
    sim = Simulation(spec, trace=trace)
    store = MetricsStore(threaded=threaded_metrics)
    run = HeadlessRun(spec, sim, store)
    for stage in plan.stages:
        for name in stage:
            comp, port = create_component(spec, name, sim, metrics=store.open_session(name))
            run.components[name] = comp
            sim.activate(name, comp, port)
    for name, slot in faults:
        sim.schedule_fault(name, slot)
    sim.run(spec.duration_slots if slots is None else slots)
    for comp in run.components.values():
        comp.stop()
    store.close()
    return run
