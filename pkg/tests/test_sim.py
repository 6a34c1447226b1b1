import io
import json

import pytest

import oracles
from conftest import GNB, REFERENCE, make_spec, ue
from rantest.config import load_scenario, with_overrides
from rantest.engine import create_component, run_headless
from rantest.ransim.sim import Simulation


def events(trace_text):
    return [json.loads(line) for line in trace_text.splitlines()]


def test_empty_sim_has_no_events():
    sim = Simulation(make_spec([GNB]))
    sim.run(100)
    assert sim.slot == 100
    assert sim.event_count == 0


def test_attach_waits_for_first_occasion_at_or_after_attach_slot():
    spec = make_spec([GNB, ue("ue1", 10, attach_slot=95)], duration=200)
    trace = io.StringIO()
    run = run_headless(spec, trace=trace)
    rach = [e for e in events(trace.getvalue()) if e[0] == "rach"]
    assert rach[0][1] == 100
    assert rach[0][2] == "ue1" and rach[0][4] == "granted"
    att = run.store.query("attach")
    assert len(att) == 1 and att[0].values("attempts") == [1.0]


def test_slot_order_attach_handshake():
    """Preamble at 0, RRC at 1, first DCI and SINR at 1."""
    spec = make_spec([GNB, ue("ue1", 10)], duration=5)
    trace = io.StringIO()
    run_headless(spec, trace=trace)
    ev = [(e[0], e[1]) for e in events(trace.getvalue())]
    assert ev[:4] == [("rach", 0), ("rrc", 1), ("dci", 1), ("sinr", 1)]


def test_snr_of_lone_ue_matches_link_budget():
    spec = make_spec([GNB, ue("ue1", 100)], duration=50)
    run = run_headless(spec)
    (series,) = run.store.query("sinr", {"ue": "ue1"})
    expected = oracles.uplink_sinr(100.0)
    assert all(abs(v - expected) < 1e-9 for v in series.values("sinr_db"))


def test_capacity_blocks_extra_ue():
    spec = make_spec([
        {"name": "gnb0", "kind": "gnb", "params": {"max_connections": 1}},
        ue("ue1", 10), ue("ue2", 20, attach_slot=10),
    ], duration=100)
    run = run_headless(spec)
    assert [s.tags["ue"] for s in run.store.query("blocked")] == ["ue2"]
    assert len(run.store.query("attach")) == 1


def test_gnb_crash_on_overflow_fails_gnb_and_releases():
    spec = make_spec([
        {"name": "gnb0", "kind": "gnb", "params": {"crash_on_overflow": True}},
        ue("ue1", 10),
        {"name": "fl", "kind": "rach_flooder", "depends_on": ["gnb0"],
         "params": {"preambles_per_occasion": 512, "start_slot": 20, "stop_slot": 200}},
    ], duration=200)
    run = run_headless(spec)
    (name, reason, slot) = run.failures[0]
    assert name == "gnb0" and "contention overflow" in reason
    rel = run.store.query("release")
    assert rel == [] or all(s.tags["reason"] == "gnb_failure" for s in rel)
    assert not run.sim.gnb_up


def test_rlf_release_under_jammer():
    spec = make_spec([
        GNB, ue("ue1", 100),
        {"name": "jam0", "kind": "jammer", "depends_on": ["gnb0"],
         "params": {"gain_db": 45.0, "start_slot": 50, "stop_slot": 90, "distance_m": 100.0}},
    ], duration=100)
    run = run_headless(spec)
    (sinr,) = run.store.query("sinr")
    jammed = [v for t, v in sinr.fields["sinr_db"] if t >= 50]
    assert jammed[0] == pytest.approx(-25.0, abs=0.05)
    (rel,) = run.store.query("release")
    # Jamming starts at slot 50; ten consecutive bad slots end at 59.
    assert [t for t, _ in rel.fields["rnti"]] == [59]
    assert rel.tags["reason"] == "radio_link_failure"


def test_scheduled_fault_fails_component():
    spec = make_spec([GNB, ue("ue1", 10)], duration=60)
    run = run_headless(spec, faults=[("ue1", 30)])
    assert run.failures == [("ue1", "injected fault", 30)]
    assert [s.tags["reason"] for s in run.store.query("release")] == ["ue_detached"]


def test_deterministic_digest_and_metrics():
    spec = load_scenario(REFERENCE)
    a = run_headless(spec, slots=1500)
    b = run_headless(spec, slots=1500)
    assert a.sim.digest == b.sim.digest
    assert a.store.to_csv() == b.store.to_csv()
    c = run_headless(with_overrides(spec, seed=spec.seed + 1), slots=1500)
    assert c.sim.digest != a.sim.digest


def test_passive_components_are_contained():
    base = [GNB, ue("ue1", 50), ue("ue2", 150),
            {"name": "jam0", "kind": "jammer", "depends_on": ["gnb0"],
             "params": {"gain_db": 45.0, "start_slot": 100, "stop_slot": 200, "distance_m": 300.0}}]
    passive = [{"name": "sniff0", "kind": "dci_sniffer", "depends_on": ["gnb0"], "params": {"target": "gnb0"}},
               {"name": "iq0", "kind": "iq_collector", "params": {"burst_len": 5, "period": 50}},
               {"name": "b", "kind": "beacon"}]
    a = run_headless(make_spec(base, duration=300))
    b = run_headless(make_spec(base + passive, duration=300))
    assert a.sim.digest == b.sim.digest


def test_component_exception_fails_only_that_component():
    spec = make_spec([GNB, ue("ue1", 10), {"name": "b", "kind": "beacon"}], duration=20)
    sim = Simulation(spec)
    comps = {}
    for name in spec.names:
        comps[name], port = create_component(spec, name, sim)
        sim.activate(name, comps[name], port)

    def boom(ctx):
        raise RuntimeError("boom")

    comps["b"].observe = boom
    sim.run(20)
    assert sim.failures == [("b", "boom", 0)]
    assert "b" not in sim.active and "ue1" in sim.active
