import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from rantest.config import ChannelSpec
from rantest.ransim.channel import LinkBudget, path_loss, sinr, sinr_db
from rantest.ransim.pdcch import decodable, schedule_pdcch
from rantest.ransim.rach import (
    COLLISION, DROPPED, GRANTED, GnbParams, GnbState, RachPreamble, rach_occasion,
)
from rantest.ransim.rlf import OK, RELEASED, RadioLinkMonitor, radio_link_monitor
from rantest.ransim.rrc import (
    IDENTITY_MAX, LENGTH_BITS, TOLERANT_BITS, RrcReject, RrcSetupRequest,
    decode_setup_request, encode_setup_request, flip_bit,
)

CH = ChannelSpec()
# Power levels within ~100 dB of each other stay distinguishable in doubles.
dbm = st.floats(-150, 0)
noise_dbm = st.floats(-120, -60)


# -- channel ------------------------------------------------------------------

def test_path_loss_reference_points():
    assert path_loss(1.0, CH) == 40.0
    assert path_loss(100.0, CH) == pytest.approx(94.0, abs=1e-9)
    assert path_loss(0.1, CH) == 40.0  # clamped to d0


@given(st.floats(1, 1e5), st.floats(1, 1e5))
def test_path_loss_matches_oracle_and_is_monotone(d1, d2):
    assert path_loss(d1, CH) == pytest.approx(oracles.path_loss_db(d1), abs=1e-9)
    if d2 > d1:
        assert path_loss(d2, CH) > path_loss(d1, CH)


def test_snr_without_interference():
    assert sinr(-74.0, [], -94.0) == pytest.approx(20.0, abs=1e-12)


def test_sinr_under_45db_jammer_at_100m():
    interferer = 45.0 - path_loss(100.0, CH)
    assert interferer == pytest.approx(-49.0)
    link = LinkBudget.for_link(20.0, 100.0, CH, [interferer])
    assert link.rx_power_dbm == pytest.approx(-74.0)
    assert link.sinr_db == pytest.approx(-25.0, abs=0.05)
    assert link.sinr_db == pytest.approx(oracles.uplink_sinr(100.0, [(45.0, 100.0)]), abs=1e-9)


def test_sinr_under_60db_is_lower():
    s45 = oracles.uplink_sinr(100.0, [(45.0, 100.0)])
    s60 = sinr(-74.0, [60.0 - path_loss(100.0, CH)], -94.0)
    assert s60 == pytest.approx(-40.0, abs=0.05)
    assert s60 < s45


@given(dbm, st.lists(dbm, max_size=4), noise_dbm, dbm)
def test_sinr_monotonicity(signal, interferers, noise, extra):
    base = sinr_db(signal, interferers, noise)
    assert base == pytest.approx(oracles.sinr_db(signal, interferers, noise), abs=1e-9)
    # A term ~100 dB under the floor vanishes in float addition, so strict
    # decrease is only required for terms that can move the sum.
    floor = 10 * math.log10(sum(10 ** (p / 10) for p in [noise] + interferers))
    worse = sinr_db(signal, interferers + [extra], noise)
    assert worse <= base
    if extra > floor - 100:
        assert worse < base
    assert sinr_db(signal + 1.0, interferers, noise) > base
    if interferers:
        louder = [interferers[0] + 1.0] + interferers[1:]
        assert sinr_db(signal, louder, noise) <= base
        if interferers[0] > floor - 100:
            assert sinr_db(signal, louder, noise) < base


@given(st.floats(1, 1000), st.floats(1, 1000), st.floats(0, 80), st.floats(1, 1000))
def test_sinr_decreases_with_ue_distance(d1, d2, gain, djam):
    if d1 == d2:
        return
    near, far = sorted((d1, d2))
    j = [gain - path_loss(djam, CH)]
    a = LinkBudget.for_link(20.0, near, CH, j).sinr_db
    b = LinkBudget.for_link(20.0, far, CH, j).sinr_db
    assert a > b


# -- RRC codec --------------------------------------------------------------------

def test_encode_all_zero_payload():
    assert encode_setup_request(RrcSetupRequest(0, 0)).hex(" ") == "01 00 00 00 00 00 00"


def test_encode_max_fields_matches_bit_packer():
    got = encode_setup_request(RrcSetupRequest(IDENTITY_MAX, 7))
    assert got == oracles.pack_setup_request(2**39 - 1, 7)
    # Cause 7 is 0111, so bit 47 (the cause MSB) stays clear: byte 5 is FE.
    assert got.hex(" ").upper() == "01 FF FF FF FF FE E0"


@given(st.integers(0, IDENTITY_MAX), st.integers(0, 7))
def test_codec_round_trip(identity, cause):
    msg = RrcSetupRequest(identity, cause)
    buf = encode_setup_request(msg)
    assert len(buf) == 7
    assert buf == oracles.pack_setup_request(identity, cause)
    assert decode_setup_request(buf) == msg


@pytest.mark.parametrize("cause", range(8))
@pytest.mark.parametrize("identity", [0, 1, IDENTITY_MAX - 1, IDENTITY_MAX])
def test_codec_corners(identity, cause):
    assert decode_setup_request(encode_setup_request(RrcSetupRequest(identity, cause))) == (
        RrcSetupRequest(identity, cause)
    )


def test_spare_flip_rejected():
    buf = flip_bit(encode_setup_request(RrcSetupRequest(5, 1)), 55)
    with pytest.raises(RrcReject) as exc:
        decode_setup_request(buf)
    assert exc.value.reason == "bad_spare"


@given(st.binary(min_size=7, max_size=7))
def test_decoder_agrees_with_oracle(buf):
    expected = oracles.unpack_setup_request(buf)
    try:
        msg = decode_setup_request(buf)
    except RrcReject as exc:
        assert expected == ("reject", exc.reason)
    else:
        assert expected == ("ok", msg.ue_identity, msg.establishment_cause)


def test_reject_order_reports_only_first():
    buf = bytes([0x02]) + b"\xff" * 6  # bad type, bad cause and bad spare at once
    with pytest.raises(RrcReject, match="bad_type"):
        decode_setup_request(buf)
    buf = bytes([0x01]) + b"\xff" * 6
    with pytest.raises(RrcReject, match="bad_cause"):
        decode_setup_request(buf)


def test_codec_input_checks():
    with pytest.raises(ValueError):
        encode_setup_request(RrcSetupRequest(IDENTITY_MAX + 1, 0))
    with pytest.raises(ValueError):
        encode_setup_request(RrcSetupRequest(0, 8))
    with pytest.raises(ValueError):
        decode_setup_request(b"\x01" * 6)


def test_tolerant_set_exhaustive_single_flips():
    buf = encode_setup_request(RrcSetupRequest(123456789, 2))
    accepted = set()
    for pos in range(LENGTH_BITS):
        try:
            decode_setup_request(flip_bit(buf, pos))
            accepted.add(pos)
        except RrcReject:
            pass
    assert accepted == TOLERANT_BITS
    assert len(accepted) == 42 == oracles.exhaustive_single_flip_accepts()


@given(st.integers(0, IDENTITY_MAX), st.integers(0, 7), st.sets(st.integers(0, 55), min_size=1, max_size=6))
def test_multi_flip_accepted_iff_all_in_tolerant_set(identity, cause, positions):
    buf = encode_setup_request(RrcSetupRequest(identity, cause))
    for p in positions:
        buf = flip_bit(buf, p)
    try:
        decode_setup_request(buf)
        ok = True
    except RrcReject:
        ok = False
    assert ok == positions.issubset(TOLERANT_BITS)


# -- RLF ------------------------------------------------------------------------------

def test_rlf_steady_good_link():
    assert radio_link_monitor([20.0] * 1000) is None


def test_rlf_release_after_ten_slots():
    series = [20.0] * 50 + [-25.0] * 50
    assert radio_link_monitor(series) == 50 + 9


def test_rlf_nine_slot_dip_recovers():
    series = ([20.0] * 5 + [-25.0] * 9) * 20
    assert radio_link_monitor(series) is None


def test_rlf_monitor_latches():
    mon = RadioLinkMonitor(slots=2)
    assert [mon.update(x) for x in (-10, -10, 30)] == [OK, RELEASED, RELEASED]


# -- RACH ----------------------------------------------------------------------------

def pre(src, idx, occ=0):
    return RachPreamble(occ, idx, src)


def test_single_preamble_granted():
    g = GnbState()
    out = rach_occasion(g, [pre("ue1", 7)], random.Random(0))
    o = out[("ue1", 7)]
    assert o.kind == GRANTED and o.rnti in g.pending_contention


def test_same_index_collides_for_both():
    g = GnbState()
    out = rach_occasion(g, [pre("a", 3), pre("b", 3)], random.Random(0))
    assert {o.kind for o in out.values()} == {COLLISION}
    assert not g.pending_contention


def test_preamble_index_checked():
    with pytest.raises(ValueError):
        RachPreamble(0, 64, "x")


def test_duplicate_index_from_one_source_counts_once():
    out = rach_occasion(GnbState(), [pre("a", 3), pre("a", 3)], random.Random(0))
    assert list(out) == [("a", 3)] and out[("a", 3)].kind == GRANTED


@given(st.lists(st.tuples(st.sampled_from("abcde"), st.integers(0, 63)), max_size=80),
       st.integers(0, 40), st.integers(0, 2**32))
def test_contention_soundness(pairs, capacity, seed):
    g = GnbState(GnbParams(pending_capacity=capacity))
    out = rach_occasion(g, [pre(s, i) for s, i in pairs], random.Random(seed))
    granted = [c for c, o in out.items() if o.kind == GRANTED]
    assert len({i for _, i in granted}) == len(granted)
    rntis = [out[c].rnti for c in granted]
    assert len(set(rntis)) == len(rntis) and 0 not in rntis
    assert len(g.pending_contention) <= capacity
    for (s, i), o in out.items():
        shared = sum(1 for (s2, i2) in out if i2 == i) > 1
        assert (o.kind == COLLISION) == shared


def test_overflow_drops_and_optionally_crashes():
    g = GnbState(GnbParams(pending_capacity=4))
    out = rach_occasion(g, [pre(f"s{i}", i) for i in range(10)], random.Random(1))
    kinds = [o.kind for o in out.values()]
    assert kinds.count(GRANTED) == 4 and kinds.count(DROPPED) == 6
    assert not g.failed
    g = GnbState(GnbParams(pending_capacity=4, crash_on_overflow=True))
    rach_occasion(g, [pre(f"s{i}", i) for i in range(10)], random.Random(1))
    assert g.failed and g.failure_reason == "contention overflow"


def test_pending_expiry():
    g = GnbState()
    rach_occasion(g, [pre("a", 1, occ=0)], random.Random(0))
    assert g.expire_pending(29) == []
    assert len(g.expire_pending(30)) == 1 and not g.pending_contention


def test_flood_grant_probability_monte_carlo():
    rng = random.Random(2024)
    n = 4000
    wins = 0
    for _ in range(n):
        g = GnbState()
        pre_list = [pre("ue", rng.randrange(64))] + [pre("flood", rng.randrange(64)) for _ in range(64)]
        wins += rach_occasion(g, pre_list, rng)[pre_list[0].source, pre_list[0].index].kind == GRANTED
    p = oracles.flood_grant_probability(64)
    assert abs(wins / n - p) <= 3 * oracles.binomial_sigma(p, n)


# -- PDCCH -------------------------------------------------------------------------

def test_pdcch_empty_and_single():
    g = GnbState()
    assert schedule_pdcch(g, 0, [], random.Random(0)) == []
    (d,) = schedule_pdcch(g, 0, [0x4601], random.Random(0))
    assert 0 <= d.candidate < 16 and d.rnti == 0x4601
    assert 0 <= d.mcs <= 28 and d.rb_start + d.rb_len <= 52 and d.rb_len >= 1


def test_pdcch_period():
    g = GnbState(GnbParams(pdcch_period_slots=4))
    assert schedule_pdcch(g, 2, [1], random.Random(0)) == []
    assert len(schedule_pdcch(g, 4, [1], random.Random(0))) == 1


def test_pdcch_deterministic():
    a = schedule_pdcch(GnbState(), 3, [5, 9, 7], random.Random(11))
    b = schedule_pdcch(GnbState(), 3, [9, 7, 5], random.Random(11))
    assert a == b


def test_pdcch_collision_rate_three_ues():
    g = GnbState()
    rng = random.Random(99)
    captured = total = 0
    for slot in range(10_000):
        dcis = schedule_pdcch(g, slot, [1, 2, 3], rng)
        captured += len(decodable(dcis))
        total += len(dcis)
    p = oracles.capture_probability(3)
    assert p == (15 / 16) ** 2
    # DCIs of one slot are correlated; 3 sigma on slot-level bound is looser.
    assert abs(captured / total - p) <= 3 * oracles.binomial_sigma(p, total) * math.sqrt(3)


def test_decodable_drops_both_on_shared_candidate():
    from rantest.ransim.pdcch import DciRecord
    a = DciRecord(0, 1, 5, 0, 1, 0)
    b = DciRecord(0, 2, 5, 0, 1, 0)
    c = DciRecord(0, 3, 6, 0, 1, 0)
    assert decodable([a, b, c]) == [c]
