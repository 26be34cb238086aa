"""Framing, packet sealing, counters, and replay-window tests."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmlink import codec, crypto
from swarmlink.errors import (
    AuthError,
    CounterExhausted,
    MessageTooLarge,
    NoBroadcastKey,
    ReplayError,
    UnknownEpoch,
    ValidationError,
)
from swarmlink.rekey import BroadcastKey, KeyRing


def bkey(epoch=1, byte=0x20, not_after=1e9):
    return BroadcastKey(epoch=epoch, key=crypto.SymmetricKey(bytes([byte]) * 32, crypto.KeyPurpose.BROADCAST), not_after=not_after)


def ring(epoch=1, byte=0x20):
    r = KeyRing()
    r.install(bkey(epoch, byte), now=0.0, grace_window_s=5.0)
    return r


def msg(i, payload):
    return codec.TelemetryMessage(msg_id=i, source_node=7, payload=payload)


# ---- frames -----------------------------------------------------------------


def test_frame_roundtrip_simple():
    f = codec.Frame(messages=(msg(1, b"abc"), msg(2, b"")))
    back = codec.Frame.from_bytes(f.to_bytes())
    assert back == f


def test_frame_roundtrip_boundaries():
    empty = codec.Frame(messages=())
    assert codec.Frame.from_bytes(empty.to_bytes()) == empty
    big = codec.Frame(messages=(msg(1, bytes(255)),))
    assert codec.Frame.from_bytes(big.to_bytes()) == big
    many = codec.Frame(messages=tuple(msg(i % 256, b"x") for i in range(255)))
    assert codec.Frame.from_bytes(many.to_bytes()) == many


def test_frame_rejects_overlong():
    with pytest.raises(ValidationError):
        codec.TelemetryMessage(msg_id=1, source_node=7, payload=bytes(256))
    with pytest.raises(ValidationError):
        codec.Frame(messages=(msg(1, b""),) * 256)


def test_frame_parse_rejects_trailing_bytes():
    raw = codec.Frame(messages=(msg(1, b"ab"),)).to_bytes()
    with pytest.raises(ValidationError):
        codec.Frame.from_bytes(raw + b"\x00")


def test_frame_parse_rejects_truncation():
    raw = codec.Frame(messages=(msg(1, b"abcd"),)).to_bytes()
    for cut in range(len(raw)):
        with pytest.raises(ValidationError):
            codec.Frame.from_bytes(raw[:cut])


# ---- packing ----------------------------------------------------------------


def oracle_pack(sizes, capacity):
    """Reference packing: walk messages in order, close the frame when the
    next one does not fit. Returns the list of per-frame message counts."""
    frames = []
    used = 1  # count byte
    count = 0
    for s in sizes:
        need = 4 + s
        if count and used + need > capacity:
            frames.append(count)
            used, count = 1, 0
        used += need
        count += 1
    if count:
        frames.append(count)
    return frames


@given(
    st.lists(st.integers(min_value=0, max_value=255), max_size=60),
    st.integers(min_value=300, max_value=1500),
)
@settings(max_examples=200, deadline=None)
def test_compose_matches_oracle_and_preserves_order(sizes, mtu):
    cap = codec.frame_capacity(mtu)
    msgs = [codec.TelemetryMessage(msg_id=i % 256, source_node=i % 65536, payload=bytes([i % 256]) * s) for i, s in enumerate(sizes)]
    frames = codec.compose_frames(msgs, mtu)
    assert [len(f.messages) for f in frames] == oracle_pack(sizes, cap)
    flat = [m for f in frames for m in f.messages]
    assert flat == msgs
    for f in frames:
        assert f.serialized_len() <= cap
        assert codec.Frame.from_bytes(f.to_bytes()) == f


def test_compose_rejects_unfittable_message():
    mtu = 200  # small enough that the 255-byte payload cap is not the binding limit
    cap = codec.frame_capacity(mtu)
    too_big = cap - 4  # payload such that 1 + 4 + payload > cap
    with pytest.raises(MessageTooLarge):
        codec.compose_frames([msg(1, bytes(too_big))], mtu)
    fits = cap - 5
    assert codec.compose_frames([msg(1, bytes(fits))], mtu)


def test_frame_capacity_accounts_for_packet_overhead():
    assert codec.frame_capacity(1500) == 1500 - codec.PACKET_OVERHEAD
    assert codec.PACKET_OVERHEAD == codec.HEADER_LEN + crypto.TAG_LEN


# ---- wire packets -----------------------------------------------------------


def test_packet_roundtrip_bytes():
    r = ring()
    counters = codec.PacketCounters()
    frame = codec.Frame(messages=(msg(3, b"hello"),))
    pkt = codec.seal_packet(r, 9, 4, 8, frame, counters)
    back = codec.WirePacket.from_bytes(pkt.to_bytes())
    assert back == pkt
    assert back.wire_len() == len(pkt.to_bytes())


def test_packet_nonce_and_aad_layout():
    r = ring(epoch=0x01020304)
    counters = codec.PacketCounters()
    pkt = codec.seal_packet(r, 0x0A0B, 1, 8, codec.Frame(messages=()), counters)
    assert pkt.nonce() == bytes.fromhex("01020304") + bytes.fromhex("0a0b") + b"\x00" * 6
    # hop_limit is mutable in flight, so the seal must not bind it: the aad
    # is the header with the hop byte (offset 11) spliced out
    header = pkt.header_bytes()
    assert pkt.aad() == header[:11] + header[12:]
    hop_less = pkt.forwarded()
    assert hop_less.aad() == pkt.aad()
    assert hop_less.hop_limit == 7


def test_forwarded_packet_still_opens():
    r = ring()
    counters = codec.PacketCounters()
    frame = codec.Frame(messages=(msg(1, b"fwd me"),))
    pkt = codec.seal_packet(r, 2, 0, 3, frame, counters)
    hopped = pkt.forwarded().forwarded()
    window = codec.ReplayWindow()
    assert codec.open_packet(r, window, hopped, now=1.0) == frame


def test_open_rejects_tampering_everywhere():
    r = ring()
    counters = codec.PacketCounters()
    frame = codec.Frame(messages=(msg(1, b"integrity"),))
    pkt = codec.seal_packet(r, 2, 0, 3, frame, counters)
    raw = pkt.to_bytes()
    hop_index = 11  # version(1)+epoch(4)+origin(2)+seq(4) precede the hop byte
    for i in range(len(raw)):
        if i == hop_index:
            continue
        mutated = raw[:i] + bytes([raw[i] ^ 0x01]) + raw[i + 1 :]
        window = codec.ReplayWindow()
        if i == 0:
            with pytest.raises(ValidationError):
                codec.WirePacket.from_bytes(mutated)
            continue
        bad = codec.WirePacket.from_bytes(mutated)
        with pytest.raises((AuthError, UnknownEpoch)):
            codec.open_packet(r, window, bad, now=1.0)


def test_open_unknown_epoch():
    r = ring(epoch=5)
    counters = codec.PacketCounters()
    pkt = codec.seal_packet(r, 2, 0, 3, codec.Frame(messages=()), counters)
    other = ring(epoch=6, byte=0x33)
    with pytest.raises(UnknownEpoch):
        codec.open_packet(other, codec.ReplayWindow(), pkt, now=1.0)


def test_seal_without_key():
    counters = codec.PacketCounters()
    with pytest.raises(NoBroadcastKey):
        codec.seal_packet(KeyRing(), 2, 0, 3, codec.Frame(messages=()), counters)


def test_plaintext_mode_roundtrip():
    counters = codec.PacketCounters()
    frame = codec.Frame(messages=(msg(1, b"clear"),))
    pkt = codec.seal_packet_plain(4, 0, 2, frame, counters)
    assert pkt.tag == codec.PLAIN_TAG
    assert pkt.epoch == 0
    out = codec.open_packet_plain(codec.ReplayWindow(), pkt)
    assert out == frame


# ---- counters ---------------------------------------------------------------


def test_counters_monotonic_and_per_epoch():
    c = codec.PacketCounters()
    assert [c.next_for(1) for _ in range(3)] == [0, 1, 2]
    assert c.next_for(2) == 0  # fresh epoch, fresh space
    assert c.next_for(1) == 3


def test_counter_exhaustion():
    c = codec.PacketCounters()
    c._next[7] = codec.MAX_COUNTER  # one value left in the 48-bit field
    assert c.next_for(7) == codec.MAX_COUNTER
    with pytest.raises(CounterExhausted):
        c.next_for(7)


# ---- replay windows ---------------------------------------------------------


def test_window_accept_once():
    w = codec.ReplayWindow()
    w.check(1, 1, 0)
    w.accept(1, 1, 0)
    with pytest.raises(ReplayError):
        w.check(1, 1, 0)


def test_window_out_of_order_within_width():
    w = codec.ReplayWindow()
    w.accept(1, 1, 10)
    w.check(1, 1, 5)
    w.accept(1, 1, 5)
    with pytest.raises(ReplayError):
        w.check(1, 1, 5)
    w.check(1, 1, 4)  # still inside the window and unseen


def test_window_too_old_rejected():
    w = codec.ReplayWindow()
    w.accept(1, 1, 100)
    with pytest.raises(ReplayError):
        w.check(1, 1, 100 - codec.REPLAY_WINDOW)
    w.check(1, 1, 100 - codec.REPLAY_WINDOW + 1)


def test_window_keyed_by_origin_and_epoch():
    w = codec.ReplayWindow()
    w.accept(1, 1, 0)
    w.check(2, 1, 0)  # other origin unaffected
    w.check(1, 2, 0)  # other epoch unaffected


def test_window_advances_only_after_accept():
    r = ring()
    counters = codec.PacketCounters()
    frame = codec.Frame(messages=(msg(1, b"x"),))
    pkt = codec.seal_packet(r, 2, 0, 3, frame, counters)
    bad = codec.WirePacket.from_bytes(pkt.to_bytes()[:-1] + bytes([pkt.to_bytes()[-1] ^ 1]))
    w = codec.ReplayWindow()
    with pytest.raises(AuthError):
        codec.open_with_key(r.current.key, w, bad)
    # the failed open must not have burned the counter
    assert codec.open_with_key(r.current.key, w, pkt) == frame


@given(st.lists(st.integers(min_value=0, max_value=300), min_size=1, max_size=120))
@settings(max_examples=100, deadline=None)
def test_window_property_accept_at_most_once(counter_draws):
    w = codec.ReplayWindow()
    accepted = set()
    for c in counter_draws:
        try:
            w.check(3, 1, c)
        except ReplayError:
            highest = max(accepted) if accepted else -1
            assert c in accepted or c <= highest - codec.REPLAY_WINDOW
            continue
        w.accept(3, 1, c)
        assert c not in accepted
        accepted.add(c)
