"""Flooding mechanics and star relay tests at the module level."""

import random

import pytest

from swarmlink import codec, crypto, mesh
from swarmlink.errors import AuthError, ReplayError
from swarmlink.handshake import SessionTable
from swarmlink.rekey import BroadcastKey, KeyRing


def make_ring(epoch=1, byte=0x55):
    ring = KeyRing()
    ring.install(
        BroadcastKey(epoch=epoch, key=crypto.SymmetricKey(bytes([byte]) * 32, crypto.KeyPurpose.BROADCAST), not_after=1e9),
        now=0.0,
        grace_window_s=5.0,
    )
    return ring


def frame_of(payload=b"telemetry"):
    return codec.Frame(messages=(codec.TelemetryMessage(1, 7, payload),))


def test_dedup_cache_fifo_eviction():
    cache = mesh.DedupCache(capacity=2)
    cache.add(1, 1)
    cache.add(1, 2)
    assert cache.seen(1, 1) and cache.seen(1, 2)
    cache.add(1, 3)  # evicts (1,1), the oldest entry
    assert not cache.seen(1, 1)
    assert cache.seen(1, 2) and cache.seen(1, 3)
    assert len(cache) == 2


def test_dedup_cache_capacity_validated():
    with pytest.raises(ValueError):
        mesh.DedupCache(capacity=0)


def test_originate_assigns_sequences_and_self_dedups():
    ring = make_ring()
    state = mesh.MeshState(node_id=4, dedup=mesh.DedupCache())
    counters = codec.PacketCounters()
    p1 = mesh.originate(state, ring, counters, frame_of(), hop_limit=3)
    p2 = mesh.originate(state, ring, counters, frame_of(), hop_limit=3)
    assert (p1.seq, p2.seq) == (0, 1)
    assert p1.origin == 4
    # a node's own packet echoed back must not be re-flooded
    result = mesh.handle_rx(state, ring, codec.ReplayWindow(), p1, now=0.1)
    assert result.duplicate


def test_handle_rx_delivers_then_suppresses():
    ring = make_ring()
    sender = mesh.MeshState(node_id=2, dedup=mesh.DedupCache())
    receiver = mesh.MeshState(node_id=3, dedup=mesh.DedupCache())
    counters = codec.PacketCounters()
    window = codec.ReplayWindow()
    pkt = mesh.originate(sender, ring, counters, frame_of(b"once"), hop_limit=2)
    first = mesh.handle_rx(receiver, ring, window, pkt, now=0.1)
    assert first.deliver == frame_of(b"once")
    assert first.forward is not None
    assert first.forward.hop_limit == 1
    again = mesh.handle_rx(receiver, ring, window, pkt, now=0.2)
    assert again.duplicate and again.deliver is None and again.forward is None


def test_handle_rx_stops_forwarding_at_hop_zero():
    ring = make_ring()
    sender = mesh.MeshState(node_id=2, dedup=mesh.DedupCache())
    receiver = mesh.MeshState(node_id=3, dedup=mesh.DedupCache())
    pkt = mesh.originate(sender, ring, codec.PacketCounters(), frame_of(), hop_limit=0)
    result = mesh.handle_rx(receiver, ring, codec.ReplayWindow(), pkt, now=0.1)
    assert result.deliver is not None
    assert result.forward is None


def test_handle_rx_failures_do_not_poison_dedup():
    ring = make_ring()
    sender = mesh.MeshState(node_id=2, dedup=mesh.DedupCache())
    receiver = mesh.MeshState(node_id=3, dedup=mesh.DedupCache())
    pkt = mesh.originate(sender, ring, codec.PacketCounters(), frame_of(b"real"), hop_limit=1)
    raw = pkt.to_bytes()
    forged = codec.WirePacket.from_bytes(raw[:-1] + bytes([raw[-1] ^ 1]))
    window = codec.ReplayWindow()
    bad = mesh.handle_rx(receiver, ring, window, forged, now=0.1)
    assert isinstance(bad.error, AuthError)
    assert bad.deliver is None and bad.forward is None
    # the honest copy of the same (origin, seq) still goes through afterward
    good = mesh.handle_rx(receiver, ring, window, pkt, now=0.2)
    assert good.deliver == frame_of(b"real")


def test_handle_rx_replayed_counter_rejected():
    ring = make_ring()
    sender = mesh.MeshState(node_id=2, dedup=mesh.DedupCache(capacity=1))
    receiver = mesh.MeshState(node_id=3, dedup=mesh.DedupCache(capacity=1))
    counters = codec.PacketCounters()
    window = codec.ReplayWindow()
    p1 = mesh.originate(sender, ring, counters, frame_of(b"a"), hop_limit=1)
    p2 = mesh.originate(sender, ring, counters, frame_of(b"b"), hop_limit=1)
    assert mesh.handle_rx(receiver, ring, window, p1, now=0.1).deliver
    assert mesh.handle_rx(receiver, ring, window, p2, now=0.2).deliver  # evicts p1 from dedup
    replayed = mesh.handle_rx(receiver, ring, window, p1, now=0.3)
    assert isinstance(replayed.error, ReplayError)


def test_plaintext_mode_floods_without_keys():
    sender = mesh.MeshState(node_id=2, dedup=mesh.DedupCache())
    receiver = mesh.MeshState(node_id=3, dedup=mesh.DedupCache())
    pkt = mesh.originate_plain(sender, codec.PacketCounters(), frame_of(b"clear"), hop_limit=1)
    result = mesh.handle_rx(receiver, None, codec.ReplayWindow(), pkt, now=0.1, plaintext_mode=True)
    assert result.deliver == frame_of(b"clear")


def test_star_uplink_and_fanout_roundtrip():
    gcs_state = mesh.MeshState(node_id=1, dedup=mesh.DedupCache())
    uav_state = mesh.MeshState(node_id=2, dedup=mesh.DedupCache())
    k2 = crypto.SymmetricKey(b"\x02" * 32, crypto.KeyPurpose.SESSION)
    k3 = crypto.SymmetricKey(b"\x03" * 32, crypto.KeyPurpose.SESSION)
    k4 = crypto.SymmetricKey(b"\x04" * 32, crypto.KeyPurpose.SESSION)
    sessions = SessionTable()
    sessions.established = {2: (k2, 0.0), 3: (k3, 0.0), 4: (k4, 0.0)}

    up_counters = codec.PacketCounters()
    up = mesh.star_uplink(uav_state, k2, up_counters, frame_of(b"report"))
    assert up.epoch == 0 and up.hop_limit == 0
    gcs_window = codec.ReplayWindow()
    frame = codec.open_with_key(k2, gcs_window, up)
    assert frame == frame_of(b"report")

    gcs_counters = codec.PacketCounters()
    fanout = mesh.star_fanout(gcs_state, sessions, gcs_counters, frame, exclude_id=2)
    assert [uav for uav, _ in fanout] == [3, 4]
    seqs = {pkt.seq for _, pkt in fanout}
    assert len(seqs) == 1  # one logical relay event
    counters = {pkt.counter for _, pkt in fanout}
    assert len(counters) == len(fanout)  # distinct nonce per sealed copy
    for uav_id, pkt in fanout:
        key = sessions.key_for(uav_id)
        assert codec.open_with_key(key, codec.ReplayWindow(), pkt) == frame
        with pytest.raises(AuthError):
            codec.open_with_key(k2, codec.ReplayWindow(), pkt)
