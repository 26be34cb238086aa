"""Golden wire samples: fixed inputs through the real codec paths.

Everything here derives from hard-coded constants and seeded RNGs, so the
output is identical on every run and platform. The committed copy under
tests/golden/ pins the wire formats; any byte-level change to framing,
sealing, or the handshake messages shows up as a diff against it.
"""

from __future__ import annotations

import random

from . import codec, crypto, handshake, rekey

_GOLDEN_SEED = 0x5EED


def _frame(messages) -> codec.Frame:
    return codec.Frame(messages=tuple(codec.TelemetryMessage(*m) for m in messages))


def generate_golden() -> dict:
    rng = random.Random(_GOLDEN_SEED)

    frame_specs = [
        [],
        [(0x01, 7, bytes.fromhex("deadbeef"))],
        [
            (0x01, 1, bytes(8)),
            (0x02, 2, bytes.fromhex("0102030405")),
            (0xFF, 65535, b"x" * 32),
        ],
    ]
    frame_samples = []
    for spec in frame_specs:
        frame = _frame(spec)
        frame_samples.append(
            {
                "messages": [
                    {"msg_id": m.msg_id, "source_node": m.source_node, "payload_hex": m.payload.hex()}
                    for m in frame.messages
                ],
                "frame_hex": frame.to_bytes().hex(),
            }
        )

    key = crypto.SymmetricKey(bytes_=bytes(range(32)), purpose=crypto.KeyPurpose.BROADCAST)
    keyring = rekey.KeyRing()
    keyring.install(rekey.BroadcastKey(epoch=3, key=key, not_after=60.0), now=0.0, grace_window_s=5.0)
    counters = codec.PacketCounters()
    packet_samples = []
    for seq, hop_limit, spec in [
        (0, 8, frame_specs[1]),
        (1, 0, frame_specs[2]),
        (2, 255, frame_specs[1]),
    ]:
        packet = codec.seal_packet(keyring, origin=42, seq=seq, hop_limit=hop_limit,
                                   frame=_frame(spec), counters=counters)
        packet_samples.append(
            {
                "key_hex": key.bytes_.hex(),
                "epoch": packet.epoch,
                "origin": packet.origin,
                "seq": packet.seq,
                "hop_limit": packet.hop_limit,
                "counter": packet.counter,
                "plaintext_hex": _frame(spec).to_bytes().hex(),
                "packet_hex": packet.to_bytes().hex(),
            }
        )

    gcs_sig = crypto.keypair_from_seed(b"\x01" * 32, "signature")
    uav_sig = crypto.keypair_from_seed(b"\x02" * 32, "signature")
    roster = handshake.SwarmRoster(
        gcs_id=1,
        uav_ids=(2,),
        sig_public_keys={1: gcs_sig.public_key, 2: uav_sig.public_key},
    )
    table = handshake.SessionTable()
    offer = handshake.gcs_start_handshake(roster, gcs_sig, table, 2, rng, now=0.0, timeout_s=5.0)
    response, uav_key = handshake.uav_on_offer(roster, 2, uav_sig, offer, rng)
    gcs_key = handshake.gcs_on_response(roster, table, response, now=0.1)
    handshake_sample = {
        "gcs_sig_seed_hex": (b"\x01" * 32).hex(),
        "uav_sig_seed_hex": (b"\x02" * 32).hex(),
        "rng_seed": _GOLDEN_SEED,
        "offer_hex": offer.to_bytes().hex(),
        "response_hex": response.to_bytes().hex(),
        "session_key_hex": gcs_key.bytes_.hex(),
        "keys_match": gcs_key.bytes_ == uav_key.bytes_,
    }

    bkey = rekey.BroadcastKey(epoch=2, key=key, not_after=123.0)
    wrap = rekey.wrap_for(gcs_key, 1, 2, bkey, rng)
    ack = rekey.RekeyAck(uav_id=2, epoch=2)
    rekey_sample = {
        "epoch": bkey.epoch,
        "not_after": bkey.not_after,
        "rekey_hex": wrap.to_bytes().hex(),
        "ack_hex": ack.to_bytes().hex(),
    }

    return {
        "frame_samples": frame_samples,
        "packet_samples": packet_samples,
        "handshake_sample": handshake_sample,
        "rekey_sample": rekey_sample,
    }
