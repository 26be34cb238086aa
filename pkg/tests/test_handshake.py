"""Pairwise session establishment tests."""

import random
from dataclasses import replace

import pytest

from swarmlink import crypto, handshake
from swarmlink.errors import (
    Expired,
    SignatureError,
    UnknownHandshake,
    UnknownNode,
    ValidationError,
)
from swarmlink.handshake import SessionTable, SwarmRoster

from conftest import make_roster


def run_full_handshake(roster, keys, uav_id, rng, table=None, now=0.0):
    table = table if table is not None else SessionTable()
    offer = handshake.gcs_start_handshake(roster, keys[roster.gcs_id], table, uav_id, rng, now, timeout_s=5.0)
    response, uav_key = handshake.uav_on_offer(roster, uav_id, keys[uav_id], offer, rng)
    gcs_key = handshake.gcs_on_response(roster, table, response, now + 0.01)
    return gcs_key, uav_key, table


def test_both_sides_derive_same_key():
    roster, keys = make_roster(uav_ids=(2, 3, 4))
    rng = random.Random(1)
    for uav_id in (2, 3, 4):
        gcs_key, uav_key, _ = run_full_handshake(roster, keys, uav_id, rng)
        assert gcs_key.bytes_ == uav_key.bytes_
        assert len(gcs_key.bytes_) == crypto.KEY_LEN


def test_sessions_differ_between_uavs_and_runs():
    roster, keys = make_roster(uav_ids=(2, 3))
    rng = random.Random(2)
    k2, _, _ = run_full_handshake(roster, keys, 2, rng)
    k3, _, _ = run_full_handshake(roster, keys, 3, rng)
    k2_again, _, _ = run_full_handshake(roster, keys, 2, rng)
    assert k2.bytes_ != k3.bytes_
    assert k2.bytes_ != k2_again.bytes_  # fresh ephemerals every run


def test_offer_wire_roundtrip():
    roster, keys = make_roster()
    rng = random.Random(3)
    table = SessionTable()
    offer = handshake.gcs_start_handshake(roster, keys[1], table, 2, rng, 0.0, 5.0)
    raw = offer.to_bytes()
    assert len(raw) == handshake.HANDSHAKE_WIRE_LEN
    back = handshake.KeyOffer.from_bytes(raw)
    assert back == offer
    with pytest.raises(ValidationError):
        handshake.KeyOffer.from_bytes(raw[:-1])
    with pytest.raises(ValidationError):
        handshake.KeyResponse.from_bytes(raw)  # wrong message type byte


def test_uav_rejects_tampered_offer():
    roster, keys = make_roster()
    rng = random.Random(4)
    table = SessionTable()
    offer = handshake.gcs_start_handshake(roster, keys[1], table, 2, rng, 0.0, 5.0)
    attacker = crypto.keypair_from_seed(b"\xee" * 32, "agreement")
    forged = replace(offer, ephemeral_pub=attacker.public_point)
    with pytest.raises(SignatureError):
        handshake.uav_on_offer(roster, 2, keys[2], forged, rng)


def test_uav_accepts_tampered_offer_with_verification_off():
    # control path for the signature-usefulness comparison
    roster, keys = make_roster()
    rng = random.Random(5)
    table = SessionTable()
    offer = handshake.gcs_start_handshake(roster, keys[1], table, 2, rng, 0.0, 5.0)
    attacker = crypto.keypair_from_seed(b"\xee" * 32, "agreement")
    forged = replace(offer, ephemeral_pub=attacker.public_point)
    response, key = handshake.uav_on_offer(roster, 2, keys[2], forged, rng, verify_signatures=False)
    assert key.bytes_


def test_uav_rejects_misaddressed_offer():
    roster, keys = make_roster(uav_ids=(2, 3))
    rng = random.Random(6)
    table = SessionTable()
    offer = handshake.gcs_start_handshake(roster, keys[1], table, 2, rng, 0.0, 5.0)
    with pytest.raises(UnknownNode):
        handshake.uav_on_offer(roster, 3, keys[3], offer, rng)


def test_uav_rejects_offer_from_non_gcs():
    roster, keys = make_roster(uav_ids=(2, 3))
    rng = random.Random(7)
    table = SessionTable()
    offer = handshake.gcs_start_handshake(roster, keys[1], table, 2, rng, 0.0, 5.0)
    impostor = replace(offer, sender_id=3)
    with pytest.raises(UnknownNode):
        handshake.uav_on_offer(roster, 2, keys[2], impostor, rng)


def test_gcs_rejects_tampered_response():
    roster, keys = make_roster()
    rng = random.Random(8)
    table = SessionTable()
    offer = handshake.gcs_start_handshake(roster, keys[1], table, 2, rng, 0.0, 5.0)
    response, _ = handshake.uav_on_offer(roster, 2, keys[2], offer, rng)
    attacker = crypto.keypair_from_seed(b"\xdd" * 32, "agreement")
    forged = replace(response, ephemeral_pub=attacker.public_point)
    with pytest.raises(SignatureError):
        handshake.gcs_on_response(roster, table, forged, 0.1)
    # the pending slot survives a forged response so the honest one still lands
    key = handshake.gcs_on_response(roster, table, response, 0.2)
    assert key.bytes_


def test_gcs_rejects_unknown_nonce():
    roster, keys = make_roster()
    rng = random.Random(9)
    table = SessionTable()
    offer = handshake.gcs_start_handshake(roster, keys[1], table, 2, rng, 0.0, 5.0)
    response, _ = handshake.uav_on_offer(roster, 2, keys[2], offer, rng)
    stranger = replace(response, nonce=b"\x00" * handshake.HANDSHAKE_NONCE_LEN)
    with pytest.raises(UnknownHandshake):
        handshake.gcs_on_response(roster, table, stranger, 0.1)


def test_gcs_rejects_expired_response():
    roster, keys = make_roster()
    rng = random.Random(10)
    table = SessionTable()
    offer = handshake.gcs_start_handshake(roster, keys[1], table, 2, rng, 0.0, timeout_s=1.0)
    response, _ = handshake.uav_on_offer(roster, 2, keys[2], offer, rng)
    with pytest.raises(Expired):
        handshake.gcs_on_response(roster, table, response, now=1.5)


def test_expire_pending_sweeps_deadlines():
    roster, keys = make_roster(uav_ids=(2, 3))
    rng = random.Random(11)
    table = SessionTable()
    handshake.gcs_start_handshake(roster, keys[1], table, 2, rng, 0.0, timeout_s=1.0)
    handshake.gcs_start_handshake(roster, keys[1], table, 3, rng, 0.0, timeout_s=4.0)
    expired = table.expire_pending(now=2.0)
    assert expired == (2,)
    assert len(table.pending) == 1


def test_start_handshake_unknown_uav():
    roster, keys = make_roster()
    rng = random.Random(12)
    with pytest.raises(UnknownNode):
        handshake.gcs_start_handshake(roster, keys[1], SessionTable(), 99, rng, 0.0, 5.0)


def test_roster_validation():
    kp = crypto.keypair_from_seed(b"\x01" * 32, "signature")
    with pytest.raises(ValidationError):
        SwarmRoster(gcs_id=1, uav_ids=(1, 2), sig_public_keys={1: kp.public_key, 2: kp.public_key})
    with pytest.raises(ValidationError):
        SwarmRoster(gcs_id=1, uav_ids=(2,), sig_public_keys={1: kp.public_key})
    roster = SwarmRoster(gcs_id=1, uav_ids=(2,), sig_public_keys={1: kp.public_key, 2: kp.public_key})
    with pytest.raises(UnknownNode):
        roster.public_key_of(5)


def test_session_table_bookkeeping():
    roster, keys = make_roster(uav_ids=(2, 3))
    rng = random.Random(13)
    table = SessionTable()
    assert not table.has_session(2)
    run_full_handshake(roster, keys, 2, rng, table=table)
    assert table.has_session(2)
    assert table.sessioned_ids() == (2,)
    assert table.key_for(2).bytes_
