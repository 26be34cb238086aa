"""Shared helpers for the test suite."""

import random

import pytest

from swarmlink import crypto
from swarmlink.handshake import SwarmRoster
from swarmlink.scenario import scenario_from_dict


def make_roster(gcs_id=1, uav_ids=(2, 3), seed=0):
    """Roster plus the matching signature keypairs, deterministically seeded."""
    rng = random.Random(seed)
    keys = {}
    pubs = {}
    for nid in (gcs_id, *uav_ids):
        kp = crypto.keypair_from_seed(rng.randbytes(crypto.SEED_LEN), "signature")
        keys[nid] = kp
        pubs[nid] = kp.public_key
    roster = SwarmRoster(gcs_id=gcs_id, uav_ids=tuple(uav_ids), sig_public_keys=pubs)
    return roster, keys


def base_scenario_dict(**overrides):
    """Minimal valid two-UAV mesh scenario; override fields per test."""
    d = {
        "name": "unit",
        "seed": 1,
        "duration_s": 5.0,
        "mode": "mesh",
        "nodes": [
            {"id": 1, "role": "gcs", "position": [0.0, 0.0]},
            {"id": 2, "role": "uav", "position": [50.0, 0.0]},
            {"id": 3, "role": "uav", "position": [0.0, 50.0]},
        ],
        "links": {"wifi24": {"band": "wifi24", "loss_prob": 0.0}},
        "traffic": {"senders": "uavs", "rate_hz": 2.0, "payload_bytes": 24, "start_s": 1.0, "stop_s": 3.0},
    }
    d.update(overrides)
    return d


@pytest.fixture
def tiny_scenario():
    return scenario_from_dict(base_scenario_dict())
