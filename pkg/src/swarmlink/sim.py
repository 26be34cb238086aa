"""Deterministic discrete-event simulation of the full telemetry stack.

One run wires real protocol state machines (handshakes, rekeying, sealing,
flooding or star relay) to simulated radios and adversaries, then reports
metrics and a trace. Determinism rules:

- one master RNG seeded from the scenario, split at startup into
  purpose-specific child RNGs (keys, loss rolls, jitter, traffic phases,
  adversary choices) so draws in one domain never shift another;
- the event heap orders by (time, insertion sequence), so simultaneous
  events fire in scheduling order;
- every iteration that feeds events or reports runs over sorted ids or
  insertion-ordered containers, never bare set order;
- reports and traces contain no wall-clock values.

Adversaries act on wire bytes only. Their outcomes (keys compromised,
plaintexts recovered, replays delivered) are computed from what they
captured plus ground truth, never asserted.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from collections import deque
from dataclasses import dataclass, replace as dc_replace
from typing import Callable, Dict, List, Optional, Tuple

from . import codec, crypto, handshake, links, mesh, rekey, wire
from .errors import (
    NoSession,
    NoViableLink,
    StaleEpoch,
    SwarmLinkError,
    UnknownEpoch,
    ValidationError,
)
from .metrics import Counters, DeliveryAudit, latency_summary, render_json
from .scenario import Scenario

TELEMETRY_MSG_ID = 0x01
_EPS = 1e-9


@dataclass
class _TxItem:
    kind: str  # "offer" | "response" | "rekey" | "ack" | "data"
    data: bytes
    dest: Optional[int]  # None broadcasts to every in-range node


class _Node:
    """Runtime state for one node: radios, queues, and protocol machines."""

    def __init__(self, spec, scenario: Scenario, sig_key: crypto.SignatureKeyPair):
        self.spec = spec
        self.id = spec.id
        self.role = spec.role
        self.position = tuple(spec.position)
        self.sig_key = sig_key
        self.down = False
        self.busy = False
        self.defer_until: Optional[float] = None
        self.txq: deque = deque()
        policy = scenario.link_policy
        self.selector = links.LinkSelector(
            link_names=tuple(scenario.links),
            health_threshold=policy.health_threshold,
            hysteresis_s=policy.hysteresis_s,
            ewma_alpha=policy.ewma_alpha,
            pinned=policy.pinned_link if policy.mode == "pinned" else None,
        )
        self.meters = {
            name: links.DutyCycleMeter(p.duty_cycle_limit, p.duty_window_s)
            for name, p in scenario.links.items()
            if p.duty_cycle_limit is not None
        }
        self.mesh = mesh.MeshState(
            node_id=spec.id, dedup=mesh.DedupCache(scenario.protocol.dedup_capacity)
        )
        self.counters = codec.PacketCounters()
        self.window = codec.ReplayWindow()
        self.keyring = rekey.KeyRing()
        self.session_key: Optional[crypto.SymmetricKey] = None  # UAV side
        # GCS side only:
        self.table = handshake.SessionTable()
        self.source: Optional[rekey.BroadcastKeySource] = None
        self.unacked: Dict[int, int] = {}
        self.rekey_cache: Dict[Tuple[int, int], bytes] = {}
        self.hs_attempts: Dict[int, int] = {}
        self.unreachable: List[int] = []


class _Eavesdrop:
    def __init__(self, spec, duration: float):
        self.spec = spec
        self.start = spec.start_s
        self.end = spec.end_s if spec.end_s is not None else duration
        self.recorded: List[bytes] = []
        self.leaked: Dict[int, bytes] = {}

    def active(self, now: float) -> bool:
        return self.start <= now < self.end


class _Mitm:
    def __init__(self, spec, duration: float, rng: random.Random):
        self.spec = spec
        self.start = spec.start_s
        self.end = spec.end_s if spec.end_s is not None else duration
        self.keypair = crypto.keypair_from_seed(rng.randbytes(crypto.SEED_LEN), "agreement")
        self.substituted_offers = 0
        self.substituted_responses = 0
        # nonce -> {gcs, uav, gcs_eph, uav_eph}
        self.handshakes: Dict[bytes, Dict[str, object]] = {}

    def active(self, now: float) -> bool:
        return self.start <= now < self.end


class _Replayer:
    def __init__(self, spec, duration: float, rng: random.Random):
        self.spec = spec
        self.start = spec.start_s
        self.end = spec.end_s if spec.end_s is not None else duration
        window = max(self.end - self.start, 0.0)
        self.injection_times = sorted(
            self.start + rng.random() * window for _ in range(spec.injections)
        )
        self.recorded: List[Tuple[bytes, Tuple[int, ...]]] = []

    def active(self, now: float) -> bool:
        return self.start <= now < self.end


class Simulation:
    """One scenario run. Build, call run(), read report and trace."""

    def __init__(self, sc: Scenario):
        sc.validate()
        if not sc.security.encryption and sc.mode != "mesh":
            raise ValidationError("security.encryption", "plaintext baseline requires mesh mode")
        self.sc = sc
        master = random.Random(sc.seed)
        self.rng_keys = random.Random(master.getrandbits(64))
        self.rng_loss = random.Random(master.getrandbits(64))
        self.rng_jitter = random.Random(master.getrandbits(64))
        self.rng_traffic = random.Random(master.getrandbits(64))
        self.rng_adv = random.Random(master.getrandbits(64))

        self.profiles: Dict[str, links.LinkProfile] = dict(sc.links)
        self.now = 0.0
        self._heap: List[Tuple[float, int, str, Callable[[], None]]] = []
        self._eseq = 0

        self.counters = Counters()
        self.security_events = Counters()
        self.audit = DeliveryAudit()
        self.trace: List[str] = []
        self.truth: Dict[Tuple[int, int, int], bytes] = {}
        self.installed_keys: List[Tuple[int, bytes]] = []
        self.session_time: Dict[int, float] = {}
        self.duty_log: List[Tuple[int, str, float, float]] = []
        self.duty_max_util: Dict[Tuple[int, str], float] = {}
        self.per_link_tx: Dict[str, int] = {name: 0 for name in sc.links}
        self.per_link_data_tx: Dict[str, int] = {name: 0 for name in sc.links}
        self.wire_bytes = {"data": 0, "control": 0}
        self.next_uid = 1

        # Identities: signature keys drawn in ascending node id order.
        specs = sorted(sc.nodes, key=lambda n: n.id)
        sig_keys = {
            spec.id: crypto.keypair_from_seed(self.rng_keys.randbytes(crypto.SEED_LEN), "signature")
            for spec in specs
        }
        self.roster = handshake.SwarmRoster(
            gcs_id=sc.gcs().id,
            uav_ids=tuple(n.id for n in specs if n.role == "uav"),
            sig_public_keys={nid: kp.public_key for nid, kp in sig_keys.items()},
        )
        self.nodes: Dict[int, _Node] = {
            spec.id: _Node(spec, sc, sig_keys[spec.id]) for spec in specs
        }
        self.node_order: List[int] = [spec.id for spec in specs]
        self.gcs = self.nodes[sc.gcs().id]
        if sc.mode == "mesh" and sc.security.encryption:
            self.gcs.source = rekey.BroadcastKeySource(sc.protocol.key_lifetime_s)
        self._dist: Dict[Tuple[int, int], float] = {}
        for a in specs:
            for b in specs:
                self._dist[(a.id, b.id)] = links.distance(a.position, b.position)

        self.eavesdrop: Optional[_Eavesdrop] = None
        self.mitm: Optional[_Mitm] = None
        self.replayer: Optional[_Replayer] = None
        for adv in sc.adversaries:
            if adv.kind == "eavesdrop":
                self.eavesdrop = _Eavesdrop(adv, sc.duration_s)
            elif adv.kind == "mitm_key_substitution":
                self.mitm = _Mitm(adv, sc.duration_s, self.rng_adv)
            elif adv.kind == "replay_injector":
                self.replayer = _Replayer(adv, sc.duration_s, self.rng_adv)

        self._resend_active = False
        self._schedule_initial_events()

    # ---- scheduling ------------------------------------------------------

    def _schedule(self, t: float, kind: str, fn: Callable[[], None]) -> None:
        heapq.heappush(self._heap, (t, self._eseq, kind, fn))
        self._eseq += 1

    def _schedule_initial_events(self) -> None:
        sc = self.sc
        for spec in sorted(sc.nodes, key=lambda n: n.id):
            if spec.down_at_s is not None and spec.down_at_s <= sc.duration_s:
                node = self.nodes[spec.id]
                self._schedule(spec.down_at_s, "timer", lambda n=node: self._node_down(n))
        for ev in sc.link_events:
            self._schedule(ev.at_s, "timer", lambda e=ev: self._apply_link_event(e))
        needs_sessions = sc.mode == "star" or (sc.mode == "mesh" and sc.security.encryption)
        if needs_sessions:
            for uav_id in self.roster.uav_ids:
                self.gcs.hs_attempts[uav_id] = 1
                self._schedule(0.0, "timer", lambda u=uav_id: self._start_handshake(u))
        if sc.traffic.rate_hz > 0:
            period = 1.0 / sc.traffic.rate_hz
            stop = min(
                sc.traffic.stop_s if sc.traffic.stop_s is not None else sc.duration_s,
                sc.duration_s,
            )
            for sender in sorted(sc.sender_ids()):
                t = sc.traffic.start_s + self.rng_traffic.uniform(0.0, period)
                while t < stop:
                    self._schedule(t, "timer", lambda s=sender: self._traffic_event(s))
                    t += period
        if self.replayer is not None:
            for t in self.replayer.injection_times:
                self._schedule(t, "timer", self._inject_replay)

    # ---- tracing / accounting --------------------------------------------

    def _trace(self, kind: str, **fields) -> None:
        entry = {"t": round(self.now, 9), "event": kind}
        entry.update(fields)
        self.trace.append(json.dumps(entry, sort_keys=True))

    def _security_event(self, node: _Node, exc: SwarmLinkError, injected: bool = False) -> None:
        name = type(exc).__name__
        self.security_events.bump(name)
        if injected:
            self.counters.bump(f"replay_rejected_{name}")
        self._trace("security", node=node.id, error=name, detail=str(exc))

    # ---- node and link lifecycle ------------------------------------------

    def _node_down(self, node: _Node) -> None:
        node.down = True
        self._trace("node_down", node=node.id)

    def _apply_link_event(self, ev) -> None:
        self.profiles[ev.link] = dc_replace(self.profiles[ev.link], **ev.set)
        self._trace("link_event", link=ev.link, set=dict(sorted(ev.set.items())))

    def _alive_others(self, node: _Node) -> List[_Node]:
        return [
            self.nodes[nid]
            for nid in self.node_order
            if nid != node.id and not self.nodes[nid].down
        ]

    # ---- handshake orchestration -------------------------------------------

    def _start_handshake(self, uav_id: int) -> None:
        g = self.gcs
        if g.down or g.table.has_session(uav_id):
            return
        offer = handshake.gcs_start_handshake(
            self.roster,
            g.sig_key,
            g.table,
            uav_id,
            self.rng_keys,
            self.now,
            self.sc.protocol.handshake_timeout_s,
        )
        self.counters.bump("handshake_attempts")
        self._trace("handshake_offer", uav=uav_id, attempt=g.hs_attempts[uav_id])
        self._enqueue(g, _TxItem("offer", offer.to_bytes(), uav_id))
        self._schedule(
            self.now + self.sc.protocol.handshake_timeout_s + _EPS,
            "timer",
            lambda u=uav_id: self._handshake_timeout(u),
        )

    def _handshake_timeout(self, uav_id: int) -> None:
        g = self.gcs
        if g.down or g.table.has_session(uav_id):
            return
        g.table.expire_pending(self.now)
        if g.hs_attempts[uav_id] <= self.sc.protocol.handshake_retries:
            g.hs_attempts[uav_id] += 1
            self.counters.bump("handshake_retries")
            self._start_handshake(uav_id)
        elif uav_id not in g.unreachable:
            g.unreachable.append(uav_id)
            self._trace("unreachable", uav=uav_id)

    def _rx_offer(self, node: _Node, data: bytes) -> None:
        try:
            offer = handshake.KeyOffer.from_bytes(data)
        except ValidationError:
            self.counters.bump("rx_unparseable")
            return
        if node.role != "uav":
            return
        try:
            response, session_key = handshake.uav_on_offer(
                self.roster,
                node.id,
                node.sig_key,
                offer,
                self.rng_keys,
                verify_signatures=self.sc.security.verify_signatures,
            )
        except SwarmLinkError as exc:
            self._security_event(node, exc)
            return
        node.session_key = session_key
        self.installed_keys.append((node.id, session_key.bytes_))
        self._trace("session_uav", node=node.id)
        self._enqueue(node, _TxItem("response", response.to_bytes(), offer.sender_id))

    def _rx_response(self, node: _Node, data: bytes) -> None:
        try:
            response = handshake.KeyResponse.from_bytes(data)
        except ValidationError:
            self.counters.bump("rx_unparseable")
            return
        if node.role != "gcs":
            return
        try:
            session_key = handshake.gcs_on_response(
                self.roster,
                node.table,
                response,
                self.now,
                verify_signatures=self.sc.security.verify_signatures,
            )
        except SwarmLinkError as exc:
            self._security_event(node, exc)
            return
        uav_id = response.sender_id
        self.installed_keys.append((node.id, session_key.bytes_))
        self.session_time[uav_id] = self.now
        self.counters.bump("sessions_established")
        self._trace("session_gcs", uav=uav_id)
        if node.source is not None:
            if node.source.current is None:
                self._generate_epoch()
            self._send_rekey(uav_id)

    # ---- broadcast key lifecycle ------------------------------------------

    def _generate_epoch(self) -> None:
        g = self.gcs
        bkey = g.source.new_epoch(self.rng_keys, self.now)
        g.keyring.install(bkey, self.now, self.sc.protocol.grace_window_s)
        if self.eavesdrop is not None and bkey.epoch in self.sc.security.leak_epochs:
            self.eavesdrop.leaked[bkey.epoch] = bkey.key.bytes_
            self._trace("key_leaked", epoch=bkey.epoch)
        self._trace("rotate", epoch=bkey.epoch, not_after=round(bkey.not_after, 9))
        self._schedule(bkey.not_after, "timer", self._rotation_due)

    def _rotation_due(self) -> None:
        g = self.gcs
        if g.down or g.source is None or g.source.current is None:
            return
        if self.now + _EPS < g.source.current.not_after:
            return
        self._generate_epoch()
        g.unacked = {}
        for uav_id in g.table.sessioned_ids():
            self._send_rekey(uav_id)

    def _send_rekey(self, uav_id: int) -> None:
        g = self.gcs
        bkey = g.source.current
        message = rekey.wrap_for(
            g.table.key_for(uav_id), g.id, uav_id, bkey, self.rng_keys
        )
        g.rekey_cache[(uav_id, bkey.epoch)] = message.to_bytes()
        g.unacked[uav_id] = bkey.epoch
        self.counters.bump("rekeys_sent")
        self._enqueue(g, _TxItem("rekey", message.to_bytes(), uav_id))
        self._ensure_resend_timer()

    def _ensure_resend_timer(self) -> None:
        interval = self.sc.protocol.rekey_resend_interval_s
        if interval is None or self._resend_active:
            return
        self._resend_active = True
        self._schedule(self.now + interval, "timer", self._resend_due)

    def _resend_due(self) -> None:
        self._resend_active = False
        g = self.gcs
        if g.down or g.source is None or g.source.current is None or not g.unacked:
            return
        epoch = g.source.current.epoch
        g.unacked = {u: e for u, e in g.unacked.items() if e == epoch}
        for uav_id in sorted(g.unacked):
            self.counters.bump("rekey_resends")
            self._enqueue(g, _TxItem("rekey", g.rekey_cache[(uav_id, epoch)], uav_id))
        if g.unacked:
            self._resend_active = True
            self._schedule(self.now + self.sc.protocol.rekey_resend_interval_s, "timer", self._resend_due)

    def _rx_rekey(self, node: _Node, data: bytes) -> None:
        try:
            message = rekey.RekeyMessage.from_bytes(data)
        except ValidationError:
            self.counters.bump("rx_unparseable")
            return
        if node.role != "uav" or node.session_key is None:
            self.counters.bump("rekey_without_session")
            return
        try:
            bkey = rekey.unwrap(
                node.session_key, message, node.keyring, self.now, self.sc.protocol.grace_window_s
            )
        except SwarmLinkError as exc:
            current = node.keyring.current
            if (
                isinstance(exc, StaleEpoch)
                and current is not None
                and getattr(exc, "epoch", None) == current.epoch
            ):
                # Benign duplicate of the rekey we already installed: re-ack.
                self.counters.bump("rekey_duplicates")
                ack = rekey.RekeyAck(uav_id=node.id, epoch=current.epoch)
                self._enqueue(node, _TxItem("ack", ack.to_bytes(), self.gcs.id))
            else:
                self._security_event(node, exc)
            return
        self.counters.bump("rekeys_installed")
        self._trace("rekey_installed", node=node.id, epoch=bkey.epoch)
        ack = rekey.RekeyAck(uav_id=node.id, epoch=bkey.epoch)
        self._enqueue(node, _TxItem("ack", ack.to_bytes(), self.gcs.id))

    def _rx_ack(self, node: _Node, data: bytes) -> None:
        try:
            ack = rekey.RekeyAck.from_bytes(data)
        except ValidationError:
            self.counters.bump("rx_unparseable")
            return
        if node.role != "gcs":
            return
        if node.unacked.get(ack.uav_id) == ack.epoch:
            del node.unacked[ack.uav_id]
            self.counters.bump("acks_received")

    # ---- traffic -----------------------------------------------------------

    def _register_truth(self, packet: codec.WirePacket, frame_bytes: bytes) -> None:
        self.truth[(packet.origin, packet.epoch, packet.counter)] = frame_bytes

    def _traffic_event(self, sender_id: int) -> None:
        node = self.nodes[sender_id]
        if node.down:
            return
        sc = self.sc
        uid = self.next_uid
        self.next_uid += 1
        payload = uid.to_bytes(8, "big") + bytes(sc.traffic.payload_bytes - 8)
        message = codec.TelemetryMessage(TELEMETRY_MSG_ID, sender_id, payload)
        # The denominator of every delivery ratio: counted even when the
        # stack cannot ship it yet, so a dead relay shows up as loss.
        self.audit.record_send(uid, sender_id, self.now)
        self.counters.bump("messages_originated")
        if sc.mode == "mesh":
            self._originate_mesh(node, message)
        elif node.role == "uav":
            self._originate_star_uplink(node, message)
        else:
            self._originate_star_downlink(node, message)

    def _min_mtu(self) -> int:
        return min(p.mtu_bytes for p in self.profiles.values())

    def _originate_mesh(self, node: _Node, message: codec.TelemetryMessage) -> None:
        sc = self.sc
        if sc.security.encryption and node.keyring.current is None:
            self.counters.bump("tx_skipped_no_key")
            return
        frames = codec.compose_frames([message], self._min_mtu())
        for frame in frames:
            if sc.security.encryption:
                packet = mesh.originate(
                    node.mesh, node.keyring, node.counters, frame, sc.protocol.hop_limit
                )
            else:
                packet = mesh.originate_plain(
                    node.mesh, node.counters, frame, sc.protocol.hop_limit
                )
            self._register_truth(packet, frame.to_bytes())
            self.counters.bump("frames_sealed")
            self._enqueue(node, _TxItem("data", packet.to_bytes(), None))

    def _originate_star_uplink(self, node: _Node, message: codec.TelemetryMessage) -> None:
        if node.session_key is None:
            self.counters.bump("tx_skipped_no_session")
            return
        frames = codec.compose_frames([message], self._min_mtu())
        for frame in frames:
            packet = mesh.star_uplink(node.mesh, node.session_key, node.counters, frame)
            self._register_truth(packet, frame.to_bytes())
            self.counters.bump("frames_sealed")
            self._enqueue(node, _TxItem("data", packet.to_bytes(), self.gcs.id))

    def _originate_star_downlink(self, node: _Node, message: codec.TelemetryMessage) -> None:
        if not node.table.sessioned_ids():
            self.counters.bump("tx_skipped_no_session")
            return
        frames = codec.compose_frames([message], self._min_mtu())
        for frame in frames:
            fanout = mesh.star_fanout(node.mesh, node.table, node.counters, frame)
            for uav_id, packet in fanout:
                self._register_truth(packet, frame.to_bytes())
                self.counters.bump("frames_sealed")
                self._enqueue(node, _TxItem("data", packet.to_bytes(), uav_id))

    # ---- transmission ------------------------------------------------------

    def _enqueue(self, node: _Node, item: _TxItem) -> None:
        if node.down:
            return
        self.counters.bump("tx_enqueued")
        node.txq.append(item)
        self._pump(node)

    def _pump(self, node: _Node) -> None:
        while True:
            if node.down or node.busy or not node.txq:
                return
            if node.defer_until is not None:
                if self.now + _EPS < node.defer_until:
                    return
                node.defer_until = None
            item = node.txq[0]
            if item.dest is None:
                cands = [(o.id, self._dist[(node.id, o.id)]) for o in self._alive_others(node)]
            else:
                dest = self.nodes[item.dest]
                cands = [] if dest.down else [(dest.id, self._dist[(node.id, dest.id)])]
            dists = [d for _, d in cands] or [None]
            prev_active = node.selector.active
            try:
                profile = node.selector.select(self.profiles, dists, self.now)
            except NoViableLink:
                node.txq.popleft()
                self.counters.bump("tx_dropped_no_link")
                self._trace("drop", node=node.id, reason="no_viable_link", item=item.kind)
                continue
            if node.selector.active != prev_active and prev_active is not None:
                self._trace("link_switch", node=node.id, link=profile.name)
            if len(item.data) > profile.mtu_bytes:
                node.txq.popleft()
                self.counters.bump("tx_dropped_mtu")
                self._trace("drop", node=node.id, reason="mtu", item=item.kind)
                continue
            meter = node.meters.get(profile.name)
            result = links.transmit(
                profile, len(item.data), self.now, cands, self.rng_loss, meter
            )
            if isinstance(result, links.Deferred):
                if math.isinf(result.until):
                    node.txq.popleft()
                    self.counters.bump("tx_dropped_duty_impossible")
                    self._trace("drop", node=node.id, reason="duty_budget", item=item.kind)
                    continue
                self.counters.bump("tx_deferrals")
                node.defer_until = result.until
                self._trace(
                    "defer", node=node.id, link=profile.name, until=round(result.until, 9)
                )
                self._schedule(result.until, "timer", lambda n=node: self._pump(n))
                return
            node.txq.popleft()
            self._complete_tx(node, item, profile, result)
            return

    def _complete_tx(
        self,
        node: _Node,
        item: _TxItem,
        profile: links.LinkProfile,
        result: links.TransmitResult,
    ) -> None:
        self.counters.bump("tx_sent")
        self.per_link_tx[profile.name] += 1
        kind_bucket = "data" if item.kind == "data" else "control"
        if item.kind == "data":
            self.per_link_data_tx[profile.name] += 1
        self.wire_bytes[kind_bucket] += len(item.data)
        if profile.name in node.meters:
            meter = node.meters[profile.name]
            util = meter.used_airtime(self.now) / meter.budget()
            key = (node.id, profile.name)
            self.duty_max_util[key] = max(self.duty_max_util.get(key, 0.0), util)
            self.duty_log.append((node.id, profile.name, self.now, result.airtime_s))
        if result.delivered or result.lost:
            total = len(result.delivered) + len(result.lost)
            node.selector.update_health(profile.name, len(result.delivered) / total)
        delivered_bytes = item.data
        if self.mitm is not None and self.mitm.active(self.now) and item.kind in ("offer", "response"):
            delivered_bytes = self._mitm_substitute(item)
        if self.eavesdrop is not None and self.eavesdrop.active(self.now) and item.kind == "data":
            self.eavesdrop.recorded.append(item.data)
        if self.replayer is not None and self.replayer.active(self.now) and item.kind == "data":
            rx_ids = tuple(rid for rid, _ in result.delivered)
            if rx_ids:
                self.replayer.recorded.append((item.data, rx_ids))
        for receiver_id, arrival in result.delivered:
            self.counters.bump("rx_events")
            self._schedule(
                arrival,
                "rx",
                lambda r=receiver_id, d=delivered_bytes: self._deliver_bytes(r, d, False),
            )
        if result.lost:
            self.counters.bump("rx_lost", len(result.lost))
        node.busy = True
        self._schedule(self.now + result.airtime_s, "timer", lambda n=node: self._tx_done(n))

    def _tx_done(self, node: _Node) -> None:
        node.busy = False
        self._pump(node)

    # ---- adversaries --------------------------------------------------------

    def _mitm_substitute(self, item: _TxItem) -> bytes:
        adv = self.mitm
        cls = handshake.KeyOffer if item.kind == "offer" else handshake.KeyResponse
        msg = cls.from_bytes(item.data)
        if item.kind == "offer":
            adv.substituted_offers += 1
            record = adv.handshakes.setdefault(msg.nonce, {})
            record["gcs"] = msg.sender_id
            record["uav"] = msg.recipient_id
            record["gcs_eph"] = msg.ephemeral_pub
        else:
            adv.substituted_responses += 1
            record = adv.handshakes.setdefault(msg.nonce, {})
            record.setdefault("gcs", msg.recipient_id)
            record.setdefault("uav", msg.sender_id)
            record["uav_eph"] = msg.ephemeral_pub
        forged = cls(
            sender_id=msg.sender_id,
            recipient_id=msg.recipient_id,
            ephemeral_pub=adv.keypair.public_point,
            nonce=msg.nonce,
            signature=msg.signature,  # stale: signs the honest key, not ours
        )
        self._trace("mitm_substitute", item=item.kind, nonce=msg.nonce.hex())
        return forged.to_bytes()

    def _mitm_compromised(self) -> Dict[str, int]:
        adv = self.mitm
        candidates = set()
        for nonce, record in adv.handshakes.items():
            gcs_id = record.get("gcs")
            uav_id = record.get("uav")
            if gcs_id is None or uav_id is None:
                continue
            context = handshake._session_context(gcs_id, uav_id, nonce)
            for eph_field in ("gcs_eph", "uav_eph"):
                eph = record.get(eph_field)
                if eph is None:
                    continue
                try:
                    shared = crypto.ecdh_shared_secret(adv.keypair.private_scalar, eph)
                except SwarmLinkError:
                    continue
                candidates.add(crypto.derive_key(shared, context).bytes_)
        compromised = sum(1 for _node, key in self.installed_keys if key in candidates)
        return {
            "substituted_offers": adv.substituted_offers,
            "substituted_responses": adv.substituted_responses,
            "handshakes_touched": len(adv.handshakes),
            "installed_keys_checked": len(self.installed_keys),
            "compromised_keys": compromised,
        }

    def _inject_replay(self) -> None:
        adv = self.replayer
        if not adv.recorded:
            self.counters.bump("replay_noop")
            return
        data, rx_ids = adv.recorded[self.rng_adv.randrange(len(adv.recorded))]
        self.counters.bump("replay_injections")
        self._trace("replay_inject", receivers=list(rx_ids))
        for receiver_id in rx_ids:
            self.counters.bump("adv_rx_events")
            self._schedule(
                self.now, "advrx", lambda r=receiver_id, d=data: self._deliver_bytes(r, d, True)
            )

    def _eavesdrop_recovery(self) -> Dict[str, object]:
        adv = self.eavesdrop
        observed_by_epoch: Dict[str, int] = {}
        recovered_by_epoch: Dict[str, int] = {}
        recovered = 0
        for data in adv.recorded:
            try:
                packet = codec.WirePacket.from_bytes(data)
            except ValidationError:
                continue
            ekey = str(packet.epoch)
            observed_by_epoch[ekey] = observed_by_epoch.get(ekey, 0) + 1
            plaintext: Optional[bytes] = None
            if not self.sc.security.encryption:
                plaintext = packet.ciphertext  # rides in the clear
            elif packet.epoch in adv.leaked:
                key = crypto.SymmetricKey(adv.leaked[packet.epoch], crypto.KeyPurpose.BROADCAST)
                try:
                    plaintext = crypto.aead_open(
                        key,
                        packet.nonce(),
                        crypto.AeadBox(packet.ciphertext, packet.tag),
                        packet.aad(),
                    )
                except SwarmLinkError:
                    plaintext = None
            if plaintext is None:
                continue
            truth = self.truth.get((packet.origin, packet.epoch, packet.counter))
            if truth is not None and plaintext == truth:
                recovered += 1
                recovered_by_epoch[ekey] = recovered_by_epoch.get(ekey, 0) + 1
        return {
            "observed_packets": len(adv.recorded),
            "observed_by_epoch": observed_by_epoch,
            "recovered_packets": recovered,
            "recovered_by_epoch": recovered_by_epoch,
            "leaked_epochs": sorted(adv.leaked),
        }

    # ---- receive dispatch ----------------------------------------------------

    def _deliver_bytes(self, node_id: int, data: bytes, injected: bool) -> None:
        self.counters.bump("adv_rx_processed" if injected else "rx_processed")
        node = self.nodes[node_id]
        if node.down:
            self.counters.bump("rx_ignored_down")
            return
        if not data:
            self.counters.bump("rx_unparseable")
            return
        discriminator = data[0]
        if discriminator == wire.PACKET_VERSION:
            self._rx_data(node, data, injected)
        elif discriminator == wire.MSG_KEY_OFFER:
            self._rx_offer(node, data)
        elif discriminator == wire.MSG_KEY_RESPONSE:
            self._rx_response(node, data)
        elif discriminator == wire.MSG_REKEY:
            self._rx_rekey(node, data)
        elif discriminator == wire.MSG_REKEY_ACK:
            self._rx_ack(node, data)
        else:
            self.counters.bump("rx_unparseable")

    def _rx_data(self, node: _Node, data: bytes, injected: bool) -> None:
        try:
            packet = codec.WirePacket.from_bytes(data)
        except ValidationError:
            self.counters.bump("rx_unparseable")
            return
        if self.sc.mode == "mesh":
            self._rx_data_mesh(node, packet, injected)
        else:
            self._rx_data_star(node, packet, injected)

    def _rx_data_mesh(self, node: _Node, packet: codec.WirePacket, injected: bool) -> None:
        result = mesh.handle_rx(
            node.mesh,
            node.keyring,
            node.window,
            packet,
            self.now,
            plaintext_mode=not self.sc.security.encryption,
        )
        if result.duplicate:
            self.counters.bump("rx_duplicates")
            if injected:
                self.counters.bump("replay_rejected_dedup")
            return
        if result.error is not None:
            self._security_event(node, result.error, injected)
            return
        self._deliver_frame(node, result.deliver)
        if injected:
            self.counters.bump("replay_delivered_new")
        if result.forward is not None:
            jitter_max = self.sc.protocol.forward_jitter_max_s
            delay = self.rng_jitter.uniform(0.0, jitter_max) if jitter_max > 0 else 0.0
            item = _TxItem("data", result.forward.to_bytes(), None)
            self._schedule(
                self.now + delay, "timer", lambda n=node, i=item: self._enqueue(n, i)
            )

    def _rx_data_star(self, node: _Node, packet: codec.WirePacket, injected: bool) -> None:
        if packet.epoch != 0:
            self._security_event(node, UnknownEpoch(f"epoch {packet.epoch} in star mode"), injected)
            return
        if node.role == "gcs":
            try:
                key = node.table.key_for(packet.origin)
                frame = codec.open_with_key(key, node.window, packet)
            except SwarmLinkError as exc:
                self._security_event(node, exc, injected)
                return
            self._deliver_frame(node, frame)
            if injected:
                self.counters.bump("replay_delivered_new")
            fanout = mesh.star_fanout(
                node.mesh, node.table, node.counters, frame, exclude_id=packet.origin
            )
            for uav_id, relayed in fanout:
                self._register_truth(relayed, frame.to_bytes())
                self.counters.bump("star_relayed")
                self._enqueue(node, _TxItem("data", relayed.to_bytes(), uav_id))
        else:
            if node.session_key is None:
                self._security_event(node, NoSession(f"node {node.id} has no session"), injected)
                return
            try:
                frame = codec.open_with_key(node.session_key, node.window, packet)
            except SwarmLinkError as exc:
                self._security_event(node, exc, injected)
                return
            self._deliver_frame(node, frame)
            if injected:
                self.counters.bump("replay_delivered_new")

    def _deliver_frame(self, node: _Node, frame: codec.Frame) -> None:
        for message in frame.messages:
            if len(message.payload) < 8:
                continue
            uid = int.from_bytes(message.payload[:8], "big")
            self.audit.record_delivery(uid, node.id, self.now)
            self.counters.bump("messages_delivered")

    # ---- run and report -------------------------------------------------------

    def run(self) -> dict:
        duration = self.sc.duration_s
        while self._heap and self._heap[0][0] <= duration + _EPS:
            t, _seq, _kind, fn = heapq.heappop(self._heap)
            self.now = max(self.now, t)
            fn()
        self.now = duration
        rx_in_flight = sum(1 for e in self._heap if e[2] == "rx")
        adv_in_flight = sum(1 for e in self._heap if e[2] == "advrx")
        return self._build_report(rx_in_flight, adv_in_flight)

    def _build_report(self, rx_in_flight: int, adv_in_flight: int) -> dict:
        sc = self.sc
        c = self.counters
        node_ids = tuple(self.node_order)
        uav_ids = tuple(n.id for n in sc.uavs())
        pairs = self.audit.pair_stats(node_ids)
        sent_total = sum(p["sent"] for p in pairs.values())
        got_total = sum(p["delivered"] for p in pairs.values())
        uav_sent = uav_got = 0
        uav_set = set(uav_ids)
        for name, stats in pairs.items():
            src, dst = (int(x) for x in name.split("->"))
            if src in uav_set and dst in uav_set:
                uav_sent += stats["sent"]
                uav_got += stats["delivered"]
        queued = sum(len(n.txq) for n in self.nodes.values())
        dropped = (
            c.get("tx_dropped_no_link")
            + c.get("tx_dropped_mtu")
            + c.get("tx_dropped_duty_impossible")
        )
        conservation = {
            "tx_enqueued": c.get("tx_enqueued"),
            "tx_sent": c.get("tx_sent"),
            "tx_dropped": dropped,
            "tx_deferrals": c.get("tx_deferrals"),
            "queued_at_end": queued,
            "rx_events": c.get("rx_events"),
            "rx_processed": c.get("rx_processed"),
            "rx_lost": c.get("rx_lost"),
            "rx_in_flight_at_end": rx_in_flight,
            "adv_rx_events": c.get("adv_rx_events"),
            "adv_rx_processed": c.get("adv_rx_processed"),
            "adv_rx_in_flight_at_end": adv_in_flight,
            "balanced": (
                c.get("tx_enqueued") == c.get("tx_sent") + dropped + queued
                and c.get("rx_events") == c.get("rx_processed") + rx_in_flight
                and c.get("adv_rx_events") == c.get("adv_rx_processed") + adv_in_flight
            ),
        }
        duty = {}
        for (node_id, link_name), util in sorted(self.duty_max_util.items()):
            meter = self.nodes[node_id].meters[link_name]
            duty[f"{node_id}:{link_name}"] = {
                "max_window_utilization": round(util, 9),
                "budget_s": meter.budget(),
                "total_airtime_s": round(
                    sum(a for nid, ln, _t, a in self.duty_log if nid == node_id and ln == link_name),
                    9,
                ),
            }
        latencies = self.audit.latencies()
        uav_latencies = self.audit.latencies_between(uav_ids, uav_ids)
        session_times = sorted(self.session_time.values())
        adversary: Dict[str, object] = {}
        if self.eavesdrop is not None:
            adversary["eavesdrop"] = self._eavesdrop_recovery()
        if self.mitm is not None:
            adversary["mitm"] = self._mitm_compromised()
        if self.replayer is not None:
            rejected = {
                k.replace("replay_rejected_", ""): v
                for k, v in sorted(c.values.items())
                if k.startswith("replay_rejected_")
            }
            adversary["replay"] = {
                "injections": c.get("replay_injections"),
                "noops": c.get("replay_noop"),
                "rejected": rejected,
                "delivered_new": c.get("replay_delivered_new"),
                "duplicate_deliveries": self.audit.duplicate_deliveries,
            }
        report = {
            "scenario": sc.name,
            "seed": sc.seed,
            "mode": sc.mode,
            "duration_s": sc.duration_s,
            "nodes": len(node_ids),
            "handshakes": {
                "attempts": c.get("handshake_attempts"),
                "retries": c.get("handshake_retries"),
                "established": c.get("sessions_established"),
                "unreachable": sorted(self.gcs.unreachable),
                "last_established_s": session_times[-1] if session_times else None,
                "all_established": len(session_times) == len(uav_ids),
            },
            "broadcast": {
                "epochs_reached": (
                    self.gcs.source.current.epoch
                    if self.gcs.source is not None and self.gcs.source.current is not None
                    else 0
                ),
                "rekeys_sent": c.get("rekeys_sent"),
                "rekeys_installed": c.get("rekeys_installed"),
                "rekey_resends": c.get("rekey_resends"),
                "rekey_duplicates": c.get("rekey_duplicates"),
                "acks_received": c.get("acks_received"),
            },
            "traffic": {
                "messages_originated": c.get("messages_originated"),
                "frames_sealed": c.get("frames_sealed"),
                "messages_delivered": c.get("messages_delivered"),
                "skipped_no_key": c.get("tx_skipped_no_key"),
                "skipped_no_session": c.get("tx_skipped_no_session"),
            },
            "delivery": {
                "pairs": pairs,
                "sent": sent_total,
                "delivered": got_total,
                "overall_ratio": (got_total / sent_total) if sent_total else 0.0,
                "uav_to_uav": {
                    "sent": uav_sent,
                    "delivered": uav_got,
                    "ratio": (uav_got / uav_sent) if uav_sent else 0.0,
                },
                "duplicate_deliveries": self.audit.duplicate_deliveries,
            },
            "latency": latency_summary(latencies),
            "latency_uav_to_uav": latency_summary(uav_latencies),
            "security_events": dict(sorted(self.security_events.values.items())),
            "links": {
                "per_link_tx": dict(sorted(self.per_link_tx.items())),
                "per_link_data_tx": dict(sorted(self.per_link_data_tx.items())),
                "switches": sum(n.selector.switches for n in self.nodes.values()),
                "deferrals": c.get("tx_deferrals"),
                "wire_bytes": dict(sorted(self.wire_bytes.items())),
            },
            "duty_cycle": duty,
            "adversary": adversary,
            "conservation": conservation,
        }
        return report


def run_scenario(sc: Scenario) -> Tuple[dict, List[str]]:
    """Run one scenario; returns (report dict, trace lines)."""
    sim = Simulation(sc)
    report = sim.run()
    return report, sim.trace


def report_json(report: dict) -> str:
    return render_json(report)
