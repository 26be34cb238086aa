"""Telemetry framing and authenticated packet sealing.

Small telemetry messages are packed in order into frames that fit the
radio's MTU once packet overhead is added. A frame is sealed with
AES-256-GCM under the broadcast key for its epoch; the packet header rides
in clear so relays can forward without keys, and everything in it except
the mutable hop_limit is bound into the AEAD as associated data.

Wire layout, all big-endian:

  packet  = version(1)=0x01 || epoch(4) || origin(2) || seq(4) ||
            hop_limit(1) || counter(6) || ciphertext || tag(16)
  nonce   = epoch(4) || origin(2) || counter(6)
  aad     = version(1) || epoch(4) || origin(2) || seq(4) || counter(6)
  frame   = count(1) || repeat(msg_id(1) || source(2) || len(1) || payload)

The nonce never repeats under one key: origin disambiguates sealers and the
per-epoch counter is strictly increasing per origin.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Tuple

from . import crypto, wire
from .errors import (
    CounterExhausted,
    MessageTooLarge,
    NoBroadcastKey,
    ReplayError,
    ValidationError,
)
from .rekey import KeyRing

HEADER_LEN = 1 + 4 + 2 + 4 + 1 + 6
PACKET_OVERHEAD = HEADER_LEN + crypto.TAG_LEN
PER_MESSAGE_OVERHEAD = 1 + 2 + 1
MAX_PAYLOAD_LEN = 255
MAX_COUNTER = 2**48 - 1
MAX_SEQ = 2**32 - 1
REPLAY_WINDOW = 64

HEARTBEAT_MSG_ID = 0x00
PLAIN_TAG = b"\x00" * crypto.TAG_LEN


@dataclass(frozen=True)
class TelemetryMessage:
    """One sensor reading or status report from one node."""

    msg_id: int
    source_node: int
    payload: bytes

    def __post_init__(self) -> None:
        if not 0 <= self.msg_id <= 0xFF:
            raise ValidationError("msg_id", f"{self.msg_id} outside [0, 255]")
        if not 0 <= self.source_node <= wire.NODE_ID_MAX:
            raise ValidationError("source_node", f"{self.source_node} outside [0, {wire.NODE_ID_MAX}]")
        if len(self.payload) > MAX_PAYLOAD_LEN:
            raise ValidationError("payload", f"{len(self.payload)} bytes exceeds {MAX_PAYLOAD_LEN}")

    def serialized_len(self) -> int:
        return PER_MESSAGE_OVERHEAD + len(self.payload)


@dataclass(frozen=True)
class Frame:
    """An ordered batch of telemetry messages, the unit of encryption."""

    messages: Tuple[TelemetryMessage, ...]

    def __post_init__(self) -> None:
        if len(self.messages) > 0xFF:
            raise ValidationError("messages", "at most 255 messages per frame")

    def serialized_len(self) -> int:
        return 1 + sum(m.serialized_len() for m in self.messages)

    def to_bytes(self) -> bytes:
        parts = [bytes([len(self.messages)])]
        for m in self.messages:
            parts.append(struct.pack(">BHB", m.msg_id, m.source_node, len(m.payload)))
            parts.append(m.payload)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Frame":
        if not data:
            raise ValidationError("frame", "empty buffer")
        count = data[0]
        off = 1
        messages = []
        for _ in range(count):
            if off + PER_MESSAGE_OVERHEAD > len(data):
                raise ValidationError("frame", "truncated message header")
            msg_id, source, length = struct.unpack(">BHB", data[off : off + PER_MESSAGE_OVERHEAD])
            off += PER_MESSAGE_OVERHEAD
            if off + length > len(data):
                raise ValidationError("frame", "truncated message payload")
            messages.append(TelemetryMessage(msg_id, source, data[off : off + length]))
            off += length
        if off != len(data):
            raise ValidationError("frame", f"{len(data) - off} trailing bytes")
        return cls(messages=tuple(messages))


def frame_capacity(mtu_bytes: int) -> int:
    """Serialized frame bytes that fit in one packet on a link with this MTU."""
    return mtu_bytes - PACKET_OVERHEAD


def compose_frames(messages: Iterable[TelemetryMessage], mtu_bytes: int) -> List[Frame]:
    """Pack messages into frames in order, opening a new frame when the next
    message would overflow the current one.

    Order is preserved exactly: a message never jumps ahead of an earlier one
    into a frame with leftover room. Raises MessageTooLarge if any single
    message cannot fit an otherwise empty frame.
    """
    cap = frame_capacity(mtu_bytes)
    frames: List[Frame] = []
    current: List[TelemetryMessage] = []
    used = 1  # count byte
    for m in messages:
        need = m.serialized_len()
        if 1 + need > cap:
            raise MessageTooLarge(
                f"message of {len(m.payload)} payload bytes needs {1 + need} frame bytes, "
                f"link fits {cap}"
            )
        if current and (used + need > cap or len(current) == 0xFF):
            frames.append(Frame(messages=tuple(current)))
            current = []
            used = 1
        current.append(m)
        used += need
    if current:
        frames.append(Frame(messages=tuple(current)))
    return frames


@dataclass(frozen=True)
class WirePacket:
    """Sealed frame plus the cleartext header relays need for forwarding."""

    epoch: int
    origin: int
    seq: int
    hop_limit: int
    counter: int
    ciphertext: bytes
    tag: bytes
    version: int = wire.PACKET_VERSION

    def __post_init__(self) -> None:
        if not 0 <= self.epoch <= 0xFFFFFFFF:
            raise ValidationError("epoch", "outside u32")
        if not 0 <= self.origin <= wire.NODE_ID_MAX:
            raise ValidationError("origin", "outside u16")
        if not 0 <= self.seq <= MAX_SEQ:
            raise ValidationError("seq", "outside u32")
        if not 0 <= self.hop_limit <= 0xFF:
            raise ValidationError("hop_limit", "outside u8")
        if not 0 <= self.counter <= MAX_COUNTER:
            raise ValidationError("counter", "outside u48")
        if len(self.tag) != crypto.TAG_LEN:
            raise ValidationError("tag", f"must be {crypto.TAG_LEN} bytes")

    def nonce(self) -> bytes:
        return struct.pack(">IH", self.epoch, self.origin) + self.counter.to_bytes(6, "big")

    def aad(self) -> bytes:
        # hop_limit is deliberately absent: relays decrement it in flight.
        return (
            bytes([self.version])
            + struct.pack(">IHI", self.epoch, self.origin, self.seq)
            + self.counter.to_bytes(6, "big")
        )

    def header_bytes(self) -> bytes:
        return (
            bytes([self.version])
            + struct.pack(">IHIB", self.epoch, self.origin, self.seq, self.hop_limit)
            + self.counter.to_bytes(6, "big")
        )

    def to_bytes(self) -> bytes:
        return self.header_bytes() + self.ciphertext + self.tag

    def wire_len(self) -> int:
        return HEADER_LEN + len(self.ciphertext) + crypto.TAG_LEN

    def forwarded(self) -> "WirePacket":
        """Copy with hop_limit decremented; header changes, seal stays valid."""
        if self.hop_limit == 0:
            raise ValidationError("hop_limit", "cannot forward at hop_limit 0")
        return replace(self, hop_limit=self.hop_limit - 1)

    @classmethod
    def from_bytes(cls, data: bytes) -> "WirePacket":
        if len(data) < HEADER_LEN + crypto.TAG_LEN:
            raise ValidationError("wire", "packet shorter than header plus tag")
        if data[0] != wire.PACKET_VERSION:
            raise ValidationError("version", f"unknown packet version {data[0]:#04x}")
        epoch, origin, seq, hop_limit = struct.unpack(">IHIB", data[1:12])
        counter = int.from_bytes(data[12:18], "big")
        return cls(
            epoch=epoch,
            origin=origin,
            seq=seq,
            hop_limit=hop_limit,
            counter=counter,
            ciphertext=data[HEADER_LEN:-crypto.TAG_LEN],
            tag=data[-crypto.TAG_LEN:],
        )


class PacketCounters:
    """Per-sealer nonce counters, one strictly increasing sequence per epoch."""

    def __init__(self) -> None:
        self._next: Dict[int, int] = {}

    def next_for(self, epoch: int) -> int:
        value = self._next.get(epoch, 0)
        if value > MAX_COUNTER:
            raise CounterExhausted(f"counter space for epoch {epoch} exhausted")
        self._next[epoch] = value + 1
        return value


class ReplayWindow:
    """Sliding anti-replay windows keyed by (origin, epoch).

    Tracks the highest counter seen plus a 64-bit bitmap of the counters just
    below it. `check` only inspects; `accept` is called after the packet
    authenticates, so forged counters can never advance the window.
    """

    def __init__(self, width: int = REPLAY_WINDOW) -> None:
        self.width = width
        self._state: Dict[Tuple[int, int], Tuple[int, int]] = {}

    def check(self, origin: int, epoch: int, counter: int) -> None:
        state = self._state.get((origin, epoch))
        if state is None:
            return
        highest, bitmap = state
        if counter > highest:
            return
        offset = highest - counter
        if offset >= self.width:
            raise ReplayError(
                f"counter {counter} from origin {origin} fell behind window at {highest}"
            )
        if bitmap & (1 << offset):
            raise ReplayError(f"counter {counter} from origin {origin} already seen")

    def accept(self, origin: int, epoch: int, counter: int) -> None:
        key = (origin, epoch)
        state = self._state.get(key)
        if state is None:
            self._state[key] = (counter, 1)
            return
        highest, bitmap = state
        if counter > highest:
            shift = counter - highest
            bitmap = (bitmap << shift) & ((1 << self.width) - 1) if shift < self.width else 0
            self._state[key] = (counter, bitmap | 1)
        else:
            self._state[key] = (highest, bitmap | (1 << (highest - counter)))


def seal_packet(
    keyring: KeyRing,
    origin: int,
    seq: int,
    hop_limit: int,
    frame: Frame,
    counters: PacketCounters,
) -> WirePacket:
    """Seal a frame under the current broadcast key."""
    if keyring.current is None:
        raise NoBroadcastKey("no broadcast key installed")
    return seal_with_key(keyring.current.key, keyring.current.epoch, origin, seq, hop_limit, frame, counters)


def seal_with_key(
    key: crypto.SymmetricKey,
    epoch: int,
    origin: int,
    seq: int,
    hop_limit: int,
    frame: Frame,
    counters: PacketCounters,
) -> WirePacket:
    """Seal a frame under an explicit key; epoch 0 marks session-key traffic."""
    counter = counters.next_for(epoch)
    draft = WirePacket(
        epoch=epoch,
        origin=origin,
        seq=seq,
        hop_limit=hop_limit,
        counter=counter,
        ciphertext=b"",
        tag=PLAIN_TAG,
    )
    box = crypto.aead_seal(key, draft.nonce(), frame.to_bytes(), draft.aad())
    return replace(draft, ciphertext=box.ciphertext, tag=box.tag)


def open_packet(keyring: KeyRing, window: ReplayWindow, packet: WirePacket, now: float) -> Frame:
    """Authenticate and decode a broadcast-keyed packet.

    Raises UnknownEpoch when no usable key exists for the packet's epoch,
    ReplayError for counters already seen or fallen behind the window, and
    AuthError when the seal does not verify. The window advances only after
    authentication succeeds.
    """
    key = keyring.key_for_epoch(packet.epoch, now)
    return open_with_key(key, window, packet)


def open_with_key(key: crypto.SymmetricKey, window: ReplayWindow, packet: WirePacket) -> Frame:
    """Authenticate and decode under an explicit key, same replay discipline."""
    window.check(packet.origin, packet.epoch, packet.counter)
    plaintext = crypto.aead_open(
        key, packet.nonce(), crypto.AeadBox(packet.ciphertext, packet.tag), packet.aad()
    )
    frame = Frame.from_bytes(plaintext)
    window.accept(packet.origin, packet.epoch, packet.counter)
    return frame


def seal_packet_plain(
    origin: int, seq: int, hop_limit: int, frame: Frame, counters: PacketCounters
) -> WirePacket:
    """Unencrypted packet for baseline comparisons: frame bytes in the clear,
    all-zero tag. Only the no-encryption control scenarios produce these."""
    counter = counters.next_for(0)
    return WirePacket(
        epoch=0,
        origin=origin,
        seq=seq,
        hop_limit=hop_limit,
        counter=counter,
        ciphertext=frame.to_bytes(),
        tag=PLAIN_TAG,
    )


def open_packet_plain(window: ReplayWindow, packet: WirePacket) -> Frame:
    """Decode an unencrypted baseline packet, keeping the replay discipline."""
    window.check(packet.origin, packet.epoch, packet.counter)
    frame = Frame.from_bytes(packet.ciphertext)
    window.accept(packet.origin, packet.epoch, packet.counter)
    return frame
