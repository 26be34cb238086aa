"""Simulated radio links: propagation, loss, duty cycling, and selection.

Three link classes cover the usual drone fits: a sub-GHz low-rate radio
with long reach but a regulatory duty-cycle budget, 2.4 GHz WiFi with high
rate and short reach, and a cellular bearer with no range cap but higher
latency. Connectivity is a unit disc per link: receivers at or inside the
range hear the transmission, subject to an independent loss roll each.

The selector keeps an exponentially weighted success score per link and
prefers the fastest healthy link that covers the destination, falling back
down the list as health decays. A hysteresis hold-down stops flapping.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import MtuExceeded, NoViableLink, ValidationError


class Band(enum.Enum):
    SUBGHZ = "subghz"
    WIFI24 = "wifi24"
    CELLULAR = "cellular"


@dataclass(frozen=True)
class LinkProfile:
    name: str
    band: Band
    range_m: Optional[float]  # None: reachable at any distance
    bitrate_bps: float
    base_latency_s: float
    loss_prob: float
    mtu_bytes: int
    duty_cycle_limit: Optional[float] = None  # fraction of airtime allowed
    duty_window_s: Optional[float] = None

    def __post_init__(self) -> None:
        if self.bitrate_bps <= 0:
            raise ValidationError("bitrate_bps", "must be positive")
        if self.base_latency_s < 0:
            raise ValidationError("base_latency_s", "must be nonnegative")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValidationError("loss_prob", "must lie in [0, 1]")
        if self.mtu_bytes < 64:
            raise ValidationError("mtu_bytes", "must be at least 64")
        if self.range_m is not None and self.range_m <= 0:
            raise ValidationError("range_m", "must be positive when bounded")
        if (self.duty_cycle_limit is None) != (self.duty_window_s is None):
            raise ValidationError("duty_cycle", "limit and window must be set together")
        if self.duty_cycle_limit is not None and not 0 < self.duty_cycle_limit <= 1:
            raise ValidationError("duty_cycle_limit", "must lie in (0, 1]")
        if self.duty_window_s is not None and self.duty_window_s <= 0:
            raise ValidationError("duty_window_s", "must be positive")

    def airtime_s(self, nbytes: int) -> float:
        return nbytes * 8 / self.bitrate_bps

    def covers(self, distance_m: Optional[float]) -> bool:
        """Closed-disc reachability; distance None means 'self', always covered."""
        if self.range_m is None or distance_m is None:
            return True
        return distance_m <= self.range_m


def default_profiles() -> Dict[str, LinkProfile]:
    return {
        "subghz": LinkProfile(
            name="subghz",
            band=Band.SUBGHZ,
            range_m=5000.0,
            bitrate_bps=100_000.0,
            base_latency_s=0.020,
            loss_prob=0.02,
            mtu_bytes=256,
            duty_cycle_limit=0.01,
            duty_window_s=3600.0,
        ),
        "wifi24": LinkProfile(
            name="wifi24",
            band=Band.WIFI24,
            range_m=300.0,
            bitrate_bps=10_000_000.0,
            base_latency_s=0.002,
            loss_prob=0.05,
            mtu_bytes=1500,
        ),
        "cellular": LinkProfile(
            name="cellular",
            band=Band.CELLULAR,
            range_m=None,
            bitrate_bps=1_000_000.0,
            base_latency_s=0.080,
            loss_prob=0.01,
            mtu_bytes=1400,
        ),
    }


def distance(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


class DutyCycleMeter:
    """Sliding-window airtime accountant for one transmitter on one link.

    Airtime is attributed to the instant transmission starts. A send is
    allowed iff the window's recorded airtime plus the new burst stays
    within budget; otherwise the earliest compliant start time is computed
    exactly, so callers can defer instead of busy-polling.
    """

    def __init__(self, limit: float, window_s: float) -> None:
        if not 0.0 < limit <= 1.0:
            raise ValueError(f"duty limit {limit} outside (0, 1]")
        if window_s <= 0.0:
            raise ValueError(f"duty window {window_s} must be positive")
        self.limit = limit
        self.window_s = window_s
        self._bursts: List[Tuple[float, float]] = []  # (tx_start, airtime)

    def _prune(self, now: float) -> None:
        cutoff = now - self.window_s
        keep = 0
        while keep < len(self._bursts) and self._bursts[keep][0] <= cutoff:
            keep += 1
        if keep:
            del self._bursts[:keep]

    def used_airtime(self, now: float) -> float:
        self._prune(now)
        return sum(a for _, a in self._bursts)

    def budget(self) -> float:
        return self.limit * self.window_s

    def allows(self, now: float, airtime: float) -> bool:
        return self.used_airtime(now) + airtime <= self.budget() + 1e-12

    def earliest_allowed(self, now: float, airtime: float) -> float:
        """First instant at which this burst fits the budget."""
        self._prune(now)
        need = airtime
        budget = self.budget()
        if need > budget + 1e-12:
            return math.inf  # burst alone exceeds the budget; never sendable
        used = sum(a for _, a in self._bursts)
        if used + need <= budget + 1e-12:
            return now
        # Bursts age out oldest-first; walk until enough budget is free.
        freed = 0.0
        for start, burst in self._bursts:
            freed += burst
            if used - freed + need <= budget + 1e-12:
                return start + self.window_s
        return self._bursts[-1][0] + self.window_s

    def record(self, now: float, airtime: float) -> None:
        self._bursts.append((now, airtime))


@dataclass(frozen=True)
class Deferred:
    """Transmission blocked by duty cycle until the stated time."""

    until: float


@dataclass(frozen=True)
class TransmitResult:
    """One transmission's fate per candidate receiver."""

    link: str
    airtime_s: float
    delivered: Tuple[Tuple[int, float], ...]  # (receiver id, arrival time)
    lost: Tuple[int, ...]
    out_of_range: Tuple[int, ...]


def transmit(
    profile: LinkProfile,
    nbytes: int,
    now: float,
    receivers: Sequence[Tuple[int, float]],  # (receiver id, distance in meters)
    rng,
    meter: Optional[DutyCycleMeter] = None,
):
    """Send nbytes to every in-range receiver, or defer on duty-cycle breach.

    Returns a TransmitResult, or a Deferred when the link's duty budget
    cannot absorb the burst yet (in which case nothing is sent or charged).
    Each in-range receiver suffers an independent loss roll in the order
    given, so callers pass receivers sorted for determinism.
    """
    if nbytes > profile.mtu_bytes:
        raise MtuExceeded(f"{nbytes} bytes exceeds {profile.name} MTU {profile.mtu_bytes}")
    airtime = profile.airtime_s(nbytes)
    if meter is not None:
        if not meter.allows(now, airtime):
            return Deferred(until=meter.earliest_allowed(now, airtime))
        meter.record(now, airtime)
    delivered: List[Tuple[int, float]] = []
    lost: List[int] = []
    out_of_range: List[int] = []
    arrival = now + profile.base_latency_s + airtime
    for receiver_id, dist in receivers:
        if not profile.covers(dist):
            out_of_range.append(receiver_id)
        elif rng.random() < profile.loss_prob:
            lost.append(receiver_id)
        else:
            delivered.append((receiver_id, arrival))
    return TransmitResult(
        link=profile.name,
        airtime_s=airtime,
        delivered=tuple(delivered),
        lost=tuple(lost),
        out_of_range=tuple(out_of_range),
    )


@dataclass
class LinkSelector:
    """Health-driven choice among a node's configured links.

    Health is an EWMA of per-transmission success in [0, 1], starting
    optimistic at 1. Selection prefers the highest-bitrate link that both
    covers the destination and sits at or above the health threshold; if
    none qualifies, the best-covering link wins regardless of health rather
    than sending nothing. A just-switched selector holds its choice for the
    hysteresis interval so borderline health cannot flap between links.
    """

    link_names: Tuple[str, ...]
    health_threshold: float = 0.5
    hysteresis_s: float = 2.0
    ewma_alpha: float = 0.2
    pinned: Optional[str] = None
    health: Dict[str, float] = field(init=False)
    active: Optional[str] = field(init=False, default=None)
    last_switch: float = field(init=False, default=-math.inf)
    switches: int = field(init=False, default=0)

    def __post_init__(self) -> None:
        if not self.link_names:
            raise ValidationError("link_names", "node needs at least one link")
        if self.pinned is not None and self.pinned not in self.link_names:
            raise ValidationError("pinned", f"{self.pinned} not among configured links")
        self.health = {name: 1.0 for name in self.link_names}

    def update_health(self, link_name: str, delivered_fraction: float) -> float:
        observed = min(1.0, max(0.0, delivered_fraction))
        h = self.health[link_name]
        h = (1 - self.ewma_alpha) * h + self.ewma_alpha * observed
        self.health[link_name] = h
        return h

    def _covering(
        self, profiles: Dict[str, LinkProfile], distances: Sequence[Optional[float]]
    ) -> List[LinkProfile]:
        out = []
        for name in self.link_names:
            profile = profiles[name]
            if not distances or any(profile.covers(d) for d in distances):
                out.append(profile)
        return out

    def select(
        self,
        profiles: Dict[str, LinkProfile],
        distances: Sequence[Optional[float]],
        now: float,
    ) -> LinkProfile:
        """Pick the link for a transmission to receivers at these distances.

        For unicast pass one distance; for broadcast pass all neighbor
        distances (coverage of any neighbor qualifies the link).
        """
        if self.pinned is not None:
            return profiles[self.pinned]
        covering = self._covering(profiles, distances)
        if not covering:
            raise NoViableLink("no configured link covers any receiver")
        healthy = [p for p in covering if self.health[p.name] >= self.health_threshold]
        pool = healthy if healthy else covering
        choice = max(pool, key=lambda p: p.bitrate_bps)
        if self.active is not None and choice.name != self.active:
            active_profile = profiles.get(self.active)
            held = now - self.last_switch < self.hysteresis_s
            if held and active_profile is not None and active_profile in covering:
                return active_profile
            self.switches += 1
        if choice.name != self.active:
            self.active = choice.name
            self.last_switch = now
        return choice
