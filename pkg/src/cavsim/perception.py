"""Perceived lead state: gap fusion, lead speed selection and the V2X link.

A follower learns about its predecessor through two paths. The on-board
sensor measures the current gap when the predecessor is within
``sensor_range``. The V2X link carries the predecessor's broadcast state
and is subject to a fixed delay (whole simulation steps) and Bernoulli
packet loss with zero-order hold.
"""

import enum
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Optional

from cavsim.errors import ConfigError, DomainError


class Source(str, enum.Enum):
    SENSOR = "Sensor"
    COMM = "Comm"
    FREE_FLOW = "FreeFlow"


@dataclass(frozen=True)
class SensingSpec:
    sensor_range: float = 120.0
    comm_range: float = 300.0

    def __post_init__(self):
        if not self.sensor_range > 0:
            raise ConfigError(f"sensor_range must be > 0, got {self.sensor_range}")
        if not self.comm_range > 0:
            raise ConfigError(f"comm_range must be > 0, got {self.comm_range}")


@dataclass(frozen=True)
class LinkConfig:
    delay_steps: int = 1
    drop_probability: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.delay_steps, bool) or not isinstance(self.delay_steps, int):
            raise ConfigError(f"delay_steps must be an integer, got {self.delay_steps!r}")
        if self.delay_steps < 0:
            raise ConfigError(f"delay_steps must be >= 0, got {self.delay_steps}")
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ConfigError(f"drop_probability must be in [0, 1], got {self.drop_probability}")


@dataclass(frozen=True)
class PerceivedLead:
    gap: float
    lead_speed: float
    source: Source

    def __post_init__(self):
        if self.gap < 0:
            raise DomainError(f"perceived gap must be >= 0, got {self.gap}")
        if self.lead_speed < 0:
            raise DomainError(f"perceived lead speed must be >= 0, got {self.lead_speed}")


@dataclass
class LinkStats:
    packets_sent: int = 0
    packets_delivered: int = 0
    consecutive_drop_histogram: dict = field(default_factory=dict)

    @property
    def packets_dropped(self) -> int:
        return self.packets_sent - self.packets_delivered

    @property
    def delivery_ratio(self) -> Optional[float]:
        """Packet delivery ratio, or ``None`` when nothing has been sent."""
        if self.packets_sent == 0:
            return None
        return self.packets_delivered / self.packets_sent


def fuse_gap(sensor_range: float, comm_range: float, measured_gap: Optional[float]) -> float:
    """Minimum available gap in front of a vehicle.

    With a measured gap this is ``min(sensor_range, comm_range, measured_gap)``.
    With nothing in coverage the free-flow limit ``max(sensor_range, comm_range)``
    is returned.
    """
    if not (sensor_range > 0 and comm_range > 0):
        raise DomainError("coverage ranges must be positive")
    if measured_gap is None:
        return max(sensor_range, comm_range)
    if measured_gap < 0:
        raise DomainError(f"negative measured gap {measured_gap}: collision upstream")
    return min(sensor_range, comm_range, measured_gap)


def effective_lead_speed(measured_gap: Optional[float], lead_speed: Optional[float],
                         free_flow_speed: float, constrained: bool,
                         via: Source = Source.COMM) -> tuple:
    """Speed the follower should treat as its lead's, and where it came from.

    ``via`` names the path the lead speed arrived on when it is used.
    """
    if measured_gap is not None and constrained:
        if lead_speed is None or lead_speed < 0:
            raise DomainError(f"constrained follower needs a lead speed >= 0, got {lead_speed}")
        if via is Source.FREE_FLOW:
            raise DomainError("a measured lead cannot arrive via the free-flow path")
        return lead_speed, via
    return free_flow_speed, Source.FREE_FLOW


class V2XLink:
    """One directed V2X link from a predecessor to its follower.

    Each call to :meth:`step` sends one message and returns what the
    receiver holds afterwards. The drop decision is drawn once per sent
    packet from ``rng`` (a :class:`random.Random` seeded from the config
    unless supplied), so the delivered/dropped sequence is a pure function
    of the seed.
    """

    def __init__(self, config: LinkConfig, initial: PerceivedLead, rng=None):
        self.config = config
        self.rng = rng if rng is not None else random.Random(config.seed)
        self._in_flight = deque()
        self._held = initial
        self._sent = 0
        self._delivered = 0
        self._runs = Counter()
        self._open_run = 0

    @property
    def held(self) -> PerceivedLead:
        return self._held

    def step(self, fresh: PerceivedLead) -> PerceivedLead:
        delivered = self.rng.random() < 1.0 - self.config.drop_probability
        self._sent += 1
        if delivered:
            self._delivered += 1
            if self._open_run:
                self._runs[self._open_run] += 1
                self._open_run = 0
        else:
            self._open_run += 1
        self._in_flight.append((fresh, delivered))

        if len(self._in_flight) > self.config.delay_steps:
            message, ok = self._in_flight.popleft()
            if ok:
                self._held = message
        return self._held

    def stats(self) -> LinkStats:
        hist = Counter(self._runs)
        if self._open_run:
            hist[self._open_run] += 1
        return LinkStats(self._sent, self._delivered, dict(sorted(hist.items())))


def link_step(link: V2XLink, fresh_message: PerceivedLead) -> PerceivedLead:
    return link.step(fresh_message)


def link_stats(link: V2XLink) -> LinkStats:
    return link.stats()


def perceive(sensing: SensingSpec, link: V2XLink, true_gap: float, lead_speed: float,
             free_flow_speed: float) -> PerceivedLead:
    """Fuse the sensor and V2X paths into the lead state a follower acts on.

    The sensor path is delay-free. The broadcast message goes through the
    link; its gap and speed are used if it is within communication range.
    The fused gap is the smallest available reading, and the lead speed
    comes from the V2X message when one is in range.
    """
    if true_gap < 0:
        raise DomainError(f"negative gap {true_gap}: collision upstream")
    broadcast = PerceivedLead(true_gap, lead_speed, Source.COMM)
    received = link.step(broadcast)

    readings = []
    if true_gap <= sensing.sensor_range:
        readings.append(true_gap)
    comm_ok = received.source is not Source.FREE_FLOW and received.gap <= sensing.comm_range
    if comm_ok:
        readings.append(received.gap)

    measured = min(readings) if readings else None
    gap = fuse_gap(sensing.sensor_range, sensing.comm_range, measured)
    if comm_ok:
        speed, via = received.lead_speed, Source.COMM
    elif readings:
        speed, via = lead_speed, Source.SENSOR
    else:
        speed, via = None, Source.FREE_FLOW
    constrained = speed is not None and speed <= free_flow_speed
    speed, source = effective_lead_speed(measured, speed, free_flow_speed, constrained, via)
    return PerceivedLead(gap, speed, source)
