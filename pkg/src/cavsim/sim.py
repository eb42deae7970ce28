"""Fixed-step platoon simulation.

Vehicle 0 is a scripted vehicle driven by a :class:`LeadSchedule`; vehicle 1
leads the platoon and vehicles 2.. follow. Every platoon vehicle runs the
configured car-following model against its predecessor as perceived through
:func:`cavsim.perception.perceive`. All vehicles update synchronously from
the pre-step snapshot, and positions advance with the new speed.
"""

import random
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from cavsim import iadm, idm
from cavsim.errors import CollisionError, ConfigError, DomainError
from cavsim.perception import (
    LinkConfig,
    PerceivedLead,
    SensingSpec,
    Source,
    V2XLink,
    perceive,
)

TIME_EPS = 1e-9

Model = Union[iadm.IadmParams, idm.IdmParams]


@dataclass(frozen=True)
class VehicleState:
    position: float
    speed: float
    accel: float = 0.0
    length: float = 5.0

    def __post_init__(self):
        if self.speed < 0:
            raise DomainError(f"speed must be >= 0, got {self.speed}")
        if not self.length > 0:
            raise DomainError(f"length must be > 0, got {self.length}")


@dataclass(frozen=True)
class Hold:
    speed: float


@dataclass(frozen=True)
class Ramp:
    accel: float
    target_speed: float


@dataclass(frozen=True)
class Segment:
    duration: float
    mode: Union[Hold, Ramp]


@dataclass(frozen=True)
class LeadSchedule:
    """Piecewise speed profile. Each ramp starts from the previous segment's end speed."""

    segments: tuple = ()
    initial_speed: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.initial_speed is None:
            if not self.segments or not isinstance(self.segments[0].mode, Hold):
                raise ConfigError("schedule needs initial_speed unless it starts with a hold")
            object.__setattr__(self, "initial_speed", float(self.segments[0].mode.speed))
        if self.initial_speed < 0:
            raise ConfigError(f"schedule initial_speed must be >= 0, got {self.initial_speed}")
        speed = self.initial_speed
        for i, seg in enumerate(self.segments):
            if not seg.duration > 0:
                raise ConfigError(f"schedule segment {i}: duration must be > 0")
            mode = seg.mode
            if isinstance(mode, Hold):
                if mode.speed < 0:
                    raise ConfigError(f"schedule segment {i}: hold speed must be >= 0")
                speed = mode.speed
                continue
            if mode.target_speed < 0:
                raise ConfigError(f"schedule segment {i}: target_speed must be >= 0")
            change = mode.target_speed - speed
            if change != 0:
                if mode.accel == 0 or (change > 0) != (mode.accel > 0):
                    raise ConfigError(
                        f"schedule segment {i}: accel {mode.accel} does not move "
                        f"{speed} m/s toward {mode.target_speed} m/s")
                needed = change / mode.accel
                if needed > seg.duration + TIME_EPS:
                    raise ConfigError(
                        f"schedule segment {i}: ramp needs {needed:g} s but lasts {seg.duration:g} s")
            speed = mode.target_speed

    @property
    def duration(self) -> float:
        return float(sum(seg.duration for seg in self.segments))


@dataclass(frozen=True)
class Perturbation:
    start: float = 100.0
    delta_speed: float = -5.0
    hold: float = 5.0

    def __post_init__(self):
        if self.start < 0:
            raise ConfigError(f"perturbation start must be >= 0, got {self.start}")
        if self.hold < 0:
            raise ConfigError(f"perturbation hold must be >= 0, got {self.hold}")


@dataclass(frozen=True)
class ScenarioConfig:
    model: Model
    schedule: LeadSchedule
    initial_positions: tuple
    initial_speeds: tuple
    n_followers: int = 3
    duration: float = 200.0
    dt: float = 0.1
    link: LinkConfig = field(default_factory=LinkConfig)
    perturbation: Optional[Perturbation] = None
    sensing: SensingSpec = field(default_factory=SensingSpec)
    length: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "initial_positions", tuple(float(p) for p in self.initial_positions))
        object.__setattr__(self, "initial_speeds", tuple(float(v) for v in self.initial_speeds))
        if not isinstance(self.n_followers, int) or self.n_followers < 0:
            raise ConfigError(f"n_followers must be a non-negative integer, got {self.n_followers!r}")
        n = self.n_vehicles
        if len(self.initial_positions) != n:
            raise ConfigError(
                f"initial_positions has {len(self.initial_positions)} entries, expected {n} "
                f"(schedule vehicle, platoon leader, {self.n_followers} followers)")
        if len(self.initial_speeds) != n:
            raise ConfigError(f"initial_speeds has {len(self.initial_speeds)} entries, expected {n}")
        if not self.length > 0:
            raise ConfigError(f"length must be > 0, got {self.length}")
        for i in range(1, n):
            if not self.initial_positions[i] < self.initial_positions[i - 1]:
                raise ConfigError("initial_positions must be strictly decreasing downstream")
            if self.initial_positions[i - 1] - self.initial_positions[i] - self.length <= 0:
                raise ConfigError(f"vehicle {i} starts overlapping its predecessor")
        if any(v < 0 for v in self.initial_speeds):
            raise ConfigError("initial_speeds must be >= 0")
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if abs(self.model.dt - self.dt) > TIME_EPS:
            raise ConfigError(f"model dt {self.model.dt} differs from scenario dt {self.dt}")
        if self.duration < 0:
            raise ConfigError(f"duration must be >= 0, got {self.duration}")
        if abs(self.duration - self.schedule.duration) > TIME_EPS * max(1.0, self.duration):
            raise ConfigError(
                f"duration {self.duration:g} s differs from the schedule total {self.schedule.duration:g} s")
        steps = self.duration / self.dt
        if abs(steps - round(steps)) > 1e-6:
            raise ConfigError(f"duration {self.duration:g} is not a whole number of dt={self.dt:g} steps")
        if abs(self.initial_speeds[0] - self.schedule.initial_speed) > TIME_EPS:
            raise ConfigError(
                f"schedule vehicle initial speed {self.initial_speeds[0]} differs from the "
                f"schedule's initial speed {self.schedule.initial_speed}")
        if self.perturbation is not None and self.perturbation.start > self.duration:
            raise ConfigError(
                f"perturbation start {self.perturbation.start:g} s is beyond the duration {self.duration:g} s")

    @property
    def n_vehicles(self) -> int:
        return self.n_followers + 2

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def model_name(self) -> str:
        return "IADM" if isinstance(self.model, iadm.IadmParams) else "IDM"


@dataclass
class TrajectoryLog:
    """Per-step history. Arrays are indexed ``[step, vehicle]``; vehicle 0 is scripted."""

    config: ScenarioConfig
    t: np.ndarray
    position: np.ndarray
    speed: np.ndarray
    accel: np.ndarray
    gap: np.ndarray
    branch: list
    link_stats: list = field(default_factory=list)

    @property
    def n_vehicles(self) -> int:
        return self.position.shape[1]

    def window_mask(self, start: float, end: float) -> np.ndarray:
        return (self.t >= start - TIME_EPS) & (self.t <= end + TIME_EPS)


def schedule_speed_at(schedule: LeadSchedule, t: float) -> float:
    total = schedule.duration
    if t < -TIME_EPS or t > total + TIME_EPS:
        raise DomainError(f"t={t} outside the schedule [0, {total}]")
    speed = schedule.initial_speed
    start = 0.0
    for seg in schedule.segments:
        end = start + seg.duration
        mode = seg.mode
        if isinstance(mode, Hold):
            seg_speed = mode.speed
            if t < end - TIME_EPS:
                return seg_speed
        else:
            if t < end - TIME_EPS:
                v = speed + mode.accel * max(0.0, t - start)
                return min(v, mode.target_speed) if mode.accel > 0 else max(v, mode.target_speed)
            seg_speed = mode.target_speed
        speed = seg_speed
        start = end
    return speed


def inject_perturbation(speed: float, t: float, perturbation: Optional[Perturbation]) -> float:
    if perturbation is None:
        return speed
    if perturbation.start - TIME_EPS <= t < perturbation.start + perturbation.hold - TIME_EPS:
        return max(0.0, speed + perturbation.delta_speed)
    return speed


def advance(model: Model, v: float, lead: PerceivedLead) -> tuple:
    """One model step for one vehicle: ``(v_next, branch_tag)``."""
    if isinstance(model, iadm.IadmParams):
        res = iadm.next_speed(model, iadm.IadmInput(v, lead))
        return res.v_next, res.branch.value
    v_next, _ = idm.idm_next_speed(model, v, lead)
    return v_next, ""


def bumper_gap(front: VehicleState, rear: VehicleState) -> float:
    return front.position - rear.position - front.length


def step_platoon(states: Sequence[VehicleState], lead_speed: float, links: Sequence[V2XLink],
                 model: Model, sensing: SensingSpec, time: float = 0.0) -> tuple:
    """Advance the whole column by one step.

    ``states`` is ordered with the scripted vehicle first; ``lead_speed`` is
    its speed after the step and ``links[i - 1]`` feeds vehicle ``i``.
    ``time`` is the time after the step, used only in collision errors.
    Returns ``(new_states, branch_tags)``.
    """
    dt = model.dt
    new_speeds = [lead_speed]
    branches = [""]
    for i in range(1, len(states)):
        front, me = states[i - 1], states[i]
        gap = bumper_gap(front, me)
        if gap <= 0:
            raise CollisionError(time - dt, i, gap)
        lead = perceive(sensing, links[i - 1], gap, front.speed, model.v_freeflow)
        v_next, tag = advance(model, me.speed, lead)
        new_speeds.append(v_next)
        branches.append(tag)

    new_states = [
        VehicleState(s.position + v * dt, v, (v - s.speed) / dt, s.length)
        for s, v in zip(states, new_speeds)
    ]
    for i in range(1, len(new_states)):
        gap = bumper_gap(new_states[i - 1], new_states[i])
        if gap <= 0:
            raise CollisionError(time, i, gap)
    return new_states, branches


def make_links(config: ScenarioConfig, states: Sequence[VehicleState]) -> list:
    links = []
    for i in range(1, len(states)):
        initial = PerceivedLead(bumper_gap(states[i - 1], states[i]), states[i - 1].speed, Source.COMM)
        # String seeds hash deterministically (sha512), independent of PYTHONHASHSEED.
        rng = random.Random(f"{config.link.seed}:{i}")
        links.append(V2XLink(config.link, initial, rng))
    return links


def initial_states(config: ScenarioConfig) -> list:
    return [VehicleState(p, v, 0.0, config.length)
            for p, v in zip(config.initial_positions, config.initial_speeds)]


def run_scenario(config: ScenarioConfig) -> TrajectoryLog:
    n_steps, n = config.n_steps, config.n_vehicles
    dt = config.dt
    t = np.arange(n_steps + 1) * dt
    position = np.empty((n_steps + 1, n))
    speed = np.empty((n_steps + 1, n))
    accel = np.empty((n_steps + 1, n))
    gap = np.full((n_steps + 1, n), np.nan)
    branch = [[""] * n]

    states = initial_states(config)
    links = make_links(config, states)

    def record(k, st):
        for i, s in enumerate(st):
            position[k, i], speed[k, i], accel[k, i] = s.position, s.speed, s.accel
            if i:
                gap[k, i] = bumper_gap(st[i - 1], s)

    record(0, states)
    for k in range(1, n_steps + 1):
        tk = t[k]
        lead_speed = inject_perturbation(schedule_speed_at(config.schedule, tk), tk, config.perturbation)
        states, tags = step_platoon(states, lead_speed, links, config.model, config.sensing, tk)
        record(k, states)
        branch.append(tags)

    return TrajectoryLog(config, t, position, speed, accel, gap, branch,
                         [link.stats() for link in links])
