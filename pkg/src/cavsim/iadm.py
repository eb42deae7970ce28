"""Information-aware driver model (IADM).

The next speed is the smallest of three candidates: speed after one step of
comfortable acceleration, the roadway free-flow speed, and the largest speed
from which the follower can still brake comfortably within the gap left over
beyond its dynamic safe gap. Magnitudes ``a_max`` and ``b_max`` are stored
positive; the comfortable deceleration carries the sign.
"""

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

from cavsim.errors import ConfigError, DomainError
from cavsim.perception import PerceivedLead


class Branch(str, enum.Enum):
    ACCEL = "Accel"
    FREE_FLOW = "FreeFlow"
    DECEL = "Decel"
    MAX_BRAKE = "MaxBrake"


@dataclass(frozen=True)
class IadmParams:
    a_max: float = 1.5
    b_max: float = 1.5
    s0: float = 2.0
    k: float = 1.0
    dt: float = 0.1
    v_freeflow: float = 25.0

    def __post_init__(self):
        for name in ("a_max", "b_max", "s0", "k", "dt", "v_freeflow"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a finite number > 0, got {value!r}")
        if self.k > 1:
            raise ConfigError(f"k must be in (0, 1], got {self.k}")


class IadmInput(NamedTuple):
    v: float
    lead: PerceivedLead


@dataclass(frozen=True)
class IadmStepResult:
    v_next: float
    accel: float
    branch: Branch
    s_safe: float
    s_net: float


def safe_gap(params: IadmParams, v: float, lead_speed: float) -> float:
    return params.s0 + v * params.dt + max(0.0, (v - lead_speed) * params.dt)


def _comfort_tanh(params, v, lead_speed, s_fgap, s_safe):
    # Exact comparison: the gap-based form only applies at equal speeds.
    if lead_speed != v:
        return math.tanh(params.k * abs(lead_speed - v))
    return math.tanh(params.k * abs(s_fgap - s_safe))


def comfortable_accel(params: IadmParams, v: float, lead_speed: float,
                      s_fgap: float, s_safe: float) -> float:
    return params.a_max * _comfort_tanh(params, v, lead_speed, s_fgap, s_safe)


def comfortable_decel(params: IadmParams, v: float, lead_speed: float,
                      s_fgap: float, s_safe: float) -> float:
    return -params.b_max * _comfort_tanh(params, v, lead_speed, s_fgap, s_safe)


def next_speed(params: IadmParams, inp: IadmInput) -> IadmStepResult:
    """Advance one follower by one step of ``params.dt``.

    A negative radicand in the comfortable-deceleration speed (gap already
    inside the safe gap with a slow lead) falls back to maximum braking.
    The realized acceleration is clamped to ``[-b_max, a_max]``; ``branch``
    names the candidate that was binding before the clamp, ties resolved in
    the order Accel, FreeFlow, Decel.
    """
    v, lead = inp
    if v < 0:
        raise DomainError(f"speed must be >= 0, got {v}")
    if lead.gap < 0:
        raise DomainError(f"negative gap {lead.gap}: vehicles already collided")
    dt = params.dt
    vl = lead.lead_speed
    s_safe = safe_gap(params, v, vl)
    s_net = lead.gap - s_safe

    a_comf = comfortable_accel(params, v, vl, lead.gap, s_safe)
    b_comf = comfortable_decel(params, v, vl, lead.gap, s_safe)
    v_acc = v + a_comf * dt
    radicand = vl * vl - 2.0 * b_comf * s_net
    if radicand >= 0:
        v_dec, dec_branch = math.sqrt(radicand), Branch.DECEL
    else:
        v_dec, dec_branch = max(0.0, v - params.b_max * dt), Branch.MAX_BRAKE

    candidates = ((v_acc, Branch.ACCEL), (params.v_freeflow, Branch.FREE_FLOW), (v_dec, dec_branch))
    v_min, branch = min(candidates, key=lambda c: c[0])  # min() keeps the first of equals
    v_next = max(0.0, v_min)

    accel = (v_next - v) / dt
    if accel > params.a_max or accel < -params.b_max:
        accel = min(max(accel, -params.b_max), params.a_max)
        v_next = max(0.0, v + accel * dt)
    return IadmStepResult(v_next, accel, branch, s_safe, s_net)
