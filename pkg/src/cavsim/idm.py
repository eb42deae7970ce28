"""Intelligent Driver Model in forward-Euler difference form.

Used as the comparison baseline; no acceleration clamp is applied beyond
flooring the speed at zero.
"""

import math
from dataclasses import dataclass

from cavsim.errors import ConfigError, DomainError
from cavsim.perception import PerceivedLead


@dataclass(frozen=True)
class IdmParams:
    """IDM parameters. ``b_max`` is a positive magnitude, ``T`` the time headway."""

    a_max: float = 1.5
    b_max: float = 1.5
    s0: float = 2.0
    T: float = 0.1
    delta: float = 4.0
    v_freeflow: float = 25.0
    dt: float = 0.1

    def __post_init__(self):
        for name in ("a_max", "b_max", "s0", "T", "delta", "v_freeflow", "dt"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a finite number > 0, got {value!r}")
        if self.delta < 1:
            raise ConfigError(f"delta must be >= 1, got {self.delta}")


def idm_desired_gap(params: IdmParams, v: float, lead_speed: float) -> float:
    dyn = v * params.T + v * (v - lead_speed) / (2.0 * math.sqrt(params.a_max * params.b_max))
    return params.s0 + max(0.0, dyn)


def idm_acceleration(params: IdmParams, v: float, lead_speed: float, gap: float) -> float:
    if gap <= 0:
        raise DomainError(f"IDM needs a positive gap, got {gap}")
    ratio = idm_desired_gap(params, v, lead_speed) / gap
    return params.a_max * (1.0 - (v / params.v_freeflow) ** params.delta - ratio * ratio)


def idm_next_speed(params: IdmParams, v: float, lead: PerceivedLead) -> tuple:
    """Return ``(v_next, accel)`` after one step of ``params.dt``."""
    accel = idm_acceleration(params, v, lead.lead_speed, lead.gap)
    return max(0.0, v + accel * params.dt), accel
