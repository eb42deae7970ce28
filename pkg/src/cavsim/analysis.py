"""Metrics over trajectory logs: jerk, l1/l2 error sums, stability, equilibria."""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from cavsim import iadm, idm
from cavsim.errors import DomainError
from cavsim.perception import PerceivedLead, Source
from cavsim.sim import TIME_EPS, TrajectoryLog

DEFAULT_WINDOW = (20.0, 200.0)
DECAY_FRACTION = 0.05
PEAK_TOLERANCE = 1e-6
EQUILIBRIUM_TOLERANCE = 1e-9
IDM_GAP_CUTOFF = 1e6


@dataclass
class MetricsReport:
    model: str
    max_jerk: dict
    l1_speed: float
    l2_speed: float
    l1_gap: float
    l2_gap: float
    evaluation_window: tuple
    string_stable: Optional[bool] = None
    local_stable: Optional[bool] = None

    @property
    def platoon_max_jerk(self) -> float:
        return max(self.max_jerk.values()) if self.max_jerk else 0.0


@dataclass
class StabilityReport:
    local_stable: bool
    string_stable: bool
    peaks: dict
    leader_relative_peaks: dict
    settle_times: dict


def jerk_profile(accel: Sequence[float], dt: float) -> np.ndarray:
    a = np.asarray(accel, dtype=float)
    if a.ndim != 1 or a.size < 2:
        raise DomainError("jerk needs at least two acceleration samples")
    return np.diff(a) / dt


def _window(log: TrajectoryLog, window):
    start, end = window if window is not None else DEFAULT_WINDOW
    end = min(end, float(log.t[-1]))
    mask = log.window_mask(start, end)
    if not mask.any():
        raise DomainError(f"evaluation window {start}..{end} s contains no samples")
    return mask


def _check_follower(log: TrajectoryLog, i: int):
    if not 1 <= i < log.n_vehicles:
        raise DomainError(f"vehicle {i} is not in the platoon (ids 1..{log.n_vehicles - 1})")


def speed_error_series(log: TrajectoryLog, i: int, window=None) -> np.ndarray:
    """Platoon leader speed minus vehicle ``i`` speed over the window."""
    _check_follower(log, i)
    mask = _window(log, window)
    return log.speed[mask, 1] - log.speed[mask, i]


def l1_sum(errors) -> float:
    rows = [np.asarray(e, dtype=float) for e in errors]
    if not rows:
        raise DomainError("no error series")
    return float(sum(np.abs(r).sum() for r in rows))


def l2_sum(errors) -> float:
    rows = [np.asarray(e, dtype=float) for e in errors]
    if not rows:
        raise DomainError("no error series")
    return float(sum(np.sqrt(np.square(r).sum()) for r in rows))


def safe_gap_series(log: TrajectoryLog) -> np.ndarray:
    """Each platoon vehicle's own target gap at every step (NaN for vehicle 0)."""
    model = log.config.model
    v = log.speed[:, 1:]
    vl = log.speed[:, :-1]
    if isinstance(model, iadm.IadmParams):
        target = model.s0 + v * model.dt + np.maximum(0.0, (v - vl) * model.dt)
    else:
        coef = 2.0 * np.sqrt(model.a_max * model.b_max)
        target = model.s0 + np.maximum(0.0, v * model.T + v * (v - vl) / coef)
    out = np.full_like(log.speed, np.nan)
    out[:, 1:] = target
    return out


def gap_error_series(log: TrajectoryLog, i: int, window=None, reference: str = "leader") -> np.ndarray:
    """Gap deviation of follower ``i``.

    ``reference="leader"``: platoon leader's gap minus the follower's gap,
    the gap analogue of :func:`speed_error_series`. ``reference="safe"``:
    the follower's gap minus its own model target gap.
    """
    _check_follower(log, i)
    mask = _window(log, window)
    if reference == "leader":
        return log.gap[mask, 1] - log.gap[mask, i]
    if reference == "safe":
        return log.gap[mask, i] - safe_gap_series(log)[mask, i]
    raise DomainError(f"unknown gap reference {reference!r}")


def followers(log: TrajectoryLog) -> range:
    return range(2, log.n_vehicles)


def speed_error_sums(log: TrajectoryLog, window=None) -> tuple:
    errs = [speed_error_series(log, i, window) for i in followers(log)]
    if not errs:
        return 0.0, 0.0
    return l1_sum(errs), l2_sum(errs)


def gap_error_sums(log: TrajectoryLog, window=None, reference: str = "leader") -> tuple:
    errs = [gap_error_series(log, i, window, reference) for i in followers(log)]
    if not errs:
        return 0.0, 0.0
    return l1_sum(errs), l2_sum(errs)


def max_jerk(log: TrajectoryLog, window=None) -> dict:
    """Largest |jerk| per platoon vehicle, using jerk samples with both ends in the window."""
    mask = _window(log, window)
    pair = mask[1:] & mask[:-1]
    out = {}
    for i in range(1, log.n_vehicles):
        j = jerk_profile(log.accel[:, i], log.config.dt)[pair]
        out[i] = float(np.abs(j).max()) if j.size else 0.0
    return out


def stability_report(log: TrajectoryLog) -> StabilityReport:
    """Local and string stability after the configured speed perturbation.

    Peaks are taken from the perturbation start to the end of the run, on
    each follower's speed error relative to its immediate predecessor.
    A follower is locally stable when its error has fallen to within 5 % of
    its peak by the end of the run; the string is stable when follower
    peaks do not grow downstream (1e-6 m/s slack).
    """
    pert = log.config.perturbation
    if pert is None:
        raise DomainError("stability analysis needs a perturbation in the scenario")
    mask = log.t >= pert.start - TIME_EPS
    t = log.t[mask]
    end_of_pert = pert.start + pert.hold

    peaks, leader_peaks, settle = {}, {}, {}
    local = True
    for i in followers(log):
        err = np.abs(log.speed[mask, i - 1] - log.speed[mask, i])
        peak = float(err.max()) if err.size else 0.0
        peaks[i] = peak
        leader_peaks[i] = float(np.abs(log.speed[mask, 1] - log.speed[mask, i]).max()) if err.size else 0.0
        above = np.nonzero(err > DECAY_FRACTION * peak)[0]
        if above.size == 0:
            settle[i] = 0.0
            continue
        last = above[-1]
        if last == err.size - 1:
            settle[i] = None
            local = False
        else:
            settle[i] = float(max(t[last + 1], end_of_pert) - pert.start)

    ordered = [peaks[i] for i in followers(log)]
    string = all(b <= a + PEAK_TOLERANCE for a, b in zip(ordered, ordered[1:]))
    return StabilityReport(local, string, peaks, leader_peaks, settle)


def string_stable(peaks: Sequence[float], tol: float = PEAK_TOLERANCE) -> bool:
    return all(b <= a + tol for a, b in zip(peaks, peaks[1:]))


def metrics_report(log: TrajectoryLog, window=None, gap_reference: str = "leader") -> MetricsReport:
    window = window if window is not None else DEFAULT_WINDOW
    l1s, l2s = speed_error_sums(log, window)
    l1g, l2g = gap_error_sums(log, window, gap_reference)
    report = MetricsReport(log.config.model_name, max_jerk(log, window), l1s, l2s, l1g, l2g,
                           (window[0], min(window[1], float(log.t[-1]))))
    if log.config.perturbation is not None:
        stab = stability_report(log)
        report.local_stable, report.string_stable = stab.local_stable, stab.string_stable
    return report


def idm_equilibrium_gap(params: idm.IdmParams, v: float, tol: float = 1e-10) -> float:
    """Gap at which IDM acceleration vanishes for equal speeds ``v``, by bisection."""
    def f(g):
        return idm.idm_acceleration(params, v, v, g)

    lo, hi = params.s0, IDM_GAP_CUTOFF
    f_lo, f_hi = f(lo), f(hi)
    if abs(f_lo) <= tol:
        return lo
    if v >= params.v_freeflow or abs(f_hi) <= tol:
        return hi
    if f_lo > 0 or f_hi < 0:
        raise DomainError(
            f"cannot bracket IDM equilibrium gap at v={v}: accel({lo})={f_lo:.3g}, accel({hi})={f_hi:.3g}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid) <= tol:
            return mid
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
    raise DomainError(f"IDM equilibrium bisection did not converge at v={v}")


def equilibrium_check(model, v: float) -> bool:
    """Step once from the analytic equilibrium at speed ``v`` and report whether speed held."""
    if not 0 <= v <= model.v_freeflow:
        raise DomainError(f"equilibrium speed must lie in [0, {model.v_freeflow}], got {v}")
    if isinstance(model, iadm.IadmParams):
        lead = PerceivedLead(model.s0 + v * model.dt, v, Source.COMM)
        v_next = iadm.next_speed(model, iadm.IadmInput(v, lead)).v_next
    else:
        lead = PerceivedLead(idm_equilibrium_gap(model, v), v, Source.COMM)
        v_next, _ = idm.idm_next_speed(model, v, lead)
    return abs(v_next - v) <= EQUILIBRIUM_TOLERANCE
