"""Static SVG line charts of trajectory logs."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from cavsim.analysis import jerk_profile  # noqa: E402

# Fixed metadata and hash salt keep SVG output byte-stable between runs.
_SVG_KW = {"format": "svg", "metadata": {"Date": None, "Creator": None}}
matplotlib.rcParams["svg.hashsalt"] = "cavsim"


def _label(i):
    return "scripted vehicle" if i == 0 else ("platoon leader" if i == 1 else f"follower {i - 1}")


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SVG_KW)
    plt.close(fig)
    return path


def line_chart(path, t, series: dict, ylabel: str, title: str):
    fig, ax = plt.subplots(figsize=(8, 4))
    for label, y in series.items():
        ax.plot(t[: len(y)], y, linewidth=1.0, label=label)
    ax.set_xlabel("time (s)")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize="small")
    return _save(fig, path)


def profile_charts(log, out_dir, prefix=""):
    """Speed, gap, acceleration and jerk profiles, one line per vehicle."""
    name = log.config.model_name
    t = log.t
    n = log.n_vehicles
    paths = [
        line_chart(out_dir / f"{prefix}speed.svg", t, {_label(i): log.speed[:, i] for i in range(n)},
                   "speed (m/s)", f"{name}: speed"),
        line_chart(out_dir / f"{prefix}gap.svg", t, {_label(i): log.gap[:, i] for i in range(1, n)},
                   "gap (m)", f"{name}: bumper-to-bumper gap"),
        line_chart(out_dir / f"{prefix}accel.svg", t, {_label(i): log.accel[:, i] for i in range(1, n)},
                   "acceleration (m/s²)", f"{name}: acceleration"),
        line_chart(out_dir / f"{prefix}jerk.svg", t[1:],
                   {_label(i): jerk_profile(log.accel[:, i], log.config.dt) for i in range(1, n)},
                   "jerk (m/s³)", f"{name}: jerk"),
    ]
    return paths


def speed_error_chart(log, path, title=None):
    series = {_label(i): log.speed[:, 1] - log.speed[:, i] for i in range(2, log.n_vehicles)}
    return line_chart(path, log.t, series, "speed error vs platoon leader (m/s)",
                      title or f"{log.config.model_name}: speed error")


def comparison_charts(logs, out_dir):
    """Speed-error and jerk panels, one column per model."""
    paths = []
    for kind, ylabel in (("speed_error", "speed error (m/s)"), ("jerk", "jerk (m/s³)")):
        fig, axes = plt.subplots(1, len(logs), figsize=(6 * len(logs), 4), sharey=True)
        for ax, log in zip(np.atleast_1d(axes), logs):
            for i in range(2 if kind == "speed_error" else 1, log.n_vehicles):
                if kind == "speed_error":
                    ax.plot(log.t, log.speed[:, 1] - log.speed[:, i], linewidth=1.0, label=_label(i))
                else:
                    ax.plot(log.t[1:], jerk_profile(log.accel[:, i], log.config.dt),
                            linewidth=1.0, label=_label(i))
            ax.set_title(log.config.model_name)
            ax.set_xlabel("time (s)")
            ax.grid(True, alpha=0.3)
            ax.legend(fontsize="small")
        np.atleast_1d(axes)[0].set_ylabel(ylabel)
        paths.append(_save(fig, out_dir / f"compare_{kind}.svg"))
    return paths
