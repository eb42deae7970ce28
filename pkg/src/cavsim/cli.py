"""Command-line front end.

    cavsim run --config table1_iadm --out out/iadm
    cavsim compare --config table1_iadm table1_idm --out out/compare
    cavsim stability --config stability_iadm --out out/stab

Exit codes: 0 success, 2 usage or validation error, 3 collision, 4 I/O error.
"""

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

from cavsim import analysis, config as cfg
from cavsim.errors import CollisionError, ConfigError, DomainError
from cavsim.sim import run_scenario

log = logging.getLogger("cavsim")

EXIT_OK, EXIT_VALIDATION, EXIT_COLLISION, EXIT_IO = 0, 2, 3, 4

TRAJECTORY_HEADER = ["t", "vehicle", "position_m", "speed_mps", "accel_mps2", "gap_m", "branch"]
METRICS_HEADER = ["model", "l1_speed", "l2_speed", "l1_gap", "l2_gap", "max_jerk_mps3",
                  "window_start_s", "window_end_s"]


@dataclasses.dataclass
class RunManifest:
    config_paths: list
    output_dir: str
    artifacts: list
    config_hashes: list

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        self.artifacts.append(str(path))
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2) + "\n", encoding="utf-8")
        return path


def _num(x) -> str:
    return "" if x != x else repr(float(x))  # NaN -> empty field


def write_trajectory(log, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for k, t in enumerate(log.t):
            for i in range(log.n_vehicles):
                w.writerow([repr(float(t)), i, _num(log.position[k, i]), _num(log.speed[k, i]),
                            _num(log.accel[k, i]), _num(log.gap[k, i]), log.branch[k][i]])
    return path


def write_metrics(reports, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for r in reports:
            w.writerow([r.model, _num(r.l1_speed), _num(r.l2_speed), _num(r.l1_gap), _num(r.l2_gap),
                        _num(r.platoon_max_jerk), _num(r.evaluation_window[0]),
                        _num(r.evaluation_window[1])])
    return path


def write_jerk(reports, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "vehicle", "max_jerk_mps3"])
        for r in reports:
            for vehicle, value in r.max_jerk.items():
                w.writerow([r.model, vehicle, _num(value)])
    return path


def write_stability(report, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vehicle", "peak_speed_error_mps", "peak_speed_error_vs_leader_mps",
                    "settle_time_s", "local_stable", "string_stable"])
        for i, peak in report.peaks.items():
            settle = report.settle_times[i]
            w.writerow([i, _num(peak), _num(report.leader_relative_peaks[i]),
                        "" if settle is None else _num(settle),
                        report.local_stable, report.string_stable])
    return path


def _parse_window(text):
    try:
        start, end = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be 'start,end' in seconds, got {text!r}")
    if end < start:
        raise argparse.ArgumentTypeError("window end precedes start")
    return start, end


def _load(name, seed):
    config = cfg.load(name)
    if seed is not None:
        config = dataclasses.replace(config, link=dataclasses.replace(config.link, seed=seed))
    return config


def _prepare_out(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _summary(report):
    jerk = ", ".join(f"{i}: {v:.4f}" for i, v in report.max_jerk.items())
    print(f"{report.model}: l1/l2 speed {report.l1_speed:.2f}/{report.l2_speed:.2f}, "
          f"l1/l2 gap {report.l1_gap:.2f}/{report.l2_gap:.2f}, max |jerk| per vehicle {{{jerk}}} m/s^3")


def cmd_run(args) -> RunManifest:
    config = _load(args.config, args.seed)
    out = _prepare_out(args.out)
    traj = run_scenario(config)
    report = analysis.metrics_report(traj, args.window)
    artifacts = [write_trajectory(traj, out / "trajectory.csv"),
                 write_metrics([report], out / "metrics.csv"),
                 write_jerk([report], out / "jerk.csv")]
    if not args.no_svg:
        from cavsim import charts
        artifacts += charts.profile_charts(traj, out)
    _summary(report)
    print(f"minimum gap {float(traj.gap[:, 1:].min()):.3f} m")
    return RunManifest([str(cfg.resolve(args.config))], str(out), [str(p) for p in artifacts],
                       [cfg.config_hash(config)])


def _scenario_without_model(config):
    doc = cfg.to_dict(config)
    doc.pop("model")
    return doc


def cmd_compare(args) -> RunManifest:
    configs = [_load(name, args.seed) for name in args.config]
    if _scenario_without_model(configs[0]) != _scenario_without_model(configs[1]):
        raise ConfigError("compared configs must share schedule, dt, duration, initial state and link")
    out = _prepare_out(args.out)
    logs = [run_scenario(c) for c in configs]
    reports = [analysis.metrics_report(lg, args.window) for lg in logs]
    artifacts = [write_metrics(reports, out / "metrics.csv"), write_jerk(reports, out / "jerk.csv")]
    for idx, lg in enumerate(logs):
        artifacts.append(write_trajectory(lg, out / f"trajectory_{idx + 1}_{lg.config.model_name.lower()}.csv"))
    if not args.no_svg:
        from cavsim import charts
        artifacts += charts.comparison_charts(logs, out)
    for r in reports:
        _summary(r)
    return RunManifest([str(cfg.resolve(n)) for n in args.config], str(out),
                       [str(p) for p in artifacts], [cfg.config_hash(c) for c in configs])


def cmd_stability(args) -> RunManifest:
    config = _load(args.config, args.seed)
    if config.perturbation is None:
        raise ConfigError("stability analysis needs a [perturbation] section", key="perturbation")
    out = _prepare_out(args.out)
    traj = run_scenario(config)
    report = analysis.stability_report(traj)
    artifacts = [write_trajectory(traj, out / "trajectory.csv"),
                 write_stability(report, out / "stability.csv")]
    if not args.no_svg:
        from cavsim import charts
        artifacts += [
            charts.line_chart(out / "speed.svg", traj.t,
                              {charts._label(i): traj.speed[:, i] for i in range(traj.n_vehicles)},
                              "speed (m/s)", f"{config.model_name}: speed with perturbation"),
            charts.speed_error_chart(traj, out / "speed_error.svg"),
            charts.line_chart(out / "gap.svg", traj.t,
                              {charts._label(i): traj.gap[:, i] for i in range(1, traj.n_vehicles)},
                              "gap (m)", f"{config.model_name}: gap with perturbation"),
        ]
    peaks = ", ".join(f"{i}: {p:.4f}" for i, p in report.peaks.items())
    print(f"local_stable={report.local_stable} string_stable={report.string_stable} "
          f"peak speed error vs predecessor {{{peaks}}} m/s")
    return RunManifest([str(cfg.resolve(args.config))], str(out), [str(p) for p in artifacts],
                       [cfg.config_hash(config)])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, n_configs=1):
        if n_configs == 1:
            p.add_argument("--config", required=True, help="config path or bundled name")
        else:
            p.add_argument("--config", required=True, nargs=2, metavar=("IADM", "IDM"),
                           help="two config paths or bundled names")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the link seed")
        p.add_argument("--no-svg", action="store_true", help="skip SVG charts")
        p.add_argument("--window", type=_parse_window, default=analysis.DEFAULT_WINDOW,
                       help="evaluation window 'start,end' in seconds (default 20,200)")

    common(sub.add_parser("run", help="simulate one scenario"))
    common(sub.add_parser("compare", help="simulate two models on one scenario"), n_configs=2)
    common(sub.add_parser("stability", help="perturbation run with stability report"))
    return parser


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "stability": cmd_stability}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        manifest = COMMANDS[args.command](args)
        manifest.write(Path(args.out))
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CollisionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COLLISION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
