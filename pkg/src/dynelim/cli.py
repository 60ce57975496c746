"""Command-line interface: figure-style experiments, sweeps and artifacts.

Units at the boundary: pulse areas in multiples of pi (S/pi), frequencies as
cycles per pulse duration ((w/2pi) t_p for the modulation frequency and
(Delta/2pi) t_p for detunings). Internally t_p = 1 and frequencies are
angular. Exit codes: 0 success, 2 usage error, 3 convergence failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, dynamics, io, pulses
from .errors import ConvergenceError, NoWindowError, ValidationError

TWO_PI = 2.0 * math.pi


def _cycles_to_angular(value_tp_cycles: float) -> float:
    return TWO_PI * value_tp_cycles


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynelim",
        description="Three-level Lambda system simulations of modulated two-photon control.",
    )
    parser.add_argument("--out-dir", default="out", help="directory for output artifacts")
    parser.add_argument("--jobs", type=int, default=os.cpu_count(),
                        help="worker processes for grid sweeps")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="tabular output format")
    parser.add_argument("--seed", type=int, default=None,
                        help="reserved; the pipeline is noise-free and ignores it")
    parser.add_argument("--tol", type=float, default=1e-9,
                        help="propagator refinement tolerance on the final state")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dynamics", help="single pulse: field shapes and population dynamics")
    p.add_argument("--scheme", choices=("de", "ae"), default="de")
    p.add_argument("--area-pi", type=float, default=10.0, help="envelope area S in units of pi")
    p.add_argument("--seff-pi", type=float, default=None,
                   help="effective area in units of pi (modulated scheme); sets the modulation frequency")
    p.add_argument("--omega-e-tp", type=float, default=None,
                   help="modulation frequency as (omega_e/2pi) t_p; exclusive with --seff-pi")
    p.add_argument("--delta-tp", type=float, default=0.0,
                   help="single-photon detuning as (Delta/2pi) t_p")
    p.add_argument("--delta2-tp", type=float, default=0.0,
                   help="two-photon detuning as (delta/2pi) t_p")
    p.add_argument("--phi", type=float, default=0.0, help="modulation phase offset in radians")
    p.add_argument("--samples", type=int, default=513, help="trajectory sample count")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("infidelity-map",
                       help="full-transfer infidelity over envelope area and elimination knob")
    p.add_argument("--scheme", choices=("de", "ae"), required=True)
    p.add_argument("--s-min-pi", type=float, default=3.0, help="smallest area S/pi")
    p.add_argument("--s-max-pi", type=float, default=12.0, help="largest area S/pi")
    p.add_argument("--s-points", type=int, default=20, help="area grid size")
    p.add_argument("--knob-min-tp", type=float, default=0.3,
                   help="knob grid start, (omega_e/2pi) t_p for de or (Delta/2pi) t_p for ae")
    p.add_argument("--knob-max-tp", type=float, default=9.0, help="knob grid end, same units")
    p.add_argument("--knob-points", type=int, default=20, help="knob grid size")
    p.add_argument("--populations", action="store_true",
                   help="also write average and final intermediate-state population maps")
    p.add_argument("--fine", action="store_true",
                   help="publication-density 40x40 grid (takes tens of minutes)")
    p.set_defaults(func=cmd_infidelity_map)

    p = sub.add_parser("robustness",
                       help="detuning windows of half-transfer pulses, modulated vs unmodulated")
    p.add_argument("--areas-pi", default="5,10",
                   help="comma-separated envelope areas S/pi to compare")
    p.add_argument("--threshold", type=float, default=1e-4, help="infidelity threshold")
    p.add_argument("--curve-points", type=int, default=41,
                   help="samples per output infidelity curve")
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("ramsey", help="two-pulse interferometry: fringes, contrast and phase maps")
    p.add_argument("--scheme", choices=("de", "ae"), default="de")
    p.add_argument("--omega-e-tp", type=float, default=10.0,
                   help="modulation frequency as (omega_e/2pi) t_p (modulated scheme)")
    p.add_argument("--tau-tp", type=float, default=1.0, help="free-evolution time in units of t_p")
    p.add_argument("--s-min-pi", type=float, default=2.0, help="smallest area S/pi")
    p.add_argument("--s-max-pi", type=float, default=14.0, help="largest area S/pi")
    p.add_argument("--s-points", type=int, default=13, help="area grid size")
    p.add_argument("--delta-min-tp", type=float, default=0.0,
                   help="detuning grid start as (Delta/2pi) t_p")
    p.add_argument("--delta-max-tp", type=float, default=30.0,
                   help="detuning grid end as (Delta/2pi) t_p")
    p.add_argument("--delta-points", type=int, default=11, help="detuning grid size")
    p.add_argument("--periods", type=int, default=2, help="fringe periods per scan")
    p.add_argument("--per-period", type=int, default=64, help="scan samples per fringe period")
    p.add_argument("--fringe-point", action="append", default=None, metavar="S_PI:DELTA_TP",
                   help="extra fringe at area S/pi and detuning (Delta/2pi) t_p; repeatable. "
                        "Defaults to the ideal pulse and a half-area detuned one")
    p.add_argument("--fine", action="store_true", help="denser 25x21 maps")
    p.set_defaults(func=cmd_ramsey)

    p = sub.add_parser("sweep", help="generic 1-D sweep of a metric over a knob")
    p.add_argument("--scheme", choices=("de", "ae"), default="de")
    p.add_argument("--metric", required=True,
                   choices=("infidelity", "final-p0", "avg-p0", "transfer-angle"),
                   help="infidelity is against the full-transfer target")
    p.add_argument("--knob", required=True,
                   choices=("area-pi", "omega-e-tp", "delta-tp", "phi", "alpha"),
                   help="swept quantity; alpha mixes amplitudes as (cos a, sin a)")
    p.add_argument("--min", dest="knob_min", type=float, required=True, help="knob start")
    p.add_argument("--max", dest="knob_max", type=float, required=True, help="knob end")
    p.add_argument("--points", type=int, required=True, help="grid size (must be positive)")
    p.add_argument("--area-pi", type=float, default=10.0, help="fixed area when not swept")
    p.add_argument("--omega-e-tp", type=float, default=None,
                   help="fixed modulation frequency; default from --seff-pi")
    p.add_argument("--seff-pi", type=float, default=1.0,
                   help="fixed effective area setting the modulation frequency")
    p.add_argument("--delta-tp", type=float, default=0.0, help="fixed detuning when not swept")
    p.set_defaults(func=cmd_sweep)

    return parser


def _resolve_omega_e(parser, area: float, seff_pi, omega_e_tp, default_seff_pi=1.0):
    if seff_pi is not None and omega_e_tp is not None:
        parser.error("--seff-pi and --omega-e-tp are contradictory; give one")
    if omega_e_tp is not None:
        return _cycles_to_angular(omega_e_tp)
    seff = (default_seff_pi if seff_pi is None else seff_pi) * math.pi
    return pulses.modulation_for_effective_area(area, seff, 1.0)


def _manifest(args, command: str, parameters: dict, outputs: list[Path], started: float):
    out_dir = Path(args.out_dir)
    manifest = io.RunManifest(
        command=command,
        parameters=parameters,
        outputs=[str(p) for p in outputs],
        duration_s=time.time() - started,
    )
    path = manifest.write(out_dir / f"{command.replace('-', '_')}_manifest.json")
    print(f"wrote manifest {path}")


def _table_name(stem: str, fileformat: str) -> str:
    return f"{stem}.{ 'csv' if fileformat == 'csv' else 'json' }"


def cmd_dynamics(parser, args) -> int:
    started = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scheme = pulses.Scheme(args.scheme)
    area = args.area_pi * math.pi
    if scheme is pulses.Scheme.DE:
        omega_e = _resolve_omega_e(parser, area, args.seff_pi, args.omega_e_tp)
        spec = pulses.PulseSpec(scheme=scheme, area=area, omega_e=omega_e, phi=args.phi)
    else:
        if args.seff_pi is not None or args.omega_e_tp is not None:
            parser.error("--seff-pi/--omega-e-tp apply to the modulated scheme only")
        spec = pulses.PulseSpec(scheme=scheme, area=area)
    params = dynamics.SystemParams(
        pulse=spec,
        delta_1=_cycles_to_angular(args.delta_tp),
        delta_2=_cycles_to_angular(args.delta2_tp),
    )
    traj = dynamics.propagate(params, -spec.window, spec.window,
                              n_samples=args.samples, tol=args.tol)
    omega_p, omega_s = pulses.rabi_pair(traj.times, spec)
    pulse_path = io.write_table(
        out_dir / _table_name("pulse_shapes", args.format),
        ["t", "omega_p", "omega_s"],
        zip(traj.times, omega_p, omega_s),
        args.format,
    )
    traj_path = io.write_trajectory(
        out_dir / _table_name("trajectory", args.format), traj, fileformat=args.format
    )
    meta_path = io.write_json(out_dir / "dynamics_meta.json", {
        "kind": "dynamics",
        "pulse_table": pulse_path.name,
        "trajectory_table": traj_path.name,
        "format": args.format,
        "labels": {
            "time": "t / t_p",
            "fields": "Rabi frequency (1/t_p)",
            "populations": "population",
        },
        "pulse": spec.to_json_dict(),
        "delta_tp": args.delta_tp,
        "delta2_tp": args.delta2_tp,
    })
    final = traj.final_state()
    print(f"final populations: P(+1)={final.population(+1):.6f} "
          f"P(0)={final.population(0):.3e} P(-1)={final.population(-1):.6f}")
    _manifest(args, "dynamics", _param_dict(args), [pulse_path, traj_path, meta_path], started)
    return 0


def _param_dict(args) -> dict:
    skip = {"func", "command"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def cmd_infidelity_map(parser, args) -> int:
    started = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    s_points = 40 if args.fine else args.s_points
    k_points = 40 if args.fine else args.knob_points
    if s_points < 1 or k_points < 1:
        parser.error("grid sizes must be positive")
    s_grid = np.linspace(args.s_min_pi, args.s_max_pi, s_points) * math.pi
    knob_grid = _cycles_to_angular(np.linspace(args.knob_min_tp, args.knob_max_tp, k_points))
    result = analysis.pi_pulse_infidelity_map(
        args.scheme, s_grid, knob_grid, jobs=args.jobs,
        populations=args.populations, tol=args.tol,
    )
    knob_cycles = knob_grid / TWO_PI
    outputs = []
    knob_label = ("(omega_e/2pi) t_p" if args.scheme == "de" else "(Delta/2pi) t_p")

    def emit(stem, matrix, metric, log_scale):
        table = io.write_grid(out_dir / _table_name(stem, args.format),
                              s_grid / math.pi, knob_cycles, matrix, args.format)
        meta = io.write_json(out_dir / f"{stem}_meta.json", {
            "kind": "heatmap",
            "table": table.name,
            "format": args.format,
            "metric": metric,
            "scheme": args.scheme,
            "log_scale": log_scale,
            "x_label": knob_label,
            "y_label": "S / pi",
            "s_grid_pi": list(s_grid / math.pi),
            "knob_grid_tp": list(knob_cycles),
            "tolerance": args.tol,
        })
        outputs.extend([table, meta])

    emit("infidelity_map", result.infidelity, "infidelity", True)
    if args.populations:
        emit("avg_p0_map", result.avg_p0, "average intermediate population", True)
        emit("final_p0_map", result.final_p0, "final intermediate population", True)
    print(f"infidelity map {result.infidelity.shape}: "
          f"min={result.infidelity.min():.3e} max={result.infidelity.max():.3e}")
    _manifest(args, "infidelity-map", _param_dict(args), outputs, started)
    return 0


def cmd_robustness(parser, args) -> int:
    started = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        areas_pi = [float(x) for x in args.areas_pi.split(",") if x.strip()]
    except ValueError:
        parser.error("--areas-pi must be a comma-separated list of numbers")
    if not areas_pi:
        parser.error("--areas-pi must name at least one area")
    outputs = []
    summary = {"threshold": args.threshold, "areas_pi": areas_pi, "results": {}}
    curve_entries = []
    for area_pi in areas_pi:
        area = area_pi * math.pi
        windows = {}
        for scheme in ("de", "ae"):
            win = analysis.detuning_window(scheme, area, args.threshold, tol=args.tol)
            windows[scheme] = win
            offsets = np.linspace(1.3 * win.lower, 1.3 * win.upper, args.curve_points)
            curve = analysis.detuning_scan(win, offsets, tol=args.tol)
            stem = f"robustness_curve_{scheme}_s{area_pi:g}pi"
            table = io.write_table(
                out_dir / _table_name(stem, args.format),
                ["delta_tp_rad", "infidelity"],
                curve,
                args.format,
            )
            outputs.append(table)
            curve_entries.append({
                "table": table.name,
                "label": f"{scheme} S={area_pi:g}pi",
            })
        ratio = windows["de"].width / windows["ae"].width
        summary["results"][f"s{area_pi:g}pi"] = {
            "de": _window_dict(windows["de"]),
            "ae": _window_dict(windows["ae"]),
            "window_ratio_de_over_ae": ratio,
        }
        print(f"S={area_pi:g}pi: window(de)={windows['de'].width:.4f} "
              f"window(ae)={windows['ae'].width:.4f} ratio={ratio:.2f}")
    summary_path = io.write_json(out_dir / "robustness_summary.json", summary)
    meta_path = io.write_json(out_dir / "robustness_meta.json", {
        "kind": "curves",
        "format": args.format,
        "curves": curve_entries,
        "x_label": "added detuning Delta t_p (rad)",
        "y_label": "infidelity",
        "log_y": True,
        "threshold": args.threshold,
    })
    outputs.extend([summary_path, meta_path])
    _manifest(args, "robustness", _param_dict(args), outputs, started)
    return 0


def _window_dict(win: analysis.WindowResult) -> dict:
    # Window edges are in angular units (Delta * t_p); cycles given alongside.
    return {
        "scheme": win.scheme.value,
        "area_pi": win.area / math.pi,
        "reference_knob_tp_cycles": win.reference_knob / TWO_PI,
        "reference_infidelity": win.reference_infidelity,
        "target_phase_rad": win.target_phase,
        "lower_rad": win.lower,
        "upper_rad": win.upper,
        "width_rad": win.width,
        "width_cycles": win.width / TWO_PI,
    }


def cmd_ramsey(parser, args) -> int:
    started = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    s_points = 25 if args.fine else args.s_points
    d_points = 21 if args.fine else args.delta_points
    scheme = pulses.Scheme(args.scheme)
    omega_e = _cycles_to_angular(args.omega_e_tp) if scheme is pulses.Scheme.DE else None
    tau = args.tau_tp
    scan = analysis.default_phase_scan(args.periods, args.per_period)
    outputs = []

    fringe_points = args.fringe_point
    if fringe_points is None:
        fringe_points = ["10:0", "5:20"]
    fringe_entries = []
    for i, spec_str in enumerate(fringe_points):
        try:
            s_pi_str, delta_str = spec_str.split(":")
            s_pi, delta_tp = float(s_pi_str), float(delta_str)
        except ValueError:
            parser.error(f"malformed --fringe-point {spec_str!r}; expected S_PI:DELTA_TP")
        if scheme is pulses.Scheme.DE:
            spec = pulses.PulseSpec(scheme=scheme, area=s_pi * math.pi, omega_e=omega_e)
        else:
            spec = pulses.PulseSpec(scheme=scheme, area=s_pi * math.pi)
        cfg = analysis.RamseyConfig(
            pulse=spec, delta_1=_cycles_to_angular(delta_tp), tau=tau, phase_scan=scan
        )
        signal = analysis.ramsey_signal(cfg, tol=args.tol)
        fit = analysis.fit_fringe(signal)
        stem = f"fringe_{i:02d}"
        table = io.write_table(out_dir / _table_name(stem, args.format),
                               ["phase", "signal"], signal, args.format)
        outputs.append(table)
        fringe_entries.append({
            "table": table.name,
            "label": f"S={s_pi:g}pi, (Delta/2pi)t_p={delta_tp:g}",
            "fit": {
                "contrast": fit.contrast,
                "phase_shift": fit.phase_shift,
                "offset": fit.offset,
                "residual": fit.residual,
            },
        })
        print(f"fringe {i}: S={s_pi:g}pi delta_tp={delta_tp:g} "
              f"contrast={fit.contrast:.4f} phase={fit.phase_shift:+.4f}")
    fringes_meta = io.write_json(out_dir / "fringes_meta.json", {
        "kind": "fringes",
        "format": args.format,
        "fringes": fringe_entries,
        "x_label": "accumulated phase (rad)",
        "y_label": "P(+1) - P(-1)",
    })
    outputs.append(fringes_meta)

    s_grid = np.linspace(args.s_min_pi, args.s_max_pi, s_points) * math.pi
    delta_grid = _cycles_to_angular(np.linspace(args.delta_min_tp, args.delta_max_tp, d_points))
    maps = analysis.ramsey_maps(scheme, s_grid, delta_grid, omega_e=omega_e,
                                tau=tau, phase_scan=scan, jobs=args.jobs, tol=args.tol)
    for stem, matrix, metric, log_scale in (
        ("contrast_map", maps.contrast, "fringe contrast", False),
        ("phase_map", maps.phase_shift, "fringe phase shift (rad)", False),
    ):
        table = io.write_grid(out_dir / _table_name(stem, args.format),
                              s_grid / math.pi, delta_grid / TWO_PI, matrix, args.format)
        meta = io.write_json(out_dir / f"{stem}_meta.json", {
            "kind": "heatmap",
            "table": table.name,
            "format": args.format,
            "metric": metric,
            "scheme": args.scheme,
            "log_scale": log_scale,
            "x_label": "(Delta/2pi) t_p",
            "y_label": "S / pi",
            "s_grid_pi": list(s_grid / math.pi),
            "knob_grid_tp": list(delta_grid / TWO_PI),
            "tolerance": args.tol,
        })
        outputs.extend([table, meta])
    print(f"contrast map max={maps.contrast.max():.4f} at "
          f"S/pi={s_grid[maps.reference_point[0]] / math.pi:.2f}, "
          f"(Delta/2pi)t_p={delta_grid[maps.reference_point[1]] / TWO_PI:.2f}")
    _manifest(args, "ramsey", _param_dict(args), outputs, started)
    return 0


def cmd_sweep(parser, args) -> int:
    started = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.points < 1:
        parser.error("--points must be positive")
    scheme = pulses.Scheme(args.scheme)
    values = np.linspace(args.knob_min, args.knob_max, args.points)

    def build(knob_value: float):
        area = args.area_pi * math.pi
        phi = 0.0
        alpha = None
        delta_tp = args.delta_tp
        omega_e_tp = args.omega_e_tp
        if args.knob == "area-pi":
            area = knob_value * math.pi
        elif args.knob == "omega-e-tp":
            omega_e_tp = knob_value
        elif args.knob == "delta-tp":
            delta_tp = knob_value
        elif args.knob == "phi":
            phi = knob_value
        elif args.knob == "alpha":
            alpha = knob_value
        if scheme is pulses.Scheme.DE:
            omega_e = (
                _cycles_to_angular(omega_e_tp) if omega_e_tp is not None
                else pulses.modulation_for_effective_area(area, args.seff_pi * math.pi, 1.0)
            )
            if alpha is not None:
                spec = pulses.PulseSpec.from_mixing_angle(
                    alpha, scheme=scheme, area=area, omega_e=omega_e, phi=phi
                )
            else:
                spec = pulses.PulseSpec(scheme=scheme, area=area, omega_e=omega_e, phi=phi)
        else:
            if alpha is not None:
                spec = pulses.PulseSpec.from_mixing_angle(alpha, scheme=scheme, area=area)
            else:
                spec = pulses.PulseSpec(scheme=scheme, area=area)
        return dynamics.SystemParams(pulse=spec, delta_1=_cycles_to_angular(delta_tp))

    rows = []
    for v in values:
        params = build(float(v))
        spec = params.pulse
        if args.metric == "avg-p0":
            traj = dynamics.propagate(params, -spec.window, spec.window,
                                      n_samples=257, tol=args.tol)
            metric = analysis.avg_intermediate_population(traj, -spec.t_p / 2, spec.t_p / 2)
        else:
            u = dynamics.propagate_unitary(params, -spec.window, spec.window, tol=args.tol)
            final = u.matrix[:, 0]
            if args.metric == "infidelity":
                metric = analysis.infidelity(final, analysis.KET_M1)
            elif args.metric == "final-p0":
                metric = abs(final[1]) ** 2
            else:
                metric = analysis.transfer_angle(final)
        rows.append((float(v), float(metric)))
    table = io.write_table(out_dir / _table_name("sweep", args.format),
                           [args.knob, args.metric], rows, args.format)
    meta = io.write_json(out_dir / "sweep_meta.json", {
        "kind": "curves",
        "format": args.format,
        "curves": [{"table": table.name, "label": f"{args.metric} ({args.scheme})"}],
        "x_label": args.knob,
        "y_label": args.metric,
        "log_y": args.metric == "infidelity",
    })
    print(f"sweep {args.metric} over {args.knob}: {args.points} points")
    _manifest(args, "sweep", _param_dict(args), [table, meta], started)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(parser, args)
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, NoWindowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
