"""Command-line front end: ``otfs-lab {limits,profile,mc,calibrate-cfar,dump}``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .cfar import ca_cfar
from .experiments import (
    METHODS,
    calibrate_cfar,
    load_scenario,
    metrics_csv_text,
    receiver_map,
    run_sweep,
    simulate,
    write_metrics_csv,
)
from .glrt import glrt_map
from .model import steering_b, steering_c
from .modem import save_frame_binary, save_frame_csv
from .params import InvalidParameterError, limits_table, load_params


class UsageError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    # write to a string first so a failure never leaves partial output behind
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _scenario_from_args(args):
    sc = load_scenario(args.scenario)
    grid = dict(sc.grid)
    if getattr(args, "os_tau", None):
        grid["os_tau"] = args.os_tau
    if getattr(args, "os_nu", None):
        grid["os_nu"] = args.os_nu
    cfar = sc.cfar
    if getattr(args, "pfa", None) is not None:
        cfar = replace(cfar, p_fa=args.pfa)
    return replace(sc, grid=grid, cfar=cfar)


def cmd_limits(args) -> int:
    params = load_params(args.params)
    rows = [(label, format(value, ".12g"), unit) for label, value, unit in limits_table(params)]
    _emit(_csv_text(["quantity", "value", "unit"], rows), args.out)
    return 0


def cmd_profile(args) -> int:
    sc = _scenario_from_args(args)
    data = simulate(sc, args.seed)
    dd_map = receiver_map(sc, data, args.method)
    _, threshold = ca_cfar(dd_map, sc.cfar)
    if args.axis == "range":
        axis, values = dd_map.range_profile(args.at)
        j = dd_map.nearest_doppler_bin(sc.params.velocity_to_doppler(args.at))
        thr = threshold[:, j]
    else:
        axis, values = dd_map.velocity_profile(args.at)
        i = dd_map.nearest_delay_bin(sc.params.range_to_delay(args.at))
        thr = threshold[i, :]
    tiny = np.finfo(float).tiny
    rows = [
        (f"{a:.6f}", f"{10 * np.log10(max(v, tiny)):.4f}", f"{10 * np.log10(max(t, tiny)):.4f}")
        for a, v, t in zip(axis, values, thr)
    ]
    name = "range_m" if args.axis == "range" else "velocity_mps"
    _emit(_csv_text([name, "statistic_db", "threshold_db"], rows), args.out)
    return 0


def _config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def cmd_mc(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    sc = _scenario_from_args(args)
    snrs = args.snr if args.snr else [float(sc.targets[sc.reference_index]["snr_db"])]
    rows = run_sweep(sc, args.method, snrs, args.trials, root_seed=args.seed, association=args.assoc)
    if args.out:
        write_metrics_csv(rows, args.out)
        prov = {
            "config_hash": _config_hash(sc.to_config()),
            "root_seed": args.seed,
            "code_version": __version__,
            "method": args.method,
            "association": args.assoc or ("unambiguous" if args.method == "glrt" else "folded"),
            "scenario": sc.to_config(),
        }
        Path(str(args.out) + ".provenance.json").write_text(json.dumps(prov, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(metrics_csv_text(rows))
    return 0


def cmd_calibrate_cfar(args) -> int:
    if not 0 < args.pfa < 1:
        raise UsageError("--pfa must be in (0, 1)")
    report = calibrate_cfar(args.params, args.pfa, args.cells, seed=args.seed, doppler_bins=args.doppler_bins)
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return 0


def cmd_dump(args) -> int:
    sc = _scenario_from_args(args)
    data = simulate(sc, args.seed)
    out = Path(args.out)
    what = args.what
    if what == "frame-csv":
        save_frame_csv(data.frame, out)
    elif what == "frame-bin":
        save_frame_binary(data.frame, out)
    elif what == "rx":
        np.savetxt(out, np.column_stack([data.y.real, data.y.imag]), delimiter=",", fmt="%.17g")
    elif what in ("steering-b", "steering-c"):
        if args.delay is None and what == "steering-b":
            raise UsageError("--delay is required for steering-b")
        if args.doppler is None and what == "steering-c":
            raise UsageError("--doppler is required for steering-c")
        v = steering_b(args.delay, sc.params) if what == "steering-b" else steering_c(args.doppler, sc.params)
        np.savetxt(out, np.column_stack([v.real, v.imag]), delimiter=",", fmt="%.17g")
    elif what in ("map-csv", "map-bin"):
        dd_map = (
            glrt_map(data.y, data.s, sc.params.noise_variance, sc.detection_grid())
            if args.method == "glrt"
            else receiver_map(sc, data, args.method)
        )
        dd_map.to_csv(out) if what == "map-csv" else dd_map.to_binary(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="otfs-lab", description="OTFS radar sensing toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("limits", help="resolution and ambiguity table")
    p.add_argument("--params", default="isi-regime", help="preset name or JSON file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_limits)

    def scenario_opts(p):
        p.add_argument("--scenario", required=True, help="built-in name or JSON file")
        p.add_argument("--method", choices=METHODS, default="glrt")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--os-tau", type=int)
        p.add_argument("--os-nu", type=int)
        p.add_argument("--pfa", type=float)
        p.add_argument("--out")

    p = sub.add_parser("profile", help="range or velocity profile of one realisation")
    scenario_opts(p)
    p.add_argument("--axis", choices=["range", "velocity"], default="range",
                   help="range: profile at fixed velocity; velocity: at fixed range")
    p.add_argument("--at", type=float, required=True, help="slice velocity (m/s) or range (m)")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("mc", help="Monte Carlo SNR sweep of the reference target")
    scenario_opts(p)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--snr", type=float, nargs="+")
    p.add_argument("--assoc", choices=["folded", "unambiguous"])
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("calibrate-cfar", help="empirical CA-CFAR false-alarm rate on noise-only maps")
    p.add_argument("--params", default="isi-regime")
    p.add_argument("--pfa", type=float, default=1e-2)
    p.add_argument("--cells", type=int, default=1_000_000)
    p.add_argument("--doppler-bins", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_calibrate_cfar)

    p = sub.add_parser("dump", help="write intermediate arrays for debugging")
    scenario_opts(p)
    p.add_argument("--what", required=True,
                   choices=["frame-csv", "frame-bin", "rx", "steering-b", "steering-c", "map-csv", "map-bin"])
    p.add_argument("--delay", type=float)
    p.add_argument("--doppler", type=float)
    p.set_defaults(func=cmd_dump)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "dump" and not args.out:
        ap.error("dump requires --out")
    try:
        return args.func(args)
    except UsageError as exc:
        ap.error(str(exc))
    except (InvalidParameterError, ValueError, OSError) as exc:
        print(f"otfs-lab {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
