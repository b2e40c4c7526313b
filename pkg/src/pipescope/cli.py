"""Command-line front end: experiment orchestration, file I/O, plots.

Subcommands: oracle-irm, simulate-irm, reconstruct, plot, replay. Option
precedence is flags > --config file > --preset values > built-in
defaults; the two presets carry the stock experiment constants so each
experiment runs with a single flag. Every output set gets a manifest
JSON recording the resolved configuration; ``replay`` re-runs a
manifest and reproduces the outputs byte for byte.

Exit codes: 0 success, 2 configuration error, 3 numeric error,
4 reconstruction point out of reach (action time exceeds tau).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import ActionTimeExceedsTau, ConfigError, NumericError, PipescopeError
from .graph import Network, validate_network
from .inversion import ReconConfig, area_profile, volume_profile
from .irm import load_irm, measure_irm, oracle_irm, sample_irm, save_irm
from .presets import preset
from .simulate import SimConfig

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_UNREACHABLE = 4


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read JSON from {path}: {exc}") from exc


def _resolve(args: argparse.Namespace, keys: dict[str, object], preset_section: str) -> dict:
    """Merge flag values over config-file values over preset values over defaults."""
    file_cfg = _load_json(args.config) if getattr(args, "config", None) else {}
    preset_cfg = {}
    network_spec = None
    if getattr(args, "preset", None):
        p = preset(args.preset)
        preset_cfg = p.get(preset_section, {})
        network_spec = p["network"]
    resolved = {}
    for key, default in keys.items():
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
        elif key in file_cfg:
            resolved[key] = file_cfg[key]
        elif key in preset_cfg:
            resolved[key] = preset_cfg[key]
        else:
            resolved[key] = default
    missing = [k for k, v in resolved.items() if v is None]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")
    if getattr(args, "network", None):
        network_spec = _load_json(args.network)
    elif "network" in file_cfg:
        network_spec = file_cfg["network"]
    if network_spec is not None:
        resolved["network"] = network_spec
    return resolved


def _require_network(resolved: dict) -> Network:
    if "network" not in resolved:
        raise ConfigError("no network given: use --network FILE or --preset")
    return validate_network(resolved["network"])


def _write_manifest(command: str, resolved: dict, inputs: dict, outputs: list, path, wall: float):
    manifest = {
        "command": command,
        "version": __version__,
        "config": resolved,
        "inputs": inputs,
        "outputs": [str(o) for o in outputs],
        "wall_time_s": wall,
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


# -- commands -----------------------------------------------------------------


def cmd_oracle_irm(resolved: dict) -> list:
    net = _require_network(resolved)
    started = time.time()
    analytic = oracle_irm(net, resolved["horizon"], prune_eps=resolved["prune_eps"])
    irm = sample_irm(analytic, resolved["dt"])
    out = resolved["out"]
    save_irm(irm, out)
    _write_manifest("oracle-irm", resolved, {}, [out], f"{out}.manifest.json", time.time() - started)
    return [out]


def cmd_simulate_irm(resolved: dict) -> list:
    net = _require_network(resolved)
    started = time.time()
    cfg = SimConfig(dx=resolved["dx"], duration=resolved["duration"], courant=resolved["courant"])
    irm, runs = measure_irm(
        net,
        cfg,
        resample_dt=resolved["resample_dt"] or None,
        smooth_window_s=resolved["smooth_window"],
    )
    out = resolved["out"]
    save_irm(irm, out)
    outputs = [out]
    if resolved.get("dump_traces"):
        trace_dir = resolved["dump_traces"]
        os.makedirs(trace_dir, exist_ok=True)
        for source, hist in zip(net.accessible, runs):
            for leaf, series in hist.boundary.items():
                path = os.path.join(trace_dir, f"src_{source}_probe_{leaf}.csv")
                with open(path, "w") as fh:
                    fh.write("t,H\n")
                    for t, h in zip(hist.t, series):
                        fh.write(f"{float(t)!r},{float(h)!r}\n")
                outputs.append(path)
    if resolved.get("dump_fields"):
        field_dir = resolved["dump_fields"]
        os.makedirs(field_dir, exist_ok=True)
        for source, hist in zip(net.accessible, runs):
            for pid, grid in hist.grids.items():
                path = os.path.join(field_dir, f"src_{source}_pipe_{pid}.csv")
                with open(path, "w") as fh:
                    fh.write("t,x,H,Q\n")
                    for k, t in enumerate(hist.t):
                        for node, x in enumerate(grid.x):
                            fh.write(
                                f"{float(t)!r},{float(x)!r},"
                                f"{float(hist.H[pid][k, node])!r},{float(hist.Q[pid][k, node])!r}\n"
                            )
                outputs.append(path)
    _write_manifest("simulate-irm", resolved, {}, outputs, f"{out}.manifest.json", time.time() - started)
    return outputs


def _parse_list(value, cast):
    if isinstance(value, (list, tuple)):
        return [cast(v) for v in value]
    return [cast(v) for v in str(value).split(",") if v != ""]


def cmd_reconstruct(resolved: dict) -> list:
    net = _require_network(resolved)
    started = time.time()
    irm = load_irm(resolved["irm"])
    pipes = _parse_list(resolved["pipes"], str) if resolved["pipes"] else list(net.pipes)
    lams = _parse_list(resolved["lam"], float)
    if len(lams) == 1:
        lams = lams * len(pipes)
    if len(lams) != len(pipes):
        raise ConfigError(f"{len(lams)} lambda values for {len(pipes)} pipes")
    unknown = [p for p in pipes if p not in net.pipes]
    if unknown:
        raise ConfigError(f"unknown pipe id(s): {', '.join(unknown)}")

    out_dir = resolved["out"]
    os.makedirs(out_dir, exist_ok=True)
    jobs = int(resolved["jobs"])
    outputs = []
    for pid, lam in zip(pipes, lams):
        cfg = ReconConfig(
            tau=resolved["tau"],
            dt=irm.dt,
            dx=resolved["dx"],
            lam=lam,
            sigma_shift=int(resolved["sigma_shift"]),
        )
        vp = volume_profile(net, irm, pid, cfg, jobs=jobs)
        ap = area_profile(vp, cfg.dx)
        vol_path = os.path.join(out_dir, f"{pid}_volume.csv")
        with open(vol_path, "w") as fh:
            fh.write("pipe,x_m,V_m3\n")
            for x, v in zip(vp.positions, vp.volumes):
                fh.write(f"{pid},{float(x)!r},{float(v)!r}\n")
        area_path = os.path.join(out_dir, f"{pid}_area.csv")
        with open(area_path, "w") as fh:
            fh.write("pipe,x_m,A_m2\n")
            for x, a in zip(ap.positions, ap.areas):
                fh.write(f"{pid},{float(x)!r},{float(a)!r}\n")
        outputs.extend([vol_path, area_path])
    _write_manifest(
        "reconstruct",
        resolved,
        {"irm": str(resolved["irm"])},
        outputs,
        os.path.join(out_dir, "manifest.json"),
        time.time() - started,
    )
    return outputs


def _read_profile_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if header[:2] != ["pipe", "x_m"] or len(header) != 3 or not rows:
        raise ConfigError(f"{path}: expected pipe,x_m,(A_m2|V_m3) CSV with data rows")
    pipe_id = rows[0][0]
    x = np.array([float(r[1]) for r in rows])
    y = np.array([float(r[2]) for r in rows])
    return pipe_id, header[2], x, y


def _svg_polyline(points, style):
    coords = " ".join(f"{px:.2f},{py:.2f}" for px, py in points)
    return f'<polyline fill="none" {style} points="{coords}"/>'


def cmd_plot(resolved: dict) -> list:
    panels = []
    truth_net = None
    if resolved.get("truth"):
        truth_net = validate_network(_load_json(resolved["truth"]))
    for path in resolved["inputs"]:
        pipe_id, kind, x, y = _read_profile_csv(path)
        truth_xy = None
        if truth_net is not None and kind == "A_m2" and pipe_id in truth_net.pipes:
            pipe = truth_net.pipes[pipe_id]
            # sample from the reconstruction-start end so coordinates line up
            from_far = truth_net.far_side_vertex(pipe_id) == pipe.from_vertex
            tx = np.linspace(0.0, pipe.length, 401)
            ty = np.asarray(pipe.area(tx if from_far else pipe.length - tx))
            truth_xy = (tx, ty)
        panels.append((pipe_id, kind, x, y, truth_xy))

    width, panel_h, pad_l, pad_r, pad_t, pad_b = 640, 220, 50, 15, 25, 30
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{panel_h * len(panels)}">'
    ]
    for idx, (pipe_id, kind, x, y, truth_xy) in enumerate(panels):
        oy = idx * panel_h
        xs = [x] if truth_xy is None else [x, truth_xy[0]]
        ys = [y] if truth_xy is None else [y, truth_xy[1]]
        x_lo, x_hi = min(v.min() for v in xs), max(v.max() for v in xs)
        y_lo, y_hi = min(v.min() for v in ys), max(v.max() for v in ys)
        span_y = (y_hi - y_lo) or 1.0
        y_lo, y_hi = y_lo - 0.1 * span_y, y_hi + 0.1 * span_y
        span_x = (x_hi - x_lo) or 1.0

        def sx(v):
            return pad_l + (v - x_lo) / span_x * (width - pad_l - pad_r)

        def sy(v):
            return oy + pad_t + (y_hi - v) / (y_hi - y_lo) * (panel_h - pad_t - pad_b)

        parts.append(
            f'<rect x="{pad_l}" y="{oy + pad_t}" width="{width - pad_l - pad_r}" '
            f'height="{panel_h - pad_t - pad_b}" fill="none" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{pad_l}" y="{oy + pad_t - 8}" font-family="monospace" font-size="12">'
            f"{pipe_id} {kind} [{y_lo:.6g}, {y_hi:.6g}] over x [{x_lo:.6g}, {x_hi:.6g}] m</text>"
        )
        if truth_xy is not None:
            parts.append(
                _svg_polyline(
                    [(sx(px), sy(py)) for px, py in zip(*truth_xy)],
                    'stroke="gray" stroke-width="2"',
                )
            )
        parts.append(
            _svg_polyline(
                [(sx(px), sy(py)) for px, py in zip(x, y)],
                'stroke="black" stroke-width="1" stroke-dasharray="6,3"',
            )
        )
    parts.append("</svg>")
    out = resolved["out"]
    with open(out, "w") as fh:
        fh.write("\n".join(parts) + "\n")
    return [out]


def cmd_replay(manifest_path: str) -> list:
    manifest = _load_json(manifest_path)
    command = manifest.get("command")
    runner = {
        "oracle-irm": cmd_oracle_irm,
        "simulate-irm": cmd_simulate_irm,
        "reconstruct": cmd_reconstruct,
        "plot": cmd_plot,
    }.get(command)
    if runner is None:
        raise ConfigError(f"manifest has unknown command {command!r}")
    return runner(manifest["config"])


# -- argument parsing ---------------------------------------------------------


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--network", help="network JSON file")
    p.add_argument("--preset", choices=["exp1", "exp2"], help="built-in experiment defaults")
    p.add_argument("--config", help="JSON file with option defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pipescope", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pipescope {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("oracle-irm", help="exact impulse-response matrix on uniform pipes")
    _add_common(p)
    p.add_argument("--horizon", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--prune-eps", dest="prune_eps", type=float)
    p.add_argument("--out")

    p = sub.add_parser("simulate-irm", help="impulse-response matrix from step-response runs")
    _add_common(p)
    p.add_argument("--dx", type=float)
    p.add_argument("--courant", type=float)
    p.add_argument("--duration", type=float)
    p.add_argument("--resample-dt", dest="resample_dt", type=float)
    p.add_argument("--smooth-window", dest="smooth_window", type=float)
    p.add_argument("--dump-traces", dest="dump_traces")
    p.add_argument("--dump-fields", dest="dump_fields")
    p.add_argument("--out")

    p = sub.add_parser("reconstruct", help="area profiles from an IRM file")
    _add_common(p)
    p.add_argument("--irm")
    p.add_argument("--tau", type=float)
    p.add_argument("--dx", type=float)
    p.add_argument("--lambda", dest="lam", help="comma-separated per-pipe weights (or one for all)")
    p.add_argument("--pipes", help="comma-separated pipe ids (default: all)")
    p.add_argument("--sigma-shift", dest="sigma_shift", type=int, choices=[0, 1])
    p.add_argument("--jobs", type=int, help="worker threads per profile (env PIPESCOPE_JOBS)")
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("plot", help="render area/volume CSVs as an SVG figure")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--truth", help="network JSON for the true-profile line")
    p.add_argument("--out", required=True)

    p = sub.add_parser("show-network", help="print a preset network as JSON")
    p.add_argument("--preset", choices=["exp1", "exp2"], required=True)

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("manifest")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "oracle-irm":
            resolved = _resolve(
                args,
                {"horizon": None, "dt": None, "prune_eps": 1e-4, "out": None},
                "oracle",
            )
            outputs = cmd_oracle_irm(resolved)
        elif args.command == "simulate-irm":
            resolved = _resolve(
                args,
                {
                    "dx": None,
                    "courant": 0.95,
                    "duration": None,
                    "resample_dt": 0.0,
                    "smooth_window": 0.02,
                    "dump_traces": "",
                    "dump_fields": "",
                    "out": None,
                },
                "simulate",
            )
            outputs = cmd_simulate_irm(resolved)
        elif args.command == "reconstruct":
            env_jobs = os.environ.get("PIPESCOPE_JOBS", "1")
            resolved = _resolve(
                args,
                {
                    "irm": None,
                    "tau": None,
                    "dx": None,
                    "lam": None,
                    "pipes": "",
                    "sigma_shift": 1,
                    "jobs": env_jobs,
                    "out": None,
                },
                "reconstruct",
            )
            outputs = cmd_reconstruct(resolved)
        elif args.command == "plot":
            resolved = {"inputs": args.inputs, "truth": args.truth, "out": args.out}
            outputs = cmd_plot(resolved)
        elif args.command == "show-network":
            print(json.dumps(preset(args.preset)["network"], indent=1))
            return 0
        elif args.command == "replay":
            outputs = cmd_replay(args.manifest)
        else:  # pragma: no cover - argparse enforces the choices
            return EXIT_CONFIG
    except ActionTimeExceedsTau as exc:
        print(f"pipescope: point out of reach: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except ConfigError as exc:
        print(f"pipescope: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"pipescope: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PipescopeError as exc:
        print(f"pipescope: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in outputs:
        print(path)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
