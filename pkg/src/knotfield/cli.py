"""Command-line interface: ``knotfield <command> [options]``.

Every command that writes files also writes a run manifest.  Passing the
manifest back through ``--config-file`` (with a new ``--out``) replays the
run and reproduces the outputs byte for byte.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (EnsembleSpec, SimulationParams, generate_ensemble, run_ensemble,
                       write_trajectories_csv)
from .errors import DegenerateSeedError, DomainError, KnotFieldError
from .fields import (GridSpec, KnotField, PresetMissing, PRESET_DERIVERS, SearchParams,
                     field_on_grid, find_rmax, get_preset, parse_configuration, write_grid_csv)
from .tracing import DEFAULT_SEEDS, trace_line, write_lines_jsonl

EXIT_OK, EXIT_FAIL, EXIT_VALIDATION, EXIT_PRESET, EXIT_NUMERICAL = 0, 1, 2, 3, 4

# Arguments that name files; they are left out of manifests so a replay can
# write elsewhere and still produce an identical manifest.
PATH_ARGS = {"out", "manifest", "config_file"}


class UsageError(DomainError):
    pass


# --- parsing helpers ----------------------------------------------------------

def parse_tspan(text) -> tuple:
    if isinstance(text, (list, tuple)):
        bits = list(text)
    else:
        bits = str(text).split(":")
    if len(bits) != 2:
        raise UsageError(f"time span must be a:b, got {text!r}")
    a, b = float(bits[0]), float(bits[1])
    if a == b:
        raise UsageError("time span must have nonzero length")
    return a, b


def _vec(text, name) -> tuple:
    vals = tuple(float(v) for v in text.split(","))
    if len(vals) != 3:
        raise UsageError(f"{name} needs three comma-separated numbers, got {text!r}")
    return vals


def _num_or_rmax(text):
    return "rmax" if text == "rmax" else float(text)


def parse_ensemble(text, seed: int = 0) -> EnsembleSpec:
    """Ensemble from a compact string or a JSON object.

    Forms: ``sphere18:R``, ``ball:R:N``, ``line:SPACING[:COUNT[:dx,dy,dz]]``,
    ``circle:R[:COUNT[:nx,ny,nz]]``, ``radial_line:SPEED[:COUNT[:dx,dy,dz]]``,
    ``radial_plane:SPEED[:COUNT[:nx,ny,nz]]``, ``radial_space:SPEED[:COUNT]`` and
    ``explicit:x,y,z,vx,vy,vz;...``.  ``R``, ``SPACING`` and ``SPEED`` accept
    ``rmax``.
    """
    if isinstance(text, dict):
        data = dict(text)
        data.setdefault("seed", seed)
        return EnsembleSpec.from_json(data)
    kind, _, rest = str(text).partition(":")
    bits = rest.split(":") if rest else []
    try:
        if kind == "sphere18":
            if len(bits) != 1:
                raise UsageError("sphere18 takes a radius: sphere18:R")
            return EnsembleSpec("sphere18", radius=_num_or_rmax(bits[0]), seed=seed)
        if kind == "ball":
            if len(bits) != 2:
                raise UsageError("ball takes radius and count: ball:R:N")
            return EnsembleSpec("random_ball", radius=_num_or_rmax(bits[0]), count=int(bits[1]), seed=seed)
        if kind == "explicit":
            states = []
            for chunk in rest.split(";"):
                vals = [float(v) for v in chunk.split(",")]
                if len(vals) != 6:
                    raise UsageError(f"explicit state needs 6 numbers, got {chunk!r}")
                states.append((tuple(vals[:3]), tuple(vals[3:])))
            return EnsembleSpec("explicit", count=len(states), states=tuple(states), seed=seed)
        if kind in ("line", "circle", "radial_line", "radial_plane", "radial_space"):
            if not 1 <= len(bits) <= 3 or (kind == "radial_space" and len(bits) > 2):
                raise UsageError(f"malformed {kind} ensemble {text!r}")
            value = _num_or_rmax(bits[0])
            count = int(bits[1]) if len(bits) > 1 else None
            extra = {}
            if len(bits) > 2:
                key = "direction" if kind in ("line", "radial_line") else "normal"
                extra[key] = _vec(bits[2], key)
            field = {"line": "spacing", "circle": "radius"}.get(kind, "speed")
            return EnsembleSpec(kind, count=count, seed=seed, **{field: value}, **extra)
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise UsageError(f"malformed ensemble {text!r}: {exc}") from exc
    raise UsageError(f"unknown ensemble kind {kind!r}")


def parse_seeds(text) -> list:
    if isinstance(text, (list, tuple)):
        return [tuple(float(v) for v in s) for s in text]
    return [_vec(chunk, "seed point") for chunk in str(text).split(";")]


# --- parser --------------------------------------------------------------------

def _add_config(p):
    p.add_argument("--config", action="append", metavar="LABEL",
                   help="label j,m,n[,R|I[,+|-]], amp*label or a preset name; repeat to superpose")
    p.add_argument("--config-file", help="JSON document of option values, or a run manifest")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="knotfield", description="Electromagnetic knot fields and charged-particle dynamics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("field-sample", help="sample E, B and energy density on a grid")
    _add_config(p)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--grid", default="-2:2:41", help="lo:hi:n or three comma-separated axis specs")
    p.add_argument("--out", default="fields.csv")
    p.add_argument("--manifest")

    p = sub.add_parser("rmax", help="locate the energy-density maximum")
    _add_config(p)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--half-width", type=float, default=3.0)
    p.add_argument("--grid-points", type=int, default=61)
    p.add_argument("--out", help="write the JSON result here as well as to stdout")
    p.add_argument("--manifest")

    p = sub.add_parser("trajectories", help="integrate a particle ensemble")
    _add_config(p)
    p.add_argument("--kappa", type=float)
    p.add_argument("--ensemble", default="sphere18:rmax")
    p.add_argument("--tspan", default="0:1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rtol", type=float, default=1e-9)
    p.add_argument("--atol", type=float, default=1e-12)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", default="trajectories.csv")
    p.add_argument("--manifest")

    p = sub.add_parser("field-lines", help="trace electric and magnetic field lines")
    _add_config(p)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--seeds", help="x,y,z;x,y,z;... (default: four fixed points)")
    p.add_argument("--kind", choices=("electric", "magnetic", "both"), default="both")
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--max-length", type=float, default=50.0)
    p.add_argument("--closure-tol", type=float, default=1e-2)
    p.add_argument("--out", default="field_lines.jsonl")
    p.add_argument("--manifest")

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--criteria", help="comma-separated criterion numbers (default: all)")
    p.add_argument("--out", default="verify_report.json")
    p.add_argument("--config-file")

    p = sub.add_parser("presets", help="list derived presets")
    p.add_argument("--config-file")
    return parser


def _explicit_flags(parser, sub, argv) -> dict:
    """Options actually present in ``argv`` (found by parsing with defaults suppressed)."""
    saved = [(a, a.default) for a in sub._actions]
    try:
        for action, _ in saved:
            action.default = argparse.SUPPRESS
        given = vars(parser.parse_args(argv))
    finally:
        for action, default in saved:
            action.default = default
    given.pop("command", None)
    return given


def _apply_config_file(parser, argv):
    """Re-parse with defaults from ``--config-file``; unknown keys are errors."""
    args = parser.parse_args(argv)
    if not getattr(args, "config_file", None):
        return args
    try:
        with open(args.config_file) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a JSON object")
    if "command" in doc and "args" in doc:
        if doc["command"] != args.command:
            raise UsageError(f"manifest is for {doc['command']!r}, not {args.command!r}")
        doc = doc["args"]
    allowed = set(vars(args)) - {"command", "config_file"}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise UsageError(f"unknown keys in config file: {', '.join(unknown)}")
    # Flags typed on the command line win over the file.
    sub = parser._subparsers._group_actions[0].choices[args.command]
    defaults = vars(sub.parse_args([]))
    merged = {**defaults, **doc, **_explicit_flags(parser, sub, argv)}
    merged["command"] = args.command
    merged["config_file"] = args.config_file
    return argparse.Namespace(**merged)


def _configuration(args):
    if not args.config:
        raise UsageError("--config is required")
    return parse_configuration(args.config)


def _manifest_args(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in PATH_ARGS and k != "command"}


def _write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(args, config, results: dict) -> None:
    path = args.manifest or f"{args.out}.manifest.json"
    _write_json({
        "command": args.command,
        "args": _manifest_args(args),
        "configuration": config.to_json(),
        "version": __version__,
        **results,
    }, path)


# --- commands ------------------------------------------------------------------

def cmd_field_sample(args) -> int:
    config = _configuration(args)
    grid = GridSpec.parse(args.grid)
    samples = field_on_grid(config, args.t, grid)
    write_grid_csv(samples, args.out)
    _write_manifest(args, config, {"rows": int(samples.events.shape[0])})
    return EXIT_OK


def cmd_rmax(args) -> int:
    config = _configuration(args)
    res = find_rmax(config, args.t, SearchParams(half_width=args.half_width, grid_points=args.grid_points))
    out = {"R_max": res.r_max, "E_max": res.e_max, "x_max": [float(v) for v in res.x_max], "t": args.t}
    print(json.dumps(out, sort_keys=True))
    if args.out:
        _write_json(out, args.out)
        _write_manifest(args, config, {"result": out})
    return EXIT_OK


def cmd_trajectories(args) -> int:
    config = _configuration(args)
    if args.kappa is None:
        raise UsageError("--kappa is required")
    t0, t1 = parse_tspan(args.tspan)
    spec = parse_ensemble(args.ensemble, args.seed)
    needs_rmax = "rmax" in (spec.radius, spec.spacing, spec.speed)
    rmax = find_rmax(config, 0.0).r_max if needs_rmax else None
    states = generate_ensemble(spec, rmax)
    params = SimulationParams(kappa=args.kappa, t_start=t0, t_end=t1, rel_tol=args.rtol, abs_tol=args.atol)
    records = run_ensemble(states, KnotField(config), params, args.workers)
    write_trajectories_csv(records, args.out)
    _write_manifest(args, config, {
        "ensemble": spec.to_json(),
        "rmax_hint": rmax,
        "n_particles": len(records),
        "summaries": [r.summary() for r in records],
    })
    return EXIT_OK


def cmd_field_lines(args) -> int:
    config = _configuration(args)
    fld = KnotField(config)
    seeds = parse_seeds(args.seeds) if args.seeds else list(DEFAULT_SEEDS)
    kinds = ("electric", "magnetic") if args.kind == "both" else (args.kind,)
    lines = [trace_line(fld, args.t, s, k, step=args.step, max_length=args.max_length,
                        closure_tol=args.closure_tol) for s in seeds for k in kinds]
    write_lines_jsonl(lines, args.out)
    _write_manifest(args, config, {"lines": [{"kind": l.kind, "seed": l.seed.tolist(), "closed": l.closed,
                                              "arc_length": l.arc_length} for l in lines]})
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verification import run_criteria

    wanted = None
    if args.criteria:
        wanted = [int(v) for v in str(args.criteria).split(",")]
    results = run_criteria(wanted)
    for r in results:
        print(r.line())
    _write_json({"criteria": [r.to_json() for r in results],
                 "all_gates_passed": all(r.passed for r in results)}, args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_presets(args) -> int:
    out = {}
    for name in sorted(PRESET_DERIVERS):
        try:
            out[name] = get_preset(name).to_json()
        except PresetMissing as exc:
            out[name] = {"error": str(exc)}
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "field-sample": cmd_field_sample,
    "rmax": cmd_rmax,
    "trajectories": cmd_trajectories,
    "field-lines": cmd_field_lines,
    "verify": cmd_verify,
    "presets": cmd_presets,
}


def _value_flags(parser) -> set:
    flags = set()
    for sub in parser._subparsers._group_actions[0].choices.values():
        for action in sub._actions:
            if action.option_strings and action.nargs is None and action.const is None:
                flags.update(action.option_strings)
    return flags


def _glue_values(argv, flags) -> list:
    """Turn ``--flag value`` into ``--flag=value`` so values like ``-2:2:41`` parse."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in flags and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config_file(parser, _glue_values(argv, _value_flags(parser)))
        return COMMANDS[args.command](args)
    except PresetMissing as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_PRESET
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (KnotFieldError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
