"""Command-line entry point: ``panelopt solve | bench | optimize | replay``."""
from __future__ import annotations

import argparse
import math
import shlex
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .batch_pipeline import PipelineConfig, Problem, Workload, bench_csv, bench_sweep, format_table, run_sequential
from .errors import ConfigError, PanelError
from .geometry import from_bspline, naca4, read_dat, write_dat
from .optimizer import GaConfig, evolve, generation_log_csv
from .panel_core import FlowCondition, solve, surface_quantities, write_cp_csv
from .svg import airfoil_svg
from .viscous import viscous_drag, write_bl_csv

MANIFEST = "manifest.txt"
PIPELINE_KEYS = {f.name for f in fields(PipelineConfig)}


# -- key = value files ---------------------------------------------------------


def parse_key_values(text: str) -> list[tuple[int, str, str]]:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("missing key", lineno)
        entries.append((lineno, key, value))
    return entries


def _convert(value: str, kind, lineno: int, key: str):
    try:
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r} as {kind.__name__}", lineno) from None
    return value


def _field_types(cls):
    # annotations are strings under postponed evaluation
    names = {"int": int, "float": float}
    return {f.name: names.get(f.type if isinstance(f.type, str) else f.type.__name__, str) for f in fields(cls)}


def load_ga_config(text: str) -> GaConfig:
    ga_types = _field_types(GaConfig)
    pipe_types = _field_types(PipelineConfig)
    ga, pipe = {}, {}
    for lineno, key, value in parse_key_values(text):
        if key in ga_types and key != "pipeline":
            ga[key] = _convert(value, ga_types[key], lineno, key)
        elif key in pipe_types:
            pipe[key] = _convert(value, pipe_types[key], lineno, key)
        else:
            raise ConfigError(f"unknown key {key!r}", lineno)
    try:
        return GaConfig(**ga, pipeline=PipelineConfig.from_env(**pipe))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def dump_ga_config(config: GaConfig) -> str:
    lines = [f"{name} = {getattr(config, name)}" for name in GaConfig.field_names()]
    lines += [f"{f.name} = {getattr(config.pipeline, f.name)}" for f in fields(PipelineConfig)]
    return "\n".join(lines) + "\n"


def write_manifest(out: Path, argv: list[str], resolved: dict):
    lines = [
        f"tool = panelopt {__version__}",
        f"argv = {shlex.join(argv)}",
        f"subcommand = {argv[0]}",
    ]
    lines += [f"{k} = {v}" for k, v in resolved.items()]
    (out / MANIFEST).write_text("\n".join(lines) + "\n")


# -- subcommands -----------------------------------------------------------------


def _fail(message: str, status: int = 1) -> int:
    print(f"panelopt: error: {message}", file=sys.stderr)
    return status


def cmd_solve(args, argv) -> int:
    if args.dat is not None:
        path = Path(args.dat)
        if not path.is_file():
            return _fail(f"input file not found: {path}", 2)
        airfoil = read_dat(path.read_text())
    else:
        airfoil = naca4(args.naca, args.n)
    flow = FlowCondition.degrees(args.alpha)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    sol = solve(airfoil, flow)
    sq = surface_quantities(sol, airfoil, flow)
    (out / "cp.csv").write_text(write_cp_csv(sol, airfoil, flow))
    (out / "airfoil.svg").write_text(airfoil_svg(airfoil))
    summary = ["name,alpha_deg,Re,n,cl,cd,cd_upper,cd_lower,separated_upper,separated_lower,x_sep_upper,x_sep_lower"]
    visc = viscous_drag(sol, airfoil, flow, args.re)
    (out / "bl_upper.csv").write_text(write_bl_csv(visc.upper, visc.bl_upper))
    (out / "bl_lower.csv").write_text(write_bl_csv(visc.lower, visc.bl_lower))
    d = visc.drag

    def opt(x):
        return "" if x is None else f"{x:.9g}"

    summary.append(
        f"{airfoil.name},{args.alpha:g},{args.re:g},{airfoil.n},{sq.cl:.9g},{d.cd:.9g},{d.cd_upper:.9g},"
        f"{d.cd_lower:.9g},{int(d.separated_upper)},{int(d.separated_lower)},{opt(d.x_sep_upper)},{opt(d.x_sep_lower)}"
    )
    (out / "summary.csv").write_text("\n".join(summary) + "\n")
    write_manifest(out, argv, {"airfoil": airfoil.name, "alpha_deg": args.alpha, "Re": args.re, "n": airfoil.n,
                               "seed": args.seed, "out": out})
    print(f"{airfoil.name}: alpha={args.alpha:g} deg  Cl={sq.cl:.5f}  Cd={d.cd:.5f}")
    return 0


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def bench_workload(m: int, n: int, seed: int) -> Workload:
    """``m`` random NACA 4-digit sections at small incidences."""
    rng = np.random.default_rng(seed)
    probs = []
    for _ in range(m):
        camber = int(rng.integers(0, 7))
        pos = int(rng.integers(2, 7)) if camber else 0
        thick = int(rng.integers(8, 19))
        alpha = float(rng.uniform(-3.0, 3.0))
        probs.append(Problem(naca4(f"{camber}{pos}{thick:02d}", n), FlowCondition.degrees(alpha), 1e6, n))
    return Workload(probs)


def cmd_bench(args, argv) -> int:
    try:
        slices = _int_list(args.slices)
        splits = _float_list(args.splits)
    except ValueError as exc:
        return _fail(f"invalid sweep list: {exc}", 2)
    if not slices or any(s < 1 for s in slices):
        return _fail("slice list must be non-empty positive integers", 2)
    if any(not 0.0 < f <= 1.0 for f in splits):
        return _fail("split fractions must lie in (0, 1]", 2)
    if args.m < max(slices):
        return _fail(f"m={args.m} is smaller than the largest slice count {max(slices)}", 2)
    overrides = {"transfer_bytes_per_sec": args.bandwidth, "queue_capacity": args.queue}
    for key in ("assembly_workers", "solver_workers", "secondary_workers"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    config = PipelineConfig.from_env(**overrides)
    config = replace(config, num_slices=args.split_slices or max(slices))

    workload = bench_workload(args.m, args.n, args.seed)
    rows = bench_sweep(workload, slices, splits, args.reps, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench.csv").write_text(bench_csv(rows))
    table = format_table(rows)
    (out / "bench.txt").write_text(table + "\n")
    write_manifest(out, argv, {"m": args.m, "n": args.n, "slices": args.slices, "splits": args.splits,
                               "reps": args.reps, "seed": args.seed, **{k: getattr(config, k) for k in PIPELINE_KEYS},
                               "out": out})
    print(table)
    results, _ = run_sequential(workload, config.assembly_workers)
    failed = [r.index for r in results if not r.ok]
    if failed:
        return _fail(f"{len(failed)} problems failed, first: {results[failed[0]].error}")
    return 0


def cmd_optimize(args, argv) -> int:
    path = Path(args.config)
    if not path.is_file():
        return _fail(f"config file not found: {path}", 2)
    try:
        config = load_ga_config(path.read_text())
        if args.seed is not None:
            config = replace(config, rng_seed=args.seed)
    except ConfigError as exc:
        return _fail(f"{path}: {exc}", 2)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    logs_done = []

    def on_generation(log):
        logs_done.append(log)
        tag = f"gen_{log.generation:03d}"
        airfoil = from_bspline(log.best.genome, config.panels_per_airfoil, name=f"{tag} best")
        (out / f"{tag}_best.dat").write_text(write_dat(airfoil))
        (out / f"{tag}_best.svg").write_text(airfoil_svg(airfoil))
        (out / "generations.csv").write_text(generation_log_csv(logs_done))
        print(f"generation {log.generation}: best={log.best_fitness:.4f} median={log.median_fitness:.4f} "
              f"penalized={log.penalized}")

    best, logs = evolve(config, progress=on_generation)
    timing = ["generation,W_s,A_s,L_s,O_s"]
    timing += [f"{g.generation},{g.timing.W:.6f},{g.timing.A:.6f},{g.timing.L:.6f},{g.timing.O:.6f}" for g in logs]
    (out / "timings.csv").write_text("\n".join(timing) + "\n")
    (out / "resolved_config.txt").write_text(dump_ga_config(config))
    write_manifest(out, argv, {"config": path, "seed": config.rng_seed, "out": out})
    print(f"best fitness {best.fitness:.4f} (Cl={best.cl:.4f}, Cd={best.cd:.5f})")
    return 0


def cmd_replay(args, argv) -> int:
    path = Path(args.manifest)
    if not path.is_file():
        return _fail(f"manifest not found: {path}", 2)
    try:
        entries = {k: v for _, k, v in parse_key_values(path.read_text())}
    except ConfigError as exc:
        return _fail(f"{path}: {exc}", 2)
    if "argv" not in entries:
        return _fail(f"{path}: no argv entry", 2)
    old = shlex.split(entries["argv"])
    if args.out is not None:
        old = _replace_out(old, args.out)
    return main(old)


def _replace_out(argv: list[str], out: str) -> list[str]:
    res, skip = [], False
    for i, tok in enumerate(argv):
        if skip:
            skip = False
            continue
        if tok == "--out":
            skip = True
            continue
        if tok.startswith("--out="):
            continue
        res.append(tok)
    return res + ["--out", out]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panelopt", description="Vortex panel airfoil analysis and optimization")
    parser.add_argument("--version", action="version", version=f"panelopt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="analyse one airfoil")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--naca", help="NACA 4-digit code, e.g. 2412")
    src.add_argument("--dat", help="Selig .dat file")
    p.add_argument("--alpha", type=float, default=0.0, help="angle of attack in degrees")
    p.add_argument("--re", type=float, default=1e6, help="chord Reynolds number")
    p.add_argument("--n", type=int, default=200, help="panel count for NACA sections")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="pipeline timing sweep")
    p.add_argument("--m", type=int, default=4000, help="number of airfoil problems")
    p.add_argument("--n", type=int, default=200, help="panels per airfoil")
    p.add_argument("--slices", default="1,5,10,20")
    p.add_argument("--splits", default="")
    p.add_argument("--split-slices", type=int, default=None, help="slices on the main path for split rows")
    p.add_argument("--assembly-workers", type=int, default=None)
    p.add_argument("--solver-workers", type=int, default=None)
    p.add_argument("--secondary-workers", type=int, default=None)
    p.add_argument("--bandwidth", type=float, default=0.0, help="modeled transfer bytes/s (0 = unlimited)")
    p.add_argument("--queue", type=int, default=2, help="bounded queue depth in slices")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="bench_out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("optimize", help="genetic airfoil optimization")
    p.add_argument("config", help="key = value configuration file")
    p.add_argument("--seed", type=int, default=None, help="overrides rng_seed from the config")
    p.add_argument("--out", default="ga_out")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, argv)
    except (PanelError, ValueError) as exc:
        return _fail(f"{type(exc).__name__}: {exc}")
    except OSError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
