"""Command-line harness.

Exit codes: 0 success; 1 usage, input, or runtime error; 2 the command
completed but the outcome was negative (no feasible schedule found, or
validation reported problems); 3 an exhaustive-search size guard refused
the request.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .gantt import write_svg
from .generate import GenerationError, GeneratorSettings, generate_instance
from .model import (
    Instance,
    InstanceError,
    bundled_instance_path,
    load_instance,
    save_instance,
)
from .oracle import OracleSizeError, genome_domains, lattice_size, oracle_search
from .simulate import Evaluator, trajectory_to_csv
from .solver import VARIANTS, RunReport, SolveSettings, aggregate, solve

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NEGATIVE = 2
EXIT_GUARD = 3


class CliError(Exception):
    """User-facing failure; the message is printed and exit code 1 returned."""


def _load(path: str | None) -> Instance:
    p = Path(path) if path else bundled_instance_path()
    if not p.exists():
        raise CliError(f"instance file not found: {p}")
    try:
        return load_instance(p)
    except InstanceError as exc:
        raise CliError(str(exc)) from exc


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise CliError(f"bad number list {text!r}") from exc


def _genome_from_file(path: str) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read genome file {path}: {exc}") from exc
    for key in ("best_genome", "genome"):
        if isinstance(doc, dict) and key in doc:
            return np.asarray(doc[key], dtype=float)
    if isinstance(doc, list):
        return np.asarray(doc, dtype=float)
    raise CliError(f"{path}: expected a genome list or a report with one")


def cmd_validate(args) -> int:
    try:
        inst = load_instance(args.instance)
    except InstanceError as exc:
        print("invalid instance:")
        for p in exc.problems:
            print(f"  - {p}")
        return EXIT_NEGATIVE
    except OSError as exc:
        raise CliError(str(exc)) from exc
    lay = inst.layout
    print(
        f"ok: {len(inst.vessels)} vessels, {len(inst.tanks)} tanks, "
        f"{len(inst.crude_types)} crudes, {len(inst.cdus)} CDUs, "
        f"{len(inst.residues)} residues, {inst.horizon_periods} periods, "
        f"genome dimension {lay.dimension}"
    )
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    reports: list[RunReport] = []
    for k in range(args.runs):
        seed = args.seed + k
        settings = SolveSettings(
            variant=args.variant, seed=seed,
            global_evals=args.global_evals, local_evals=args.local_evals,
            swarm_size=args.swarm, pop_size=args.pop,
        )
        t0 = time.perf_counter()
        report = solve(inst, settings)
        wall = time.perf_counter() - t0
        reports.append(report)
        print(
            f"run seed={seed}: cvn={report.cvn} cv={report.cv:.6g} "
            f"objective={report.objective:.6g} "
            f"feasible={'yes' if report.feasible else 'no'} "
            f"evals={report.evals_global + report.evals_local} "
            f"wall={wall:.2f}s"
        )
        if out_dir:
            (out_dir / f"run-{seed}.json").write_text(
                report.to_json(), encoding="utf-8"
            )
    stats = aggregate(reports)
    if args.runs > 1:
        print(
            f"aggregate: {stats.feasible_runs}/{stats.runs} feasible"
            + (
                f", objective mean={stats.objective_mean:.6g} "
                f"std={stats.objective_std:.6g} min={stats.objective_min:.6g} "
                f"max={stats.objective_max:.6g}"
                if stats.feasible_runs
                else ""
            )
        )
    if out_dir:
        (out_dir / "aggregate.json").write_text(
            json.dumps(stats.to_doc(), indent=2) + "\n", encoding="utf-8"
        )
    return EXIT_OK if stats.feasible_runs else EXIT_NEGATIVE


def cmd_bench(args) -> int:
    from .engine import load_pure_kernel

    sim = sys.modules["crudesched.simulate"]
    inst = _load(args.instance)
    rng = np.random.default_rng(args.seed)
    from .model import genome_bounds

    lo, hi = genome_bounds(inst)
    genomes = [rng.uniform(lo, hi) for _ in range(min(args.evals, 256))]

    def timed(label: str) -> float:
        ev = Evaluator(inst)
        t0 = time.perf_counter()
        for i in range(args.evals):
            ev.evaluate(genomes[i % len(genomes)])
        dt = time.perf_counter() - t0
        rate = args.evals / dt if dt > 0 else float("inf")
        print(f"{label}: {args.evals} evaluations in {dt:.3f}s "
              f"({rate:,.0f}/s)")
        return dt

    saved = sim.core
    from .engine import KERNEL_COMPILED

    if KERNEL_COMPILED:
        timed("compiled kernel")
        sim.core = load_pure_kernel()
        try:
            timed("interpreted kernel")
        finally:
            sim.core = saved
    else:
        timed("interpreted kernel")
        print("compiled kernel: not built in this environment")
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        settings = GeneratorSettings(
            n_cdus=args.cdus, tanks_per_cdu=args.tanks_per_cdu,
            n_vessels=args.vessels, horizon=args.periods,
            n_residues=args.residues, crudes_per_residue=args.crudes_per_residue,
            berth_count=args.berths,
        )
        inst, witness = generate_instance(settings, args.seed)
    except (ValueError, GenerationError) as exc:
        raise CliError(str(exc)) from exc
    save_instance(inst, args.out)
    print(f"wrote {args.out}: genome dimension {inst.layout.dimension}")
    if args.witness:
        with open(args.witness, "w", encoding="utf-8") as fh:
            json.dump(witness, fh, indent=2)
            fh.write("\n")
        print(f"wrote witness {args.witness} "
              f"(objective {witness['fitness']['objective']:g})")
    return EXIT_OK


def cmd_oracle(args) -> int:
    inst = _load(args.instance)
    domains = genome_domains(
        inst,
        receive_flows=_floats(args.receive_flows),
        charge_flows=_floats(args.charge_flows),
    )
    size = lattice_size(domains)
    print(f"lattice size: {size}")
    try:
        best_g, best_f, count = oracle_search(inst, domains, guard=args.guard)
    except OracleSizeError as exc:
        print(f"refused: {exc}")
        return EXIT_GUARD
    print(
        f"searched {count} schedules: best cvn={best_f.cvn} "
        f"cv={best_f.cv:.6g} objective={best_f.objective:.6g}"
    )
    if args.out:
        doc = {
            "cvn": best_f.cvn, "cv": best_f.cv, "objective": best_f.objective,
            "feasible": best_f.feasible, "searched": count,
            "genome": [float(x) for x in best_g],
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        print(f"wrote {args.out}")
    return EXIT_OK if best_f.feasible else EXIT_NEGATIVE


def cmd_export_gantt(args) -> int:
    inst = _load(args.instance)
    genome = _genome_from_file(args.genome)
    ev = Evaluator(inst)
    try:
        traj = ev.simulate(genome)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    write_svg(traj, args.out)
    print(f"wrote {args.out}")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            trajectory_to_csv(traj, fh)
        print(f"wrote {args.csv}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="crudesched",
        description="Crude-oil scheduling: dual-stage evolutionary solver "
        "and tooling",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add_instance(p):
        p.add_argument("--instance", help="instance file "
                       "(default: the bundled refinery case)")

    p = sub.add_parser("solve", help="run the solver")
    add_instance(p)
    p.add_argument("--variant", choices=VARIANTS, default="dsea-hr")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--global-evals", type=int, default=100_000)
    p.add_argument("--local-evals", type=int, default=30_000)
    p.add_argument("--swarm", type=int, default=100)
    p.add_argument("--pop", type=int, default=60)
    p.add_argument("--out-dir", help="write per-run and aggregate JSON here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="time the simulation kernels")
    add_instance(p)
    p.add_argument("--evals", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("generate", help="generate a feasible random instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--witness", help="also write the planted schedule here")
    p.add_argument("--cdus", type=int, default=1)
    p.add_argument("--tanks-per-cdu", type=int, default=3)
    p.add_argument("--vessels", type=int, default=1)
    p.add_argument("--periods", type=int, default=6)
    p.add_argument("--residues", type=int, default=2)
    p.add_argument("--crudes-per-residue", type=int, default=2)
    p.add_argument("--berths", type=int, default=1)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("oracle", help="exhaustive search over a value lattice")
    add_instance(p)
    p.add_argument("--receive-flows", default="0",
                   help="comma-separated receiving-flow levels")
    p.add_argument("--charge-flows", default="0",
                   help="comma-separated charging-flow levels")
    p.add_argument("--guard", type=int, default=10_000_000,
                   help="refuse lattices larger than this")
    p.add_argument("--out", help="write the best schedule as JSON")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("validate", help="check an instance file")
    p.add_argument("instance")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export-gantt", help="render a schedule chart as SVG")
    add_instance(p)
    p.add_argument("--genome", required=True,
                   help="JSON file holding a genome or a solver report")
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also dump the trajectory as CSV")
    p.set_defaults(func=cmd_export_gantt)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; fold into the error code
        return EXIT_ERROR if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
