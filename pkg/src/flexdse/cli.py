"""Command-line interface: ``flexdse {flexion,mse,dse,report}``."""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .cost import OBJECTIVES, EnergyParams, load_energy
from .dse import MODES, Experiment, run_experiment
from .errors import FlexError, ValidationError
from .fixtures import default_cost_table, default_energy, resolve_accel, resolve_model
from .ga import GaConfig
from .mapspace import stats
from .overhead import load_cost_table, overhead
from .report import (flexion_rows, result_files, report, to_csv, to_json, write_files)
from .workload import read_json

COST_TABLE_ENV = "FLEXDSE_COST_TABLE"
_EXPERIMENT_KEYS = {"kind", "models", "accel", "objective", "seed", "mode", "ga", "axis", "sizes",
                    "n_pes", "classes", "design_model", "variants", "energy", "cost_table"}
_GA_KEYS = {"population", "generations", "mutation_rate", "crossover_rate", "elite_count"}


def _ga_config(obj) -> GaConfig:
    if obj is None:
        return GaConfig()
    if not isinstance(obj, dict) or set(obj) - _GA_KEYS:
        raise ValidationError(f"'ga' must be an object with keys from {sorted(_GA_KEYS)}")
    return GaConfig(**obj)


def load_experiment(path: str | Path, seed: int | None = None, objective: str | None = None,
                    cost_table=None) -> Experiment:
    path = Path(path)
    obj = read_json(path)
    if not isinstance(obj, dict):
        raise ValidationError("experiment document must be an object")
    unknown = set(obj) - _EXPERIMENT_KEYS
    if unknown:
        raise ValidationError(f"experiment: unknown fields {sorted(unknown)}")
    for key in ("kind", "models", "accel"):
        if key not in obj:
            raise ValidationError(f"experiment: missing {key!r}")
    base_dir = path.parent
    if not isinstance(obj["models"], list):
        raise ValidationError("experiment: 'models' must be a list")
    models = [resolve_model(ref, base_dir) for ref in obj["models"]]
    base = resolve_accel(obj["accel"], base_dir)
    design = resolve_model(obj["design_model"], base_dir) if "design_model" in obj else None
    energy = (EnergyParams.from_dict(read_json(_rel(obj["energy"], base_dir)))
              if "energy" in obj else default_energy())
    if cost_table is None:
        cost_table = (load_cost_table(_rel(obj["cost_table"], base_dir))
                      if "cost_table" in obj else default_cost_table())
    resolved = dict(obj)
    if seed is not None:
        resolved["seed"] = seed
    if objective is not None:
        resolved["objective"] = objective
    resolved.setdefault("seed", 0)
    resolved.setdefault("objective", "runtime")
    resolved.setdefault("mode", "auto")
    ga = _ga_config(obj.get("ga"))
    resolved["ga"] = {k: getattr(ga, k) for k in sorted(_GA_KEYS)}
    resolved["energy"] = energy.to_dict()
    return Experiment(
        kind=obj["kind"], models=models, base=base, objective=resolved["objective"],
        seed=int(resolved["seed"]), mode=resolved["mode"], ga=ga, axis=obj.get("axis"),
        sizes=list(obj.get("sizes", [])), n_pes=list(obj.get("n_pes", [])),
        classes=list(obj.get("classes", [])), design_model=design,
        variants=list(obj.get("variants", [])), energy=energy, cost_table=cost_table,
        config=resolved)


def _rel(ref: str, base_dir: Path) -> Path:
    p = Path(ref)
    return p if p.is_absolute() else base_dir / p


def _cost_table(args):
    path = args.cost_table or os.environ.get(COST_TABLE_ENV)
    return load_cost_table(path) if path else default_cost_table()


def _emit(args, files: dict[str, str], default: str) -> None:
    """Write files under ``--out`` or print the default one to stdout."""
    if args.out:
        write_files(Path(args.out), files)
    else:
        sys.stdout.write(files[default])


# ----------------------------------------------------------------- commands

def cmd_flexion(args) -> int:
    model = resolve_model(args.model)
    accel = resolve_accel(args.accel)
    sts = [stats(layer, accel) for layer in model.layers]
    header, rows = flexion_rows(model.name, sts)
    files = {
        "flexion.csv": to_csv("flexion", header, rows),
        "flexion.json": to_json({"model": model.name, "accelerator": accel.to_dict(),
                                 "layers": [s.to_dict() for s in sts]}),
    }
    if args.format != "both":
        files = {k: v for k, v in files.items() if k.endswith(args.format)}
    _emit(args, files, next(iter(files)))
    return 0


def cmd_mse(args) -> int:
    from .dse import Job, run_jobs

    model = resolve_model(args.model)
    accel = resolve_accel(args.accel)
    energy = load_energy(args.energy) if args.energy else default_energy()
    table = _cost_table(args)
    cfg = GaConfig(population=args.population, generations=args.generations, seed=args.seed,
                   objective=args.objective)
    adder = overhead(accel, table).energy_adders
    jobs = [Job(model.name, accel.name, i, layer, accel, args.objective, args.mode, cfg, args.seed,
                energy, adder) for i, layer in enumerate(model.layers)]
    records = run_jobs(jobs, args.jobs)
    totals = {"runtime": sum(r["runtime"] for r in records),
              "energy": sum(r["energy"] for r in records)}
    doc = {
        "version": 1,
        "config": {"model": model.name, "accelerator": accel.to_dict(), "objective": args.objective,
                   "seed": args.seed, "mode": args.mode, "population": args.population,
                   "generations": args.generations, "energy": energy.to_dict()},
        "layers": [{k: r[k] for k in ("layer", "mode", "feasible_size", "mapping", "cost", "flexion")}
                   for r in records],
        "totals": totals,
    }
    hist_rows = [[r["layer"], gen, best] for r in records for gen, best in enumerate(r["history"])]
    files = {"mse.json": to_json(doc),
             "history.csv": to_csv("history", ["layer", "generation", "best_objective"], hist_rows)}
    if args.format == "csv":
        files = {"history.csv": files["history.csv"]}
    elif args.format == "json":
        files = {"mse.json": files["mse.json"]}
    _emit(args, files, next(iter(files)))
    return 0


def cmd_dse(args) -> int:
    table = _cost_table(args) if (args.cost_table or os.environ.get(COST_TABLE_ENV)) else None
    exp = load_experiment(args.experiment, seed=args.seed, objective=args.objective, cost_table=table)
    result = run_experiment(exp, workers=args.jobs)
    files = result_files(result)
    if args.format == "json":
        files = {k: v for k, v in files.items() if k.endswith(".json")}
    elif args.format == "csv":
        files = {k: v for k, v in files.items() if k.endswith(".csv")}
    if not args.out:
        raise ValidationError("dse needs --out DIR")
    write_files(Path(args.out), files)
    return 0


def cmd_report(args) -> int:
    text = report(Path(args.result))
    if args.out:
        write_files(Path(args.out), {"report.csv": text})
    else:
        sys.stdout.write(text)
    return 0


# ----------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flexdse", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, formats=("csv", "json", "both")):
        sp.add_argument("--format", choices=formats, default="both")
        sp.add_argument("--out", help="output directory (default: print to stdout)")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        sp.add_argument("--cost-table", help=f"feature cost table (default: ${COST_TABLE_ENV} or shipped)")

    f = sub.add_parser("flexion", help="count map spaces and flexion per layer")
    f.add_argument("--model", required=True, help="model file or fixture name")
    f.add_argument("--accel", required=True, help="accelerator file or fixture name")
    common(f)
    f.set_defaults(func=cmd_flexion)

    m = sub.add_parser("mse", help="best mapping per layer")
    m.add_argument("--model", required=True)
    m.add_argument("--accel", required=True)
    m.add_argument("--objective", choices=OBJECTIVES, default="runtime")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--mode", choices=MODES, default="ga")
    m.add_argument("--population", type=int, default=100)
    m.add_argument("--generations", type=int, default=100)
    m.add_argument("--energy", help="energy parameter file")
    common(m)
    m.set_defaults(func=cmd_mse)

    d = sub.add_parser("dse", help="run an experiment file")
    d.add_argument("--experiment", required=True)
    d.add_argument("--objective", choices=OBJECTIVES)
    d.add_argument("--seed", type=int)
    common(d)
    d.set_defaults(func=cmd_dse)

    r = sub.add_parser("report", help="normalised tables from a dse result directory")
    r.add_argument("result", help="dse output directory")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"flexdse: error: {exc}", file=sys.stderr)
        return 1
    except FlexError as exc:
        print(f"flexdse: runtime error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError) as exc:
        print(f"flexdse: runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
