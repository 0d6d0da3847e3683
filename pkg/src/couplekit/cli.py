"""couplekit command line: sample, train, analyze couplings, plan and compare strategies.

Usage:
    couplekit bench-fowt --out demo
    couplekit sample demo/space.json --n 750 --seed 0 --out demo/inputs.csv
    couplekit train demo/space.json demo/data.csv --channels m_ptfm,max_theta_ptfm,max_a_nac --out demo/models
    couplekit dca demo/problem.json --ns 11 --out demo/dca
    couplekit plan demo/dca/report.json --out demo/plan.json
    couplekit subset demo/dca/report.json --k 2 --mode coupling_aware --out demo/subset.json
    couplekit compare demo/problem.json --plans demo/plan.json --subsets demo/subset.json --random 16 --out demo/compare.csv

Exit status is 0 on success, 2 on invalid input, 1 on any other failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from dataclasses import asdict
from pathlib import Path

from couplekit import __version__
from couplekit.common import fmt_float, write_csv
from couplekit.errors import ValidationError
from couplekit.manifest import RunManifest, manifest_path_for


def _names(raw: str | None) -> list[str] | None:
    if raw is None:
        return None
    names = [n.strip() for n in raw.split(",") if n.strip()]
    if not names:
        raise ValidationError("empty name list")
    return names


def _files(groups: list[list[str]] | None) -> list[Path]:
    return [Path(p) for group in (groups or []) for p in group]


def _load_problem(path: Path, manifest: RunManifest):
    """Problem JSON with trained model files, or {"benchmark": name, "params": {...}}."""
    from couplekit.bench.analytic import benchmark
    from couplekit.optimizer.problem import ProblemDefinition

    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ValidationError(f"problem file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from exc
    manifest.add_input("problem", path)
    if "benchmark" in raw:
        return benchmark(str(raw["benchmark"]), **dict(raw.get("params") or {})).problem()
    problem = ProblemDefinition.load(path)
    for name, rel in raw.get("model_files", {}).items():
        manifest.add_input(f"model:{name}", Path(path).parent / rel)
    return problem


def _channel_config(problem) -> dict:
    return {name: ch.to_dict() for name, ch in problem.channels.items()}


def _out_beside(out: Path | None, source: Path, suffix: str) -> Path:
    """--out when given, else <source stem>.<suffix>.json next to the source file."""
    if out is not None:
        return Path(out)
    source = Path(source)
    return source.with_name(f"{source.stem}.{suffix}.json")


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_sample(args, manifest: RunManifest) -> int:
    from couplekit.core.sampling import latin_hypercube
    from couplekit.core.space import DesignSpace

    space = DesignSpace.load(args.space)
    manifest.add_input("space", args.space)
    manifest.seeds["sample"] = args.seed
    manifest.config = {"n": args.n}
    with manifest.phase("sample"):
        x = latin_hypercube(space, args.n, args.seed)
    write_csv(args.out, list(space.names), ([fmt_float(v) for v in row] for row in x))
    manifest.add_output(args.out)
    manifest.write(manifest_path_for(args.out))
    print(f"Sample: wrote {args.n:,} x {space.dim} design to {args.out}")
    return 0


def cmd_train(args, manifest: RunManifest) -> int:
    from couplekit.core.dataset import read_dataset, standardize_channel
    from couplekit.core.space import DesignSpace
    from couplekit.sgp.diagnostics import exact_gp_check
    from couplekit.sgp.fitc import FitConfig
    from couplekit.sgp.train import train_channels

    space = DesignSpace.load(args.space)
    manifest.add_input("space", args.space)
    config = FitConfig(n_restarts=args.restarts)
    manifest.seeds["train"] = args.seed
    manifest.config = {"m": args.m, "fit": asdict(config)}
    with manifest.phase("load"):
        ds = read_dataset(args.data, space, verbose=True)
    manifest.add_input("data", args.data)
    channels = _names(args.channels) or list(ds.output_names)
    with manifest.phase("train"):
        models = train_channels(ds, space, channels, m=args.m, seed=args.seed, config=config, verbose=True)

    out = Path(args.out)
    x = space.normalize(ds.aligned_inputs(space))
    report = {"label": args.label, "rows": ds.n_rows, "rejected": ds.rejected, "channels": {}}
    for name, model in models.items():
        path = out / f"{name}.json"
        model.save(path)
        manifest.add_output(path)
        y, _ = standardize_channel(ds, name)
        report["channels"][name] = {
            "file": path.name,
            "summary": model.summary.to_dict(),
            "kernel": model.params.to_dict(),
            "exact_gp_check": exact_gp_check(model, x, y),
        }
    _write_json(out / "training_report.json", report)
    manifest.add_output(out / "training_report.json")
    manifest.write(manifest_path_for(out, is_dir=True))
    print(f"SGP: wrote {len(models)} model(s) to {out}")
    return 0


def cmd_validate(args, manifest: RunManifest) -> int:
    from couplekit.core.dataset import read_dataset
    from couplekit.core.space import DesignSpace
    from couplekit.sgp.diagnostics import validate_channels
    from couplekit.sgp.fitc import FitConfig

    space = DesignSpace.load(args.space)
    manifest.add_input("space", args.space)
    config = FitConfig(n_restarts=args.restarts)
    manifest.seeds["validate"] = args.seed
    manifest.config = {"m": args.m, "holdout": args.holdout, "fit": asdict(config)}
    ds = read_dataset(args.data, space, verbose=True)
    manifest.add_input("data", args.data)
    channels = _names(args.channels) or list(ds.output_names)
    with manifest.phase("validate"):
        scores = validate_channels(
            ds, space, channels, holdout=args.holdout, m=args.m, seed=args.seed, config=config, verbose=True
        )
    out = _out_beside(args.out, args.data, "validation")
    _write_json(out, {"channels": [s.to_dict() for s in scores]})
    manifest.add_output(out)
    manifest.write(manifest_path_for(out))
    return 0


def cmd_dca(args, manifest: RunManifest) -> int:
    from couplekit.dca.heatmap import write_heatmap
    from couplekit.dca.sweep import SweepConfig, coupling_matrices

    problem = _load_problem(args.problem, manifest)
    config = SweepConfig(
        n_sweep=args.ns,
        norm=args.norm,
        scheme=args.scheme,
        infeasible=args.infeasible,
        n_starts=args.starts,
        seed=args.seed,
    )
    manifest.seeds["dca"] = args.seed
    manifest.config = {**config.to_dict(), "channels": _channel_config(problem)}
    with manifest.phase("sweeps"):
        report = coupling_matrices(problem, config, verbose=True)

    out = Path(args.out)
    report.save(out / "report.json")
    report.write_matrix_csv(out / "jx.csv", "jx")
    report.write_matrix_csv(out / "jpsi.csv", "jpsi")
    title = f" ({problem.label})" if problem.label else ""
    write_heatmap(out / "jx.svg", report.jx, report.mask, report.names, f"Design coupling J_x{title}")
    write_heatmap(out / "jpsi.svg", report.jpsi, report.mask, report.names, f"Objective sensitivity J_psi{title}")
    for name in ("report.json", "jx.csv", "jpsi.csv", "jx.svg", "jpsi.svg"):
        manifest.add_output(out / name)
    manifest.write(manifest_path_for(out, is_dir=True))
    print(f"DCA: wrote report, matrices and heatmaps to {out}")
    return 0


def cmd_plan(args, manifest: RunManifest) -> int:
    from couplekit.dca.report import CouplingReport
    from couplekit.strategy.sequence import PlanConfig, build_sequence

    report = CouplingReport.load(args.report)
    manifest.add_input("report", args.report)
    config = PlanConfig(args.tau_group, args.tau_influence)
    manifest.config = asdict(config)
    plan = build_sequence(report, config=config)
    plan.save(args.out)
    manifest.add_output(args.out)
    manifest.write(manifest_path_for(args.out))
    print(f"Plan: {plan.describe()}")
    return 0


def cmd_subset(args, manifest: RunManifest) -> int:
    from couplekit.dca.report import CouplingReport
    from couplekit.strategy.subset import select_subset

    report = CouplingReport.load(args.report)
    manifest.add_input("report", args.report)
    manifest.config = {"k": args.k, "mode": args.mode, "score": args.score}
    selection = select_subset(report, args.k, args.mode, args.score)
    selection.save(args.out)
    manifest.add_output(args.out)
    manifest.write(manifest_path_for(args.out))
    print(f"Subset: {selection.describe()}")
    return 0


def cmd_run_sequence(args, manifest: RunManifest) -> int:
    from couplekit.strategy.sequence import SequencePlan, run_sequence

    problem = _load_problem(args.problem, manifest)
    plan = SequencePlan.load(args.plan, problem.space.names)
    manifest.add_input("plan", args.plan)
    manifest.seeds["sequence"] = args.seed
    manifest.config = {"n_starts": args.starts}
    with manifest.phase("sequence"):
        result = run_sequence(problem, plan, args.seed, args.starts, verbose=True)
    print(f"Sequence: final objective {result.final.objective!r} ({result.final.status})")
    out = _out_beside(args.out, args.plan, "result")
    _write_json(out, result.to_dict(plan))
    manifest.add_output(out)
    manifest.write(manifest_path_for(out))
    return 0


def cmd_optimize(args, manifest: RunManifest) -> int:
    from couplekit.optimizer.auglag import OptimizationSpec, minimize_multistart

    problem = _load_problem(args.problem, manifest)
    free = _names(args.free) or list(problem.space.names)
    manifest.seeds["optimize"] = args.seed
    manifest.config = {"free": free, "n_starts": args.starts, "channels": _channel_config(problem)}
    with manifest.phase("optimize"):
        spec = OptimizationSpec.build(problem, free)
        result = minimize_multistart(spec, args.starts, args.seed)
    print(f"Optimize: objective {result.objective!r} ({result.status})")
    for name, value in zip(result.names, result.x):
        print(f"  {name} = {value!r}")
    out = _out_beside(args.out, args.problem, "optimum")
    result.save(out)
    manifest.add_output(out)
    manifest.write(manifest_path_for(out))
    return 0


def cmd_compare(args, manifest: RunManifest) -> int:
    from couplekit.strategy.compare import CompareConfig, compare_strategies
    from couplekit.strategy.sequence import SequencePlan
    from couplekit.strategy.subset import SubsetSelection

    problem = _load_problem(args.problem, manifest)
    plans, subsets = [], []
    for i, path in enumerate(_files(args.plans), start=1):
        plans.append(SequencePlan.load(path, problem.space.names))
        manifest.add_input(f"plan:{i}", path)
    for i, path in enumerate(_files(args.subsets), start=1):
        subsets.append(SubsetSelection.load(path))
        manifest.add_input(f"subset:{i}", path)
    config = CompareConfig(n_random_sequences=args.random, n_starts=args.starts, seed=args.seed)
    manifest.seeds["compare"] = args.seed
    manifest.config = {**asdict(config), "channels": _channel_config(problem)}
    with manifest.phase("compare"):
        table = compare_strategies(problem, plans, subsets, config=config, verbose=True)
    table.save_csv(args.out)
    manifest.add_output(args.out)
    manifest.write(manifest_path_for(args.out))
    best = min((r for r in table.rows if r.feasible), key=lambda r: r.objective, default=None)
    print(f"Compare: {len(table.rows)} rows written to {args.out}")
    if best is not None:
        print(f"Compare: best {best.strategy} objective={best.objective!r}")
    return 0


def cmd_bench_fowt(args, manifest: RunManifest) -> int:
    from couplekit.bench.fowt import synthetic_fowt, write_case

    manifest.seeds["sample"] = args.seed
    manifest.config = {"n": args.n, "label": "synthetic"}
    with manifest.phase("generate"):
        case = synthetic_fowt(args.seed, args.n)
        paths = write_case(case, args.out)
    for path in paths.values():
        manifest.add_output(path)
    manifest.write(manifest_path_for(Path(args.out), is_dir=True))
    print(f"Dataset: wrote synthetic case ({case.dataset.n_rows:,} rows) to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="couplekit", description="Surrogate-based design coupling analysis")
    ap.add_argument("--version", action="version", version=f"couplekit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="Latin hypercube design over a design space")
    p.add_argument("space", type=Path)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_sample)

    for name, func, help_text in (
        ("train", cmd_train, "Fit one sparse GP per output channel"),
        ("validate", cmd_validate, "Hold-out accuracy of the channel surrogates"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("space", type=Path)
        p.add_argument("data", type=Path)
        p.add_argument("--channels", help="comma-separated output columns (default: all)")
        p.add_argument("--m", type=int, default=None, help="inducing points per channel")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--restarts", type=int, default=5)
        if name == "train":
            p.add_argument("--label", default="")
            p.add_argument("--out", type=Path, required=True)
        else:
            p.add_argument("--holdout", type=float, default=0.2)
            p.add_argument("--out", type=Path, default=None, help="default: <data>.validation.json")
        p.set_defaults(func=func)

    p = sub.add_parser("dca", help="Design coupling and objective sensitivity matrices")
    p.add_argument("problem", type=Path)
    p.add_argument("--ns", type=int, default=11, help="sweep points per cell (>= 3)")
    p.add_argument("--norm", choices=("rms", "l2", "max"), default="rms")
    p.add_argument("--scheme", choices=("central", "forward"), default="central")
    p.add_argument("--infeasible", choices=("exclude", "fail"), default="exclude")
    p.add_argument("--starts", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_dca)

    p = sub.add_parser("plan", help="Sequential decomposition from a coupling report")
    p.add_argument("report", type=Path)
    p.add_argument("--tau-group", type=float, default=0.5)
    p.add_argument("--tau-influence", type=float, default=0.25)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("subset", help="Influential variable subset from a coupling report")
    p.add_argument("report", type=Path)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mode", choices=("sensitivity_only", "coupling_aware"), default="coupling_aware")
    p.add_argument("--score", choices=("max", "mean"), default="max")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_subset)

    p = sub.add_parser("run-sequence", help="Execute a sequence plan stage by stage")
    p.add_argument("problem", type=Path)
    p.add_argument("plan", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=10)
    p.add_argument("--out", type=Path, default=None, help="default: <plan>.result.json")
    p.set_defaults(func=cmd_run_sequence)

    p = sub.add_parser("optimize", help="Multistart constrained optimization over chosen variables")
    p.add_argument("problem", type=Path)
    p.add_argument("--free", help="comma-separated variables to optimize (default: all)")
    p.add_argument("--starts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None, help="default: <problem>.optimum.json")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("compare", help="Compare simultaneous, sequential, subset and random strategies")
    p.add_argument("problem", type=Path)
    p.add_argument("--plans", nargs="+", action="append", metavar="PLAN")
    p.add_argument("--subsets", nargs="+", action="append", metavar="SUBSET")
    p.add_argument("--random", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=10)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench-fowt", help="Write the synthetic floating-platform case files")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=750)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_bench_fowt)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    manifest = RunManifest(command=args.command, argv=argv)
    try:
        return args.func(args, manifest)
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
