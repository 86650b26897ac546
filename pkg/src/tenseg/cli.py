"""Command-line entry point: ``tenseg <subcommand> ...``.

Subcommands: gen, solve, modal, dataset, train, eval, reproduce.
Every subcommand accepts ``--seed``, ``--out-dir``, ``--config`` and
``--threads`` (falls back to ``$TENSEG_THREADS``).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .dataset import BENCHMARK_RANGES, Dataset, SamplingSpec, generate, split
from .modal import modal_analysis
from .numerics import derive_seed
from .statics import NonConvergenceError, SolverConfig, form_find
from .surrogate import DEFAULT_HIDDEN, MlpModel, TrainConfig, evaluate, run_trials, train
from .topology import GENERATORS, PRISM_TWIST, Structure

log = logging.getLogger("tenseg")

DEFAULT_SIZES = (1000, 2000, 3000, 4000, 5000)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(" ", "").split(",") if v]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.replace(" ", "").split(",") if v]


def _fmt(v) -> str:
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def write_csv(path: Path, header: list[str], rows: list[dict]) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r[h]) for h in header])
    return path


def load_structure(ref: str, args=None) -> Structure:
    """A structure file path, or a benchmark id (generated with defaults)."""
    if ref in GENERATORS:
        return GENERATORS[ref]()
    path = Path(ref)
    if not path.exists():
        raise SystemExit(f"error: structure {ref!r} is neither a benchmark id nor an existing file")
    return Structure.load(path)


def solver_config(args) -> SolverConfig:
    return SolverConfig(tolerance=args.tol, shift=args.mu, max_iterations=args.max_iter)


def threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    return int(os.environ.get("TENSEG_THREADS", "1") or 1)


def out_dir(args) -> Path:
    p = Path(args.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def provenance(args) -> dict:
    skip = {"func", "config"}
    return {
        "tenseg_version": __version__,
        "command": args.command,
        "args": {k: v for k, v in vars(args).items() if k not in skip},
    }


# -- subcommands -----------------------------------------------------------

def cmd_gen(args) -> int:
    params = {}
    if args.structure == "dbar":
        params["bar_length"] = args.bar_length if args.bar_length is not None else math.sqrt(2.0)
    elif args.structure == "prism":
        params.update(radius=args.radius, height=args.height, twist=args.twist)
    else:
        params.update(bar_length=args.bar_length if args.bar_length is not None else 1.0,
                      separation_ratio=args.separation_ratio)
    s = GENERATORS[args.structure](**params)
    path = Path(args.output) if args.output else out_dir(args) / f"{args.structure}.json"
    d = s.to_dict()
    d["provenance"] = {**provenance(args), "params": params}
    path.write_text(json.dumps(d, indent=2))
    print(f"{s.name}: {s.n_nodes} nodes, {s.n_bars} bars, {s.n_strings} strings -> {path}")
    return 0


def _solve(args):
    s = load_structure(args.structure)
    dl = _floats(args.dl) if args.dl else [0.0] * len(s.actuated)
    state = form_find(s, dl, cfg=solver_config(args))
    modes = modal_analysis(s, state)
    return s, dl, state, modes


def cmd_solve(args) -> int:
    try:
        s, dl, state, modes = _solve(args)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = {
        "structure": s.name,
        "dl0": dl,
        "equilibrium": state.to_dict(),
        "modal": modes.to_dict(mode_shapes=False),
        "provenance": provenance(args),
    }
    path = Path(args.output) if args.output else out_dir(args) / f"{s.name}_state.json"
    path.write_text(json.dumps(out, indent=2))
    t = state.member_forces
    first = modes.frequencies[0] if modes.frequencies.size else float("nan")
    print(f"residual {state.residual_norm:.3e} N after {state.iterations} iterations")
    print(f"member forces {t.min():.6g} .. {t.max():.6g} N")
    print(f"zero modes {modes.zero_mode_count}, non-zero frequencies {modes.frequencies.size}, "
          f"first {first:.6g} rad/s ({first / (2 * math.pi):.6g} Hz)")
    print(f"-> {path}")
    return 0


def cmd_modal(args) -> int:
    try:
        s, dl, state, modes = _solve(args)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = {"structure": s.name, "dl0": dl, **modes.to_dict(mode_shapes=args.mode_shapes),
           "provenance": provenance(args)}
    path = Path(args.output) if args.output else out_dir(args) / f"{s.name}_modal.json"
    path.write_text(json.dumps(out, indent=2))
    print(f"zero modes {modes.zero_mode_count}, unstable {modes.unstable_mode_count}")
    print("frequencies [rad/s]: " + " ".join(f"{w:.6g}" for w in modes.frequencies))
    print(f"-> {path}")
    return 0


def cmd_dataset(args) -> int:
    s = load_structure(args.structure)
    ranges = BENCHMARK_RANGES.get(s.name) if args.range is None else None
    if ranges is None:
        lo, hi = (_floats(args.range) if args.range else (-0.1, 0.0))
        ranges = [(lo, hi)] * len(s.actuated)
    spec = SamplingSpec(tuple(tuple(r) for r in ranges), args.n, args.seed)
    t0 = time.perf_counter()
    d = generate(s, spec, solver_config(args), workers=threads(args))
    d.meta["provenance"] = provenance(args)
    path = Path(args.output) if args.output else out_dir(args) / "data.csv"
    d.save(path)
    print(f"{len(d)} samples x ({d.inputs.shape[1]} inputs + {d.outputs.shape[1]} outputs) "
          f"in {time.perf_counter() - t0:.1f}s -> {path}")
    return 0


def _train_cfg(args, seed: int) -> TrainConfig:
    return TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size, seed=seed)


def cmd_train(args) -> int:
    data = Dataset.load(args.data)
    cfg = _train_cfg(args, args.seed)
    tr, te = split(data, args.train_fraction, cfg.seed)
    model = train(tr, _ints(args.hidden), cfg)
    model.config.update(hidden=_ints(args.hidden), train_fraction=args.train_fraction,
                        data=str(args.data), provenance=provenance(args))
    rep = evaluate(model, te)
    path = Path(args.output) if args.output else out_dir(args) / "model.json"
    model.save(path)
    print(f"final training loss {model.history[-1]:.4e}; held-out MSE {rep.mse_total:.4e} -> {path}")
    return 0


def cmd_eval(args) -> int:
    data = Dataset.load(args.data)
    model = MlpModel.load(args.model)
    mc = model.config
    frac = mc.get("train_fraction", 0.8)
    if args.trials == 1:
        _, te = split(data, frac, model.seed)
        rep = evaluate(model, te)
    else:
        cfg = TrainConfig(**{k: mc[k] for k in asdict(TrainConfig()) if k in mc})
        hidden = mc.get("hidden", model.dims[1:-1])
        rep = run_trials(data, cfg, args.trials, hidden, frac, workers=threads(args))
    out = {**rep.to_dict(), "provenance": provenance(args)}
    path = Path(args.output) if args.output else out_dir(args) / "report.json"
    path.write_text(json.dumps(out, indent=2))
    print(f"trials {rep.trials}: total {rep.mse_total:.4e} | coords {rep.mse_coords:.4e} | "
          f"forces {rep.mse_forces:.4e} | freqs {rep.mse_freqs:.4e} -> {path}")
    return 0


def reproduce(
    experiment: str,
    out: Path,
    seed: int = 0,
    sizes=DEFAULT_SIZES,
    trials: int = 20,
    train_cfg: TrainConfig | None = None,
    hidden=DEFAULT_HIDDEN,
    solver: SolverConfig | None = None,
    workers: int = 1,
    figures: bool = True,
) -> dict:
    """Dataset-size sweep for one benchmark; writes CSV tables, figures and a JSON report."""
    if experiment not in GENERATORS:
        raise ValueError(f"unknown experiment {experiment!r}")
    sizes = sorted(int(n) for n in sizes)
    if not sizes or sizes[0] < 1:
        raise ValueError("sizes must be positive")
    out.mkdir(parents=True, exist_ok=True)
    s = GENERATORS[experiment]()
    data_seed = derive_seed(seed, "dataset")
    trial_seed = derive_seed(seed, "trials")
    train_cfg = TrainConfig(**{**asdict(train_cfg or TrainConfig()), "seed": trial_seed})

    t0 = time.perf_counter()
    full = generate(s, SamplingSpec.benchmark(experiment, sizes[-1], data_seed), solver, workers)
    log.info("%s: generated %d samples in %.1fs", experiment, len(full), time.perf_counter() - t0)
    full.meta["master_seed"] = seed
    full.save(out / "data.csv")

    mse_rows, time_rows, reports = [], [], {}
    for n in sizes:
        rep = run_trials(full.head(n), train_cfg, trials, hidden, 0.8, workers)
        reports[n] = rep.to_dict()
        mse_rows.append({"size": n, "mse_coords": rep.mse_coords, "mse_forces": rep.mse_forces,
                         "mse_freqs": rep.mse_freqs, "mse_total": rep.mse_total})
        time_rows.append({"size": n, "train_s": rep.train_s, "test_s": rep.test_s})
        log.info("%s n=%d: total %.3e coords %.3e forces %.3e freqs %.3e", experiment, n,
                 rep.mse_total, rep.mse_coords, rep.mse_forces, rep.mse_freqs)

    write_csv(out / "mse_vs_samples.csv", ["size", "mse_coords", "mse_forces", "mse_freqs"], mse_rows)
    write_csv(out / "runtime.csv", ["size", "train_s", "test_s"], time_rows)
    config = {
        "experiment": experiment,
        "master_seed": seed,
        "dataset_seed": data_seed,
        "trial_seed_base": trial_seed,
        "sizes": sizes,
        "trials": trials,
        "hidden": list(hidden),
        "train": asdict(train_cfg),
        "solver": asdict(solver or SolverConfig()),
        "ranges": [list(r) for r in BENCHMARK_RANGES[experiment]],
        "structure_fingerprint": s.fingerprint(),
    }
    (out / "config.json").write_text(json.dumps(config, indent=2))
    (out / "report.json").write_text(json.dumps(
        {"config": config, "mse": mse_rows, "runtime": time_rows,
         "reports": {str(k): v for k, v in reports.items()}}, indent=2))
    if figures:
        from .plotting import plot_mse_vs_samples, plot_runtime

        plot_mse_vs_samples(mse_rows, out / "mse_vs_samples.png", f"{experiment}: prediction errors")
        plot_runtime(time_rows, out / "runtime.png", f"{experiment}: runtime")
    return {"config": config, "mse": mse_rows, "runtime": time_rows}


def cmd_reproduce(args) -> int:
    out = out_dir(args) / args.experiment
    res = reproduce(
        args.experiment,
        out,
        seed=args.seed,
        sizes=_ints(args.sizes),
        trials=args.trials,
        train_cfg=_train_cfg(args, 0),
        hidden=_ints(args.hidden),
        solver=solver_config(args),
        workers=threads(args),
        figures=not args.no_figures,
    )
    print("size,mse_coords,mse_forces,mse_freqs,mse_total")
    for r in res["mse"]:
        print(f"{r['size']},{r['mse_coords']:.4e},{r['mse_forces']:.4e},{r['mse_freqs']:.4e},{r['mse_total']:.4e}")
    print(f"-> {out}")
    return 0


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--out-dir", default="results", help="directory for artifacts")
    common.add_argument("--config", help="JSON file with default values for any option")
    common.add_argument("--threads", type=int, default=None, help="worker processes ($TENSEG_THREADS)")
    common.add_argument("-v", "--verbose", action="store_true")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--tol", type=float, default=1e-6, help="equilibrium tolerance [N]")
    solver.add_argument("--mu", type=float, default=0.1, help="tangent-stiffness shift")
    solver.add_argument("--max-iter", type=int, default=10_000)

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--hidden", default=",".join(map(str, DEFAULT_HIDDEN)))
    training.add_argument("--epochs", type=int, default=200)
    training.add_argument("--lr", type=float, default=0.01)
    training.add_argument("--batch-size", type=int, default=32)

    p = argparse.ArgumentParser(prog="tenseg", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="write a benchmark structure file")
    g.add_argument("--structure", choices=sorted(GENERATORS), required=True)
    g.add_argument("--bar-length", type=float)
    g.add_argument("--radius", type=float, default=0.25)
    g.add_argument("--height", type=float, default=0.5)
    g.add_argument("--twist", type=float, default=PRISM_TWIST, help="prism twist [rad]")
    g.add_argument("--separation-ratio", type=float, default=0.5)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    for name, func, helptext in (("solve", cmd_solve, "form-find one actuation"),
                                 ("modal", cmd_modal, "natural frequencies at equilibrium")):
        c = sub.add_parser(name, parents=[common, solver], help=helptext)
        c.add_argument("--structure", required=True, help="structure JSON or benchmark id")
        c.add_argument("--dl", help="comma-separated rest-length changes [m]")
        c.add_argument("-o", "--output")
        if name == "modal":
            c.add_argument("--mode-shapes", action="store_true")
        c.set_defaults(func=func)

    d = sub.add_parser("dataset", parents=[common, solver], help="sample, solve and store a dataset")
    d.add_argument("--structure", required=True, help="structure JSON or benchmark id")
    d.add_argument("--n", type=int, default=1000)
    d.add_argument("--range", help="lo,hi for every actuated cable (default: benchmark range)")
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_dataset)

    t = sub.add_parser("train", parents=[common, training], help="train the surrogate")
    t.add_argument("--data", required=True)
    t.add_argument("--train-fraction", type=float, default=0.8)
    t.add_argument("-o", "--output")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="test-set errors, optionally over repeated trials")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--trials", type=int, default=1)
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("reproduce", parents=[common, solver, training],
                       help="error-vs-sample-size study for a benchmark")
    r.add_argument("--experiment", choices=sorted(GENERATORS), required=True)
    r.add_argument("--sizes", default=",".join(map(str, DEFAULT_SIZES)))
    r.add_argument("--trials", type=int, default=20)
    r.add_argument("--no-figures", action="store_true")
    r.set_defaults(func=cmd_reproduce)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Use keys of a ``--config`` JSON file as defaults for the chosen subcommand."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = json.loads(Path(known.config).read_text())
    flat = {}
    for key, value in cfg.items():
        if isinstance(value, dict):
            flat.update(value)
        else:
            flat[key] = value
    for key, value in list(flat.items()):
        if isinstance(value, list):
            flat[key] = ",".join(map(str, value))
    flat = {k.replace("-", "_"): v for k, v in flat.items()}
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in sub.choices.values():
        dests = {a.dest for a in sp._actions}
        sp.set_defaults(**{k: v for k, v in flat.items() if k in dests})


def _glue_negative_lists(argv: list[str]) -> list[str]:
    """Let ``--dl -0.5,-0.5`` through: argparse would read the value as an option."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in VALUE_LIST_OPTIONS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


VALUE_LIST_OPTIONS = ("--dl", "--range")


def main(argv: list[str] | None = None) -> int:
    argv = _glue_negative_lists(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
