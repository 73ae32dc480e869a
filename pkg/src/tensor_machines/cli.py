"""Command line: argument parsing and output formatting over the service
handlers. Exit codes: 0 success, 2 bad input or data problem, 3 solver
failure.

A config file given with --config holds key=value lines (keys are the long
flag names, dashes or underscores); flags on the command line override the
file. Timing always goes to comment lines or stderr so repeated runs with
the same seed produce byte-identical output bodies; the one exception is
the benchmark table, whose seconds and reltime columns are measurements.
"""

from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone

from pydantic import ValidationError

from .bench import CSV_HEADER
from .data import DataError
from .service import handlers, schemas
from .solvers import SolverError

ALL_METHODS = "tm-batch,tm-stochastic,kk,craftmaps,krr,fm2"


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}") from exc


def _add_data_flags(p, include_test: bool) -> None:
    p.add_argument("--data", required=True, help="training data file")
    if include_test:
        p.add_argument("--test", required=True, help="test data file")
    p.add_argument("--format", choices=["svm", "csv"], default="svm",
                   help="input file format")
    p.add_argument("--label-col", dest="label_col", type=int, default=0,
                   help="label column for csv input")
    p.add_argument("--task", choices=["reg", "cls"], default="reg",
                   help="regression or binary classification")


def _add_model_flags(p) -> None:
    p.add_argument("--degree", type=int, default=2, help="polynomial degree q")
    p.add_argument("--rank", type=int, default=1,
                   help="rank-one terms per degree; 0 trains an affine model")
    p.add_argument("--alpha", type=float, default=0.1,
                   help="initialization scale")
    p.add_argument("--seed", type=int, default=0, help="random seed")


def _add_solver_flags(p) -> None:
    p.add_argument("--solver", choices=["batch", "stochastic"], default="batch")
    p.add_argument("--lambda", dest="lam", type=float, default=1e-5,
                   help="regularization weight")
    p.add_argument("--epochs", type=int, default=25,
                   help="stochastic solver epochs")
    p.add_argument("--iters", type=int, default=200,
                   help="batch solver iteration cap")
    p.add_argument("--minibatches", type=int, default=None,
                   help="minibatch count per epoch; default is about sqrt(n)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tensor-machines",
        description="Train, evaluate, and benchmark low-rank polynomial models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and write it to a file")
    _add_data_flags(p, include_test=False)
    _add_model_flags(p)
    _add_solver_flags(p)
    p.add_argument("--out", required=True, help="model output path")
    p.add_argument("--config", help="key=value defaults file")

    p = sub.add_parser("eval", help="print a saved model's test metric")
    p.add_argument("--model", required=True, help="saved model path")
    _add_data_flags(p, include_test=True)
    p.add_argument("--config", help="key=value defaults file")

    p = sub.add_parser("cv", help="10-fold grid search over lambda and alpha")
    _add_data_flags(p, include_test=False)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--solver", choices=["batch", "stochastic"], default="batch")
    p.add_argument("--lambda", dest="lam_grid", type=_float_list,
                   default=[1e-6, 1e-4, 1e-2],
                   help="comma-separated regularization grid")
    p.add_argument("--alpha", dest="alpha_grid", type=_float_list,
                   default=[0.05, 0.1, 0.2],
                   help="comma-separated initialization-scale grid")
    p.add_argument("--epochs", type=int, default=25)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--minibatches", type=int, default=None)
    p.add_argument("--config", help="key=value defaults file")

    p = sub.add_parser("bench", help="compare methods against the kernel baseline")
    _add_data_flags(p, include_test=True)
    _add_model_flags(p)
    p.set_defaults(rank=4)
    p.add_argument("--lambda", dest="lam", type=float, default=1e-5)
    p.add_argument("--methods", default=ALL_METHODS,
                   help="comma-separated subset of " + ALL_METHODS)
    p.add_argument("--trials", type=int, default=3,
                   help="seeded trials averaged per sweep point")
    p.add_argument("--krr-cap", dest="krr_cap", type=int, default=40000,
                   help="kernel solver training-row cap")
    p.add_argument("--max-sweeps", dest="max_sweeps", type=int, default=8,
                   help="doubling steps per method")
    p.add_argument("--minibatches", type=int, default=None)
    p.add_argument("--out", help="benchmark CSV path; default stdout")
    p.add_argument("--config", help="key=value defaults file")

    p = sub.add_parser("bounds", help="per-draw complexity estimates as CSV")
    p.add_argument("--dim", type=int, default=3, help="point dimension")
    p.add_argument("--points", type=int, default=20, help="number of points")
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--ball", type=float, default=1.0,
                   help="factor norm cap of the model class")
    p.add_argument("--draws", type=int, default=200, help="sign draws")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", help="optional data file to take points from")
    p.add_argument("--format", choices=["svm", "csv"], default="svm")
    p.add_argument("--label-col", dest="label_col", type=int, default=0)
    p.add_argument("--out", help="CSV path; default stdout")
    p.add_argument("--config", help="key=value defaults file")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _merge_config(argv: list[str]) -> list[str]:
    """Rewrite argv so config-file entries come before the explicit flags;
    the parser's last-occurrence-wins rule then applies the overrides."""
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None:
        return argv
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    injected = []
    for ln in lines:
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if "=" not in ln:
            raise DataError(f"config line is not key=value: {ln!r}")
        key, value = ln.split("=", 1)
        key = key.strip().replace("_", "-")
        if key == "config":
            raise DataError("config files cannot set --config")
        injected.extend([f"--{key}", value.strip()])
    return [argv[0]] + injected + argv[1:]


def cmd_train(args) -> int:
    req = schemas.TrainRequest(
        data=args.data, format=args.format, label_col=args.label_col,
        task=args.task, degree=args.degree, rank=args.rank, solver=args.solver,
        lam=args.lam, alpha=args.alpha, seed=args.seed, epochs=args.epochs,
        iters=args.iters, minibatches=args.minibatches, out=args.out,
    )
    resp = handlers.run_train(req)
    print(f"wrote model to {resp.out}")
    print(f"wrote trace to {resp.trace}")
    print(
        f"iterations={resp.iterations} objective={resp.objective!r} "
        f"grad_norm={resp.grad_norm!r} train_{resp.metric_kind}={resp.train_metric:.6g}"
    )
    print(f"fit seconds: {resp.seconds:.3f}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    req = schemas.EvalRequest(
        model=args.model, data=args.data, test=args.test, format=args.format,
        label_col=args.label_col, task=args.task,
    )
    resp = handlers.run_eval(req)
    print(f"{resp.value:.6g}")
    return 0


def cmd_cv(args) -> int:
    req = schemas.CvRequest(
        data=args.data, format=args.format, label_col=args.label_col,
        task=args.task, degree=args.degree, rank=args.rank, solver=args.solver,
        lam_grid=args.lam_grid, alpha_grid=args.alpha_grid, seed=args.seed,
        epochs=args.epochs, iters=args.iters, minibatches=args.minibatches,
    )
    resp = handlers.run_cv(req)
    print("lambda,alpha,fold," + resp.metric_kind)
    for cell in resp.table:
        print(f"{cell.lam!r},{cell.alpha!r},{cell.fold},{cell.value!r}")
    print(
        f"selected lambda={resp.best_lam!r} alpha={resp.best_alpha!r} "
        f"mean_{resp.metric_kind}={resp.best_mean!r}"
    )
    return 0


def cmd_bench(args) -> int:
    methods = [m for m in args.methods.split(",") if m]
    req = schemas.BenchRequest(
        data=args.data, test=args.test, format=args.format,
        label_col=args.label_col, task=args.task, degree=args.degree,
        rank=args.rank, lam=args.lam, alpha=args.alpha, seed=args.seed,
        trials=args.trials, krr_cap=args.krr_cap, max_sweeps=args.max_sweeps,
        minibatches=args.minibatches, methods=methods,
    )
    resp = handlers.run_bench_cmd(req)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    lines = [
        f"# generated {stamp}",
        f"# seed={args.seed} trials={args.trials} degree={args.degree} "
        f"rank={args.rank} lambda={args.lam!r} alpha={args.alpha!r}",
        CSV_HEADER,
    ]
    for row in resp.rows:
        fields = [
            row.method,
            "" if row.err is None else repr(row.err),
            "" if row.seconds is None else f"{row.seconds:.6f}",
            "" if row.relerr is None else repr(row.relerr),
            "" if row.reltime is None else f"{row.reltime:.6f}",
            "" if row.major_param is None else str(row.major_param),
            row.status,
        ]
        lines.append(",".join(fields))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote benchmark table to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_bounds(args) -> int:
    req = schemas.BoundsRequest(
        dim=args.dim, points=args.points, degree=args.degree, ball=args.ball,
        draws=args.draws, seed=args.seed, data=args.data, format=args.format,
        label_col=args.label_col,
    )
    resp = handlers.run_bounds(req)
    lines = [
        f"# points={args.points} dim={args.dim} degree={args.degree} "
        f"ball={args.ball!r} draws={args.draws} seed={args.seed}",
        "draw,lower,upper,max_entry_lhs,rhs",
    ]
    for d in resp.draws:
        lines.append(f"{d.draw},{d.lower!r},{d.upper!r},{d.max_entry_lhs!r},{resp.rhs!r}")
    lines.append(
        f"mean,{resp.lower_mean!r},{resp.upper_mean!r},"
        f"{resp.max_entry_mean!r},{resp.rhs!r}"
    )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote bounds table to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "cv": cmd_cv,
    "bench": cmd_bench,
    "bounds": cmd_bounds,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        if argv and argv[0] in COMMANDS:
            argv = _merge_config(argv)
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DataError, ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
