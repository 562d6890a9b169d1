"""Command-line entry point: ``eln <command> [options]``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (
    CASES,
    METHODS,
    TABULAR_NOISE,
    GridSearchSpec,
    LabelNoiseSpec,
    MinMaxScaler,
    Objective,
    accuracy,
    apply_label_noise,
    evaluate_linreg,
    grid_search_pooled,
    load_csv,
    load_grid_config,
    method_config,
    one_hot,
    rmse,
    sample_noise,
    tune_linreg,
    valid_params,
    write_cv_table,
)
from .kernels import gauss
from .lip import Linear, RbfMap, rvflnn_init
from .pdf_match import CenterStrategy, ElnFitConfig, fit_eln, loss_curve_csv
from .solver import fixed_point_fit


class CliError(Exception):
    pass


# ---------------------------------------------------------------- shared helpers

def _sub_seed(*words: int) -> int:
    return int(np.random.SeedSequence([int(w) for w in words]).generate_state(1)[0] % 2**31)


def _parse_params(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise CliError(f"bad --param {item!r}; expected key=value")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def method_params(method: str, args) -> dict:
    """Hyperparameters for one method assembled from the common flags and ``--param`` overrides."""
    p: dict = {"gamma": args.gamma2}
    s = args.sigma
    if method in ("mcc", "krsl", "kmpe", "qmee", "eln", "mcc_vc"):
        p["sigma"] = s
    if method == "mcc_vc":
        p["center"] = 0.0
    elif method == "mmcc":
        p.update(sigma1=s, sigma2=10 * s, **{"lambda": 0.5})
    elif method == "gmcc":
        p.update(alpha=2, **{"lambda": 0.5})
    elif method == "krsl":
        p["lambda"] = 1.0
    elif method == "kmpe":
        p["p"] = 2.0
    elif method == "qmee":
        p["delta_q"] = 0.5
    elif method == "eln":
        p.update(M=args.m, gamma1=args.gamma1, epsilon=args.epsilon, centers=args.centers)
    p.update(_parse_params(getattr(args, "param", None)))
    return p


def _header_lines(command: str, args, extra: dict | None = None) -> list[str]:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "svg", "table")}
    if extra:
        params.update(extra)
    return [f"eln {__version__} {command}", f"seed={args.seed}", "params=" + json.dumps(params, sort_keys=True, default=str)]


def _emit(text: str, out) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _json_doc(command: str, args, result: dict) -> str:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "svg", "table")}
    doc = {"tool": "eln", "version": __version__, "command": command, "seed": args.seed, "params": params, "result": result}
    return json.dumps(doc, sort_keys=True, indent=2, default=str) + "\n"


def _csv_text(command: str, args, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    for line in _header_lines(command, args):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _feature_map(kind: str, d: int, hidden: int, seed: int, X_train=None, rbf_width: float = 1.0):
    if kind == "linear" or hidden == 0:
        return Linear(d)
    if kind == "rvflnn":
        return rvflnn_init(d, hidden, seed=seed)
    if kind == "rbf":
        rng = np.random.default_rng(seed)
        k = min(hidden, X_train.shape[0])
        return RbfMap(X_train[rng.choice(X_train.shape[0], k, replace=False)], rbf_width)
    raise CliError(f"unknown feature map {kind!r}")


def _train(method: str, params: dict, fm, X, Y, args, seed: int):
    p = dict(params)
    if method == "eln":
        p.setdefault("seed", seed)
    return fixed_point_fit(fm, X, Y, method_config(method, p, args.T, args.tau))


def _methods(text: str) -> list[str]:
    names = [m.strip() for m in text.split(",") if m.strip()]
    if not names:
        raise CliError("--loss needs at least one method")
    for m in names:
        if m not in METHODS:
            raise CliError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    return names


# ---------------------------------------------------------------- commands

def cmd_synth_linreg(args) -> str:
    if args.case not in CASES:
        raise CliError(f"--case must be one of {sorted(CASES)}")
    if args.runs < 1 or args.n < 2:
        raise CliError("--runs must be >= 1 and --n >= 2")
    rows = []
    for method in _methods(args.loss):
        if args.tune:
            params = tune_linreg(method, args.case, args.n, args.seed, pilots=args.pilots,
                                 folds=args.folds, gamma=None if method == "mse" else args.gamma2).best
        else:
            params = method_params(method, args)
        t0 = time.perf_counter()
        vals, conv = evaluate_linreg(method, params, args.case, args.n, args.runs, args.seed, args.T, args.tau)
        secs = time.perf_counter() - t0
        row = [method, args.case, args.n, args.runs, float(np.mean(vals)), float(np.std(vals)), float(np.mean(conv)),
               json.dumps(params, sort_keys=True)]
        if args.timing:
            row.append(secs / args.runs)
        rows.append(row)
    header = ["method", "case", "N", "runs", "rmsd_mean", "rmsd_std", "converged_frac", "params"]
    if args.timing:
        header.append("time_mean_s")
    if args.format == "json":
        return _json_doc("synth-linreg", args, {"rows": [dict(zip(header, r)) for r in rows]})
    return _csv_text("synth-linreg", args, header, rows)


def _load_split(args, n_targets: int):
    _, Xtr, Ytr = load_csv(args.train, n_targets)
    _, Xte, Yte = load_csv(args.test, n_targets)
    if Xtr.shape[1] != Xte.shape[1]:
        raise CliError("train and test files have different column counts")
    return Xtr, Ytr, Xte, Yte


def cmd_regress(args) -> str:
    (method,) = _methods(args.loss)
    Xtr, Ytr, Xte, Yte = _load_split(args, args.targets)
    xs, ys = MinMaxScaler().fit(Xtr), MinMaxScaler().fit(Ytr)
    Xtr, Xte, Ytr, Yte = xs.transform(Xtr), xs.transform(Xte), ys.transform(Ytr), ys.transform(Yte)
    if args.target_noise:
        Ytr = Ytr + sample_noise(TABULAR_NOISE, Ytr.size, _sub_seed(args.seed, 1)).reshape(Ytr.shape)
    fm = _feature_map(args.map, Xtr.shape[1], args.hidden, _sub_seed(args.seed, 2), Xtr, args.rbf_width)
    tm = _train(method, method_params(method, args), fm, Xtr, Ytr, args, _sub_seed(args.seed, 3))
    result = {"rmse": rmse(tm.predict(Xte), Yte), "iterations": tm.iterations, "converged": tm.converged}
    if args.format == "csv":
        return _csv_text("regress", args, list(result), [list(result.values())])
    return _json_doc("regress", args, result)


def _labels(Y) -> np.ndarray:
    y = Y[:, 0]
    if np.any(y != np.round(y)) or np.any(y < 0):
        raise CliError("class labels must be non-negative integers")
    return y.astype(int)


def cmd_classify(args) -> str:
    (method,) = _methods(args.loss)
    Xtr, Ytr, Xte, Yte = _load_split(args, 1)
    ltr, lte = _labels(Ytr), _labels(Yte)
    C = int(max(ltr.max(), lte.max())) + 1
    if C < 2:
        raise CliError("need at least two classes")
    if args.label_noise:
        ltr = apply_label_noise(ltr, LabelNoiseSpec(args.label_noise, C), _sub_seed(args.seed, 1))
    xs = MinMaxScaler(-1.0, 1.0).fit(Xtr)
    Xtr, Xte = xs.transform(Xtr), xs.transform(Xte)
    fm = _feature_map(args.map, Xtr.shape[1], args.hidden, _sub_seed(args.seed, 2), Xtr, args.rbf_width)
    tm = _train(method, method_params(method, args), fm, Xtr, one_hot(ltr, C), args, _sub_seed(args.seed, 3))
    result = {"acc": accuracy(tm.classify(Xte), lte), "iterations": tm.iterations, "converged": tm.converged}
    if args.format == "csv":
        return _csv_text("classify", args, list(result), [list(result.values())])
    return _json_doc("classify", args, result)


def _svg(grid, curves: dict[str, np.ndarray], width: int = 640, height: int = 400) -> str:
    pad = 40
    ys = np.concatenate(list(curves.values()))
    lo, hi = float(ys.min()), float(ys.max())
    if hi == lo:
        hi = lo + 1.0
    x0, x1 = float(grid[0]), float(grid[-1])
    sx = lambda x: pad + (x - x0) / (x1 - x0) * (width - 2 * pad)
    sy = lambda y: height - pad - (y - lo) / (hi - lo) * (height - 2 * pad)
    colors = ["#1f77b4", "#d62728"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" fill="none" stroke="#999"/>',
    ]
    for k, (name, ys_) in enumerate(curves.items()):
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(grid, ys_))
        parts.append(f'<polyline fill="none" stroke="{colors[k % 2]}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{pad + 8}" y="{pad + 16 + 16 * k}" fill="{colors[k % 2]}" font-size="12">{name}</text>')
    parts.append(f'<text x="{pad}" y="{height - 12}" font-size="11">e in [{x0:g}, {x1:g}], y in [{lo:.4g}, {hi:.4g}]</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_eln_dump(args) -> str:
    _, X, Y = load_csv(args.errors, 1) if _column_count(args.errors) > 1 else _single_column(args.errors)
    errors = Y[:, 0]
    cfg = ElnFitConfig(M=args.m, sigma=args.sigma, epsilon=args.epsilon, gamma1=args.gamma1,
                       centers=CenterStrategy(args.centers), seed=args.seed)
    model = fit_eln(errors, cfg)
    lo = errors.min() - 3 * args.sigma if args.lo is None else args.lo
    hi = errors.max() + 3 * args.sigma if args.hi is None else args.hi
    if not hi > lo or args.steps < 2:
        raise CliError("need --hi > --lo and --steps >= 2")
    grid = np.linspace(lo, hi, args.steps)
    neg_kde = -np.mean(gauss(grid[:, None] - errors[None, :], args.sigma), axis=1)
    if args.svg:
        Path(args.svg).write_text(_svg(grid, {"fitted loss": np.asarray(model.loss(grid)), "negated KDE": neg_kde}))
    body = loss_curve_csv(model, grid).splitlines()
    lines = [f"# {h}" for h in _header_lines("eln-dump", args, {"nodes": len(model)})]
    lines.append(body[0] + ",neg_kde")
    lines += [f"{row},{v!r}" for row, v in zip(body[1:], neg_kde.tolist())]
    return "\n".join(lines) + "\n"


def _column_count(path) -> int:
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row and not row[0].startswith("#"):
                return len(row)
    raise CliError(f"{path}: empty file")


def _single_column(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if len(rows) < 2:
        raise CliError(f"{path}: need a header row and at least one value")
    try:
        vals = np.array([float(r[0]) for r in rows[1:]])
    except ValueError as exc:
        raise CliError(f"{path}: non-numeric value ({exc})") from None
    if not np.all(np.isfinite(vals)):
        raise CliError(f"{path}: non-finite value")
    return rows[0], np.empty((vals.size, 0)), vals[:, None]


def read_grid_spec(path, method: str, task: str, seed: int, folds: int | None) -> GridSearchSpec:
    """Load a grid file: either a ``[grid]`` table or per-method tables like the shipped defaults."""
    doc = load_grid_config(path)
    if "grid" in doc:
        grid, opts = doc["grid"], doc
    elif method in doc:
        grid, opts = doc[method], doc
    else:
        raise CliError(f"grid file has neither a [grid] nor a [{method}] table")
    grid = {k: v for k, v in grid.items() if isinstance(v, list)}
    default_obj = Objective.ERROR_RATE if task == "classify" else Objective.SSE
    return GridSearchSpec(
        grid,
        folds=int(folds or opts.get("folds", 10)),
        stratified=bool(opts.get("stratified", task == "classify")),
        objective=opts.get("objective", default_obj),
        seed=seed,
    )


def cmd_grid_search(args) -> str:
    (method,) = _methods(args.loss)
    spec = read_grid_spec(args.spec, method, args.task, args.seed, args.folds)
    _, X, Y = load_csv(args.data, 1 if args.task == "classify" else args.targets)
    labels = None
    if args.task == "classify":
        labels = _labels(Y)
        C = int(labels.max()) + 1
        X = MinMaxScaler(-1.0, 1.0).fit_transform(X)
        Y = one_hot(labels, C)
    else:
        X, Y = MinMaxScaler().fit_transform(X), MinMaxScaler().fit_transform(Y)
    if Y.shape[1] == 1:
        Y = Y[:, 0]
    base = method_params(method, args)

    def trainer(params, Xtr, ytr, Xva, seed):
        fm = _feature_map(args.map, Xtr.shape[1], args.hidden, _sub_seed(args.seed, 2), Xtr, args.rbf_width)
        return _train(method, {**base, **params}, fm, Xtr, ytr, args, seed % 2**31).predict(Xva)

    points = [p for p in spec.points() if valid_params(method, {**base, **p})]
    if not points:
        raise CliError(f"no grid point is valid for {method}")
    result = grid_search_pooled(spec, trainer, [(X, Y, labels)], points=points)
    if args.table:
        write_cv_table(result, args.table, _header_lines("grid-search", args))
    best = {"best": {**base, **result.best}, "score": result.best_score, "objective": spec.objective.value,
            "folds": spec.folds, "points": len(result.table)}
    return _json_doc("grid-search", args, best)


# ---------------------------------------------------------------- parser

def _common(p: argparse.ArgumentParser, loss_default: str = "eln") -> None:
    p.add_argument("--loss", default=loss_default, help=f"method ({', '.join(METHODS)}); synth-linreg takes a comma list")
    p.add_argument("--sigma", type=float, default=1.0, help="kernel width (default 1.0)")
    p.add_argument("--m", type=int, default=50, help="ELN node count M (default 50)")
    p.add_argument("--gamma1", type=float, default=1e-3, help="ELN ridge term (default 1e-3)")
    p.add_argument("--gamma2", type=float, default=0.1, help="scaled model regularizer (default 0.1)")
    p.add_argument("--epsilon", type=float, default=0.0, help="variance of kernel-width jitter (default 0)")
    p.add_argument("--centers", choices=[c.value for c in CenterStrategy], default="random")
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="extra method parameter, repeatable")
    p.add_argument("--T", type=int, default=50, help="max fixed-point iterations (default 50)")
    p.add_argument("--tau", type=float, default=1e-7, help="relative-change tolerance (default 1e-7)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default stdout)")


def _model_flags(p: argparse.ArgumentParser, default_map: str) -> None:
    p.add_argument("--map", choices=["linear", "rvflnn", "rbf"], default=default_map, help="feature map")
    p.add_argument("--hidden", type=int, default=200, help="hidden nodes / RBF anchors (default 200)")
    p.add_argument("--rbf-width", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eln", description="Robust linear-in-parameter learning with ELN losses.")
    parser.add_argument("--version", action="version", version=f"eln {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-linreg", help="synthetic linear regression under heavy-tailed noise")
    _common(p, loss_default=",".join(METHODS))
    p.add_argument("--case", type=int, default=1, help="noise case 1-4")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--n", type=int, default=500, help="samples per run")
    p.add_argument("--tune", action="store_true", help="grid-search each method on pilot instances first")
    p.add_argument("--pilots", type=int, default=8)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--timing", action="store_true", help="add a wall-time column (not reproducible)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_synth_linreg)

    p = sub.add_parser("regress", help="fit on a train CSV and report test RMSE")
    _common(p)
    _model_flags(p, "rvflnn")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--targets", type=int, default=1, help="number of trailing target columns")
    p.add_argument("--target-noise", action="store_true", help="contaminate normalized training targets")
    p.add_argument("--format", choices=["csv", "json"], default="json")
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("classify", help="fit on a train CSV and report test accuracy")
    _common(p)
    _model_flags(p, "rvflnn")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--label-noise", type=float, default=0.0, help="flip rate applied to training labels")
    p.add_argument("--format", choices=["csv", "json"], default="json")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("eln-dump", help="fit an ELN to an error sample and dump its loss curve")
    _common(p)
    p.add_argument("--errors", required=True, help="CSV whose last column holds the errors")
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--steps", type=int, default=401)
    p.add_argument("--svg", help="also write an SVG plot of the loss and the negated KDE")
    p.set_defaults(func=cmd_eln_dump)

    p = sub.add_parser("grid-search", help="k-fold grid search for one method")
    _common(p)
    _model_flags(p, "linear")
    p.add_argument("--data", required=True)
    p.add_argument("--spec", help="grid file (TOML); defaults to the shipped grids")
    p.add_argument("--task", choices=["regress", "classify"], default="regress")
    p.add_argument("--targets", type=int, default=1)
    p.add_argument("--folds", type=int)
    p.add_argument("--table", help="write the full CV table here")
    p.set_defaults(func=cmd_grid_search)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
        _emit(text, args.out)
    except (CliError, ValueError, OSError, KeyError, np.linalg.LinAlgError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        if isinstance(exc, KeyError):
            msg = f"missing parameter {msg!r}"
        print(f"eln: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
