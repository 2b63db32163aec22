"""Command line front end.

Every subcommand writes into ``--out`` (a directory) and leaves a
``manifest.json`` with the full configuration, seed and package version.
``longimpute --replay DIR/manifest.json --out NEWDIR`` repeats a run.

Exit status: 0 success, 1 invalid input or configuration, 2 numerical failure.

Seeds: ``simulate`` uses ``--seed`` directly; ``cv`` derives the seed of
trial ``i`` as ``child_seed(seed, f"split{i}")``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .basis import TimeGrid, default_basis
from .completion import hard_impute, impute, soft_impute
from .data import (
    ObservationRecord,
    SparseMatrix,
    discretize,
    read_long_csv,
    read_wide_csv,
    split,
    write_long_csv,
    write_wide_csv,
)
from .errors import NumericalError, ValidationError
from .evaluation import cross_validate, mse
from .multivariate import make_design, multivariate_impute
from .regression import sparse_longitudinal_regression, sparse_regression
from .simulation import SimulationSpec, simulate_study

log = logging.getLogger("longimpute")

DATA_FILE = "data.csv"
TRUTH_FILE = "truth.csv"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def child_seed(seed: int, name: str) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(name.encode()),))
    return int(ss.generate_state(1)[0])


def parse_grid(text: str) -> list[float]:
    """``a:b:step`` (inclusive), ``a,b,...,c`` (arithmetic), or a comma list."""
    text = text.strip()
    try:
        if ":" in text:
            a, b, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValidationError(f"grid step must be > 0 in {text!r}")
            n = int(np.floor((b - a) / step + 1e-9)) + 1
            return [round(a + i * step, 12) for i in range(n)]
        parts = [p.strip() for p in text.split(",")]
        if "..." in parts:
            i = parts.index("...")
            if i < 2 or i != len(parts) - 2:
                raise ValidationError(f"cannot expand grid {text!r}; write a,b,...,c")
            a, b, c = float(parts[0]), float(parts[1]), float(parts[-1])
            return parse_grid(f"{a}:{c}:{b - a}")
        return [float(p) for p in parts if p]
    except ValueError:
        raise ValidationError(f"cannot parse grid {text!r}") from None


def _fractions(text: str) -> tuple[float, float, float]:
    vals = parse_grid(text)
    if len(vals) != 3:
        raise ValidationError("--fractions needs three comma-separated values")
    return tuple(vals)


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _data_path(path: str) -> Path:
    p = Path(path)
    return p / DATA_FILE if p.is_dir() else p


def _grid_from(args, records) -> TimeGrid:
    times = [r.time for r in records]
    t_min = args.t_min if args.t_min is not None else min(times)
    t_max = args.t_max if args.t_max is not None else max(times)
    return TimeGrid(t_min, t_max, args.T)


def _load(args):
    records = read_long_csv(_data_path(args.input))
    grid = _grid_from(args, records)
    mats, subjects = discretize(records, grid)
    return mats, subjects, grid


def _pick(mats, name) -> SparseMatrix:
    if name not in mats:
        raise ValidationError(f"variable {name!r} not in data (have {', '.join(sorted(mats))})")
    return mats[name]


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    return repr(float(x))


def _long_records(curves, subjects, variable, points):
    for sid, row in zip(subjects, curves):
        for t, v in zip(points, row):
            yield ObservationRecord(sid, variable, float(t), float(v))


def _write_basis(out: Path, grid: TimeGrid, B: np.ndarray, mean_curve):
    _write_csv(
        out / "basis.csv",
        ["time"] + [f"b{k}" for k in range(B.shape[1])] + ["mean"],
        [
            [_fmt(t)] + [_fmt(x) for x in B[j]] + [_fmt(0.0 if mean_curve is None else mean_curve[j])]
            for j, t in enumerate(grid.points)
        ],
    )


def _read_basis(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    arr = np.array([[float(x) for x in r] for r in rows])
    return arr[:, 0], arr[:, 1:-1], arr[:, -1]


def _write_coefficients(out: Path, fits, subjects):
    rows = []
    for i, f in enumerate(fits):
        for s, w in zip(subjects, f.W):
            rows.append([i, _fmt(f.lam), s] + [_fmt(x) for x in w])
    K = fits[0].W.shape[1] if fits else 0
    _write_csv(out / "coefficients.csv", ["lambda_index", "lambda", "subject_id"] + [f"w{k}" for k in range(K)], rows)


def _write_path(out: Path, fits):
    _write_csv(
        out / "path.csv",
        ["lambda_index", "lambda", "rank", "objective", "n_iter", "converged"],
        [[i, _fmt(f.lam), f.rank, _fmt(f.objective), f.n_iter, str(f.converged).lower()] for i, f in enumerate(fits)],
    )
    for i, f in enumerate(fits):
        if not f.converged:
            print(f"warning: lambda {f.lam:g} stopped at max_iter without converging (converged=false)", file=sys.stderr)


def _write_components(out: Path, grid: TimeGrid, B: np.ndarray, W: np.ndarray, subjects, prefix=""):
    U, s, Vt = np.linalg.svd(W, full_matrices=False)
    r = int(np.sum(s > 1e-10 * max(s[0], 1e-300))) if s.size else 0
    comps = (B @ Vt[:r].T).T
    write_wide_csv(out / f"{prefix}components.csv", comps, [f"pc{k + 1}" for k in range(r)], grid.points)
    _write_csv(
        out / f"{prefix}scores.csv",
        ["subject_id"] + [f"pc{k + 1}" for k in range(r)],
        [[sid] + [_fmt(x) for x in U[i, :r]] for i, sid in enumerate(subjects)],
    )
    _write_csv(out / f"{prefix}singular_values.csv", ["component", "value"], [[k + 1, _fmt(s[k])] for k in range(r)])


def _select_index(fits, args) -> int:
    if args.select_lambda is None:
        return len(fits) - 1
    lams = np.array([f.lam for f in fits])
    hit = np.flatnonzero(np.isclose(lams, args.select_lambda, rtol=1e-9, atol=0))
    if hit.size == 0:
        raise ValidationError(f"--select-lambda {args.select_lambda} is not on the lambda grid")
    return int(hit[0])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args, out: Path):
    spec = SimulationSpec(
        N=args.n,
        T_gen=args.t_gen,
        T_fit=args.t_fit,
        K=args.K,
        degree=args.degree,
        obs_fraction=args.obs_fraction,
        noise_sd=args.noise_sd,
        seed=args.seed,
        shared_mask=args.shared_mask,
    )
    sim = simulate_study(spec)
    write_long_csv(out / DATA_FILE, sim.records)
    write_wide_csv(out / TRUTH_FILE, sim.truth["Y"], sim.subject_ids, sim.grid.points)
    for var in ("X1", "X2"):
        write_wide_csv(out / f"truth_{var}.csv", sim.truth[var], sim.subject_ids, sim.grid.points)
    print(f"simulated {spec.N} subjects, {len(sim.records)} observations -> {out}")


def _fit_core(args):
    mats, subjects, grid = _load(args)
    Y = _pick(mats, args.variable)
    B = default_basis(grid, args.K, args.degree)
    path = parse_grid(args.lambda_grid) if args.lambda_grid else None
    fit = soft_impute(Y, B, path, eps=args.eps, max_iter=args.max_iter, center=not args.no_center)
    if args.method == "hard":
        fit = hard_impute(Y, B, None, fit, eps=args.eps, max_iter=args.max_iter)
    return fit, subjects, grid, B


def cmd_fit(args, out: Path):
    fit, subjects, grid, B = _fit_core(args)
    _write_path(out, fit.fits)
    _write_coefficients(out, fit.fits, subjects)
    _write_basis(out, grid, fit.basis, fit.mean_curve)
    idx = _select_index(fit.fits, args)
    curves = fit.impute(idx)
    write_wide_csv(out / "curves.csv", curves, subjects, grid.points)
    write_long_csv(out / "fitted.csv", _long_records(curves, subjects, args.variable, grid.points))
    _write_components(out, grid, fit.basis, fit.fits[idx].W, subjects)
    f = fit.fits[idx]
    print(f"lambda={f.lam:.6g} rank={f.rank} objective={f.objective:.6g} converged={str(f.converged).lower()}")


def cmd_impute(args, out: Path):
    src = Path(args.input)
    times, B, mean = _read_basis(src / "basis.csv")
    with open(src / "coefficients.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    idx_all = sorted({int(r[0]) for r in rows})
    li = idx_all[args.lambda_index]
    sel = [r for r in rows if int(r[0]) == li]
    subjects = [r[2] for r in sel]
    W = np.array([[float(x) for x in r[3:]] for r in sel])
    wanted = subjects if not args.subjects else [s.strip() for s in args.subjects.split(",")]
    pos = {s: i for i, s in enumerate(subjects)}
    missing = [s for s in wanted if s not in pos]
    if missing:
        raise ValidationError(f"unknown subject(s): {', '.join(missing)}")
    curves = impute(W, B, rows=[pos[s] for s in wanted], mean_curve=mean)
    write_long_csv(out / "trajectories.csv", _long_records(curves, wanted, args.variable, times))
    write_wide_csv(out / "trajectories_wide.csv", curves, wanted, times)
    print(f"wrote {len(wanted)} trajectories on {len(times)} grid points")


def cmd_regress(args, out: Path):
    mats, subjects, grid = _load(args)
    Y = _pick(mats, args.response)
    B = default_basis(grid, args.K, args.degree)
    path = parse_grid(args.lambda_grid) if args.lambda_grid else [0.0]
    rows = []
    if args.design:
        X, labels = _read_design(args.design, subjects)
        model = sparse_regression(Y, X, B, eps=args.eps, max_iter=args.max_iter, labels=labels, center=not args.no_center)
        models, preds = [model], [model.predict(X)]
    else:
        names = [c.strip() for c in args.covariates.split(",") if c.strip()]
        if not names:
            raise ValidationError("regress needs --covariates or --design")
        design = make_design([(_pick(mats, n), B) for n in names], names)
        res = sparse_longitudinal_regression(
            Y, design, path, eps=args.eps, max_iter=args.max_iter,
            step1_lambda=args.step1_lambda, d2=args.d2, B=B, center=not args.no_center,
        )
        models = res.models
        preds = [m.predict(res.scores) for m in models]
        labels = models[0].labels
        _write_csv(
            out / "latent_scores.csv",
            ["subject_id"] + labels,
            [[sid] + [_fmt(x) for x in res.scores[i]] for i, sid in enumerate(subjects)],
        )
    for i, m in enumerate(models):
        for lab, a in zip(m.labels, m.A):
            rows.append([i, _fmt(m.lam), lab] + [_fmt(x) for x in a])
    _write_csv(out / "regression_coefficients.csv", ["lambda_index", "lambda", "covariate"] + [f"a{k}" for k in range(B.K)], rows)
    _write_path(out, [_PathRow(m) for m in models])
    write_wide_csv(out / "curves.csv", preds[-1], subjects, grid.points)
    write_long_csv(out / "fitted.csv", _long_records(preds[-1], subjects, args.response, grid.points))
    print(f"fitted {len(models)} regression model(s); last lambda={models[-1].lam:g}")


class _PathRow:
    def __init__(self, m):
        self.lam = m.lam
        self.rank = int(np.linalg.matrix_rank(m.A)) if m.A.size else 0
        self.objective = float(m.trace[-1]) if len(m.trace) else float("nan")
        self.n_iter = m.n_iter
        self.converged = m.converged


def _read_design(path, subjects):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0].strip() != "subject_id":
            raise ValidationError(f"{path}: first column must be subject_id")
        table = {}
        for row in reader:
            if not row:
                continue
            try:
                table[row[0].strip()] = [float(x) for x in row[1:]]
            except ValueError:
                raise ValidationError(f"{path}: line {reader.line_num}: non-numeric covariate") from None
    missing = [s for s in subjects if s not in table]
    if missing:
        raise ValidationError(f"{path}: no covariates for subject(s) {', '.join(missing[:5])}")
    return np.array([table[s] for s in subjects]), [h.strip() for h in header[1:]]


def cmd_embed(args, out: Path):
    mats, subjects, grid = _load(args)
    names = [v.strip() for v in args.variables.split(",") if v.strip()] or sorted(mats)
    B = default_basis(grid, args.K, args.degree)
    design = make_design([(_pick(mats, n), B) for n in names], names)
    path = parse_grid(args.lambda_grid) if args.lambda_grid else None
    mfit = multivariate_impute(design, path, eps=args.eps, max_iter=args.max_iter, center=not args.no_center)
    _write_path(out, mfit.path.fits)
    idx = _select_index(mfit.path.fits, args)
    emb = mfit.embeddings[idx]
    r = emb.rank
    _write_csv(
        out / "scores.csv",
        ["subject_id"] + [f"u{k + 1}" for k in range(r)],
        [[sid] + [_fmt(x) for x in emb.U[i]] for i, sid in enumerate(subjects)],
    )
    _write_csv(out / "singular_values.csv", ["component", "value"], [[k + 1, _fmt(s)] for k, s in enumerate(emb.S)])
    rows = []
    for name, V in zip(names, emb.block_loadings):
        for k in range(V.shape[0]):
            rows.append([name, k] + [_fmt(x) for x in V[k]])
    _write_csv(out / "loadings.csv", ["variable", "basis_index"] + [f"v{k + 1}" for k in range(r)], rows)
    for i, name in enumerate(names):
        comps = (design.blocks[i].basis @ emb.block_loadings[i]).T
        write_wide_csv(out / f"components_{name}.csv", comps, [f"v{k + 1}" for k in range(r)], grid.points)
        write_wide_csv(out / f"curves_{name}.csv", mfit.impute(name, idx), subjects, grid.points)
    print(f"lambda={emb.lam:.6g} rank={r} gammas={[round(float(b.gamma), 6) for b in design.blocks]}")


def _cv_trial(payload):
    args, seed = payload
    mats, subjects, grid = _load(args)
    Y = _pick(mats, args.variable)
    B = default_basis(grid, args.K, args.degree)
    sp = split(Y, _fractions(args.fractions), seed, args.min_visits)
    covs = None
    if args.method in ("regression", "multivariate"):
        names = [c.strip() for c in (args.covariates or "").split(",") if c.strip()]
        if not names:
            raise ValidationError(f"method {args.method} needs --covariates")
        covs = [(_pick(mats, n), B) for n in names]
    truth = None
    if args.truth:
        ids, truth, _ = read_wide_csv(args.truth)
        pos = {s: i for i, s in enumerate(ids)}
        truth = truth[[pos[s] for s in subjects]]
    return cross_validate(
        Y, B, parse_grid(args.grid), sp, method=args.method, grid_kind=args.grid_kind,
        covariates=covs, truth=truth, eps=args.eps, max_iter=args.max_iter,
        center=not args.no_center, seed=seed,
    )


def cmd_cv(args, out: Path):
    seeds = [child_seed(args.seed, f"split{i}") for i in range(args.trials)]
    payloads = [(args, s) for s in seeds]
    if args.jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            reports = list(ex.map(_cv_trial, payloads))
    else:
        reports = [_cv_trial(p) for p in payloads]
    head = reports[0]
    doc = head.to_dict()
    doc["seed"] = args.seed
    doc["trial_seeds"] = seeds
    if len(reports) > 1:
        doc["per_trial"] = [
            {k: v for k, v in {"seed": r.seed, "selected": r.selected, "test_mse": r.test_mse,
                               "test_curve_mse": r.test_curve_mse}.items() if v is not None}
            for r in reports
        ]
        doc["test_mse_mean"] = float(np.mean([r.test_mse for r in reports]))
        doc["test_mse_std"] = float(np.std([r.test_mse for r in reports]))
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    head.write_csv(out / "cv_scores.csv")
    msg = f"selected {head.grid_kind}={head.selected:g} validation_mse={min(head.validation_mse):.6g} test_mse={head.test_mse:.6g}"
    if head.test_curve_mse is not None:
        msg += f" test_curve_mse={head.test_curve_mse:.6g}"
    print(msg)


def cmd_eval(args, out: Path):
    pred_path = Path(args.pred)
    if pred_path.is_dir():
        pred_path = pred_path / "curves.csv"
    truth_path = Path(args.truth)
    if truth_path.is_dir():
        truth_path = truth_path / TRUTH_FILE
    pid, P, pt = read_wide_csv(pred_path)
    tid, Q, tt = read_wide_csv(truth_path)
    if P.shape[1] != Q.shape[1] or not np.allclose(pt, tt, rtol=0, atol=1e-9):
        raise ValidationError("prediction and truth are on different grids")
    pos = {s: i for i, s in enumerate(pid)}
    missing = [s for s in tid if s not in pos]
    if missing:
        raise ValidationError(f"no prediction for subject(s) {', '.join(missing[:5])}")
    P = P[[pos[s] for s in tid]]
    rows = None
    if args.subjects:
        want = [s.strip() for s in args.subjects.split(",")]
        tpos = {s: i for i, s in enumerate(tid)}
        rows = [tpos[s] for s in want]
    value = mse(P, Q, rows, mode="curve")
    doc = {"mse": value, "n_subjects": len(tid) if rows is None else len(rows), "n_points": int(Q.shape[1])}
    (out / "eval.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"MSE {value:.6g}")


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _grid_opts(p):
    p.add_argument("--T", type=int, default=51, help="grid size")
    p.add_argument("--t-min", type=float, default=None)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--K", type=int, default=7, help="number of basis functions")
    p.add_argument("--degree", type=int, default=3)


def _solver_opts(p):
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--no-center", action="store_true", help="do not subtract the mean curve")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="longimpute", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--replay", metavar="MANIFEST", help="repeat the run recorded in a manifest")
    parser.add_argument("--out", help="output directory (with --replay)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a synthetic study")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--K", type=int, default=7)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--t-gen", type=int, default=31)
    p.add_argument("--t-fit", type=int, default=51)
    p.add_argument("--obs-fraction", type=float, default=0.10)
    p.add_argument("--noise-sd", type=float, default=0.25)
    p.add_argument("--shared-mask", action="store_true")

    p = sub.add_parser("fit", help="soft/hard completion along a lambda path")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variable", default="Y")
    p.add_argument("--method", choices=("soft", "hard"), default="soft")
    p.add_argument("--lambda-grid", default=None)
    p.add_argument("--select-lambda", type=float, default=None, help="lambda whose curves are written")
    _grid_opts(p)
    _solver_opts(p)

    p = sub.add_parser("impute", help="trajectories from a fit directory")
    p.add_argument("--in", dest="input", required=True, help="output directory of 'fit'")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", default=None, help="comma-separated subject ids (default: all)")
    p.add_argument("--lambda-index", type=int, default=-1)
    p.add_argument("--variable", default="Y")

    p = sub.add_parser("regress", help="sparse (longitudinal) regression")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--response", default="Y")
    p.add_argument("--covariates", default="", help="comma-separated sparse covariate variables")
    p.add_argument("--design", default=None, help="CSV of fixed covariates: subject_id,x1,...")
    p.add_argument("--lambda-grid", default=None)
    p.add_argument("--step1-lambda", type=float, default=None)
    p.add_argument("--d2", type=int, default=None, help="number of latent scores kept")
    _grid_opts(p)
    _solver_opts(p)

    p = sub.add_parser("embed", help="joint low-rank embedding of several variables")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variables", default="")
    p.add_argument("--lambda-grid", default=None)
    p.add_argument("--select-lambda", type=float, default=None)
    _grid_opts(p)
    _solver_opts(p)

    p = sub.add_parser("cv", help="cross-validate a lambda or rank grid")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variable", default="Y")
    p.add_argument("--method", choices=("soft", "hard", "regression", "multivariate"), default="soft")
    p.add_argument("--grid", required=True)
    p.add_argument("--grid-kind", choices=("lambda", "rank"), default="lambda")
    p.add_argument("--covariates", default=None)
    p.add_argument("--fractions", default="0.81,0.09,0.10")
    p.add_argument("--min-visits", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--truth", default=None, help="wide truth CSV for curve-mode scoring")
    _grid_opts(p)
    _solver_opts(p)

    p = sub.add_parser("eval", help="score predicted curves against truth")
    p.add_argument("--pred", required=True, help="wide curves CSV or a fit output directory")
    p.add_argument("--truth", required=True, help="wide truth CSV or a simulate output directory")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", default=None)
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "impute": cmd_impute,
    "regress": cmd_regress,
    "embed": cmd_embed,
    "cv": cmd_cv,
    "eval": cmd_eval,
}


def _replay_argv(manifest_path: str, out: str | None) -> list[str]:
    doc = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    argv = list(doc["argv"])
    if out is not None:
        i = argv.index("--out")
        argv[i + 1] = out
    return argv


def _validate(args):
    for name in ("T", "K", "n", "max_iter", "trials", "jobs"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            raise ValidationError(f"--{name.replace('_', '-')} must be >= 1")
    eps = getattr(args, "eps", None)
    if eps is not None and not eps > 0:
        raise ValidationError("--eps must be > 0")


def _manifest(args, argv) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in ("replay", "verbose")}
    return {
        "command": args.command,
        "argv": argv,
        "config": config,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "kernel_backend": _kernels.BACKEND,
    }


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.replay:
            argv = _replay_argv(args.replay, args.out)
            args = parser.parse_args(argv)
        if args.command is None:
            raise ValidationError("a subcommand is required: " + ", ".join(COMMANDS))
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        _validate(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, out)
        (out / "manifest.json").write_text(json.dumps(_manifest(args, argv), indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
