"""Command-line entry point.

Subcommands: train, predict, eval, imbalance, generate, bench. Exit
codes: 0 success, 2 usage or argument errors, 3 data errors, 4 numeric
failures. The ODD_THREADS environment variable caps worker threads for
multi-run commands; results are aggregated in run order, so the thread
count never changes any output byte.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from oddkit import baselines, classifier, data, metrics, report
from oddkit.classifier import ModelFormatError, OddConfig
from oddkit.data import DataError, Dataset
from oddkit.numerics import InvalidInputError, SingularMatrixError
from oddkit.optim import OptimizerConfig

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

ODD_VARIANTS = ("odd1", "oddl", "oddn")
ALL_VARIANTS = ODD_VARIANTS + ("dlda", "centroid")
GENERATORS = ("db1", "db2", "db3")


class UsageError(ValueError):
    pass


def worker_count() -> int:
    raw = os.environ.get("ODD_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def derive_seed(seed: int, index: int) -> int:
    """Per-run child seed from a splittable counter over (seed, index)."""
    return int(np.random.SeedSequence([int(seed), int(index)])
               .generate_state(1, np.uint64)[0])


def odd_config_for(variant: str, args, seed: int) -> OddConfig:
    if variant == "odd1":
        p, nonlinearity = 1, "linear"
    elif variant == "oddl":
        p, nonlinearity = None, "linear"
    elif variant == "oddn":
        p, nonlinearity = None, "tanh"
    else:
        raise UsageError(f"not an optimizer-trained variant: {variant}")
    if getattr(args, "p", None) is not None:
        p = args.p
    if getattr(args, "nonlinearity", None) is not None:
        nonlinearity = args.nonlinearity
    opt = OptimizerConfig(
        dim=1,
        population=getattr(args, "population", None),
        max_iters=getattr(args, "max_iters", None),
        stall_tolerance=getattr(args, "stall_tol", None) or 1e-3,
        initial_step=getattr(args, "initial_step", None) or 0.3,
    )
    return OddConfig(p=p, nonlinearity=nonlinearity,
                     gamma=getattr(args, "gamma", 1.0) or 1.0,
                     optimizer=opt, seed=seed)


def load_dataset(args, split: str = "train", seed=None) -> Dataset:
    if getattr(args, "gen", None):
        name = args.gen
        gen_seed = seed if seed is not None else args.seed
        scale = getattr(args, "scale", 1.0)
        if name == "db1":
            return data.gen_db1(gen_seed, train=(split == "train"), scale=scale)
        if name == "db2":
            return data.gen_db2(gen_seed, train=(split == "train"), scale=scale)
        if name == "db3":
            train, test = data.gen_db3(gen_seed, scale=scale)
            return train if split == "train" else test
        raise UsageError(f"unknown generator {name!r} "
                         f"(choose from {', '.join(GENERATORS)})")
    if not getattr(args, "data", None):
        raise UsageError("need --data or --gen")
    label = args.label if args.label is not None else -1
    if isinstance(label, str) and args.no_header:
        try:
            label = int(label)
        except ValueError:
            raise UsageError("--label must be an index with --no-header")
    return data.load_csv(args.data, label_column=label,
                         has_header=not args.no_header)


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def aligned_table(header, rows) -> str:
    cells = [list(header)] + [
        [f"{v:.4f}" if isinstance(v, float) else ("" if v is None else str(v))
         for v in row]
        for row in rows
    ]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    for i, row in enumerate(cells):
        lines.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _fit_variant(variant: str, train_ds: Dataset, args, seed: int):
    """Fit one variant on a normalized training set; returns a scoring
    closure plus metadata."""
    if variant in ODD_VARIANTS:
        config = odd_config_for(variant, args, seed)
        model = classifier.fit(train_ds.X, train_ds.labels, config,
                               class_names=train_ds.class_names)
        return model, lambda X: classifier.predict_scores(model, X)
    if variant == "dlda":
        model = baselines.dlda_fit(train_ds.X, train_ds.labels,
                                   class_names=train_ds.class_names)
        return model, lambda X: baselines.dlda_scores(model, X)
    if variant == "centroid":
        model = baselines.centroid_fit(train_ds.X, train_ds.labels)
        return model, lambda X: baselines.centroid_scores(model, X)
    raise UsageError(f"unknown variant {variant!r}")


def _eval_one_run(variant: str, base: Dataset | None, args, run: int):
    """One protocol run: split (or generate), normalize on train, fit,
    score both splits. Returns a result dict; failures are recorded,
    not raised."""
    seed = derive_seed(args.seed, run)
    t0 = time.perf_counter()
    try:
        if base is None:
            train_raw = load_dataset(args, "train", seed=seed)
            test_raw = load_dataset(args, "test", seed=seed)
        else:
            train_raw, test_raw = data.stratified_split(
                base, args.train_fraction, seed)
        state = data.fit_normalization(train_raw)
        train_ds = data.apply_normalization(state, train_raw)
        test_ds = data.apply_normalization(state, test_raw)
        _, score = _fit_variant(variant, train_ds, args, seed)
        train_auc = metrics.macro_auc(score(train_ds.X), train_ds.labels)
        test_auc = metrics.macro_auc(score(test_ds.X), test_ds.labels)
        error = None
    except (baselines.SingularScatterError, SingularMatrixError,
            DataError, InvalidInputError) as exc:
        train_auc = test_auc = None
        error = f"{type(exc).__name__}: {exc}"
    wall_ms = (time.perf_counter() - t0) * 1000.0
    return {
        "variant": variant,
        "run": run,
        "seed": seed,
        "train_auc": train_auc,
        "test_auc": test_auc,
        "wall_ms": wall_ms,
        "error": error,
    }


def cmd_eval(args) -> int:
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in ALL_VARIANTS:
            raise UsageError(f"unknown variant {v!r}")
    if args.runs < 1:
        raise UsageError("--runs must be >= 1")
    base = None if args.gen else load_dataset(args)
    os.makedirs(args.out_dir, exist_ok=True)

    jobs = [(v, run) for v in variants for run in range(args.runs)]
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda job: _eval_one_run(job[0], base, args, job[1]), jobs))
    else:
        results = [_eval_one_run(v, base, args, run) for v, run in jobs]
    results.sort(key=lambda r: (variants.index(r["variant"]), r["run"]))

    run_rows = [(r["variant"], r["run"], r["seed"], r["train_auc"],
                 r["test_auc"], r["wall_ms"]) for r in results]
    write_csv(os.path.join(args.out_dir, "eval_runs.csv"),
              ["variant", "run", "seed", "train_macro_auc",
               "test_macro_auc", "wall_ms"], run_rows)
    with open(os.path.join(args.out_dir, "eval_runs.jsonl"), "w",
              encoding="utf-8") as fh:
        for r in results:
            fh.write(json.dumps(r, sort_keys=True) + "\n")

    summary_rows = []
    stats_by_variant = {}
    for v in variants:
        ok = [r for r in results if r["variant"] == v and r["error"] is None]
        failed = sum(1 for r in results if r["variant"] == v and r["error"])
        if ok:
            tr = metrics.RunStats.from_values([r["train_auc"] for r in ok])
            te = metrics.RunStats.from_values([r["test_auc"] for r in ok])
            stats_by_variant[v] = te
            summary_rows.append((v, len(ok), failed, tr.mean, tr.std,
                                 te.mean, te.std,
                                 metrics.g_index(tr.mean, te.mean)))
        else:
            summary_rows.append((v, 0, failed, None, None, None, None, None))
    header = ["variant", "runs_ok", "runs_failed", "mean_train_auc",
              "std_train_auc", "mean_test_auc", "std_test_auc", "g_index"]
    write_csv(os.path.join(args.out_dir, "eval_summary.csv"),
              header, summary_rows)
    table = aligned_table(header, summary_rows)
    print(table)
    with open(os.path.join(args.out_dir, "eval_summary.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(table + "\n")

    if len(variants) >= 2 and args.runs >= 2:
        t_rows = []
        for i, va in enumerate(variants):
            for vb in variants[i + 1:]:
                if va in stats_by_variant and vb in stats_by_variant:
                    res = metrics.t_test(stats_by_variant[va],
                                         stats_by_variant[vb])
                    verdict = {"a>b": va, "b>a": vb,
                               "equal": ""}[res.direction]
                    t_rows.append((va, vb, res.t_stat, res.dof, res.p_value,
                                   res.significant, verdict))
                else:
                    t_rows.append((va, vb, None, None, None, None, None))
        write_csv(os.path.join(args.out_dir, "eval_ttests.csv"),
                  ["variant_a", "variant_b", "t_stat", "dof", "p_value",
                   "significant", "larger"], t_rows)

    if not args.no_figures:
        report.render_eval(os.path.join(args.out_dir, "eval_auc.png"), results)
    if all(r["error"] for r in results):
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_train(args) -> int:
    raw = load_dataset(args)
    state = data.fit_normalization(raw)
    train_ds = data.apply_normalization(state, raw)
    t0 = time.perf_counter()
    meta = {"variant": args.variant, "seed": args.seed}
    if args.variant == "dlda":
        model = baselines.dlda_fit(train_ds.X, train_ds.labels,
                                   class_names=train_ds.class_names)
        model = replace(model, preprocess=state)
        baselines.save_dlda(model, args.out)
    else:
        config = odd_config_for(args.variant, args, args.seed)
        model = classifier.fit(train_ds.X, train_ds.labels, config,
                               class_names=train_ds.class_names)
        model = replace(model, preprocess=state)
        classifier.save_model(model, args.out)
        meta.update({
            "objective_initial": model.objective_initial,
            "objective_final": model.objective_final,
            "iterations": model.report.iterations_used,
            "evaluations": model.report.evaluations,
            "termination": model.report.termination_reason,
        })
        trace_path = args.trace_csv or args.out + ".trace.csv"
        write_csv(trace_path, ["iteration", "best_value"],
                  list(enumerate(model.report.trace, start=1)))
        if not args.no_figures:
            report.render_trace(args.out + ".trace.png", model.report.trace,
                                title=f"{args.variant} objective trace")
    meta["wall_ms"] = (time.perf_counter() - t0) * 1000.0
    with open(args.out + ".meta.jsonl", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(meta, sort_keys=True) + "\n")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    with open(args.model, encoding="utf-8") as fh:
        magic = fh.readline().strip()
    ds = load_dataset(args)
    if magic == classifier.MODEL_MAGIC:
        model = classifier.load_model(args.model)
        if model.preprocess is not None:
            ds = data.apply_normalization(model.preprocess, ds)
        scores = classifier.predict_scores(model, ds.X)
        labels = classifier.predict_labels(model, ds.X)
        names = model.class_names
        inventory = model.class_inventory
    elif magic == baselines.DLDA_MAGIC:
        model = baselines.load_dlda(args.model)
        if model.preprocess is not None:
            ds = data.apply_normalization(model.preprocess, ds)
        scores = baselines.dlda_scores(model, ds.X)
        labels = np.asarray(model.class_inventory)[scores.argmax(axis=1)]
        names = model.class_names
        inventory = model.class_inventory
    else:
        raise ModelFormatError(f"{args.model}: unknown model header {magic!r}")
    header = [f"score_{names[i] if names else k}"
              for i, k in enumerate(inventory)] + ["label"]
    rows = []
    for i in range(scores.shape[0]):
        lab = labels[i]
        shown = names[list(inventory).index(lab)] if names else lab
        rows.append(tuple(float(s) for s in scores[i]) + (shown,))
    write_csv(args.out, header, rows)
    print(f"wrote {args.out}")
    return EXIT_OK


def _imbalance_cell(variant: str, base: Dataset, args, r: float):
    aucs_train, aucs_test = [], []
    for run in range(args.runs):
        seed = derive_seed(args.seed, run)
        train_raw, test_raw = data.imbalance_split(base, 0.7, r, seed)
        state = data.fit_normalization(train_raw)
        train_ds = data.apply_normalization(state, train_raw)
        test_ds = data.apply_normalization(state, test_raw)
        _, score = _fit_variant(variant, train_ds, args, seed)
        aucs_train.append(metrics.macro_auc(score(train_ds.X), train_ds.labels))
        aucs_test.append(metrics.macro_auc(score(test_ds.X), test_ds.labels))
    tr = metrics.RunStats.from_values(aucs_train)
    te = metrics.RunStats.from_values(aucs_test)
    return {
        "variant": variant, "r": r, "runs": args.runs,
        "mean_train_auc": tr.mean, "std_train_auc": tr.std,
        "mean_test_auc": te.mean, "std_test_auc": te.std,
    }


def cmd_imbalance(args) -> int:
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in ALL_VARIANTS:
            raise UsageError(f"unknown variant {v!r}")
    r_values = [float(v) for v in args.r_values.split(",")]
    if not r_values or any(not 0.0 < r <= 1.0 for r in r_values):
        raise UsageError("r values must lie in (0, 1]")
    if args.data is None:
        args.data = str(data.bundled_path("cg_like.csv"))
    base = load_dataset(args)
    os.makedirs(args.out_dir, exist_ok=True)

    jobs = [(v, r) for v in variants for r in r_values]
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(
                lambda job: _imbalance_cell(job[0], base, args, job[1]), jobs))
    else:
        cells = [_imbalance_cell(v, base, args, r) for v, r in jobs]
    cells.sort(key=lambda c: (variants.index(c["variant"]), c["r"]))

    header = ["variant", "r", "runs", "mean_train_auc", "std_train_auc",
              "mean_test_auc", "std_test_auc"]
    rows = [tuple(c[h] for h in header) for c in cells]
    write_csv(os.path.join(args.out_dir, "imbalance.csv"), header, rows)
    table = aligned_table(header, rows)
    print(table)
    with open(os.path.join(args.out_dir, "imbalance.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(table + "\n")
    if not args.no_figures:
        report.render_imbalance(
            os.path.join(args.out_dir, "imbalance.png"), cells)
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.generator not in GENERATORS:
        raise UsageError(f"unknown generator {args.generator!r} "
                         f"(choose from {', '.join(GENERATORS)})")
    ds = load_dataset(argparse.Namespace(
        gen=args.generator, seed=args.seed, scale=args.scale,
        data=None, label=None, no_header=False), split=args.split)
    data.save_csv(ds, args.out)
    print(f"wrote {args.out} ({ds.m} rows, {ds.n} features, "
          f"{ds.n_classes} classes)")
    return EXIT_OK


def cmd_bench(args) -> int:
    from oddkit.core import objective, unpack_params
    from oddkit.optim import bfgs_minimize, cmaes_minimize, es_minimize

    k = args.k
    n = max(1, args.nv // k - 1)
    n_v = (n + 1) * k
    rng = np.random.default_rng(args.seed)
    m = 30 * k
    X = rng.normal(0.0, 1.0, (m, n)) + np.repeat(
        rng.normal(0.0, 2.0, (k, n)), 30, axis=0)
    labels = np.repeat(np.arange(k), 30)

    def flat_objective(flat):
        return objective(unpack_params(flat, n + 1, k), X, labels, 1.0).value

    start = rng.normal(0.0, 1.0 / math.sqrt(n + 1), n_v)
    rows = []
    for method, runner in (
        ("es", lambda cfg: es_minimize(flat_objective, cfg, start=start)),
        ("cmaes", lambda cfg: cmaes_minimize(flat_objective, cfg, start=start)),
        ("bfgs", lambda cfg: bfgs_minimize(flat_objective, start, cfg)),
    ):
        cfg = OptimizerConfig(dim=n_v, max_iters=args.iters,
                              seed=args.seed, stall_tolerance=1e-12)
        t0 = time.perf_counter()
        rep = runner(cfg)
        elapsed = (time.perf_counter() - t0) * 1000.0
        iters = max(1, sum(rep.iterations_used.values()))
        rows.append({"method": method, "n_v": n_v, "k": k,
                     "ms_per_iter": elapsed / iters})
    os.makedirs(args.out_dir, exist_ok=True)
    header = ["method", "n_v", "k", "ms_per_iter"]
    write_csv(os.path.join(args.out_dir, "bench.csv"),
              header, [tuple(r[h] for h in header) for r in rows])
    print(aligned_table(header, [tuple(r[h] for h in header) for r in rows]))
    if not args.no_figures:
        report.render_bench(os.path.join(args.out_dir, "bench.png"), rows)
    return EXIT_OK


def _add_data_args(sp, with_split: bool = False):
    sp.add_argument("--data", help="CSV file with a label column")
    sp.add_argument("--gen", help="synthetic generator name (db1, db2, db3)")
    sp.add_argument("--label", default=None,
                    help="label column name (or index; default: last column)")
    sp.add_argument("--no-header", action="store_true",
                    help="CSV has no header row")
    sp.add_argument("--scale", type=float, default=1.0,
                    help="class-count scale factor for generators")
    if with_split:
        sp.add_argument("--split", choices=("train", "test"), default="train")


def _add_optimizer_args(sp):
    sp.add_argument("--p", type=int, help="projection width override")
    sp.add_argument("--nonlinearity", choices=("linear", "tanh"))
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--max-iters", type=int, dest="max_iters")
    sp.add_argument("--population", type=int)
    sp.add_argument("--stall-tol", type=float, dest="stall_tol")
    sp.add_argument("--initial-step", type=float, dest="initial_step")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oddkit",
        description="Distribution-difference classifier toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train", help="fit one model and save it")
    _add_data_args(sp, with_split=True)
    _add_optimizer_args(sp)
    sp.add_argument("--variant", choices=ODD_VARIANTS + ("dlda",),
                    default="oddl")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="model file path")
    sp.add_argument("--trace-csv", help="objective trace CSV path")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="score a CSV with a saved model")
    _add_data_args(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True, help="scores CSV path")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("eval", help="repeated-split evaluation protocol")
    _add_data_args(sp)
    _add_optimizer_args(sp)
    sp.add_argument("--variants", default="oddl",
                    help="comma list from odd1,oddl,oddn,dlda,centroid")
    sp.add_argument("--runs", type=int, default=50)
    sp.add_argument("--train-fraction", type=float, default=0.7,
                    dest="train_fraction")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", required=True, dest="out_dir")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("imbalance",
                        help="minority-fraction sweep on a binary dataset")
    _add_data_args(sp)
    _add_optimizer_args(sp)
    sp.add_argument("--variants", default="odd1,centroid")
    sp.add_argument("--runs", type=int, default=50)
    sp.add_argument("--r-values", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7",
                    dest="r_values")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", required=True, dest="out_dir")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_imbalance)

    sp = sub.add_parser("generate", help="write a synthetic dataset CSV")
    sp.add_argument("generator", help="db1, db2, or db3")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--split", choices=("train", "test"), default="train")
    sp.add_argument("--scale", type=float, default=1.0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("bench", help="optimizer iteration timing")
    sp.add_argument("--nv", type=int, default=100)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--iters", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", default=".", dest="out_dir")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (baselines.SingularScatterError, SingularMatrixError,
            InvalidInputError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
