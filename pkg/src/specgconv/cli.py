"""Batch command-line front end.

Three subcommands: ``analyze`` back-calculates frequency profiles of a kernel
on a graph and writes plot-ready CSVs; ``train`` runs a full experiment from
a JSON config (transductive or cross-validated multi-graph); ``gradcheck``
verifies every layer/loss gradient against central finite differences.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 acceptance
check failure. The eigendecomposition cache directory is taken from the
``SPECGCONV_CACHE`` environment variable when set.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import __version__
from .analysis import export_profile, gat_profile_stats, profile
from .data import load_single_graph, load_tu_dataset, save_matrix_csv
from .filters import CayleyBasis, LowPass, coverage, format_design, gcn_cutoff, parse_design
from .graphs import LaplacianKind, average_degree, build_laplacian, make_ring
from .kernels import (
    cheb_kernels,
    design_kernelset,
    gat_sample_kernel,
    gcn_kernel,
)
from .nn import (
    TrainConfig,
    TrainingDiverged,
    crossvalidate,
    gradcheck_suite,
    parse_architecture,
    save_checkpoint,
    train,
)
from .spectral import decompose

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CHECK_FAILED = 4


class ConfigError(Exception):
    pass


def _cache_dir():
    return os.environ.get("SPECGCONV_CACHE") or None


def _laplacian_kind(name: str) -> LaplacianKind:
    try:
        return {"sym": LaplacianKind.SYM_NORMALIZED, "comb": LaplacianKind.COMBINATORIAL}[name]
    except KeyError:
        raise ConfigError(f"unknown Laplacian kind {name!r} (use sym or comb)") from None


def _load_graph(spec: str):
    if spec.startswith("ring"):
        try:
            n = int(spec[4:])
        except ValueError:
            raise ConfigError(f"bad ring size in {spec!r}") from None
        return make_ring(n)
    if not os.path.isdir(spec):
        raise ConfigError(f"graph {spec!r} is neither ring<N> nor a dataset directory")
    return load_single_graph(spec).graph


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _build_kernels(arg: str, graph, basis):
    """Kernel spec grammar: gcn | cheb:<k> | cayley:<h>:<r> | design:<expr> | gat:<seed>."""
    head, _, rest = arg.partition(":")
    if head == "gcn":
        return [gcn_kernel(graph)], ["gcn"]
    if head == "cheb":
        ks = cheb_kernels(build_laplacian(graph, basis.kind), basis.lambda_max, int(rest))
        return list(ks.supports), [f"cheb_{k + 1}" for k in range(ks.n_kernels)]
    if head == "cayley":
        h_str, _, r_str = rest.partition(":")
        h, r = float(h_str), int(r_str)
        designs = [CayleyBasis(s=s, h=h, r=r) for s in range(1, 2 * r + 2)]
        ks = design_kernelset(basis, designs)
        return list(ks.supports), [f"cayley_{s}" for s in range(1, 2 * r + 2)]
    if head == "design":
        designs = [parse_design(t) for t in rest.split(";") if t]
        if not designs:
            raise ConfigError("design: needs at least one filter expression")
        ks = design_kernelset(basis, designs)
        return list(ks.supports), [format_design(d) for d in designs]
    if head == "gat":
        kernels = gat_sample_kernel(graph, heads=1, seed=int(rest))
        return kernels, [f"gat_{rest}"]
    raise ConfigError(f"unknown kernel spec {arg!r}")


def cmd_analyze(args) -> int:
    graph = _load_graph(args.graph)
    kind = _laplacian_kind(args.laplacian)
    basis = decompose(build_laplacian(graph, kind), kind, cache_dir=_cache_dir())
    os.makedirs(args.out, exist_ok=True)

    d_bar = average_degree(graph)
    summary = {
        "graph": args.graph,
        "n": graph.n,
        "kernel": args.kernel,
        "laplacian": args.laplacian,
        "lambda_max": basis.lambda_max,
        "average_degree": d_bar,
        "gcn_cutoff_predicted": gcn_cutoff(d_bar),
        "version": __version__,
    }

    if args.kernel.startswith("gat") and args.trials > 1:
        seed = int(args.kernel.partition(":")[2] or 0)
        stats = gat_profile_stats(graph, trials=args.trials, seed=seed, basis=basis)
        save_matrix_csv(os.path.join(args.out, "gat_mean_standard.csv"),
                        np.column_stack([stats["lambda"], stats["mean_standard"]]))
        save_matrix_csv(os.path.join(args.out, "gat_std_standard.csv"),
                        np.column_stack([stats["lambda"], stats["std_standard"]]))
        save_matrix_csv(os.path.join(args.out, "gat_mean_full.csv"), stats["mean_full"])
        save_matrix_csv(os.path.join(args.out, "gat_std_full.csv"), stats["std_full"])
        summary["trials"] = args.trials
    else:
        supports, names = _build_kernels(args.kernel, graph, basis)
        for i, (C, name) in enumerate(zip(supports, names), start=1):
            p = profile(C, basis, kernel_tag=name)
            export_profile(p, os.path.join(args.out, f"standard_{i}.csv"),
                           include_full=True, absolute=args.abs)
            if args.export_kernels:
                save_matrix_csv(os.path.join(args.out, f"kernel_{i}.csv"), C)
        summary["kernels"] = names

    with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    print(f"analyze: wrote profiles for {args.kernel} to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _train_config(cfg: dict, args) -> TrainConfig:
    t = dict(cfg.get("train", {}))
    for key, val in (("epochs", args.epochs), ("learning_rate", args.lr), ("seed", args.seed)):
        if val is not None:
            t[key] = val
    try:
        return TrainConfig(**t)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad train config: {exc}") from None


def _experiment_parts(cfg: dict, base_dir: str):
    try:
        ds = cfg["dataset"]
        path, kind = ds["path"], ds.get("kind", "single")
        designs = [parse_design(t, base_dir=base_dir) for t in cfg["designs"]]
        arch = cfg["architecture"]
    except KeyError as exc:
        raise ConfigError(f"config is missing field {exc.args[0]!r}") from None
    if not designs:
        raise ConfigError("designs must be non-empty")
    if not os.path.isabs(path):
        path = os.path.join(base_dir, path)
    try:
        spec = parse_architecture(
            arch,
            output_activation=cfg.get("output_activation", "linear"),
            hidden_bias=cfg.get("hidden_bias", False),
            output_bias=cfg.get("output_bias", True),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    lap = _laplacian_kind(cfg.get("laplacian", "sym"))
    return path, kind, ds, designs, arch, spec, lap


def _coverage_warning(designs, basis):
    cov = coverage(designs, basis)
    if cov < 0.01:
        warnings.warn(
            f"designed responses cover the spectrum poorly (min sum {cov:.3g} < 0.01)"
        )
    return cov


def _provenance(out_dir, cfg, tconfig, extra):
    from .nn import ADAM_BETA1, ADAM_BETA2, ADAM_EPS

    doc = {
        "config": cfg,
        "resolved_seed": tconfig.seed,
        "version": __version__,
        "numpy": np.__version__,
        "optimizer": {"name": "adam", "beta1": ADAM_BETA1, "beta2": ADAM_BETA2,
                      "eps": ADAM_EPS},
        **extra,
    }
    with open(os.path.join(out_dir, "provenance.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, default=str)


def _write_metrics_csv(path, metrics):
    cols = ["epoch", "train_loss", "train_acc", "val_loss", "val_acc"]
    extra = [c for c in ("test_loss", "test_acc") if metrics and c in metrics[0]]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols + extra) + "\n")
        for row in metrics:
            fh.write(",".join(str(row.get(c, "")) for c in cols + extra) + "\n")


def _run_transductive(cfg, spec, designs, lap, dataset, tconfig, out_dir):
    basis = decompose(build_laplacian(dataset.graph, lap), lap, cache_dir=_cache_dir())
    cov = _coverage_warning(designs, basis)

    sweep = cfg.get("sweep_eta")
    if sweep:
        return _run_eta_sweep(cfg, spec, designs, dataset, basis, tconfig, out_dir, sweep, cov)
    kernels = design_kernelset(basis, designs)

    result = train(spec, kernels, dataset, tconfig, track_test=True)
    _write_metrics_csv(os.path.join(out_dir, "metrics.csv"), result.metrics)
    save_checkpoint(result.params, os.path.join(out_dir, "checkpoint.json"))
    last = result.metrics[-1]
    best_val = max(result.metrics, key=lambda m: m.get("val_acc", 0.0))
    final = {
        "test_accuracy": last.get("test_acc"),
        "test_accuracy_at_best_val": best_val.get("test_acc"),
        "best_val_epoch": best_val["epoch"],
        "final": last,
        "optimizer": result.optimizer,
        "coverage": cov,
    }
    with open(os.path.join(out_dir, "result.json"), "w", encoding="utf-8") as fh:
        json.dump(final, fh, indent=2)
    _provenance(out_dir, cfg, tconfig,
                {"lambda_max": basis.lambda_max, "average_degree": average_degree(dataset.graph)})
    print(f"train: test accuracy {last.get('test_acc')}")
    return EXIT_OK


def _run_eta_sweep(cfg, spec, designs, dataset, basis, tconfig, out_dir, sweep, cov):
    """Re-train with each low-pass exponent; select by minimum validation loss."""
    rows = []
    for eta in sweep:
        swapped = [LowPass(eta=float(eta)) if isinstance(d, LowPass) else d for d in designs]
        ks = design_kernelset(basis, swapped)
        result = train(spec, ks, dataset, tconfig, track_test=True)
        min_val_loss = min(m["val_loss"] for m in result.metrics)
        max_val_acc = max(m["val_acc"] for m in result.metrics)
        rows.append({"eta": eta, "min_val_loss": min_val_loss, "max_val_acc": max_val_acc})
        print(f"eta={eta}: min val loss {min_val_loss:.4f}, max val acc {max_val_acc:.4f}")
    best = min(rows, key=lambda r: r["min_val_loss"])
    doc = {"sweep": rows, "selected_eta": best["eta"], "criterion": "min_val_loss"}
    with open(os.path.join(out_dir, "sweep.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
    _provenance(out_dir, cfg, tconfig, {"lambda_max": basis.lambda_max, "coverage": cov})
    print(f"sweep: selected eta={best['eta']}")
    return EXIT_OK


def _run_inductive(cfg, spec, designs, lap, dataset, tconfig, out_dir):
    kernelsets = []
    cov = None
    lambda_maxes, degrees = [], []
    for g in dataset.graphs:
        basis = decompose(build_laplacian(g, lap), lap, cache_dir=_cache_dir())
        if cov is None:
            cov = _coverage_warning(designs, basis)
        lambda_maxes.append(basis.lambda_max)
        degrees.append(average_degree(g))
        kernelsets.append(design_kernelset(basis, designs))
    cv_cfg = cfg.get("cv", {})
    result = crossvalidate(
        dataset, kernelsets, spec, tconfig,
        folds=int(cv_cfg.get("folds", 10)), repeats=int(cv_cfg.get("repeats", 1)),
    )
    final = {
        "cv_mean_accuracy": result.mean,
        "cv_std_accuracy": result.std,
        "std_defined": result.std_defined,
        "repeat_accuracies": result.repeat_accuracies,
        "best_epochs": result.best_epochs,
        "coverage": cov,
    }
    with open(os.path.join(out_dir, "result.json"), "w", encoding="utf-8") as fh:
        json.dump(final, fh, indent=2)
    _provenance(out_dir, cfg, tconfig, {
        "n_graphs": len(dataset),
        "lambda_max": lambda_maxes,
        "average_degree": degrees,
    })
    print(f"train: CV accuracy {result.mean:.4f} +/- {result.std:.4f}")
    return EXIT_OK


def cmd_train(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    base_dir = os.path.dirname(os.path.abspath(args.config))
    path, kind, ds, designs, arch, spec, lap = _experiment_parts(cfg, base_dir)
    tconfig = _train_config(cfg, args)
    out_dir = args.out or cfg.get("output_dir") or "run"
    if not os.path.isabs(out_dir):
        out_dir = os.path.join(base_dir, out_dir)
    os.makedirs(out_dir, exist_ok=True)

    if kind == "single":
        dataset = load_single_graph(path)
        n_classes = dataset.n_classes
        final_width = spec.widths(dataset.graph.features.shape[1])[-1]
        if tconfig.loss == "softmax_ce" and final_width != n_classes:
            raise ConfigError(
                f"architecture {arch!r} ends with width {final_width}, dataset has {n_classes} classes"
            )
        return _run_transductive(cfg, spec, designs, lap, dataset, tconfig, out_dir)
    if kind == "tu":
        dataset = load_tu_dataset(path, use_attributes=bool(ds.get("use_attributes", False)))
        return _run_inductive(cfg, spec, designs, lap, dataset, tconfig, out_dir)
    raise ConfigError(f"unknown dataset kind {kind!r} (use single or tu)")


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------

def cmd_gradcheck(args) -> int:
    failures = 0
    for name, err in gradcheck_suite(seed=args.seed):
        status = "OK" if err < 1e-5 else "FAIL"
        if status == "FAIL":
            failures += 1
        print(f"{status:4s} {name:48s} max rel err {err:.3e}")
    if failures:
        print(f"gradcheck: {failures} case(s) above 1e-5")
        return EXIT_CHECK_FAILED
    print("gradcheck: all cases pass")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specgconv",
        description="Spectral-designed graph convolutions: analysis and training.",
    )
    parser.add_argument("--strict-repro", action="store_true",
                        help="force single-threaded BLAS for bitwise-reproducible runs")
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="back-calculate kernel frequency profiles")
    pa.add_argument("--graph", required=True, help="ring<N> or a single-graph dataset directory")
    pa.add_argument("--kernel", required=True,
                    help="gcn | cheb:<k> | cayley:<h>:<r> | design:<expr>[;<expr>...] | gat:<seed>")
    pa.add_argument("--laplacian", default="sym", choices=("sym", "comb"))
    pa.add_argument("--trials", type=int, default=1,
                    help="with gat kernels: number of sampled kernels for mean/std profiles")
    pa.add_argument("--abs", action="store_true", help="export absolute values (plotting)")
    pa.add_argument("--export-kernels", action="store_true",
                    help="also write each support matrix as kernel_<i>.csv")
    pa.add_argument("--out", default="analysis", help="output directory")
    pa.set_defaults(func=cmd_analyze)

    pt = sub.add_parser("train", help="run a training experiment from a JSON config")
    pt.add_argument("--config", required=True)
    pt.add_argument("--epochs", type=int, default=None, help="override config epochs")
    pt.add_argument("--lr", type=float, default=None, help="override learning rate")
    pt.add_argument("--seed", type=int, default=None, help="override seed")
    pt.add_argument("--out", default=None, help="override output directory")
    pt.set_defaults(func=cmd_train)

    pg = sub.add_parser("gradcheck", help="finite-difference check of all layer/loss gradients")
    pg.add_argument("--seed", type=int, default=0)
    pg.set_defaults(func=cmd_gradcheck)
    return parser


def _limit_blas_threads() -> None:
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(1)
    except ImportError:
        warnings.warn("threadpoolctl unavailable; cannot pin BLAS threads for strict repro")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.strict_repro:
        _limit_blas_threads()
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingDiverged, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
