"""``wearscope`` command line.

Exit codes: 0 success, 1 processing failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import svm as svm_mod
from .config import ConfigError, RunConfig, resolve
from .edgefinder import EdgeConfig, EdgeNotFoundError, find_cutting_edge
from .imageio import ImageFormatError, ManifestError, load_image, load_manifest, save_image
from .patching import PATCH_COUNTS, extract_patches, layout_for
from .texture import DESCRIPTOR_NAMES, descriptor_length, format_descriptor_line, read_descriptors
from .wearcheck import (DISPOSABLE, SvmConfig, assess_edge, descriptor_fn, emit_report, evaluate,
                        sweep_rows)
from .wearcheck import _map as map_jobs

log = logging.getLogger("wearscope")
IMAGE_SUFFIXES = (".pgm", ".png")
C_GRID = (0.1, 1.0, 10.0, 100.0)


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers

def _collect_images(paths) -> list[Path]:
    out = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            out.extend(sorted(q for q in p.iterdir() if q.suffix.lower() in IMAGE_SUFFIXES))
        elif p.exists():
            out.append(p)
        else:
            raise UsageError(f"input not found: {p}")
    return out


def _edge_config(cfg: RunConfig) -> EdgeConfig:
    return EdgeConfig(r_min=cfg["edges.rmin"], r_max=cfg["edges.rmax"], sigma=cfg["edges.sigma"],
                      low_frac=cfg["edges.low_frac"], high_frac=cfg["edges.high_frac"],
                      crop_width=cfg["edges.crop_width"],
                      vertical_tol_deg=cfg["edges.vertical_tol"],
                      left_margin=cfg["edges.left_margin"])


def _layout(cfg: RunConfig):
    return layout_for(cfg["layout.name"], cfg.layout_params())


def _svm_config(cfg: RunConfig) -> SvmConfig:
    return SvmConfig(C=cfg["svm.C"], tol=cfg["svm.tol"], max_passes=cfg["svm.max_passes"])


def _load_manifest(path):
    if not path:
        raise UsageError("--manifest is required")
    if not Path(path).exists():
        raise UsageError(f"manifest not found: {path}")
    return load_manifest(path)


def cross_validate(X: np.ndarray, y: np.ndarray, C: float, tol: float, folds: int = 5,
                   seed: int = 0, max_passes: int = 100) -> float:
    """Mean held-out accuracy over ``folds`` seeded folds."""
    order = np.random.default_rng(seed).permutation(len(y))
    parts = np.array_split(order, folds)
    accs = []
    for k in range(folds):
        test = parts[k]
        train = np.concatenate([parts[i] for i in range(folds) if i != k])
        if len(test) == 0 or len(set(y[train])) < 2:
            continue
        try:
            model = svm_mod.train(X[train], y[train], C=C, tol=tol, seed=seed,
                                  max_passes=max_passes)
        except svm_mod.ConvergenceError as exc:
            model = exc.model
        pred = np.where(model.decision_batch(X[test]) >= 0, 1, -1)
        accs.append(float(np.mean(pred == y[test])))
    return float(np.mean(accs)) if accs else float("nan")


# --------------------------------------------------------------------------
# commands

def cmd_extract_edges(args, cfg: RunConfig) -> int:
    images = _collect_images(args.inputs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    econf = _edge_config(cfg)

    def work(path):
        try:
            return path, find_cutting_edge(load_image(path), econf), None
        except (EdgeNotFoundError, ImageFormatError) as exc:
            return path, None, exc

    failures = 0
    for path, result, err in map_jobs(work, images, cfg["eval.jobs"]):
        if err is not None:
            failures += 1
            print(f"{path}: FAILED ({err})")
            if not args.keep_going:
                return 1
            continue
        target = out / f"{path.stem}_edge.pgm"
        save_image(result.image, target)
        target.with_suffix(".json").write_text(
            json.dumps({"source": str(path), **result.sidecar()}, indent=1) + "\n")
        print(f"{path}: edge at column {result.column} -> {target.name}")
    print(f"{len(images) - failures} processed, {failures} failed")
    return 1 if failures else 0


def cmd_featurize(args, cfg: RunConfig) -> int:
    manifest = _load_manifest(args.manifest)
    name, mapping = cfg["descriptor.name"], cfg["descriptor.mapping"]
    fn = descriptor_fn(name, mapping)
    entries = manifest.with_role(args.role).entries
    layout = _layout(cfg) if args.role == "edge" else None

    def work(entry):
        img = load_image(entry.path)
        imgs = extract_patches(img, layout) if layout else [img]
        return [format_descriptor_line(fn(p), entry.label) for p in imgs]

    lines = [ln for chunk in map_jobs(work, entries, cfg["eval.jobs"]) for ln in chunk]
    Path(args.out).write_text("".join(ln + "\n" for ln in lines), encoding="utf-8")
    print(f"{len(lines)} descriptors ({descriptor_length(name, mapping)} values each) "
          f"-> {args.out}")
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    if args.features:
        if not Path(args.features).exists():
            raise UsageError(f"features file not found: {args.features}")
        recs = read_descriptors(args.features)
        X = np.vstack([d.values for d, _ in recs])
        labels = [lab for _, lab in recs]
    else:
        manifest = _load_manifest(args.manifest)
        patches = manifest.with_role("patch").entries
        if not patches:
            raise UsageError("manifest has no patch entries")
        fn = descriptor_fn(cfg["descriptor.name"], cfg["descriptor.mapping"])
        X = np.vstack(map_jobs(lambda e: fn(load_image(e.path)).values, patches,
                               cfg["eval.jobs"]))
        labels = [e.label for e in patches]
    y = np.array([1 if lab == "worn" else -1 for lab in labels])
    C, tol, seed = cfg["svm.C"], cfg["svm.tol"], cfg["eval.seed"]
    if cfg["svm.tune"]:
        best = None
        for c in C_GRID:
            acc = cross_validate(X, y, c, tol, seed=seed, max_passes=cfg["svm.max_passes"])
            print(f"C={c:g}\tcv_accuracy={acc:.4f}")
            if best is None or acc > best[1]:
                best = (c, acc)
        C = best[0]
        print(f"selected C={C:g}")
    try:
        model = svm_mod.train(X, y, C=C, tol=tol, seed=seed, max_passes=cfg["svm.max_passes"])
    except svm_mod.ConvergenceError as exc:
        print(f"warning: {exc}; saving best iterate", file=sys.stderr)
        model = exc.model
    svm_mod.save_model(model, args.model)
    train_acc = float(np.mean(np.where(model.decision_batch(X) >= 0, 1, -1) == y))
    print(f"support vectors: {model.n_sv}")
    print(f"train accuracy: {train_acc:.4f}")
    return 0


def cmd_assess(args, cfg: RunConfig) -> int:
    layout = _layout(cfg)
    threshold = cfg["eval.threshold"]
    if threshold > len(layout):
        raise UsageError(f"threshold {threshold} exceeds {layout.name}'s {len(layout)} patches")
    if not Path(args.model).exists():
        raise UsageError(f"model not found: {args.model}")
    model = svm_mod.load_model(args.model)
    name, mapping = cfg["descriptor.name"], cfg["descriptor.mapping"]
    if descriptor_length(name, mapping) != model.feature_len:
        raise UsageError(f"{name} ({mapping}) has {descriptor_length(name, mapping)} values; "
                         f"model expects {model.feature_len}")
    fn = descriptor_fn(name, mapping)
    paths = _collect_images(args.inputs) if args.inputs else []
    if args.manifest:
        paths += [e.path for e in _load_manifest(args.manifest).with_role("edge")]

    def work(path):
        return assess_edge(load_image(path), layout, model, fn, threshold,
                           cfg["eval.strict"], image_id=str(path))

    results = map_jobs(work, paths, cfg["eval.jobs"])
    for a in results:
        print(f"{a.image_id}\t{a.verdict}\t{a.wear_fraction:.3f}")
    if results:
        times = [a.elapsed for a in results]
        print(f"time per insert: mean {np.mean(times):.4f} s, max {max(times):.4f} s")
    n_disp = sum(a.verdict == DISPOSABLE for a in results)
    print(f"{len(results)} assessed, {n_disp} disposable")
    if args.json:
        Path(args.json).write_text(json.dumps([a.to_dict() for a in results], indent=1) + "\n")
    return 0


def _print_rows(rows):
    print("layout\tdescriptor\tthreshold\tprecision\trecall\taccuracy\tfscore")
    for r in rows:
        print(f"{r['layout']}\t{r['descriptor']}\t{r['threshold']}\t{r['precision']:.3f}\t"
              f"{r['recall']:.3f}\t{r['accuracy']:.3f}\t{r['fscore']:.3f}")


def _run_grid(manifest, cfg: RunConfig, grid: bool, sweep: bool):
    names = DESCRIPTOR_NAMES if grid else (cfg["descriptor.name"],)
    layouts = [layout_for(n, cfg.layout_params()) for n in PATCH_COUNTS] if grid \
        else [_layout(cfg)]
    rows = []
    for name in names:
        model = None
        for layout in layouts:
            threshold = min(cfg["eval.threshold"], len(layout))
            res = evaluate(manifest, layout, name, _svm_config(cfg), threshold,
                           cfg["eval.seed"], cfg["descriptor.mapping"], cfg["eval.strict"],
                           cfg["eval.jobs"], model=model)
            model = res.model  # the patch model does not depend on the layout
            rows.extend(sweep_rows(res, cfg["eval.strict"]) if sweep else [res.row()])
    return rows


def cmd_evaluate(args, cfg: RunConfig, sweep: bool = False) -> int:
    manifest = _load_manifest(args.manifest)
    if not sweep and cfg["eval.threshold"] > len(_layout(cfg)) and not args.grid:
        raise UsageError("threshold exceeds the layout's patch count")
    rows = _run_grid(manifest, cfg, args.grid, sweep)
    _print_rows(rows)
    for out in args.out or []:
        emit_report(rows, out, args.format)
        print(f"report -> {out}")
    return 0


def cmd_sweep(args, cfg: RunConfig) -> int:
    return cmd_evaluate(args, cfg, sweep=True)


# --------------------------------------------------------------------------
# parser

def _common(p):
    p.add_argument("--config", help="INI run configuration (fallback: $WEARSCOPE_CONFIG)")
    p.add_argument("--seed", type=int, dest="eval.seed")
    p.add_argument("--jobs", type=int, dest="eval.jobs", help="worker threads")
    p.add_argument("-v", "--verbose", action="store_true")


def _layout_flags(p):
    p.add_argument("--layout", dest="layout.name", help="HGD, FED, TBD, HED or SED")
    p.add_argument("--edge-width", type=float, dest="layout.edge_width")
    p.add_argument("--band-height", type=float, dest="layout.band_height")
    p.add_argument("--sed-edge-width", type=float, dest="layout.sed_edge_width")


def _descriptor_flags(p):
    p.add_argument("--descriptor", dest="descriptor.name",
                   help=f"one of {', '.join(DESCRIPTOR_NAMES)}")
    p.add_argument("--mapping", dest="descriptor.mapping",
                   help="raw, rotation-invariant or riu2")


def _svm_flags(p):
    p.add_argument("--C", type=float, dest="svm.C")
    p.add_argument("--tol", type=float, dest="svm.tol")
    p.add_argument("--max-passes", type=int, dest="svm.max_passes")


def _threshold_flags(p):
    p.add_argument("--threshold", type=int, dest="eval.threshold")
    p.add_argument("--strict-threshold", action="store_const", const=True, dest="eval.strict",
                   help="require more than THRESHOLD worn patches")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wearscope",
                                     description="Patch-based tool wear assessment.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-edges", help="crop cutting edges from tool-head images")
    _common(p)
    p.add_argument("--in", dest="inputs", nargs="+", required=True, metavar="PATH")
    p.add_argument("--out", required=True)
    p.add_argument("--rmin", type=int, dest="edges.rmin")
    p.add_argument("--rmax", type=int, dest="edges.rmax")
    p.add_argument("--sigma", type=float, dest="edges.sigma")
    p.add_argument("--low-frac", type=float, dest="edges.low_frac")
    p.add_argument("--high-frac", type=float, dest="edges.high_frac")
    p.add_argument("--crop-width", type=float, dest="edges.crop_width")
    p.add_argument("--vertical-tol", type=float, dest="edges.vertical_tol")
    p.add_argument("--left-margin", type=int, dest="edges.left_margin")
    p.add_argument("--keep-going", action="store_true")
    p.set_defaults(func=cmd_extract_edges)

    p = sub.add_parser("featurize", help="write descriptors for manifest images")
    _common(p)
    _layout_flags(p)
    _descriptor_flags(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--role", choices=("patch", "edge"), default="patch",
                   help="edge: one line per layout patch")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train the patch classifier")
    _common(p)
    _descriptor_flags(p)
    _svm_flags(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--manifest")
    src.add_argument("--features", help="descriptor file from 'featurize'")
    p.add_argument("--model", required=True, help="output model path")
    p.add_argument("--tune", action="store_const", const=True, dest="svm.tune",
                   help=f"5-fold CV over C in {C_GRID}")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("assess", help="assess cutting-edge images")
    _common(p)
    _layout_flags(p)
    _descriptor_flags(p)
    _threshold_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="inputs", nargs="+", metavar="PATH")
    p.add_argument("--manifest", help="assess the manifest's edge entries")
    p.add_argument("--json", help="write assessments as JSON")
    p.set_defaults(func=cmd_assess)

    for name, func, text in (("evaluate", cmd_evaluate, "train on patches, test on edges"),
                             ("sweep", cmd_sweep, "metrics for every worn-patch threshold")):
        p = sub.add_parser(name, help=text)
        _common(p)
        _layout_flags(p)
        _descriptor_flags(p)
        _svm_flags(p)
        _threshold_flags(p)
        p.add_argument("--manifest", required=True)
        p.add_argument("--out", action="append", help="report path (.csv, .json, .svg)")
        p.add_argument("--format", choices=("csv", "json", "svg"))
        p.add_argument("--grid", action="store_true", help="all 9 descriptors x 5 layouts")
        p.set_defaults(func=func)
    for sp in sub.choices.values():
        for action in sp._actions:
            # config-key dests read badly as metavars
            if "." in action.dest and action.nargs != 0 and action.metavar is None:
                action.metavar = action.dest.split(".")[1].upper()
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k: v for k, v in vars(args).items() if "." in k}
    try:
        cfg = resolve(args.config, overrides)
        return args.func(args, cfg)
    except (ConfigError, UsageError, ManifestError) as exc:
        print(f"wearscope {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ImageFormatError, svm_mod.ModelFormatError, ValueError, OSError) as exc:
        print(f"wearscope {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
