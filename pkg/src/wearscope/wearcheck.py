"""Edge assessment by worn-patch voting, metrics and evaluation runs."""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import svm as svm_mod
from .imageio import DatasetManifest, GrayImage, ManifestEntry, load_image
from .patching import PatchLayout, extract_patches
from .texture import Descriptor, describe

WORN, SERVICEABLE = "worn", "serviceable"
DISPOSABLE = "disposable"
REPORT_HEADER = ("layout", "descriptor", "threshold", "tp", "fn", "fp", "tn",
                 "accuracy", "precision", "recall", "fscore")


@dataclass(frozen=True)
class EdgeAssessment:
    image_id: str
    patch_labels: tuple[str, ...]
    threshold: int
    strict: bool = False
    margins: tuple[float, ...] = ()
    elapsed: float = 0.0

    @property
    def worn_count(self) -> int:
        return sum(lab == WORN for lab in self.patch_labels)

    @property
    def wear_fraction(self) -> float:
        return self.worn_count / len(self.patch_labels)

    @property
    def verdict(self) -> str:
        return verdict_for(self.worn_count, self.threshold, self.strict)

    def to_dict(self) -> dict:
        return {"image": self.image_id, "verdict": self.verdict,
                "wear_fraction": self.wear_fraction, "worn_count": self.worn_count,
                "threshold": self.threshold, "patch_labels": list(self.patch_labels),
                "margins": list(self.margins), "seconds": self.elapsed}


def verdict_for(worn_count: int, threshold: int, strict: bool = False) -> str:
    """``disposable`` once ``worn_count`` reaches ``threshold``.

    With ``strict`` the count has to exceed the threshold instead.
    """
    hit = worn_count > threshold if strict else worn_count >= threshold
    return DISPOSABLE if hit else SERVICEABLE


DescriptorFn = Callable[[GrayImage], Descriptor]


def descriptor_fn(name: str, mapping: str = "riu2") -> DescriptorFn:
    def fn(img):
        return describe(img, name, mapping)
    fn.__name__ = name
    return fn


def assess_edge(img: GrayImage, layout: PatchLayout, model: svm_mod.SvmModel,
                describe_fn: DescriptorFn, threshold: int = 1, strict: bool = False,
                image_id: str = "") -> EdgeAssessment:
    if not 1 <= threshold <= len(layout):
        raise ValueError(f"threshold {threshold} outside [1, {len(layout)}]")
    t0 = time.perf_counter()
    patches = extract_patches(img, layout)
    X = np.vstack([describe_fn(p).values for p in patches])
    margins = model.decision_batch(X)
    labels = tuple(svm_mod.label_for_margin(m) for m in margins)
    return EdgeAssessment(image_id, labels, threshold, strict,
                          tuple(float(m) for m in margins), time.perf_counter() - t0)


# --------------------------------------------------------------------------
# metrics

@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fn: int = 0
    fp: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    @classmethod
    def from_verdicts(cls, truth_worn: Sequence[bool], predicted_worn: Sequence[bool]):
        tp = fn = fp = tn = 0
        for t, p in zip(truth_worn, predicted_worn, strict=True):
            if t and p:
                tp += 1
            elif t:
                fn += 1
            elif p:
                fp += 1
            else:
                tn += 1
        return cls(tp, fn, fp, tn)


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    fscore: float
    degenerate: tuple[str, ...] = ()  # metrics whose denominator was zero


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Accuracy, precision, recall and F-score with worn as the positive class.

    A zero denominator yields 0 and names the metric in ``degenerate``.
    """
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    degenerate = []

    def ratio(name, num, den):
        if den == 0:
            degenerate.append(name)
            return 0.0
        return num / den

    acc = (cm.tp + cm.tn) / cm.total
    prec = ratio("precision", cm.tp, cm.tp + cm.fp)
    rec = ratio("recall", cm.tp, cm.tp + cm.fn)
    f = ratio("fscore", 2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn)
    return Metrics(acc, prec, rec, f, tuple(degenerate))


# --------------------------------------------------------------------------
# protocol

def split(manifest: DatasetManifest, train_frac: float = 0.7, seed: int = 0):
    """Seeded shuffle then prefix split; train size is ``round(n * train_frac)``."""
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must lie in (0, 1)")
    entries = list(manifest.entries)
    order = np.random.default_rng(seed).permutation(len(entries))
    n_train = int(round(len(entries) * train_frac))
    train = DatasetManifest(tuple(entries[i] for i in order[:n_train]))
    test = DatasetManifest(tuple(entries[i] for i in order[n_train:]))
    for name, part in (("train", train), ("test", test)):
        counts = part.class_counts()
        missing = [lab for lab, c in counts.items() if c == 0]
        if missing:
            raise ValueError(f"{name} split has no {'/'.join(missing)} samples (seed {seed})")
    return train, test


@dataclass(frozen=True)
class SweepRow:
    threshold: int
    cm: ConfusionMatrix
    metrics: Metrics


def sweep_threshold(assessments: Sequence[EdgeAssessment], truth_worn: Sequence[bool],
                    thresholds=None, strict: bool = False) -> list[SweepRow]:
    """Re-aggregate stored patch labels at each threshold (no reclassification)."""
    if len(assessments) != len(truth_worn):
        raise ValueError("one ground-truth label per assessment is required")
    counts = [a.worn_count for a in assessments]
    if thresholds is None:
        thresholds = range(1, max(len(a.patch_labels) for a in assessments) + 1)
    rows = []
    for t in thresholds:
        pred = [verdict_for(c, t, strict) == DISPOSABLE for c in counts]
        cm = ConfusionMatrix.from_verdicts(truth_worn, pred)
        rows.append(SweepRow(int(t), cm, metrics(cm)))
    return rows


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    tol: float = 1e-3
    max_passes: int = 100


@dataclass
class EvaluationResult:
    layout: str
    descriptor: str
    threshold: int
    cm: ConfusionMatrix
    metrics: Metrics
    assessments: list[EdgeAssessment] = field(default_factory=list)
    truth_worn: list[bool] = field(default_factory=list)
    model: svm_mod.SvmModel | None = None

    def row(self) -> dict:
        m = self.metrics
        return {"layout": self.layout, "descriptor": self.descriptor,
                "threshold": self.threshold, **asdict(self.cm),
                "accuracy": m.accuracy, "precision": m.precision,
                "recall": m.recall, "fscore": m.fscore}

    def sweep(self, strict: bool = False) -> list[SweepRow]:
        return sweep_threshold(self.assessments, self.truth_worn, strict=strict)


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def featurize_entries(entries: Sequence[ManifestEntry], describe_fn: DescriptorFn,
                      jobs: int = 1) -> np.ndarray:
    return np.vstack(_map(lambda e: describe_fn(load_image(e.path)).values, entries, jobs))


def train_on_patches(manifest: DatasetManifest, describe_fn: DescriptorFn,
                     svm_config: SvmConfig = SvmConfig(), seed: int = 0,
                     jobs: int = 1) -> svm_mod.SvmModel:
    patches = manifest.with_role("patch").entries
    if not patches:
        raise ValueError("manifest has no patch entries to train on")
    X = featurize_entries(patches, describe_fn, jobs)
    y = [e.label for e in patches]
    return svm_mod.train(X, y, C=svm_config.C, tol=svm_config.tol, seed=seed,
                         max_passes=svm_config.max_passes)


def evaluate(manifest: DatasetManifest, layout: PatchLayout, descriptor: str = "LBP8NH+LBP16NH",
             svm_config: SvmConfig = SvmConfig(), threshold: int = 1, seed: int = 0,
             mapping: str = "riu2", strict: bool = False, jobs: int = 1,
             model: svm_mod.SvmModel | None = None) -> EvaluationResult:
    """Train on the manifest's patch entries and assess every edge entry."""
    edges = manifest.with_role("edge").entries
    if not edges:
        raise ValueError("manifest has no edge entries to test on")
    fn = descriptor_fn(descriptor, mapping)
    if model is None:
        model = train_on_patches(manifest, fn, svm_config, seed, jobs)
    assessments = _map(
        lambda e: assess_edge(load_image(e.path), layout, model, fn, threshold, strict,
                              image_id=str(e.path)), edges, jobs)
    truth = [e.is_worn for e in edges]
    pred = [a.verdict == DISPOSABLE for a in assessments]
    cm = ConfusionMatrix.from_verdicts(truth, pred)
    return EvaluationResult(layout.name, descriptor, threshold, cm, metrics(cm),
                            list(assessments), truth, model)


# --------------------------------------------------------------------------
# reports

def _as_rows(results) -> list[dict]:
    rows = []
    for r in results:
        if isinstance(r, dict):
            rows.append(r)
        elif isinstance(r, EvaluationResult):
            rows.append(r.row())
        else:
            raise TypeError(f"cannot report {type(r).__name__}")
    return rows


def sweep_rows(result: EvaluationResult, strict: bool = False) -> list[dict]:
    out = []
    for s in result.sweep(strict):
        out.append({"layout": result.layout, "descriptor": result.descriptor,
                    "threshold": s.threshold, **asdict(s.cm),
                    "accuracy": s.metrics.accuracy, "precision": s.metrics.precision,
                    "recall": s.metrics.recall, "fscore": s.metrics.fscore})
    return out


def _fmt(v):
    return format(v, ".17g") if isinstance(v, float) else v


def emit_report(results, path, format: str | None = None) -> None:
    """Write rows as ``csv``, ``json`` or an ``svg`` chart.

    ``format`` defaults to the file suffix.
    """
    rows = _as_rows(results)
    if not rows:
        raise ValueError("nothing to report")
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_HEADER)
            for r in rows:
                w.writerow([_fmt(r[k]) for k in REPORT_HEADER])
    elif fmt == "json":
        path.write_text(json.dumps([{k: r[k] for k in REPORT_HEADER} for r in rows], indent=1)
                        + "\n", encoding="utf-8")
    elif fmt == "svg":
        _plot_svg(rows, path)
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def _plot_svg(rows: list[dict], path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "wearscope"  # stable element ids
    series = {}
    for r in rows:
        series.setdefault((r["layout"], r["descriptor"]), []).append(r)
    multi_threshold = any(len(v) > 1 for v in series.values())
    fig, ax = plt.subplots(figsize=(8, 4.5))
    if multi_threshold:
        for (layout, desc), rs in series.items():
            rs = sorted(rs, key=lambda r: r["threshold"])
            ax.plot([r["threshold"] for r in rs], [r["recall"] for r in rs], marker="o",
                    label=f"{layout} {desc}")
        ax.set_xlabel("worn-patch threshold")
        ax.set_ylabel("recall")
    else:
        names = ("precision", "recall", "accuracy", "fscore")
        keys = list(series)
        x = np.arange(len(keys))
        width = 0.8 / len(names)
        for k, metric in enumerate(names):
            ax.bar(x + k * width, [series[key][0][metric] for key in keys], width, label=metric)
        ax.set_xticks(x + 0.4 - width / 2)
        ax.set_xticklabels([f"{lay}\n{d}" for lay, d in keys], fontsize=7, rotation=90)
        ax.set_ylabel("score")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
