import dataclasses
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wearscope.imageio import DatasetManifest, GrayImage, ManifestEntry
from wearscope.patching import LAYOUT_NAMES, layout_for
from wearscope.svm import SvmModel
from wearscope.synthetic import write_corpus
from wearscope.texture import Descriptor
from wearscope.wearcheck import (REPORT_HEADER, ConfusionMatrix, EdgeAssessment, assess_edge,
                                 emit_report, evaluate, metrics, split, sweep_rows,
                                 sweep_threshold, verdict_for)

# one support vector on the first bin: worn iff a patch's mean brightness >= 0.5
BRIGHT_MODEL = SvmModel(np.array([[1.0, 0.0]]), np.ones(1), np.ones(1), -0.5, 1.0, 2)


def brightness(img):
    return Descriptor([img.pixels.mean() / 255, 0.0])


def sed_image(bright_strips=()):
    g = np.full((288, 64), 20)
    for k in bright_strips:
        g[32 * k:32 * (k + 1), :16] = 250
    return GrayImage(g)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    return write_corpus(tmp_path_factory.mktemp("corpus"), seed=0)


def test_all_serviceable():
    for t in range(1, 12):
        a = assess_edge(sed_image(), layout_for("SED"), BRIGHT_MODEL, brightness, threshold=t)
        assert a.verdict == "serviceable" and a.wear_fraction == 0


def test_single_worn_patch_threshold_one():
    a = assess_edge(sed_image([4]), layout_for("SED"), BRIGHT_MODEL, brightness, threshold=1)
    assert a.worn_count == 1 and a.verdict == "disposable"
    assert a.patch_labels[4] == "worn"


def test_three_of_eleven_threshold_four():
    a = assess_edge(sed_image([3, 4, 5]), layout_for("SED"), BRIGHT_MODEL, brightness, threshold=4)
    assert a.verdict == "serviceable"
    assert a.wear_fraction == 3 / 11
    assert [i for i, lab in enumerate(a.patch_labels) if lab == "worn"] == [3, 4, 5]


def test_strict_flag():
    assert verdict_for(3, 3) == "disposable"
    assert verdict_for(3, 3, strict=True) == "serviceable"
    assert verdict_for(4, 3, strict=True) == "disposable"


def test_threshold_out_of_range():
    with pytest.raises(ValueError):
        assess_edge(sed_image(), layout_for("SED"), BRIGHT_MODEL, brightness, threshold=12)


@given(st.lists(st.sampled_from(["worn", "serviceable"]), min_size=1, max_size=16))
def test_threshold_one_iff_any_worn(labels):
    a = EdgeAssessment("x", tuple(labels), 1)
    assert (a.verdict == "disposable") == (a.wear_fraction > 0)


def test_metrics_reconstructed_counts():
    m = metrics(ConfusionMatrix(tp=70, fn=7, fp=8, tn=69))
    assert (round(m.precision, 3), round(m.recall, 3), round(m.fscore, 3)) == (0.897, 0.909, 0.903)
    assert round(m.accuracy, 4) == 0.9026


def test_metrics_perfect_and_degenerate():
    m = metrics(ConfusionMatrix(5, 0, 0, 7))
    assert (m.accuracy, m.precision, m.recall, m.fscore) == (1, 1, 1, 1)
    d = metrics(ConfusionMatrix(0, 4, 0, 3))
    assert (d.precision, d.recall, d.fscore) == (0, 0, 0)
    assert "precision" in d.degenerate
    with pytest.raises(ValueError):
        metrics(ConfusionMatrix(0, 0, 0, 0))
    with pytest.raises(ValueError):
        ConfusionMatrix(-1, 0, 0, 1)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_metric_identities(tp, fn, fp, tn):
    cm = ConfusionMatrix(tp, fn, fp, tn)
    if cm.total == 0:
        return
    m = metrics(cm)
    assert round(m.accuracy * cm.total) == tp + tn
    if m.precision + m.recall > 0:
        assert abs(m.fscore - 2 * m.precision * m.recall / (m.precision + m.recall)) < 1e-12
    assert all(0 <= v <= 1 for v in (m.accuracy, m.precision, m.recall, m.fscore))


def _manifest(n, n_worn):
    return DatasetManifest(tuple(
        ManifestEntry(f"/x/{i}.pgm", "edge", "worn" if i < n_worn else "serviceable")
        for i in range(n)))


def test_split_sizes_and_determinism():
    m = _manifest(577, 301)
    tr, te = split(m, 0.7, seed=3)
    assert (len(tr.entries), len(te.entries)) == (404, 173)
    assert split(m, 0.7, seed=3) == (tr, te)
    tr2, te2 = split(m, 0.7, seed=4)
    assert len(tr2.entries) == 404 and tr2 != tr
    assert {e.path for e in tr.entries} | {e.path for e in te.entries} == {e.path for e in m.entries}


def test_split_errors():
    with pytest.raises(ValueError):
        split(_manifest(10, 5), 1.0)
    with pytest.raises(ValueError, match="no"):
        split(_manifest(10, 1), 0.5)  # the single worn entry lands in one half only


def test_sweep_recall_examples(rng):
    asm = [EdgeAssessment(str(i), tuple(rng.choice(["worn", "serviceable"], 11)), 1)
           for i in range(30)]
    asm = [a if a.worn_count < 11 else dataclasses.replace(a, patch_labels=("serviceable",) * 11)
           for a in asm]
    truth = [True] * 15 + [False] * 15
    rows = sweep_threshold(asm, truth)
    assert [r.threshold for r in rows] == list(range(1, 12))
    recalls = [r.metrics.recall for r in rows]
    assert recalls[0] == max(recalls)
    assert all(a >= b for a, b in zip(recalls, recalls[1:]))
    assert recalls[-1] == 0
    assert all(r.cm.fn >= p.cm.fn for p, r in zip(rows, rows[1:]))


def test_sweep_needs_truth_for_every_image():
    with pytest.raises(ValueError):
        sweep_threshold([EdgeAssessment("a", ("worn",), 1)], [True, False])


def test_evaluate_separable_corpus(corpus):
    res = evaluate(corpus, layout_for("SED"))
    assert res.metrics.accuracy == 1.0 and res.metrics.recall == 1.0
    assert res.cm.total == 20
    again = evaluate(corpus, layout_for("SED"))
    assert again.row() == res.row()
    assert [a.margins for a in again.assessments] == [a.margins for a in res.assessments]


def test_evaluate_jobs_keep_order(corpus):
    a = evaluate(corpus, layout_for("FED"), jobs=1)
    b = evaluate(corpus, layout_for("FED"), jobs=3)
    assert [x.image_id for x in a.assessments] == [x.image_id for x in b.assessments]
    assert a.row() == b.row()


def test_null_model_on_shuffled_labels(corpus):
    accs = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        labels = [e.label for e in corpus.entries if e.role == "patch"]
        rng.shuffle(labels)
        it = iter(labels)
        shuffled = DatasetManifest(tuple(
            dataclasses.replace(e, label=next(it)) if e.role == "patch" else e
            for e in corpus.entries))
        accs.append(evaluate(shuffled, layout_for("SED"), seed=seed).metrics.accuracy)
    assert 0.3 <= float(np.mean(accs)) <= 0.7


def test_evaluate_without_edges(corpus):
    only_patches = corpus.with_role("patch")
    with pytest.raises(ValueError, match="edge"):
        evaluate(only_patches, layout_for("SED"))


def test_reports(tmp_path, corpus):
    results = [evaluate(corpus, layout_for(name), descriptor=d)
               for d in ("LBP8NH", "LBP16NH") for name in LAYOUT_NAMES]
    emit_report(results, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == ",".join(REPORT_HEADER) and len(lines) == 11

    emit_report(results, tmp_path / "r.json")
    back = json.loads((tmp_path / "r.json").read_text())
    assert back == [{k: r.row()[k] for k in REPORT_HEADER} for r in results]

    emit_report(results, tmp_path / "r.svg")
    emit_report(sweep_rows(results[-1]), tmp_path / "sweep.svg")
    for name in ("r.svg", "sweep.svg"):
        assert ET.parse(tmp_path / name).getroot().tag.endswith("svg")


def test_report_errors(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], tmp_path / "r.csv")
    row = {k: 0 for k in REPORT_HEADER}
    with pytest.raises(ValueError):
        emit_report([row], tmp_path / "r.txt")
    with pytest.raises(OSError):
        emit_report([row], tmp_path / "missing" / "r.csv")


def test_json_round_trip_is_lossless(tmp_path):
    row = {k: 0 for k in REPORT_HEADER}
    row.update(accuracy=1 / 3, precision=2 / 7, recall=0.1 + 0.2, fscore=np.nextafter(0.5, 1))
    emit_report([row], tmp_path / "r.json")
    back = json.loads((tmp_path / "r.json").read_text())[0]
    assert back == row
