"""
Train, assess, evaluate and sweep
=================================

End-to-end run on a synthetic corpus: 40 labelled training patches and 20
cutting-edge images. The classifier works on patches; an edge is called
disposable once enough of its patches look worn.
"""

import tempfile
from pathlib import Path

from wearscope import svm
from wearscope.imageio import load_image
from wearscope.patching import LAYOUT_NAMES, layout_for
from wearscope.synthetic import write_corpus
from wearscope.wearcheck import (assess_edge, descriptor_fn, emit_report, evaluate, sweep_rows,
                                 train_on_patches)

work = Path(tempfile.mkdtemp(prefix="wearscope_demo_"))
manifest = write_corpus(work / "corpus", n_train=40, n_test=20, seed=0)
print(manifest.class_counts())

###############################################################################
# Train on patches and save the model

describe = descriptor_fn("LBP8NH+LBP16NH")
model = train_on_patches(manifest, describe)
svm.save_model(model, work / "model.svm")
print(f"{model.n_sv} support vectors, bias {model.bias:.4f}")

###############################################################################
# Assess one worn edge with the SED layout

edge = manifest.with_role("edge").entries[1]
a = assess_edge(load_image(edge.path), layout_for("SED"), model, describe, threshold=1)
print(edge.label, "->", a.verdict, f"({a.worn_count}/11 worn, {a.elapsed * 1000:.1f} ms)")

###############################################################################
# Evaluate every layout and sweep the worn-patch threshold on SED

results = [evaluate(manifest, layout_for(name), model=model) for name in LAYOUT_NAMES]
for r in results:
    m = r.metrics
    print(f"{r.layout}: accuracy {m.accuracy:.3f} recall {m.recall:.3f}")

sed = results[LAYOUT_NAMES.index("SED")]
for row in sweep_rows(sed):
    print(row["threshold"], f"{row['recall']:.3f}")

emit_report(results, work / "layouts.csv")
emit_report(sweep_rows(sed), work / "sweep.svg")
print("reports in", work)
