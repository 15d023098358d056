"""
Wear-patch layouts
==================

Each cutting-edge image is split into wear patches before classification.
The five layouts differ in how much they focus on the edge strip at the
left of the crop. Overlaps are intentional for TBD and SED.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

from wearscope.patching import LAYOUT_NAMES, layout_for, overlap_report, pixel_bounds

fig, axes = plt.subplots(1, len(LAYOUT_NAMES), figsize=(12, 5))
for ax, name in zip(axes, LAYOUT_NAMES):
    layout = layout_for(name)
    for k, r in enumerate(layout.rects):
        ax.add_patch(Rectangle((r.x0, r.y0), r.x1 - r.x0, r.y1 - r.y0, fill=False,
                               lw=1, ec=f"C{k % 10}"))
    ax.set_xlim(0, 1)
    ax.set_ylim(1, 0)
    ax.set_aspect(0.25)
    ax.set_title(f"{name} ({len(layout)})")
    ax.set_xticks([])
    ax.set_yticks([])
fig.savefig("layouts.png", dpi=80)

###############################################################################
# Which patches overlap, and what the rects become on a 64 x 256 crop

for name in LAYOUT_NAMES:
    layout = layout_for(name)
    print(name, "overlaps:", overlap_report(layout) or "none")
print("FED boxes on 64x256:", pixel_bounds(layout_for("FED"), 64, 256))

# layout parameters are fractions of the crop
print(layout_for("FED", {"edge_width": 0.25}).rects[0])
