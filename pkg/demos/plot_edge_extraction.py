"""
Finding the cutting edge
========================

The head image shows the insert, its clamping screw and the cutting edge on
the left. Canny edges feed a circular Hough transform (the screw) and a
line Hough transform; the leftmost near-vertical line marks the edge and
the crop starts there.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from wearscope.edgefinder import canny, find_cutting_edge
from wearscope.synthetic import insert_mock

mock = insert_mock(edge_column=80, radius=55, seed=4)
edges = canny(mock.image)
result = find_cutting_edge(mock.image)

print("true column", mock.edge_column, "found", result.column)
print("screw", mock.screw, "found", result.circle)
print(f"{len(result.candidates)} near-vertical lines, crop {result.image.shape}")

fig, axes = plt.subplots(1, 3, figsize=(11, 3.5))
axes[0].imshow(mock.image.pixels, cmap="gray")
axes[0].axvline(result.column, color="r")
if result.circle:
    c = result.circle
    axes[0].add_patch(plt.Circle((c.cx, c.cy), c.r, fill=False, color="y"))
axes[1].imshow(edges.bits, cmap="gray")
axes[2].imshow(result.image.pixels, cmap="gray")
for ax, t in zip(axes, ("head", "canny", "crop")):
    ax.set_title(t)
    ax.axis("off")
fig.savefig("edge_extraction.png", dpi=80)
