"""
Texture descriptors on smooth and worn patches
==============================================

A serviceable flank looks like a gentle gradient; abrasion shows up as
high-frequency speckle. Here we compute every descriptor the toolkit knows
on one patch of each kind and plot the uniform-pattern histograms.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from wearscope import texture
from wearscope.synthetic import patch_image

smooth = patch_image(False, 40, 40, seed=1)
worn = patch_image(True, 40, 40, seed=2)

# the rotation-invariant minimum of a code: all 8 rotations, take the smallest
code = 0b11001011
print(f"{code:08b} -> {texture.rotate_min(code, 8):08b}")

###############################################################################
# Descriptor lengths with the default riu2 mapping

for name in texture.DESCRIPTOR_NAMES:
    d = texture.describe(smooth, name)
    print(f"{name:16s} {len(d):3d} values, sum {d.values.sum():.3f}")

###############################################################################
# Uniform LBP (8, 1): the smooth patch piles up on a few uniform codes,
# the speckled one spreads into the non-uniform bin (the last one).

fig, axes = plt.subplots(1, 2, figsize=(9, 3), sharey=True)
for ax, img, title in zip(axes, (smooth, worn), ("serviceable", "worn")):
    h = texture.lbp_histogram(img, texture.SPEC_8_1).values
    ax.bar(np.arange(h.size), h)
    ax.set_title(title)
    ax.set_xlabel("riu2 bin")
axes[0].set_ylabel("fraction of pixels")
fig.tight_layout()
fig.savefig("descriptors.png", dpi=80)

###############################################################################
# Adaptive LBP weights: one per neighbour direction, near 1 on a smooth patch

print("ALBP weights, smooth:", np.round(texture.albp_weights(smooth), 3))
print("ALBP weights, worn:  ", np.round(texture.albp_weights(worn), 3))
