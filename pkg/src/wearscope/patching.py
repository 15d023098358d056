"""Wear-patch layouts over a cutting-edge image.

All layouts are expressed in fractions of the image so they apply to any crop
size. The cutting edge is assumed to run vertically along the left border,
which is what :func:`wearscope.edgefinder.crop_cutting_edge` produces.

Rect order per layout:

* ``HGD``: 8 rows x 2 columns, row-major from the top-left.
* ``FED``: edge strip, top band, bottom band, interior.
* ``TBD``: outer edge band, inner edge band, top outer, top inner,
  bottom inner, bottom outer.
* ``HED``: upper edge half, lower edge half, top band, bottom band, interior.
* ``SED``: nine edge sub-regions from top to bottom, top band, bottom band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

from .imageio import GrayImage

LAYOUT_NAMES = ("HGD", "FED", "TBD", "HED", "SED")
PATCH_COUNTS = {"HGD": 16, "FED": 4, "TBD": 6, "HED": 5, "SED": 11}
DEFAULT_PARAMS = {"edge_width": 0.20, "band_height": 0.15, "sed_edge_width": 0.25}

_EPS = 1e-9


@dataclass(frozen=True)
class FracRect:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (0.0 <= self.x0 < self.x1 <= 1.0 and 0.0 <= self.y0 < self.y1 <= 1.0):
            raise ValueError(f"invalid fractional rect {self}")

    def intersection_area(self, other: FracRect) -> float:
        w = min(self.x1, other.x1) - max(self.x0, other.x0)
        h = min(self.y1, other.y1) - max(self.y0, other.y0)
        return w * h if w > 0 and h > 0 else 0.0


@dataclass(frozen=True)
class PatchLayout:
    name: str
    rects: tuple[FracRect, ...]
    params: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.rects)


def _check_params(name: str, params: dict) -> dict:
    unknown = set(params) - set(DEFAULT_PARAMS)
    if unknown:
        raise ValueError(f"unknown layout parameter(s): {sorted(unknown)}")
    p = {**DEFAULT_PARAMS, **{k: float(v) for k, v in params.items()}}
    for key, value in p.items():
        if not 0.0 < value < 0.5:
            raise ValueError(f"{key}={value} must lie in (0, 0.5)")
    if name == "TBD" and p["band_height"] > 0.25:
        raise ValueError("TBD needs band_height <= 0.25 so its four bands fit")
    return p


def layout_for(name: str, params: dict | None = None) -> PatchLayout:
    """Build one of the five named layouts.

    ``params`` may override ``edge_width``, ``band_height`` and
    ``sed_edge_width`` (all fractions in ``(0, 0.5)``).
    """
    key = name.upper()
    if key not in LAYOUT_NAMES:
        raise ValueError(f"unknown layout {name!r}; expected one of {LAYOUT_NAMES}")
    p = _check_params(key, params or {})
    e, h, es = p["edge_width"], p["band_height"], p["sed_edge_width"]
    R = FracRect
    if key == "HGD":
        rects = [R(c / 2, r / 8, (c + 1) / 2, (r + 1) / 8) for r in range(8) for c in range(2)]
    elif key == "FED":
        rects = [R(0, 0, e, 1), R(e, 0, 1, h), R(e, 1 - h, 1, 1), R(e, h, 1, 1 - h)]
    elif key == "TBD":
        rects = [R(0, 0, e, 1), R(e, 0, 2 * e, 1),
                 R(0, 0, 1, h), R(0, h, 1, 2 * h),
                 R(0, 1 - 2 * h, 1, 1 - h), R(0, 1 - h, 1, 1)]
    elif key == "HED":
        rects = [R(0, 0, e, 0.5), R(0, 0.5, e, 1),
                 R(e, 0, 1, h), R(e, 1 - h, 1, 1), R(e, h, 1, 1 - h)]
    else:
        rects = [R(0, k / 9, es, (k + 1) / 9) for k in range(9)]
        rects += [R(0, 0, 1, h), R(0, 1 - h, 1, 1)]
    return PatchLayout(key, tuple(rects), p)


def overlap_report(layout: PatchLayout) -> list[tuple[int, int]]:
    """Index pairs ``(i, j)``, ``i < j``, of rects with positive-area overlap."""
    return [(i, j) for (i, a), (j, b) in combinations(enumerate(layout.rects), 2)
            if a.intersection_area(b) > _EPS]


def pixel_bounds(layout: PatchLayout, width: int, height: int) -> list[tuple[int, int, int, int]]:
    """Pixel boxes ``(x0, y0, x1, y1)`` (end-exclusive) for every rect.

    Start edges round down and end edges round up, except that an end edge
    lying on another rect's start fraction snaps to that rect's start pixel,
    so abutting rects neither share nor drop a row or column.
    """
    starts_x = {r.x0 for r in layout.rects}
    starts_y = {r.y0 for r in layout.rects}

    def lo(f, n):
        return min(max(math.floor(f * n + _EPS), 0), n - 1)

    def hi(f, n, starts):
        if any(abs(f - s) <= _EPS for s in starts):
            v = math.floor(f * n + _EPS)
        else:
            v = math.ceil(f * n - _EPS)
        return min(max(v, 1), n)

    boxes = []
    for r in layout.rects:
        x0, y0 = lo(r.x0, width), lo(r.y0, height)
        x1, y1 = hi(r.x1, width, starts_x), hi(r.y1, height, starts_y)
        boxes.append((x0, y0, max(x1, x0 + 1), max(y1, y0 + 1)))
    return boxes


def extract_patches(img: GrayImage, layout: PatchLayout, min_side: int = 5) -> list[GrayImage]:
    """Crop one sub-image per layout rect.

    ``min_side`` is the smallest admissible patch side; the default of 5 is
    ``2*ceil(R) + 1`` for the largest neighbourhood (16, 2).
    """
    boxes = pixel_bounds(layout, img.width, img.height)
    for i, (x0, y0, x1, y1) in enumerate(boxes):
        if x1 - x0 < min_side or y1 - y0 < min_side:
            raise ValueError(
                f"{img.width}x{img.height} image too small for {layout.name}: patch {i} "
                f"would be {x1 - x0}x{y1 - y0} (< {min_side} px)")
    return [img.crop(*box) for box in boxes]
