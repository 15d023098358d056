"""Synthetic images with known ground truth, for tests and demos."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imageio import DatasetManifest, GrayImage, ManifestEntry, save_image


@dataclass(frozen=True)
class InsertMock:
    image: GrayImage
    edge_column: int  # first bright column of the insert
    screw: tuple[int, int, int]  # cx, cy, r


def insert_mock(width: int = 320, height: int = 256, edge_column: int = 90,
                radius: int = 60, noise: float = 3.0, seed: int = 0) -> InsertMock:
    """Dark background, bright insert whose left boundary is ``edge_column``,
    and a dark screw disk of ``radius`` at the insert centre."""
    rng = np.random.default_rng(seed)
    ins_w = max(2 * radius + 40, 180)
    ins_h = min(height - 24, 2 * radius + 60)
    top = (height - ins_h) // 2
    right = min(width - 4, edge_column + ins_w)
    g = np.full((height, width), 35.0)
    g[top:top + ins_h, edge_column:right] = 190.0
    cx = (edge_column + right) // 2
    cy = top + ins_h // 2
    yy, xx = np.mgrid[0:height, 0:width]
    g[(xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2] = 70.0
    g += rng.normal(0.0, noise, g.shape)
    return InsertMock(GrayImage(np.clip(np.rint(g), 0, 255)), edge_column, (cx, cy, radius))


def smooth_patch(height: int, width: int, rng) -> np.ndarray:
    """Gentle gradient: the look of an unworn flank."""
    yy, xx = np.mgrid[0:height, 0:width]
    a, b = rng.uniform(-0.6, 0.6, 2)
    base = rng.uniform(90, 150)
    return base + a * xx + b * yy


def worn_patch(height: int, width: int, rng) -> np.ndarray:
    """High-frequency speckle: abrasion texture."""
    base = rng.uniform(90, 150)
    return base + rng.normal(0.0, 40.0, (height, width))


def _to_image(g: np.ndarray) -> GrayImage:
    return GrayImage(np.clip(np.rint(g), 0, 255))


def patch_image(worn: bool, height: int = 32, width: int = 32, seed: int = 0) -> GrayImage:
    rng = np.random.default_rng(seed)
    maker = worn_patch if worn else smooth_patch
    return _to_image(maker(height, width, rng))


def edge_image(worn: bool, height: int = 256, width: int = 64, seed: int = 0,
               sed_edge_width: float = 0.25) -> GrayImage:
    """Cutting-edge crop; worn edges carry speckle on part of the edge strip."""
    rng = np.random.default_rng(seed)
    g = smooth_patch(height, width, rng)
    if worn:
        strip = max(1, int(round(sed_edge_width * width)))
        y0 = int(rng.integers(0, height // 2))
        y1 = min(height, y0 + int(rng.integers(height // 4, height // 2)))
        g[y0:y1, :strip] = worn_patch(y1 - y0, strip, rng)
    return _to_image(g)


def write_corpus(root, n_train: int = 40, n_test: int = 20, seed: int = 0,
                 edge_size: tuple[int, int] = (256, 64)) -> DatasetManifest:
    """Write a separable corpus of patch (training) and edge (test) images.

    Classes alternate so both halves are balanced. Returns the manifest with
    absolute paths; it is also saved as ``root/manifest.csv``.
    """
    from .imageio import save_manifest

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n_train):
        worn = i % 2 == 1
        h, w = (int(v) for v in rng.integers(24, 48, 2))
        p = root / f"patch_{i:03d}.pgm"
        save_image(patch_image(worn, h, w, seed=int(rng.integers(2**31))), p)
        entries.append(ManifestEntry(p, "patch", "worn" if worn else "serviceable", str(i)))
    for i in range(n_test):
        worn = i % 2 == 1
        p = root / f"edge_{i:03d}.pgm"
        save_image(edge_image(worn, *edge_size, seed=int(rng.integers(2**31))), p)
        entries.append(ManifestEntry(p, "edge", "worn" if worn else "serviceable", f"e{i}"))
    manifest = DatasetManifest(tuple(entries))
    save_manifest(manifest, root / "manifest.csv")
    return manifest
