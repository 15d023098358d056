"""Grayscale image container, PGM/PNG loading and dataset manifests."""

from __future__ import annotations

import csv
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

LABELS = ("worn", "serviceable")
ROLES = ("edge", "patch")
MANIFEST_HEADER = ("path", "role", "label", "group")
PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class ImageFormatError(ValueError):
    """Raised for unsupported, malformed or truncated image files."""


class ManifestError(ValueError):
    pass


class GrayImage:
    """Immutable 8-bit grayscale image.

    Pixels are held in a read-only ``uint8`` array of shape ``(height, width)``.
    """

    __slots__ = ("_pixels",)

    def __init__(self, pixels):
        arr = np.asarray(pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if np.issubdtype(arr.dtype, np.floating) and not np.all(arr == np.round(arr)):
                raise ValueError("intensities must be integers")
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("intensities must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.array(arr, dtype=np.uint8, copy=True, order="C")
        arr.setflags(write=False)
        self._pixels = arr

    @classmethod
    def from_flat(cls, width: int, height: int, values) -> GrayImage:
        values = np.asarray(values)
        if values.size != width * height:
            raise ValueError(f"{values.size} values for a {width}x{height} image")
        return cls(values.reshape(height, width))

    @property
    def pixels(self) -> np.ndarray:
        return self._pixels

    @property
    def width(self) -> int:
        return self._pixels.shape[1]

    @property
    def height(self) -> int:
        return self._pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self._pixels.shape

    def crop(self, x0: int, y0: int, x1: int, y1: int) -> GrayImage:
        """Sub-image covering columns ``[x0, x1)`` and rows ``[y0, y1)``."""
        if not (0 <= x0 < x1 <= self.width and 0 <= y0 < y1 <= self.height):
            raise ValueError(f"crop ({x0},{y0})-({x1},{y1}) outside {self.width}x{self.height}")
        return GrayImage(self._pixels[y0:y1, x0:x1])

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._pixels, other._pixels))

    def __hash__(self):
        return hash((self.shape, self._pixels.tobytes()))

    def __repr__(self):
        return f"GrayImage(width={self.width}, height={self.height})"


def _parse_pgm(data: bytes, source) -> GrayImage:
    if data[:2] != b"P5":
        raise ImageFormatError(f"{source}: unsupported magic {data[:2]!r} (only binary PGM P5)")
    # header: magic, width, height, maxval; '#' comments run to end of line
    tokens = []
    pos = 2
    n = len(data)
    while len(tokens) < 3:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise ImageFormatError(f"{source}: truncated PGM header")
        if data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    if pos >= n or not data[pos:pos + 1].isspace():
        raise ImageFormatError(f"{source}: truncated PGM header")
    pos += 1  # single whitespace byte before raster
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise ImageFormatError(f"{source}: malformed PGM header {tokens!r}") from None
    if width < 1 or height < 1:
        raise ImageFormatError(f"{source}: invalid dimensions {width}x{height}")
    if maxval != 255:
        raise ImageFormatError(f"{source}: maxval {maxval} unsupported (need 255)")
    raster = data[pos:pos + width * height]
    if len(raster) < width * height:
        raise ImageFormatError(
            f"{source}: truncated pixel data ({len(raster)} of {width * height} bytes)")
    return GrayImage.from_flat(width, height, np.frombuffer(raster, dtype=np.uint8))


def _load_png(path) -> GrayImage:
    from PIL import Image

    try:
        with Image.open(path) as im:
            if im.mode != "L":
                raise ImageFormatError(f"{path}: PNG mode {im.mode!r} is not 8-bit grayscale")
            im.load()
            arr = np.asarray(im, dtype=np.uint8)
    except ImageFormatError:
        raise
    except (OSError, SyntaxError) as exc:
        raise ImageFormatError(f"{path}: unreadable PNG ({exc})") from exc
    return GrayImage(arr)


def load_image(path) -> GrayImage:
    """Load a binary PGM (P5, maxval 255) or 8-bit grayscale PNG.

    Colour or 16-bit inputs are rejected rather than converted.
    """
    path = Path(path)
    data = path.read_bytes()  # FileNotFoundError for missing files
    if data.startswith(PNG_SIGNATURE):
        return _load_png(path)
    return _parse_pgm(data, path)


def encode_pgm(img: GrayImage) -> bytes:
    return f"P5\n{img.width} {img.height}\n255\n".encode("ascii") + img.pixels.tobytes()


def save_image(img: GrayImage, path) -> None:
    """Write ``img`` as binary PGM (P5, maxval 255)."""
    Path(path).write_bytes(encode_pgm(img))


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    role: str
    label: str
    group: str | None = None

    @property
    def is_worn(self) -> bool:
        return self.label == "worn"


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.label not in LABELS:
                raise ManifestError(f"unknown label {e.label!r} for {e.path}")
            if e.role not in ROLES:
                raise ManifestError(f"unknown role {e.role!r} for {e.path}")
            if e.path in seen:
                raise ManifestError(f"duplicate path {e.path}")
            seen.add(e.path)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def with_role(self, role: str) -> DatasetManifest:
        return DatasetManifest(tuple(e for e in self.entries if e.role == role))

    def class_counts(self) -> dict[str, int]:
        counts = Counter(e.label for e in self.entries)
        return {label: counts.get(label, 0) for label in LABELS}


def _normalize_role(token: str) -> str:
    token = token.strip().lower()
    # long forms used in documentation
    return {"edge-image": "edge", "patch-image": "patch"}.get(token, token)


def load_manifest(path) -> DatasetManifest:
    """Parse a ``path,role,label,group`` CSV manifest.

    Relative image paths are resolved against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in MANIFEST_HEADER if c not in (reader.fieldnames or [])]
        if missing:
            raise ManifestError(f"{path}: missing column(s) {', '.join(missing)}")
        entries = []
        for lineno, row in enumerate(reader, start=2):
            raw = (row["path"] or "").strip()
            if not raw:
                raise ManifestError(f"{path}:{lineno}: empty path")
            label = (row["label"] or "").strip().lower()
            if label not in LABELS:
                raise ManifestError(f"{path}:{lineno}: unknown label {row['label']!r}")
            p = Path(raw)
            if not p.is_absolute():
                p = base / p
            group = (row["group"] or "").strip() or None
            entries.append(ManifestEntry(p, _normalize_role(row["role"] or ""), label, group))
    return DatasetManifest(tuple(entries))


def save_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    base = path.parent.resolve()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for e in manifest:
            p = Path(e.path)
            try:
                p = Path(os.path.relpath(p.resolve(), base))
            except ValueError:
                pass
            writer.writerow([p.as_posix(), e.role, e.label, e.group or ""])
