"""LBP-family texture descriptors.

Per-pixel codes are computed on the interior of an image, i.e. every pixel at
least ``ceil(R)`` away from each border; border pixels never enter a
histogram. Neighbour ``p`` sits at angle ``2*pi*p/P`` measured
counter-clockwise from the +x axis. Since image rows grow downward, the
sample point is ``(cx + R cos a, cy - R sin a)``. Off-lattice samples are
bilinearly interpolated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .imageio import GrayImage

SNAP_EPS = 1e-6
MAPPING_KINDS = ("raw", "rotation-invariant", "riu2")


@dataclass(frozen=True)
class NeighborhoodSpec:
    P: int = 8
    R: float = 1.0

    def __post_init__(self):
        if not 4 <= self.P <= 24:
            raise ValueError(f"P must lie in [4, 24], got {self.P}")
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R}")

    @property
    def border(self) -> int:
        return math.ceil(self.R)


SPEC_8_1 = NeighborhoodSpec(8, 1.0)
SPEC_16_2 = NeighborhoodSpec(16, 2.0)


@dataclass(frozen=True)
class CodeMapping:
    kind: str
    P: int
    table: np.ndarray  # code -> bin index, length 2**P
    bin_count: int

    def __call__(self, codes):
        return self.table[codes]


@dataclass(frozen=True)
class Descriptor:
    """Named non-negative feature vector."""

    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, Descriptor):
            return NotImplemented
        return self.name == other.name and np.array_equal(self.values, other.values)

    __hash__ = None


# --------------------------------------------------------------------------
# neighbour sampling

def _offset(p: int, spec: NeighborhoodSpec) -> tuple[float, float]:
    angle = 2.0 * math.pi * p / spec.P
    dx = spec.R * math.cos(angle)
    dy = -spec.R * math.sin(angle)
    if abs(dx - round(dx)) < SNAP_EPS:
        dx = float(round(dx))
    if abs(dy - round(dy)) < SNAP_EPS:
        dy = float(round(dy))
    return dx, dy


def _bilinear(a, b, c, d, tx, ty):
    # lerp form keeps constant neighbourhoods exact
    top = a + tx * (b - a)
    bottom = c + tx * (d - c)
    return top + ty * (bottom - top)


def sample_neighbor(img: GrayImage, cx: int, cy: int, p: int, spec: NeighborhoodSpec) -> float:
    """Intensity of neighbour ``p`` of pixel ``(cx, cy)``."""
    b = spec.border
    if not (b <= cx < img.width - b and b <= cy < img.height - b):
        raise ValueError(f"pixel ({cx}, {cy}) is within {b} px of the border")
    g = img.pixels
    dx, dy = _offset(p, spec)
    fx, fy = math.floor(dx), math.floor(dy)
    # fractions taken from the offset so every pixel shares the same weights
    tx, ty = dx - fx, dy - fy
    x0, y0 = cx + fx, cy + fy
    if tx == 0.0 and ty == 0.0:
        return float(g[y0, x0])
    x1 = min(x0 + 1, img.width - 1)
    y1 = min(y0 + 1, img.height - 1)
    return float(_bilinear(float(g[y0, x0]), float(g[y0, x1]), float(g[y1, x0]),
                           float(g[y1, x1]), tx, ty))


def _interior_check(img: GrayImage, spec: NeighborhoodSpec) -> None:
    b = spec.border
    if img.width <= 2 * b or img.height <= 2 * b:
        raise ValueError(
            f"{img.width}x{img.height} image has no interior pixel for R={spec.R}")


def neighbor_planes(img: GrayImage, spec: NeighborhoodSpec) -> tuple[np.ndarray, np.ndarray]:
    """Centre values and sampled neighbours for every interior pixel.

    Returns ``(center, neighbors)`` with shapes ``(h, w)`` and ``(P, h, w)``
    where ``h, w`` are the interior dimensions.
    """
    _interior_check(img, spec)
    g = img.pixels.astype(np.float64)
    H, W = g.shape
    b = spec.border
    h, w = H - 2 * b, W - 2 * b
    center = g[b:b + h, b:b + w]
    out = np.empty((spec.P, h, w))
    for p in range(spec.P):
        dx, dy = _offset(p, spec)
        fx, fy = math.floor(dx), math.floor(dy)
        tx, ty = dx - fx, dy - fy
        xs, ys = b + fx, b + fy
        a = g[ys:ys + h, xs:xs + w]
        if tx == 0.0 and ty == 0.0:
            out[p] = a
            continue
        # tx == 0 or ty == 0 leaves the unused corners weighted by zero; pad
        # reads stay in range because |offset| <= R <= border.
        xs1 = min(xs + 1, W - w)
        ys1 = min(ys + 1, H - h)
        bb = g[ys:ys + h, xs1:xs1 + w]
        c = g[ys1:ys1 + h, xs:xs + w]
        d = g[ys1:ys1 + h, xs1:xs1 + w]
        out[p] = _bilinear(a, bb, c, d, tx, ty)
    return center, out


def _pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a boolean ``(P, h, w)`` stack into integer codes ``sum bit_p 2^p``."""
    codes = np.zeros(bits.shape[1:], dtype=np.int64)
    for p in range(bits.shape[0]):
        codes |= bits[p].astype(np.int64) << p
    return codes


def lbp_code(img: GrayImage, cx: int, cy: int, spec: NeighborhoodSpec) -> int:
    gc = float(img.pixels[cy, cx])
    code = 0
    for p in range(spec.P):
        if sample_neighbor(img, cx, cy, p, spec) - gc >= 0:
            code |= 1 << p
    return code


def lbp_codes(img: GrayImage, spec: NeighborhoodSpec) -> np.ndarray:
    """Raw LBP code of every interior pixel."""
    center, nb = neighbor_planes(img, spec)
    return _pack_bits(nb - center >= 0)


# --------------------------------------------------------------------------
# code mappings

def ror(code: int, i: int, P: int) -> int:
    """Circular right shift of a ``P``-bit word."""
    i %= P
    mask = (1 << P) - 1
    return ((code >> i) | (code << (P - i))) & mask


def rotate_min(code: int, P: int) -> int:
    """Smallest value among all circular rotations of ``code``."""
    if not 0 <= code < (1 << P):
        raise ValueError(f"code {code} out of range for P={P}")
    return min(ror(code, i, P) for i in range(P))


def uniformity(code: int, P: int) -> int:
    """Number of circular 0/1 transitions in the ``P``-bit pattern."""
    return bin((code ^ ror(code, 1, P)) & ((1 << P) - 1)).count("1")


@lru_cache(maxsize=None)
def _build_table(kind: str, P: int) -> tuple[np.ndarray, int]:
    n = 1 << P
    codes = np.arange(n, dtype=np.int64)
    mask = n - 1
    if kind == "raw":
        return codes, n
    rots = np.stack([((codes >> i) | (codes << (P - i))) & mask for i in range(P)])
    if kind == "rotation-invariant":
        mins = rots.min(axis=0)
        reps, table = np.unique(mins, return_inverse=True)
        return table.astype(np.int64), reps.size
    if kind == "riu2":
        trans = np.zeros(n, dtype=np.int64)
        ones = np.zeros(n, dtype=np.int64)
        shifted = rots[1]
        for p in range(P):
            trans += ((codes ^ shifted) >> p) & 1
            ones += (codes >> p) & 1
        table = np.where(trans <= 2, ones, P + 1)
        return table, P + 2
    raise ValueError(f"unknown mapping kind {kind!r}; expected one of {MAPPING_KINDS}")


def build_mapping(kind: str, P: int) -> CodeMapping:
    table, count = _build_table(kind, P)
    table = table.copy()
    table.setflags(write=False)
    return CodeMapping(kind, P, table, count)


# --------------------------------------------------------------------------
# histograms

def _normalized_histogram(bins: np.ndarray, bin_count: int, weights=None) -> np.ndarray:
    hist = np.bincount(bins.ravel(), weights=None if weights is None else weights.ravel(),
                       minlength=bin_count).astype(np.float64)
    total = hist.sum()
    return hist / total if total > 0 else hist


def _resolve_mapping(mapping, P: int) -> CodeMapping:
    if mapping is None:
        mapping = "riu2"
    if isinstance(mapping, str):
        mapping = build_mapping(mapping, P)
    if mapping.P != P:
        raise ValueError(f"mapping built for P={mapping.P}, neighbourhood has P={P}")
    return mapping


def lbp_histogram(img: GrayImage, spec: NeighborhoodSpec = SPEC_8_1, mapping=None,
                  name: str | None = None) -> Descriptor:
    """Normalized histogram of mapped LBP codes over the interior pixels."""
    mapping = _resolve_mapping(mapping, spec.P)
    hist = _normalized_histogram(mapping(lbp_codes(img, spec)), mapping.bin_count)
    return Descriptor(hist, name or f"LBP{spec.P}NH")


def albp_weights(img: GrayImage, spec: NeighborhoodSpec = SPEC_8_1) -> np.ndarray:
    """Least-squares weights ``w_p`` minimising ``sum |g_c - w g_p|^2``.

    A direction whose neighbours are all zero gets weight 1.
    """
    center, nb = neighbor_planes(img, spec)
    num = np.einsum("hw,phw->p", center, nb)
    den = np.einsum("phw,phw->p", nb, nb)
    safe = np.where(den > 0, den, 1.0)
    return np.where(den > 0, num / safe, 1.0)


def albp_codes(img: GrayImage, spec: NeighborhoodSpec, weights=None) -> np.ndarray:
    center, nb = neighbor_planes(img, spec)
    if weights is None:
        weights = albp_weights(img, spec)
    w = np.asarray(weights, dtype=np.float64).reshape(-1, 1, 1)
    return _pack_bits(nb - w * center >= 0)


def albp_histogram(img: GrayImage, spec: NeighborhoodSpec = SPEC_8_1, mapping=None,
                   weights=None, name: str | None = None) -> Descriptor:
    """Adaptive LBP: neighbour ``p`` is compared against ``w_p * g_c``."""
    mapping = _resolve_mapping(mapping, spec.P)
    hist = _normalized_histogram(mapping(albp_codes(img, spec, weights)), mapping.bin_count)
    return Descriptor(hist, name or f"ALBP{spec.P}")


def clbp_descriptor(img: GrayImage, spec: NeighborhoodSpec = SPEC_8_1, mapping=None,
                    name: str | None = None) -> Descriptor:
    """Sign histogram followed by magnitude histogram.

    The magnitude threshold is the mean of ``|g_p - g_c|`` over all interior
    pixels and all neighbours. Each half sums to one.
    """
    mapping = _resolve_mapping(mapping, spec.P)
    center, nb = neighbor_planes(img, spec)
    diff = nb - center
    mag = np.abs(diff)
    a = mag.mean()
    s_hist = _normalized_histogram(mapping(_pack_bits(diff >= 0)), mapping.bin_count)
    m_hist = _normalized_histogram(mapping(_pack_bits(mag >= a)), mapping.bin_count)
    return Descriptor(np.concatenate([s_hist, m_hist]), name or f"CLBP{spec.P}")


def local_variance(img: GrayImage, spec: NeighborhoodSpec = SPEC_8_1) -> np.ndarray:
    """Population variance of the ``P`` sampled neighbours at each interior pixel."""
    _, nb = neighbor_planes(img, spec)
    u = nb.mean(axis=0)
    return ((nb - u) ** 2).mean(axis=0)


def lbpv_histogram(img: GrayImage, spec: NeighborhoodSpec = SPEC_8_1,
                   name: str | None = None) -> Descriptor:
    """Variance-weighted histogram of riu2 codes, normalized by total variance.

    Flat images (zero variance everywhere) give the all-zero vector.
    """
    mapping = build_mapping("riu2", spec.P)
    center, nb = neighbor_planes(img, spec)
    codes = mapping(_pack_bits(nb - center >= 0))
    u = nb.mean(axis=0)
    var = ((nb - u) ** 2).mean(axis=0)
    hist = _normalized_histogram(codes, mapping.bin_count, weights=var)
    return Descriptor(hist, name or f"LBPV{spec.P}")


def concat(d1: Descriptor, d2: Descriptor) -> Descriptor:
    if not d1.name:
        name = d2.name
    elif not d2.name:
        name = d1.name
    else:
        name = f"{d1.name}+{d2.name}"
    return Descriptor(np.concatenate([d1.values, d2.values]), name)


# --------------------------------------------------------------------------
# named descriptors

_FAMILIES = {
    "LBP": lambda img, spec, m: lbp_histogram(img, spec, m),
    "ALBP": lambda img, spec, m: albp_histogram(img, spec, m),
    "CLBP": lambda img, spec, m: clbp_descriptor(img, spec, m),
    "LBPV": lambda img, spec, m: lbpv_histogram(img, spec),
}
_PRESETS = {8: SPEC_8_1, 16: SPEC_16_2}

DESCRIPTOR_NAMES = ("LBP8NH", "LBP16NH", "LBP8NH+LBP16NH", "ALBP8", "ALBP16",
                    "CLBP8", "CLBP16", "LBPV8", "LBPV16")


def _parse_component(token: str) -> tuple[str, NeighborhoodSpec]:
    t = token.strip().upper()
    if t.endswith("NH"):
        t = t[:-2]
    for family in ("ALBP", "CLBP", "LBPV", "LBP"):
        if t.startswith(family):
            rest = t[len(family):]
            if rest.isdigit() and int(rest) in _PRESETS:
                return family, _PRESETS[int(rest)]
    raise ValueError(f"unknown descriptor {token!r}")


def parse_descriptor_name(name: str) -> list[tuple[str, NeighborhoodSpec]]:
    """Split e.g. ``"LBP8NH+LBP16NH"`` into ``[("LBP", (8,1)), ("LBP", (16,2))]``."""
    parts = [p for p in name.split("+")]
    if not name or any(not p.strip() for p in parts):
        raise ValueError(f"unknown descriptor {name!r}")
    return [_parse_component(p) for p in parts]


def descriptor_length(name: str, mapping: str = "riu2") -> int:
    total = 0
    for family, spec in parse_descriptor_name(name):
        bins = build_mapping("riu2" if family == "LBPV" else mapping, spec.P).bin_count
        total += 2 * bins if family == "CLBP" else bins
    return total


def describe(img: GrayImage, name: str, mapping: str = "riu2") -> Descriptor:
    """Compute a named descriptor such as ``"CLBP16"`` or ``"LBP8NH+LBP16NH"``."""
    out = None
    for (family, spec), token in zip(parse_descriptor_name(name), name.split("+")):
        d = _FAMILIES[family](img, spec, mapping)
        d = Descriptor(d.values, token.strip())
        out = d if out is None else concat(out, d)
    return out


def format_descriptor_line(d: Descriptor, label: str) -> str:
    return f"{d.name}\t{label}\t" + ",".join(format(float(v), ".17g") for v in d.values)


def parse_descriptor_line(line: str) -> tuple[Descriptor, str]:
    try:
        name, label, values = line.rstrip("\n").split("\t")
    except ValueError:
        raise ValueError(f"malformed descriptor line: {line[:60]!r}") from None
    vals = [float(v) for v in values.split(",")] if values else []
    return Descriptor(np.array(vals), name), label


def write_descriptors(records, path) -> None:
    """Write ``(Descriptor, label)`` pairs, one per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d, label in records:
            fh.write(format_descriptor_line(d, label) + "\n")


def read_descriptors(path) -> list[tuple[Descriptor, str]]:
    with open(path, encoding="utf-8") as fh:
        return [parse_descriptor_line(line) for line in fh if line.strip()]
