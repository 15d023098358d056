"""Cutting-edge extraction from tool-head images.

The pipeline is: locate the insert screw with a circular Hough transform,
run Canny, find near-vertical lines with a standard Hough transform, and crop
from the leftmost such line, which is the cutting edge for the head's
direction of rotation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .imageio import GrayImage

log = logging.getLogger(__name__)


class EdgeNotFoundError(RuntimeError):
    """No near-vertical line was found, so the cutting edge cannot be located."""


@dataclass(frozen=True)
class EdgeMap:
    bits: np.ndarray  # bool, (height, width)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class Circle:
    cx: int
    cy: int
    r: int
    votes: float


@dataclass(frozen=True)
class Line:
    rho: float
    theta: float
    votes: int

    def x_at(self, y: float) -> float:
        """Column where the line crosses row ``y`` (near-vertical lines only)."""
        return (self.rho - y * math.sin(self.theta)) / math.cos(self.theta)


# --------------------------------------------------------------------------
# Canny

def gaussian_kernel(size: int = 5, sigma: float = 1.4) -> np.ndarray:
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    xx, yy = np.meshgrid(ax, ax)
    k = np.exp(-(xx ** 2 + yy ** 2) / (2.0 * sigma ** 2))
    return k / k.sum()


def gradients(img: GrayImage, sigma: float = 1.4) -> tuple[np.ndarray, np.ndarray]:
    """Sobel gradients ``(gx, gy)`` of the Gaussian-smoothed image."""
    g = img.pixels.astype(np.float64)
    smooth = ndimage.convolve(g, gaussian_kernel(5, sigma), mode="nearest")
    gx = ndimage.sobel(smooth, axis=1, mode="nearest")
    gy = ndimage.sobel(smooth, axis=0, mode="nearest")
    return gx, gy


def _shift(a: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """``out[y, x] = a[y + dy, x + dx]`` with zero fill."""
    out = np.zeros_like(a)
    H, W = a.shape
    ys, yd = (slice(dy, H), slice(0, H - dy)) if dy >= 0 else (slice(0, H + dy), slice(-dy, H))
    xs, xd = (slice(dx, W), slice(0, W - dx)) if dx >= 0 else (slice(0, W + dx), slice(-dx, W))
    out[yd, xd] = a[ys, xs]
    return out


def non_max_suppression(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Thin ``mag`` to ridges along the gradient direction (4 sectors).

    A pixel survives if it is strictly above its neighbour behind and at
    least its neighbour ahead, so a tied pair keeps exactly one pixel.
    """
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    sector = np.zeros(mag.shape, dtype=np.int8)  # 0: horizontal gradient
    sector[(angle >= 22.5) & (angle < 67.5)] = 1
    sector[(angle >= 67.5) & (angle < 112.5)] = 2
    sector[(angle >= 112.5) & (angle < 157.5)] = 3
    # (dy, dx) of the "ahead" neighbour; rows grow downward so +gy is +row
    steps = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    keep = np.zeros(mag.shape, dtype=bool)
    for s, (dy, dx) in steps.items():
        ahead = _shift(mag, dy, dx)
        behind = _shift(mag, -dy, -dx)
        keep |= (sector == s) & (mag > behind) & (mag >= ahead)
    return np.where(keep & (mag > 0), mag, 0.0)


def hysteresis(nms: np.ndarray, low: float, high: float) -> np.ndarray:
    weak = nms >= low
    strong = nms >= high
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return np.zeros(nms.shape, dtype=bool)
    seeded = np.zeros(n + 1, dtype=bool)
    seeded[np.unique(labels[strong])] = True
    seeded[0] = False
    return seeded[labels]


def canny(img: GrayImage, low: float | None = None, high: float | None = None,
          sigma: float = 1.4, low_frac: float = 0.1, high_frac: float = 0.3) -> EdgeMap:
    """Canny edge detector.

    ``low``/``high`` are gradient-magnitude thresholds in Sobel units. When
    omitted they default to ``low_frac``/``high_frac`` of the largest
    gradient magnitude in the image.
    """
    if low is not None and high is not None and not 0 < low < high:
        raise ValueError(f"need 0 < low < high, got low={low}, high={high}")
    gx, gy = gradients(img, sigma)
    mag = np.hypot(gx, gy)
    peak = float(mag.max())
    if peak <= 1e-9:
        return EdgeMap(np.zeros(img.shape, dtype=bool))
    if high is None:
        high = high_frac * peak
    if low is None:
        low = min(low_frac * peak, high)
    if not 0 < low <= high:
        raise ValueError(f"need 0 < low <= high, got low={low}, high={high}")
    nms = non_max_suppression(mag, gx, gy)
    return EdgeMap(hysteresis(nms, low, high))


# --------------------------------------------------------------------------
# Hough transforms

def _ring_offsets(r: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer offsets whose distance from the origin rounds to ``r``."""
    ax = np.arange(-r - 1, r + 2)
    dx, dy = np.meshgrid(ax, ax)
    m = np.rint(np.hypot(dx, dy)) == r
    return dx[m], dy[m]


def circle_accumulator(edges: EdgeMap, r_min: int, r_max: int) -> np.ndarray:
    """Vote fractions ``acc[r - r_min, cy, cx]``.

    Each edge pixel votes for every centre at distance ``r``; the count is
    divided by the ring length so scores are comparable across radii.
    """
    H, W = edges.bits.shape
    ys, xs = np.nonzero(edges.bits)
    acc = np.zeros((r_max - r_min + 1, H, W), dtype=np.float32)
    if ys.size == 0:
        return acc
    for k, r in enumerate(range(r_min, r_max + 1)):
        dx, dy = _ring_offsets(r)
        cx = (xs[:, None] - dx[None, :]).ravel()
        cy = (ys[:, None] - dy[None, :]).ravel()
        ok = (cx >= 0) & (cx < W) & (cy >= 0) & (cy < H)
        votes = np.bincount(cy[ok] * W + cx[ok], minlength=H * W)
        acc[k] = (votes / dx.size).reshape(H, W)
    return acc


def hough_circles(edges: EdgeMap, r_min: int = 40, r_max: int = 80, threshold: float = 0.35,
                  min_dist: float | None = None, max_circles: int | None = None) -> list[Circle]:
    """Detect circles with radius in ``[r_min, r_max]``.

    ``votes`` on each result is the fraction of the ring supported by edge
    pixels. Peaks closer than ``min_dist`` (default ``r_min``) to a stronger
    one are suppressed.
    """
    if not 1 <= r_min <= r_max:
        raise ValueError(f"need 1 <= r_min <= r_max, got {r_min}, {r_max}")
    if min_dist is None:
        min_dist = r_min
    if edges.count() == 0:
        return []
    acc = circle_accumulator(edges, r_min, r_max)
    best_k = acc.argmax(axis=0)
    score = acc.max(axis=0)
    cy, cx = np.nonzero(score >= threshold)
    if cy.size == 0:
        return []
    order = np.lexsort((cx, cy, -score[cy, cx]))
    found: list[Circle] = []
    for idx in order:
        y, x = int(cy[idx]), int(cx[idx])
        if any((c.cx - x) ** 2 + (c.cy - y) ** 2 < min_dist ** 2 for c in found):
            continue
        found.append(Circle(x, y, r_min + int(best_k[y, x]), float(score[y, x])))
        if max_circles is not None and len(found) >= max_circles:
            break
    return found


def line_accumulator(edges: EdgeMap, n_theta: int = 180) -> tuple[np.ndarray, np.ndarray, int]:
    """Votes ``acc[rho + offset, k]`` for ``theta_k = k * pi / n_theta``."""
    H, W = edges.bits.shape
    offset = int(math.ceil(math.hypot(H, W)))
    thetas = np.arange(n_theta) * (math.pi / n_theta)
    acc = np.zeros((2 * offset + 1, n_theta), dtype=np.int64)
    ys, xs = np.nonzero(edges.bits)
    if ys.size:
        rho = np.rint(xs[:, None] * np.cos(thetas) + ys[:, None] * np.sin(thetas)).astype(np.int64)
        flat = (rho + offset) * n_theta + np.arange(n_theta)
        acc += np.bincount(flat.ravel(), minlength=acc.size).reshape(acc.shape)
    return acc, thetas, offset


def hough_lines(edges: EdgeMap, vote_threshold: int, suppress_rho: int = 5,
                suppress_theta: int = 5) -> list[Line]:
    """Standard Hough transform with 1 px / 1 degree bins.

    Returns peaks with at least ``vote_threshold`` votes, strongest first;
    cells within ``suppress_rho`` px and ``suppress_theta`` bins of a stronger
    peak are dropped.
    """
    if vote_threshold < 1:
        raise ValueError("vote_threshold must be >= 1")
    acc, thetas, offset = line_accumulator(edges)
    rr, tt = np.nonzero(acc >= vote_threshold)
    if rr.size == 0:
        return []
    v = acc[rr, tt]
    order = np.lexsort((tt, rr, -v))
    n_theta = thetas.size
    kept: list[tuple[int, int]] = []
    lines: list[Line] = []
    for idx in order:
        r, t = int(rr[idx]), int(tt[idx])
        close = False
        for kr, kt in kept:
            dt = abs(kt - t)
            if dt <= suppress_theta and abs(kr - r) <= suppress_rho:
                close = True
                break
            # theta wraps at pi with rho negated
            if n_theta - dt <= suppress_theta and abs((kr - offset) + (r - offset)) <= suppress_rho:
                close = True
                break
        if close:
            continue
        kept.append((r, t))
        lines.append(Line(float(r - offset), float(thetas[t]), int(v[idx])))
    return lines


# --------------------------------------------------------------------------
# cutting-edge crop

@dataclass(frozen=True)
class EdgeConfig:
    r_min: int = 40
    r_max: int = 80
    circle_threshold: float = 0.35
    sigma: float = 1.4
    low_frac: float = 0.1
    high_frac: float = 0.3
    vertical_tol_deg: float = 5.0
    left_margin: int = 10
    crop_width: float = 0.35
    line_votes_frac: float = 0.2  # of image height

    def __post_init__(self):
        if not 1 <= self.r_min <= self.r_max:
            raise ValueError(f"need 1 <= r_min <= r_max, got {self.r_min}, {self.r_max}")
        if not 0 < self.low_frac < self.high_frac <= 1:
            raise ValueError("need 0 < low_frac < high_frac <= 1")
        if not 0 < self.crop_width <= 1:
            raise ValueError("crop_width must lie in (0, 1]")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass
class CuttingEdge:
    image: GrayImage
    column: int
    width: int
    line: Line
    circle: Circle | None = None
    candidates: list[Line] = field(default_factory=list)

    def sidecar(self) -> dict:
        return {
            "column": self.column,
            "width": self.width,
            "line": asdict(self.line),
            "circle": asdict(self.circle) if self.circle else None,
            "vertical_lines": [asdict(c) for c in self.candidates],
        }


def vertical_lines(edges: EdgeMap, config: EdgeConfig = EdgeConfig()) -> list[Line]:
    threshold = max(1, int(round(config.line_votes_frac * edges.height)))
    tol = math.radians(config.vertical_tol_deg)
    return [ln for ln in hough_lines(edges, threshold)
            if ln.theta < tol or math.pi - ln.theta < tol]


def find_cutting_edge(img: GrayImage, config: EdgeConfig = EdgeConfig()) -> CuttingEdge:
    """Locate and crop the cutting edge, keeping the detection details."""
    edges = canny(img, sigma=config.sigma, low_frac=config.low_frac, high_frac=config.high_frac)
    circles = hough_circles(edges, config.r_min, config.r_max, config.circle_threshold,
                            max_circles=1) if edges.count() else []
    circle = circles[0] if circles else None
    if circle is None:
        log.warning("no screw circle with radius in [%d, %d]", config.r_min, config.r_max)
    else:
        log.info("screw at (%d, %d) r=%d", circle.cx, circle.cy, circle.r)
    mid = (img.height - 1) / 2.0
    cands = [ln for ln in vertical_lines(edges, config)
             if ln.x_at(mid) >= config.left_margin - 0.5 and ln.x_at(mid) < img.width]
    if not cands:
        raise EdgeNotFoundError("no near-vertical line found; cannot localize the cutting edge")
    cands.sort(key=lambda ln: (ln.x_at(mid), -ln.votes))
    line = cands[0]
    x0 = min(max(int(round(line.x_at(mid))), 0), img.width - 1)
    width = max(1, int(round(config.crop_width * img.width)))
    x1 = min(img.width, x0 + width)
    return CuttingEdge(img.crop(x0, 0, x1, img.height), x0, x1 - x0, line, circle, cands)


def crop_cutting_edge(img: GrayImage, config: EdgeConfig = EdgeConfig()) -> GrayImage:
    return find_cutting_edge(img, config).image
