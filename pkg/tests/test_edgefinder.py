import math

import numpy as np
import pytest

from wearscope.edgefinder import (EdgeConfig, EdgeMap, EdgeNotFoundError, canny,
                                  crop_cutting_edge, find_cutting_edge, hough_circles,
                                  hough_lines)
from wearscope.imageio import GrayImage
from wearscope.synthetic import insert_mock


def disk_image(size, circles, fg=200, bg=40):
    yy, xx = np.mgrid[0:size, 0:size]
    g = np.full((size, size), bg)
    for cx, cy, r in circles:
        g[(xx - cx) ** 2 + (yy - cy) ** 2 <= r * r] = fg
    return GrayImage(g)


def test_canny_constant_image_is_empty():
    assert canny(GrayImage(np.full((32, 32), 90))).count() == 0


def test_canny_step_edge_single_chain():
    g = np.zeros((64, 64))
    g[:, 32:] = 255
    e = canny(GrayImage(g)).bits
    cols = np.nonzero(e.any(axis=0))[0]
    assert cols.size == 1 and abs(cols[0] - 32) <= 1
    assert e[:, cols[0]].all()


def test_canny_thresholds_validated():
    with pytest.raises(ValueError):
        canny(GrayImage(np.zeros((8, 8))), low=5, high=2)


def test_canny_high_threshold_monotone(rng):
    img = GrayImage(np.clip(rng.normal(128, 40, (48, 48)), 0, 255).round())
    prev = None
    for high in (50, 100, 200, 400, 800):
        e = canny(img, low=40, high=high).bits
        if prev is not None:
            assert not (e & ~prev).any()
        prev = e


def test_canny_translation_equivariant():
    g = np.full((80, 80), 30)
    g[20:50, 25:55] = 180
    a = canny(GrayImage(g)).bits
    b = canny(GrayImage(np.roll(g, (6, 4), axis=(0, 1)))).bits
    assert np.array_equal(np.roll(a, (6, 4), axis=(0, 1))[8:-8, 8:-8], b[8:-8, 8:-8])


def test_canny_deterministic(rng):
    img = GrayImage(rng.integers(0, 256, (40, 40)))
    assert np.array_equal(canny(img).bits, canny(img).bits)


def test_hough_circle_single():
    edges = canny(disk_image(256, [(120, 130, 60)]))
    top = hough_circles(edges, 40, 80)[0]
    assert abs(top.cx - 120) <= 2 and abs(top.cy - 130) <= 2 and abs(top.r - 60) <= 2


@pytest.mark.parametrize("r", [40, 52, 67, 80])
def test_hough_circle_radius_range(r):
    edges = canny(disk_image(256, [(128, 128, r)]))
    top = hough_circles(edges, 40, 80)[0]
    assert abs(top.cx - 128) <= 2 and abs(top.cy - 128) <= 2 and abs(top.r - r) <= 2
    assert 40 <= top.r <= 80


def test_hough_two_circles():
    edges = canny(disk_image(320, [(70, 80, 45), (210, 210, 75)]))
    found = hough_circles(edges, 40, 80)
    assert len(found) >= 2
    for cx, cy, r in [(70, 80, 45), (210, 210, 75)]:
        assert any(abs(c.cx - cx) <= 2 and abs(c.cy - cy) <= 2 and abs(c.r - r) <= 2
                   for c in found)
    assert found == sorted(found, key=lambda c: -c.votes)


def test_hough_empty_inputs():
    empty = EdgeMap(np.zeros((50, 50), dtype=bool))
    assert hough_circles(empty) == []
    assert hough_lines(empty, 1) == []


def test_hough_vertical_line():
    b = np.zeros((100, 80), dtype=bool)
    b[10:90, 30] = True
    top = hough_lines(EdgeMap(b), 20)[0]
    assert abs(math.degrees(top.theta)) <= 1 and abs(top.rho - 30) <= 1
    assert top.votes == 80


def test_hough_diagonal_line():
    b = np.zeros((100, 100), dtype=bool)
    for t in range(10, 90):
        b[t, t] = True  # y = x: normal at 3pi/4
    top = hough_lines(EdgeMap(b), 20)[0]
    assert abs(top.theta - 3 * math.pi / 4) <= math.radians(1)
    b2 = np.zeros((100, 100), dtype=bool)
    for t in range(10, 90):
        b2[99 - t, t] = True  # y = 99 - x: normal at pi/4
    top2 = hough_lines(EdgeMap(b2), 20)[0]
    assert abs(top2.theta - math.pi / 4) <= math.radians(1)
    assert abs(top2.rho - 99 / math.sqrt(2)) <= 1


def test_crop_on_mock():
    m = insert_mock(edge_column=90, radius=60, seed=3)
    res = find_cutting_edge(m.image)
    assert abs(res.column - 90) <= 2
    assert res.circle is not None and abs(res.circle.r - 60) <= 2
    assert res.image.height == m.image.height
    assert res.image.width == round(0.35 * m.image.width)


def test_crop_shift_equivariance():
    a = find_cutting_edge(insert_mock(edge_column=70, radius=55, seed=1).image).column
    b = find_cutting_edge(insert_mock(edge_column=80, radius=55, seed=1).image).column
    assert b - a == 10


def test_crop_stays_inside_image():
    m = insert_mock(width=320, edge_column=100, radius=50, seed=2)
    crop = crop_cutting_edge(m.image, EdgeConfig(crop_width=0.9))
    assert crop.width <= m.image.width - 100 + 2 and crop.height == m.image.height


def test_blank_image_has_no_edge():
    with pytest.raises(EdgeNotFoundError):
        crop_cutting_edge(GrayImage(np.full((200, 200), 80)))


def test_missing_circle_is_only_a_warning(caplog):
    g = np.full((200, 240), 30)
    g[20:180, 60:200] = 190
    res = find_cutting_edge(GrayImage(g))
    assert res.circle is None and abs(res.column - 60) <= 2
    assert "no screw circle" in caplog.text


def test_edge_config_validation():
    with pytest.raises(ValueError):
        EdgeConfig(r_min=90, r_max=80)
