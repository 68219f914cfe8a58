"""Shared fixture geometry and independent brute-force oracles.

The oracles here are deliberately naive re-implementations (per-pixel loops,
flood fill, minor-gcd arithmetic) kept separate from the package so that each
fast path is checked against an implementation that shares none of its code.
"""

from math import gcd
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest

from neurotopo import BinaryImage, GrayImage

FIXTURES = Path(__file__).parent / "fixtures"

# 5x5 mask of diagonally touching pixels: two components, three holes
SPECKLE_ROWS = ("01001", "10100", "01010", "00101", "00010")


def mask_from_rows(rows):
    return BinaryImage(np.array([[c == "1" for c in row] for row in rows]))


@pytest.fixture
def speckle_mask():
    return mask_from_rows(SPECKLE_ROWS)


@pytest.fixture
def annulus_mask():
    m = np.ones((3, 3), dtype=bool)
    m[1, 1] = False
    return BinaryImage(m)


def random_mask(rng, shape, p=0.5):
    return BinaryImage(rng.random(shape) < p)


def random_gray(rng, shape):
    return GrayImage(rng.integers(0, 256, shape).astype(np.uint8))


# -- median-stable blob painters (shapes that are fixed points of the 3x3
#    median filter, so pipeline gates see exact areas) --------------------------


def paint_rounded_rect(img, x0, y0, w, h, value=200):
    """w*h rectangle minus its 4 corner pixels; area w*h - 4."""
    img[y0 : y0 + h, x0 : x0 + w] = value
    for cx, cy in ((x0, y0), (x0 + w - 1, y0), (x0, y0 + h - 1), (x0 + w - 1, y0 + h - 1)):
        img[cy, cx] = 0


def paint_chamfered_7x7(img, x0, y0, depths, value=200):
    """7x7 square with 45-degree chamfered corners; median-stable, round-ish."""
    img[y0 : y0 + 7, x0 : x0 + 7] = value
    corners = ((x0, y0, 1, 1), (x0 + 6, y0, -1, 1), (x0, y0 + 6, 1, -1), (x0 + 6, y0 + 6, -1, -1))
    for depth, (cx, cy, sx, sy) in zip(depths, corners):
        for i in range(depth):
            for j in range(depth - i):
                img[cy + sy * i, cx + sx * j] = 0


def paint_blob_39(img, x0, y0, value=200):
    paint_chamfered_7x7(img, x0, y0, (1, 2, 2, 2), value)


def paint_blob_40(img, x0, y0, value=200):
    paint_chamfered_7x7(img, x0, y0, (1, 1, 1, 3), value)


# -- independent oracles ---------------------------------------------------------


def naive_median(pixels, radius):
    """Per-pixel sort with truncated windows; lower median on even counts."""
    h, w = pixels.shape
    out = np.zeros_like(pixels)
    for y in range(h):
        for x in range(w):
            window = []
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w:
                        window.append(int(pixels[yy, xx]))
            window.sort()
            out[y, x] = window[(len(window) - 1) // 2]
    return out


def naive_mode(pixels, center, radius):
    cx, cy = center
    h, w = pixels.shape
    counts = {}
    for y in range(h):
        for x in range(w):
            if (x - cx) ** 2 + (y - cy) ** 2 <= radius * radius:
                v = int(pixels[y, x])
                counts[v] = counts.get(v, 0) + 1
    best = max(counts.values())
    return min(v for v, c in counts.items() if c == best)


def flood_fill_count(mask, connectivity):
    """Component count by BFS flood fill; independent of the run/union-find path."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    if connectivity == 8:
        steps = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if dy or dx]
    else:
        steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    count = 0
    for y in range(h):
        for x in range(w):
            if mask[y, x] and not seen[y, x]:
                count += 1
                stack = [(y, x)]
                seen[y, x] = True
                while stack:
                    cy, cx = stack.pop()
                    for dy, dx in steps:
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            stack.append((ny, nx))
    return count


def invariant_factors_by_minors(mat):
    """Invariant factors via gcds of k x k minors; exponential, for tiny matrices."""
    mat = [[int(v) for v in row] for row in np.asarray(mat)]
    m, n = len(mat), len(mat[0]) if mat else 0

    def det(rows, cols):
        if len(rows) == 1:
            return mat[rows[0]][cols[0]]
        total = 0
        for k, c in enumerate(cols):
            sub = det(rows[1:], cols[:k] + cols[k + 1 :])
            total += (-1) ** k * mat[rows[0]][c] * sub
        return total

    divisors = [1]
    for k in range(1, min(m, n) + 1):
        g = 0
        for rows in combinations(range(m), k):
            for cols in combinations(range(n), k):
                g = gcd(g, det(list(rows), list(cols)))
        if g == 0:
            break
        divisors.append(g)
    return [divisors[i] // divisors[i - 1] for i in range(1, len(divisors))]
