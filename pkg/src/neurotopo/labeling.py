"""Connected-component labeling and per-component shape statistics.

Labeling is union-find over horizontal runs, so cost scales with the number
of runs rather than pixels. Labels are assigned in raster order of each
component's first pixel, which makes every downstream report byte-stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .images import BinaryImage


@dataclass(frozen=True)
class ComponentLabeling:
    """Per-pixel labels (0 = background), component count and connectivity."""

    labels: np.ndarray
    count: int
    connectivity: int

    def __post_init__(self) -> None:
        lbl = np.asarray(self.labels)
        object.__setattr__(self, "labels", lbl)
        lbl.flags.writeable = False

    def pixels_of(self, label: int) -> Tuple[np.ndarray, np.ndarray]:
        """(ys, xs) arrays of the pixels carrying `label`."""
        self._check_label(label)
        return np.nonzero(self.labels == label)

    def _check_label(self, label: int) -> None:
        if not 1 <= label <= self.count:
            raise ValueError(f"unknown label {label}; valid range is 1..{self.count}")


@dataclass(frozen=True)
class ComponentStats:
    """Area, centroid, ellipse-equivalent axes and bounding box of a component.

    Axes are 4*sqrt(eigenvalues) of the 2x2 second-central-moment matrix, the
    usual equivalent-ellipse convention, so a solid disk of diameter d reports
    major ~ minor ~ d.
    """

    area: int
    centroid: Tuple[float, float]
    major_axis: float
    minor_axis: float
    bounding_box: Tuple[int, int, int, int]  # x0, y0, x1, y1 inclusive

    @property
    def elongation(self) -> float:
        """major/minor axis ratio; infinite for degenerate (line-like) shapes."""
        if self.minor_axis == 0.0:
            return float("inf") if self.major_axis > 0 else 1.0
        return self.major_axis / self.minor_axis


class _RunUnionFind:
    __slots__ = ("parent",)

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:  # path compression
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the smaller run index as root: first-pixel raster order
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


def _row_runs(mask: np.ndarray) -> List[np.ndarray]:
    """Per-row arrays of (start, end) column intervals, inclusive."""
    h, w = mask.shape
    padded = np.zeros((h, w + 2), dtype=bool)
    padded[:, 1:-1] = mask
    diff = np.diff(padded.astype(np.int8), axis=1)
    runs = []
    for y in range(h):
        starts = np.nonzero(diff[y] == 1)[0]
        ends = np.nonzero(diff[y] == -1)[0] - 1
        runs.append(np.stack([starts, ends], axis=1))
    return runs


def label_components(bin_img: BinaryImage, connectivity: int = 8) -> ComponentLabeling:
    """Label connected components under 4- or 8-connectivity.

    Deterministic: component k is the k-th component encountered in raster
    order of first pixels, and labels form the contiguous range 1..count.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    mask = bin_img.mask
    h, w = mask.shape
    row_runs = _row_runs(mask)
    n_runs = sum(len(r) for r in row_runs)
    labels = np.zeros((h, w), dtype=np.int32)
    if n_runs == 0:
        return ComponentLabeling(labels, 0, connectivity)

    uf = _RunUnionFind(n_runs)
    # 8-connectivity lets intervals touch diagonally (reach extends by 1)
    reach = 1 if connectivity == 8 else 0
    row_offsets = np.cumsum([0] + [len(r) for r in row_runs])
    for y in range(1, h):
        above, here = row_runs[y - 1], row_runs[y]
        if len(above) == 0 or len(here) == 0:
            continue
        i = j = 0
        while i < len(above) and j < len(here):
            a_start, a_end = above[i]
            b_start, b_end = here[j]
            if b_start <= a_end + reach and a_start <= b_end + reach:
                uf.union(row_offsets[y - 1] + i, row_offsets[y] + j)
            # advance the run whose (reach-extended) end comes first; on ties
            # advance the upper row, else its next run can be skipped: runs in
            # one row sit >= 2 apart, so the lower run can still reach it
            if a_end + reach <= b_end:
                i += 1
            else:
                j += 1

    roots = np.fromiter((uf.find(i) for i in range(n_runs)), dtype=np.int64, count=n_runs)
    unique_roots, component_of_run = np.unique(roots, return_inverse=True)
    # unique_roots is sorted by run index, i.e. raster order of first pixels
    count = len(unique_roots)

    run_rows = np.repeat(np.arange(h), [len(r) for r in row_runs])
    all_runs = np.concatenate([r for r in row_runs if len(r)], axis=0)
    lengths = all_runs[:, 1] - all_runs[:, 0] + 1
    flat_starts = run_rows * w + all_runs[:, 0]
    total = int(lengths.sum())
    offsets = np.arange(total) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    flat_idx = np.repeat(flat_starts, lengths) + offsets
    labels.ravel()[flat_idx] = np.repeat(component_of_run + 1, lengths)
    return ComponentLabeling(labels, count, connectivity)


def component_stats(labeling: ComponentLabeling, label: int) -> ComponentStats:
    """Shape statistics of one labeled component."""
    ys, xs = labeling.pixels_of(label)
    area = len(xs)
    cx = float(xs.mean())
    cy = float(ys.mean())
    dx = xs - cx
    dy = ys - cy
    mxx = float((dx * dx).mean())
    myy = float((dy * dy).mean())
    mxy = float((dx * dy).mean())
    # eigenvalues of [[mxx, mxy], [mxy, myy]]
    trace_half = (mxx + myy) / 2.0
    disc = np.sqrt(max(((mxx - myy) / 2.0) ** 2 + mxy * mxy, 0.0))
    lam1 = max(trace_half + disc, 0.0)
    lam2 = max(trace_half - disc, 0.0)
    return ComponentStats(
        area=area,
        centroid=(cx, cy),
        major_axis=4.0 * float(np.sqrt(lam1)),
        minor_axis=4.0 * float(np.sqrt(lam2)),
        bounding_box=(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())),
    )


def all_component_stats(labeling: ComponentLabeling) -> List[ComponentStats]:
    return [component_stats(labeling, k) for k in range(1, labeling.count + 1)]
