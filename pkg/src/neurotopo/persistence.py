"""Persistent homology over threshold filtrations, and zigzag H0 across stacks.

A filtration is the nested family of complexes swept out by a monotone list
of thresholds; bright structure enters a superlevel filtration first, which
matches fluorescence imagery. Bar lengths are measured in level indices, not
intensity units, so denoising behaves the same however the levels are spaced.
An infinite bar counts as maximally long.

Besides the textbook boundary-matrix reduction there is a component-tracking
route for H0 that scales to full frames; the two are cross-checked in the
test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cubical import CubicalComplex, build_complex
from .images import BinaryImage, DimensionMismatch, GrayImage
from .labeling import label_components


@dataclass(frozen=True)
class Filtration:
    """Nested complexes over monotone threshold levels, with per-cell births."""

    levels: Tuple[float, ...]
    direction: str
    masks: np.ndarray  # (n_levels, h, w) bool, nested increasing
    complex: CubicalComplex  # the final (largest) complex
    birth: Tuple[np.ndarray, np.ndarray, np.ndarray]  # level index per cell, per grade

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def mask_at(self, level_index: int) -> BinaryImage:
        return BinaryImage(self.masks[level_index])

    def complex_at(self, level_index: int) -> CubicalComplex:
        return build_complex(self.mask_at(level_index))

    def cells_born_by(self, level_index: int, dim: int) -> np.ndarray:
        """Keys of the dim-cells present at the given level."""
        keys = (self.complex.vertex_keys, self.complex.edge_keys, self.complex.square_keys)[dim]
        return keys[self.birth[dim] <= level_index]


def build_filtration(img: GrayImage, levels: Sequence[float], direction: str = "superlevel") -> Filtration:
    """Threshold filtration of a grayscale image.

    superlevel: strictly descending levels, pixel enters when intensity >= level.
    sublevel: strictly ascending levels, pixel enters when intensity <= level.
    """
    levels = tuple(float(t) for t in levels)
    if not levels:
        raise ValueError("need at least one level")
    diffs = np.diff(levels)
    if direction == "superlevel":
        if np.any(diffs >= 0):
            raise ValueError(f"superlevel filtrations need strictly descending levels, got {levels}")
        masks = np.stack([img.pixels >= t for t in levels])
    elif direction == "sublevel":
        if np.any(diffs <= 0):
            raise ValueError(f"sublevel filtrations need strictly ascending levels, got {levels}")
        masks = np.stack([img.pixels <= t for t in levels])
    else:
        raise ValueError(f"direction must be 'superlevel' or 'sublevel', got {direction!r}")

    n_levels = len(levels)
    final_mask = masks[-1]
    cx = build_complex(BinaryImage(final_mask))

    pixel_birth = np.full(final_mask.shape, n_levels, dtype=np.int32)
    for i in range(n_levels - 1, -1, -1):
        pixel_birth[masks[i]] = i

    ys, xs = np.nonzero(final_mask)
    sq_birth = pixel_birth[ys, xs].copy()  # same raster order as square_keys
    stride = cx.stride
    square_keys = cx.square_keys

    edge_birth = np.full(cx.n_cells(1), n_levels, dtype=np.int32)
    vertex_birth = np.full(cx.n_cells(0), n_levels, dtype=np.int32)
    for delta in (-stride, 1, stride, -1):
        idx = np.searchsorted(cx.edge_keys, square_keys + delta)
        np.minimum.at(edge_birth, idx, sq_birth)
    for delta in (-stride - 1, -stride + 1, stride - 1, stride + 1):
        idx = np.searchsorted(cx.vertex_keys, square_keys + delta)
        np.minimum.at(vertex_birth, idx, sq_birth)

    return Filtration(levels, direction, masks, cx, (vertex_birth, edge_birth, sq_birth))


# -- barcodes -------------------------------------------------------------------


@dataclass(frozen=True)
class Barcode:
    """Bars (dimension, birth level, death level or None for infinite)."""

    intervals: Tuple[Tuple[int, int, Optional[int]], ...]
    n_levels: int

    def bars(self, dim: Optional[int] = None) -> List[Tuple[int, int, Optional[int]]]:
        return [b for b in self.intervals if dim is None or b[0] == dim]

    def alive_at(self, level_index: int, dim: int) -> int:
        """Bars alive at a level: born at or before it, not yet dead."""
        return sum(
            1
            for d, b, e in self.intervals
            if d == dim and b <= level_index and (e is None or e > level_index)
        )

    def length(self, bar: Tuple[int, int, Optional[int]]) -> int:
        """Bar length in levels; infinite bars count as maximal."""
        _, birth, death = bar
        return (self.n_levels if death is None else death) - birth

    def to_csv(self) -> str:
        lines = ["dimension,birth,death"]
        for d, b, e in self.intervals:
            lines.append(f"{d},{b},{'inf' if e is None else e}")
        return "\n".join(lines) + "\n"


def persistent_homology(filt: Filtration) -> Barcode:
    """Barcode by column reduction of the boundary matrix in filtration order.

    Cells are ordered by (birth level, dimension, canonical index); the usual
    pairing then yields bars whose alive-counts at every level equal that
    level's Betti numbers. Quadratic-ish in cell count: meant for region-scale
    images, not full frames.
    """
    cx = filt.complex
    births = filt.birth
    order: List[Tuple[int, int, int]] = []
    for dim in (0, 1, 2):
        b = births[dim]
        order.extend((int(b[i]), dim, i) for i in range(cx.n_cells(dim)))
    order.sort()
    position = {(dim, idx): p for p, (_, dim, idx) in enumerate(order)}

    columns: List[int] = []
    for _, dim, idx in order:
        col = 0
        if dim > 0:
            for face, _sign in cx.boundary_list(dim, idx):
                col ^= 1 << position[(dim - 1, face)]
        columns.append(col)

    low_owner: Dict[int, int] = {}
    pair_of: Dict[int, int] = {}
    for j, col in enumerate(columns):
        while col:
            low = col.bit_length() - 1
            if low in low_owner:
                col ^= columns[low_owner[low]]
            else:
                low_owner[low] = j
                columns[j] = col
                pair_of[low] = j
                break
        else:
            columns[j] = 0

    intervals: List[Tuple[int, int, Optional[int]]] = []
    for p, (birth, dim, idx) in enumerate(order):
        if columns[p] != 0:
            continue  # p creates a class
        if p in pair_of:
            death = order[pair_of[p]][0]
            if death > birth:
                intervals.append((dim, birth, death))
        else:
            intervals.append((dim, birth, None))
    intervals.sort(key=lambda t: (t[0], t[1], t[2] is not None, t[2] or 0))
    return Barcode(tuple(intervals), filt.n_levels)


# -- H0 by component tracking ------------------------------------------------------


def _track_components(masks: np.ndarray):
    """Elder-rule class tracking through nested masks.

    Returns (class_birth, class_death, final_class_of_component) where death
    is None for classes alive at the last level. Classes are numbered in
    creation order; on a merge the eldest class absorbs the others.
    """
    n_levels = len(masks)
    class_birth: List[int] = []
    class_death: List[Optional[int]] = []
    prev_class_of_comp: List[int] = []
    prev_labeling = None
    for i in range(n_levels):
        labeling = label_components(BinaryImage(masks[i]), connectivity=8)
        class_of_comp: List[int] = [-1] * labeling.count
        merged: Dict[int, List[int]] = {}
        if prev_labeling is not None and prev_labeling.count:
            flat_prev = prev_labeling.labels.ravel()
            flat_cur = labeling.labels.ravel()
            values, first_idx = np.unique(flat_prev, return_index=True)
            for value, fi in zip(values, first_idx):
                if value == 0:
                    continue
                cur = int(flat_cur[fi])  # nested masks: any pixel of the class works
                merged.setdefault(cur, []).append(prev_class_of_comp[value - 1])
        for cur_label, classes in merged.items():
            survivor = min(classes, key=lambda c: (class_birth[c], c))
            class_of_comp[cur_label - 1] = survivor
            for c in classes:
                if c != survivor:
                    class_death[c] = i
        for k in range(labeling.count):
            if class_of_comp[k] == -1:
                class_of_comp[k] = len(class_birth)
                class_birth.append(i)
                class_death.append(None)
        prev_labeling = labeling
        prev_class_of_comp = class_of_comp
    return class_birth, class_death, prev_class_of_comp


def h0_barcode_by_tracking(filt: Filtration) -> Barcode:
    """H0 bars from component tracking; agrees with persistent_homology."""
    births, deaths, _ = _track_components(filt.masks)
    intervals = []
    for b, d in zip(births, deaths):
        if d is None or d > b:
            intervals.append((0, b, d))
    intervals.sort(key=lambda t: (t[0], t[1], t[2] is not None, t[2] or 0))
    return Barcode(tuple(intervals), len(filt.masks))


def persistent_components(
    img: GrayImage,
    levels: Sequence[float],
    min_persistence: int,
    direction: str = "superlevel",
) -> BinaryImage:
    """Keep final-level components whose H0 class lived >= min_persistence levels.

    A class alive at the final level has effective death = number of levels,
    so with min_persistence 1 this is exactly the final-level binarization.
    Class membership follows elder-rule component tracking.
    """
    if min_persistence < 1:
        raise ValueError(f"min_persistence must be >= 1, got {min_persistence}")
    filt = build_filtration(img, levels, direction)
    class_birth, _, final_class_of_comp = _track_components(filt.masks)
    n_levels = filt.n_levels
    final_labeling = label_components(filt.mask_at(n_levels - 1), connectivity=8)
    keep = np.zeros(final_labeling.count + 1, dtype=bool)
    for comp_idx, cls in enumerate(final_class_of_comp):
        if n_levels - class_birth[cls] >= min_persistence:
            keep[comp_idx + 1] = True
    return BinaryImage(keep[final_labeling.labels])


# -- zigzag H0 ---------------------------------------------------------------------


@dataclass(frozen=True)
class ZigzagIntervals:
    """H0 intervals (start slice, end slice), 1-indexed inclusive."""

    intervals: Tuple[Tuple[int, int], ...]
    n_slices: int

    def covering(self, slice_index: int) -> int:
        return sum(1 for s, e in self.intervals if s <= slice_index <= e)

    def spanning_all(self) -> int:
        return sum(1 for s, e in self.intervals if s == 1 and e == self.n_slices)

    def to_csv(self) -> str:
        lines = ["start,end"]
        for s, e in self.intervals:
            lines.append(f"{s},{e}")
        return "\n".join(lines) + "\n"


def zigzag_h0(slices: Sequence[BinaryImage]) -> ZigzagIntervals:
    """Interval decomposition of H0 over X1 <- X1^X2 -> X2 <- ... without a filtration.

    Each shared component of consecutive slices carries exactly one interval
    across the step; at a merge the elder (earlier-started) interval survives,
    at a split the elder rides the lowest-labeled branch and the remaining
    branches start fresh intervals. Per slice, intervals covering it equal
    that slice's component count.
    """
    if not slices:
        raise ValueError("need at least one slice")
    shape = slices[0].mask.shape
    for s in slices[1:]:
        if s.mask.shape != shape:
            raise DimensionMismatch("all slices must share dimensions")

    intervals: List[List[int]] = []  # [start, end]; end fixed when the interval dies
    labeling = label_components(slices[0], connectivity=8)
    alive: Dict[int, int] = {}  # current-slice component label -> interval index
    for label in range(1, labeling.count + 1):
        intervals.append([1, -1])
        alive[label] = len(intervals) - 1

    for i in range(1, len(slices)):
        prev_img, cur_img = slices[i - 1], slices[i]
        cur_labeling = label_components(cur_img, connectivity=8)
        inter = BinaryImage(prev_img.mask & cur_img.mask)
        inter_labeling = label_components(inter, connectivity=8)

        # bipartite step graph between previous and current components
        edges = set()
        flat_inter = inter_labeling.labels.ravel()
        flat_prev = labeling.labels.ravel()
        flat_cur = cur_labeling.labels.ravel()
        values, first_idx = np.unique(flat_inter, return_index=True)
        for value, fi in zip(values, first_idx):
            if value == 0:
                continue
            edges.add((int(flat_prev[fi]), int(flat_cur[fi])))

        adj_c: Dict[int, List[int]] = {}
        adj_d: Dict[int, List[int]] = {}
        for c, d in edges:
            adj_c.setdefault(c, []).append(d)
            adj_d.setdefault(d, []).append(c)

        next_alive: Dict[int, int] = {}
        seen_c, seen_d = set(), set()
        for c0 in sorted(adj_c):
            if c0 in seen_c:
                continue
            comp_c, comp_d = [], []
            stack = [("c", c0)]
            while stack:
                side, node = stack.pop()
                if side == "c":
                    if node in seen_c:
                        continue
                    seen_c.add(node)
                    comp_c.append(node)
                    stack.extend(("d", d) for d in adj_c[node])
                else:
                    if node in seen_d:
                        continue
                    seen_d.add(node)
                    comp_d.append(node)
                    stack.extend(("c", c) for c in adj_d[node])
            # one interval flows through this step component: the eldest
            members = [alive[c] for c in comp_c]
            survivor = min(members, key=lambda k: (intervals[k][0], k))
            next_alive[min(comp_d)] = survivor
            for k in members:
                if k != survivor:
                    intervals[k][1] = i  # ends at slice i (1-indexed)
            for d in comp_d:
                if d != min(comp_d):
                    intervals.append([i + 1, -1])
                    next_alive[d] = len(intervals) - 1
        # previous components with no overlap: their intervals end here
        for c, k in alive.items():
            if c not in seen_c:
                intervals[k][1] = i
        # current components with no overlap: fresh intervals
        for d in range(1, cur_labeling.count + 1):
            if d not in next_alive:
                intervals.append([i + 1, -1])
                next_alive[d] = len(intervals) - 1

        labeling = cur_labeling
        alive = next_alive

    for k in alive.values():
        intervals[k][1] = len(slices)
    out = sorted((s, e) for s, e in intervals)
    return ZigzagIntervals(tuple(out), len(slices))
