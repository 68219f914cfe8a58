"""The four image analyses: synapse counting, nucleus counting, neuron
localization, and structure extraction from a z-stack, plus the validation
arithmetic used to compare automatic and manual counts.

Every pipeline is a pure function of images and parameters; reports echo the
parameters they were produced with so runs are reproducible and diffable.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .images import BinaryImage, DimensionMismatch, GrayImage, ImageStack, band_threshold, max_projection, median_filter, region_mode
from .labeling import ComponentStats, all_component_stats, component_stats, label_components
from .persistence import Barcode, build_filtration, h0_barcode_by_tracking, persistent_components, zigzag_h0


# -- ROI ------------------------------------------------------------------------


@dataclass(frozen=True)
class RoiPolyline:
    """Hand-traced dendrite path with a band half-width in pixels."""

    vertices: Tuple[Tuple[float, float], ...]
    band_width: float = 4.0

    def __post_init__(self) -> None:
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 2:
            raise ValueError("an ROI polyline needs at least 2 vertices")
        if self.band_width < 1:
            raise ValueError("band_width must be >= 1 pixel")
        object.__setattr__(self, "vertices", verts)

    @property
    def arc_length_px(self) -> float:
        return float(
            sum(
                math.dist(self.vertices[i], self.vertices[i + 1])
                for i in range(len(self.vertices) - 1)
            )
        )

    def length_microns(self, calibration: float) -> float:
        return self.arc_length_px * calibration

    def to_json(self) -> str:
        return json.dumps(
            {"vertices": [[x, y] for x, y in self.vertices], "band_width": self.band_width}
        )

    @classmethod
    def from_json(cls, text: str) -> "RoiPolyline":
        data = json.loads(text)
        return cls(tuple((v[0], v[1]) for v in data["vertices"]), float(data.get("band_width", 4.0)))


def rasterize_roi_band(roi: RoiPolyline, width: int, height: int) -> BinaryImage:
    """Pixels whose center lies within band_width of the polyline."""
    mask = np.zeros((height, width), dtype=bool)
    bw = roi.band_width
    for (x0, y0), (x1, y1) in zip(roi.vertices, roi.vertices[1:]):
        lo_x = max(int(math.floor(min(x0, x1) - bw)), 0)
        hi_x = min(int(math.ceil(max(x0, x1) + bw)), width - 1)
        lo_y = max(int(math.floor(min(y0, y1) - bw)), 0)
        hi_y = min(int(math.ceil(max(y0, y1) + bw)), height - 1)
        if lo_x > hi_x or lo_y > hi_y:
            continue
        ys, xs = np.mgrid[lo_y : hi_y + 1, lo_x : hi_x + 1]
        dx, dy = x1 - x0, y1 - y0
        seg_len2 = dx * dx + dy * dy
        if seg_len2 == 0:
            dist2 = (xs - x0) ** 2 + (ys - y0) ** 2
        else:
            t = ((xs - x0) * dx + (ys - y0) * dy) / seg_len2
            t = np.clip(t, 0.0, 1.0)
            dist2 = (xs - (x0 + t * dx)) ** 2 + (ys - (y0 + t * dy)) ** 2
        mask[lo_y : hi_y + 1, lo_x : hi_x + 1] |= dist2 <= bw * bw
    return BinaryImage(mask)


# -- synapse counting -------------------------------------------------------------


@dataclass(frozen=True)
class SynapseReport:
    count: int
    dendrite_length_um: Optional[float]
    density_per_100um: Optional[float]
    marked_mask: BinaryImage
    red_range: Tuple[int, int]
    green_range: Tuple[int, int]
    band_width: float

    def to_json_dict(self) -> dict:
        return {
            "count": self.count,
            "dendrite_length_um": self.dendrite_length_um,
            "density_per_100um": self.density_per_100um,
            "red_range": list(self.red_range),
            "green_range": list(self.green_range),
            "band_width": self.band_width,
        }

    def to_csv(self) -> str:
        header = "count,dendrite_length_um,density_per_100um,red_lo,red_hi,green_lo,green_hi,band_width"
        length = "" if self.dendrite_length_um is None else f"{self.dendrite_length_um:.6g}"
        density = "" if self.density_per_100um is None else f"{self.density_per_100um:.6g}"
        row = (
            f"{self.count},{length},{density},{self.red_range[0]},{self.red_range[1]},"
            f"{self.green_range[0]},{self.green_range[1]},{self.band_width:.6g}"
        )
        return header + "\n" + row + "\n"


def count_synapses(
    red: GrayImage,
    green: GrayImage,
    roi: Optional[RoiPolyline],
    red_range: Tuple[int, int],
    green_range: Tuple[int, int],
    calibration: Optional[float] = None,
    roi_band: Optional[BinaryImage] = None,
) -> SynapseReport:
    """Synapses = components of (red band) AND (green band) AND (dendrite band).

    Density is reported per 100 um of dendrite when a calibration is known
    (explicitly or from the red channel); the raw count is always present.
    `roi_band` lets interactive callers pass a pre-rasterized band so slider
    moves do not pay the rasterization cost again.
    """
    if (red.width, red.height) != (green.width, green.height):
        raise DimensionMismatch("red and green channels must share dimensions")
    marked = band_threshold(red, *red_range).mask & band_threshold(green, *green_range).mask
    band_width = roi.band_width if roi is not None else 0.0
    if roi is not None:
        band = roi_band if roi_band is not None else rasterize_roi_band(roi, red.width, red.height)
        marked = marked & band.mask
    marked_img = BinaryImage(marked)
    count = label_components(marked_img, connectivity=8).count

    calib = calibration if calibration is not None else red.calibration
    length_um = density = None
    if roi is not None and calib is not None:
        length_um = roi.length_microns(calib)
        density = 100.0 * count / length_um if length_um > 0 else None
    return SynapseReport(count, length_um, density, marked_img, tuple(red_range), tuple(green_range), band_width)


def percent_change(control_mean: float, treatment_mean: float) -> float:
    """Signed percent change; positive = inhibition, negative = potentiation."""
    if not control_mean > 0:
        raise ValueError(f"control mean must be positive, got {control_mean}")
    return 100.0 * (1.0 - treatment_mean / control_mean)


# -- nucleus counting --------------------------------------------------------------


@dataclass(frozen=True)
class NucleusParams:
    min_area: int = 40
    max_area: int = 200
    axis_limit: float = 2.0
    axis_mode: str = "ratio"  # "ratio": major/minor > limit; "absolute": major-minor > limit
    circle_radii: Tuple[int, ...] = (5, 10, 15)
    nuclei_threshold: Tuple[int, int] = (50, 255)
    neuron_threshold: Tuple[int, int] = (50, 255)
    median_radius: int = 1


@dataclass(frozen=True)
class NucleusReport:
    total_cells: int
    neuron_count: int
    kept: Tuple[Tuple[ComponentStats, str], ...]
    rejected: Tuple[Tuple[ComponentStats, str], ...]
    params: NucleusParams

    def to_json_dict(self) -> dict:
        def stats_dict(s: ComponentStats) -> dict:
            return {
                "area": s.area,
                "centroid": list(s.centroid),
                "major_axis": s.major_axis,
                "minor_axis": s.minor_axis,
                "bounding_box": list(s.bounding_box),
            }

        return {
            "total_cells": self.total_cells,
            "neuron_count": self.neuron_count,
            "kept": [dict(stats_dict(s), verdict=v) for s, v in self.kept],
            "rejected": [dict(stats_dict(s), reason=r) for s, r in self.rejected],
            "params": {
                "min_area": self.params.min_area,
                "max_area": self.params.max_area,
                "axis_limit": self.params.axis_limit,
                "axis_mode": self.params.axis_mode,
                "circle_radii": list(self.params.circle_radii),
                "nuclei_threshold": list(self.params.nuclei_threshold),
                "neuron_threshold": list(self.params.neuron_threshold),
                "median_radius": self.params.median_radius,
            },
        }

    def to_csv(self) -> str:
        lines = ["label,area,centroid_x,centroid_y,major_axis,minor_axis,verdict"]
        entries = [(s, v) for s, v in self.kept] + [(s, r) for s, r in self.rejected]
        entries.sort(key=lambda t: (t[0].centroid[1], t[0].centroid[0]))
        for i, (s, verdict) in enumerate(entries, start=1):
            lines.append(
                f"{i},{s.area},{s.centroid[0]:.3f},{s.centroid[1]:.3f},"
                f"{s.major_axis:.3f},{s.minor_axis:.3f},{verdict}"
            )
        return "\n".join(lines) + "\n"


def _is_oblong(stats: ComponentStats, params: NucleusParams) -> bool:
    if params.axis_mode == "ratio":
        return stats.elongation > params.axis_limit
    if params.axis_mode == "absolute":
        return (stats.major_axis - stats.minor_axis) > params.axis_limit
    raise ValueError(f"axis_mode must be 'ratio' or 'absolute', got {params.axis_mode!r}")


def _in_dense_cluster(img: GrayImage, stats: ComponentStats, radii: Sequence[int]) -> bool:
    """Growing circles around the centroid must let the mode fall off.

    An isolated nucleus sees the mode drop toward background as the circle
    grows; in a cluster of nuclei the mode stays bright. We require the mode
    sequence over the radii to be non-increasing and strictly lower at the
    largest radius than at the smallest; anything else reads as a cluster.
    """
    modes = [region_mode(img, stats.centroid, r) for r in radii]
    non_increasing = all(a >= b for a, b in zip(modes, modes[1:]))
    return not (non_increasing and modes[-1] < modes[0])


def count_nuclei(nuclei: GrayImage, neurons: GrayImage, params: NucleusParams = NucleusParams()) -> NucleusReport:
    """Count cell nuclei and the subset that belongs to neurons.

    Both channels are median-filtered and binarized; nucleus components then
    pass size gates (< min_area is noise, > max_area reads as astrocytes or
    fused clusters), an oblong-shape gate, and the dense-cluster mode check.
    Survivors are cells; the ones overlapping the neuron channel are neurons.
    """
    if (nuclei.width, nuclei.height) != (neurons.width, neurons.height):
        raise DimensionMismatch("nuclei and neuron channels must share dimensions")
    nuclei_f = median_filter(nuclei, params.median_radius)
    neurons_f = median_filter(neurons, params.median_radius)
    nuclei_bin = band_threshold(nuclei_f, *params.nuclei_threshold)
    neurons_bin = band_threshold(neurons_f, *params.neuron_threshold)

    labeling = label_components(nuclei_bin, connectivity=8)
    kept: List[Tuple[ComponentStats, str]] = []
    rejected: List[Tuple[ComponentStats, str]] = []
    total_cells = 0
    for label in range(1, labeling.count + 1):
        stats = component_stats(labeling, label)
        if stats.area < params.min_area:
            rejected.append((stats, "too-small"))
            continue
        if stats.area > params.max_area:
            rejected.append((stats, "too-large"))
            continue
        if _is_oblong(stats, params):
            rejected.append((stats, "oblong"))
            continue
        if _in_dense_cluster(nuclei_f, stats, params.circle_radii):
            rejected.append((stats, "dense-cluster"))
            continue
        total_cells += 1
        ys, xs = labeling.pixels_of(label)
        if bool(neurons_bin.mask[ys, xs].any()):
            kept.append((stats, "neuron"))
        else:
            rejected.append((stats, "no-neuron-overlap"))
    return NucleusReport(total_cells, len(kept), tuple(kept), tuple(rejected), params)


# -- neuron localization -------------------------------------------------------------


@dataclass(frozen=True)
class LocateParams:
    tile: int = 25
    min_path: float = 15.0
    max_gap: int = 2  # tolerated hole between path pixels; steps reach Chebyshev max_gap+1
    seed_threshold: Optional[int] = None  # None: percentile of the intensity histogram
    seed_percentile: float = 99.5
    path_threshold: int = 1  # foreground for path finding


@dataclass(frozen=True)
class NeuronRegion:
    seed: Tuple[int, int]  # (x, y)
    tiles: Tuple[Tuple[int, int], ...]  # accepted (tx, ty), tile-grid coordinates
    bounding_box: Tuple[int, int, int, int]  # pixel coords, tile-aligned


@dataclass(frozen=True)
class LocationReport:
    regions: Tuple[NeuronRegion, ...]
    seeds: Tuple[Tuple[int, int], ...]  # every examined seed, claimed or not
    params: LocateParams

    def to_json_dict(self) -> dict:
        return {
            "regions": [
                {
                    "seed": list(r.seed),
                    "tiles": [list(t) for t in r.tiles],
                    "bounding_box": list(r.bounding_box),
                }
                for r in self.regions
            ],
            "seeds": [list(s) for s in self.seeds],
            "params": {
                "tile": self.params.tile,
                "min_path": self.params.min_path,
                "max_gap": self.params.max_gap,
                "seed_threshold": self.params.seed_threshold,
                "seed_percentile": self.params.seed_percentile,
                "path_threshold": self.params.path_threshold,
            },
        }


def _tile_has_long_path(points: List[Tuple[int, int]], max_step: int, min_len: float) -> bool:
    """Depth-first search for a gap-tolerant path of arc length >= min_len.

    Steps connect foreground pixels at Chebyshev distance <= max_step; arc
    length adds Euclidean step lengths. The first dive of the DFS reaches the
    bound quickly on any dense cluster, and sparse tiles have few pixels.
    """
    if len(points) < 2:
        return False
    pts = sorted(points)
    index: Dict[Tuple[int, int], int] = {p: i for i, p in enumerate(pts)}
    neighbors: List[List[Tuple[int, float]]] = [[] for _ in pts]
    for i, (y, x) in enumerate(pts):
        for dy in range(-max_step, max_step + 1):
            for dx in range(-max_step, max_step + 1):
                if dy == 0 and dx == 0:
                    continue
                j = index.get((y + dy, x + dx))
                if j is not None:
                    neighbors[i].append((j, math.hypot(dy, dx)))

    visited = [False] * len(pts)

    def dfs(i: int, length: float) -> bool:
        if length >= min_len:
            return True
        visited[i] = True
        for j, step in neighbors[i]:
            if not visited[j] and dfs(j, length + step):
                return True
        visited[i] = False
        return False

    return any(dfs(i, 0.0) for i in range(len(pts)))


def locate_neurons(img: GrayImage, params: LocateParams = LocateParams()) -> LocationReport:
    """Grow tile regions around bright seeds wherever dendrite-like paths continue.

    Seeds are the brightest pixels (at or above seed_threshold, default a high
    percentile), one per tile. From each seed the tile grid is explored
    breadth-first: a tile joins the region iff a depth-first search inside it
    finds a gap-tolerant path at least min_path long, and exploration
    continues into the 8 neighbors of accepted tiles.
    """
    if params.tile < 1 or params.min_path <= 0 or params.max_gap < 0:
        raise ValueError("tile, min_path must be positive and max_gap non-negative")
    if params.seed_threshold is not None and not (0 <= params.seed_threshold <= 255):
        raise ValueError("seed_threshold must lie in [0, 255]")
    px = img.pixels
    h, w = px.shape
    tile = params.tile
    if params.seed_threshold is not None:
        thr = params.seed_threshold
    else:
        thr = float(np.percentile(px, params.seed_percentile))
    seed_ys, seed_xs = np.nonzero(px >= max(thr, 1))

    # one seed per tile: brightest pixel, raster order breaking ties
    best: Dict[Tuple[int, int], Tuple[int, int, int]] = {}
    for y, x in zip(seed_ys.tolist(), seed_xs.tolist()):
        key = (x // tile, y // tile)
        cand = (-int(px[y, x]), y, x)
        if key not in best or cand < best[key]:
            best[key] = cand
    seeds = sorted(best.values())  # brightest first, then raster
    foreground = px >= params.path_threshold
    max_step = params.max_gap + 1

    tile_cache: Dict[Tuple[int, int], bool] = {}

    def tile_ok(tx: int, ty: int) -> bool:
        key = (tx, ty)
        if key not in tile_cache:
            y0, x0 = ty * tile, tx * tile
            block = foreground[y0 : min(y0 + tile, h), x0 : min(x0 + tile, w)]
            ys, xs = np.nonzero(block)
            pts = list(zip(ys.tolist(), xs.tolist()))
            tile_cache[key] = _tile_has_long_path(pts, max_step, params.min_path)
        return tile_cache[key]

    n_tx = (w + tile - 1) // tile
    n_ty = (h + tile - 1) // tile
    claimed: Set[Tuple[int, int]] = set()
    regions: List[NeuronRegion] = []
    examined: List[Tuple[int, int]] = []
    for neg_int, sy, sx in seeds:
        examined.append((sx, sy))
        t0 = (sx // tile, sy // tile)
        if t0 in claimed:
            continue
        accepted: List[Tuple[int, int]] = []
        visited: Set[Tuple[int, int]] = {t0}
        queue = deque([t0])
        while queue:
            tx, ty = queue.popleft()
            if not tile_ok(tx, ty):
                continue
            accepted.append((tx, ty))
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    nx, ny = tx + dx, ty + dy
                    if (dx or dy) and 0 <= nx < n_tx and 0 <= ny < n_ty and (nx, ny) not in visited:
                        visited.add((nx, ny))
                        queue.append((nx, ny))
        if not accepted:
            continue
        accepted.sort()
        claimed.update(accepted)
        txs = [t[0] for t in accepted]
        tys = [t[1] for t in accepted]
        bbox = (
            min(txs) * tile,
            min(tys) * tile,
            min((max(txs) + 1) * tile, w) - 1,
            min((max(tys) + 1) * tile, h) - 1,
        )
        regions.append(NeuronRegion((sx, sy), tuple(accepted), bbox))
    return LocationReport(tuple(regions), tuple(examined), params)


# -- structure extraction --------------------------------------------------------------


def default_levels(count: int = 8) -> Tuple[float, ...]:
    """Equispaced superlevel thresholds strictly inside (0, 255), descending."""
    return tuple(float(v) for v in np.linspace(255.0, 0.0, count + 2)[1:-1])


@dataclass(frozen=True)
class StructureResult:
    structure: BinaryImage
    barcode: Barcode
    levels: Tuple[float, ...]
    min_persistence: int
    prefilter_radius: int


def extract_structure(
    stack: ImageStack,
    levels: Optional[Sequence[float]] = None,
    min_persistence: int = 2,
    prefilter_radius: int = 1,
) -> StructureResult:
    """Denoise slices, project, and keep the persistently bright structure.

    Median-filters every slice, takes the maximum projection, builds a
    superlevel filtration and keeps the components whose classes persist at
    least min_persistence levels. With min_persistence 1 the result is the
    plain final-level binarization of the filtered projection.
    """
    level_tuple = tuple(float(t) for t in (levels if levels is not None else default_levels()))
    filtered = ImageStack(tuple(median_filter(s, prefilter_radius) for s in stack.slices), stack.z_spacing)
    projection = max_projection(filtered)
    filt = build_filtration(projection, level_tuple, "superlevel")
    barcode = h0_barcode_by_tracking(filt)
    structure = persistent_components(projection, level_tuple, min_persistence, "superlevel")
    return StructureResult(structure, barcode, level_tuple, min_persistence, prefilter_radius)
