"""Cell complexes of binary images: one closed unit square per foreground pixel.

Cells are encoded by interleaved (Khalimsky) coordinates: the cell anchored
at pixel (x, y) with extent (dx, dy) in {0,1}^2 has coordinates
(a, b) = (2x + dx, 2y + dy). Parity determines the dimension (vertex: both
even; edge: one odd; square: both odd) and the coordinates are unique across
all cells, so sorting packed keys gives a canonical row-major cell order
that every reduction trace and fixture relies on.

Boundary orientation: an edge is oriented from its smaller to its larger
endpoint, d(edge) = head - tail; a square's boundary is
+south +east -north -west in (a, b) space, which makes d o d = 0 over Z.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Tuple

import numpy as np

from .images import BinaryImage

EDGE_SIGNS = (1, -1)  # (head, tail)
SQUARE_SIGNS = (1, 1, -1, -1)  # (south, east, north, west)

_DENSE_LIMIT = 10**8  # entries; dense boundary matrices are a debugging view


@dataclass(frozen=True)
class CubicalComplex:
    """Graded cells of a 2-d cubical complex with signed boundary incidence."""

    stride: int  # key packing: key = b * stride + a
    vertex_keys: np.ndarray
    edge_keys: np.ndarray
    square_keys: np.ndarray
    edge_faces: np.ndarray  # (n1, 2) vertex indices: [head, tail]
    square_faces: np.ndarray  # (n2, 4) edge indices: [south, east, north, west]

    def __post_init__(self) -> None:
        for name in ("vertex_keys", "edge_keys", "square_keys", "edge_faces", "square_faces"):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    # -- sizes ---------------------------------------------------------------

    def n_cells(self, dim: int) -> int:
        return len((self.vertex_keys, self.edge_keys, self.square_keys)[dim])

    @property
    def total_cells(self) -> int:
        return len(self.vertex_keys) + len(self.edge_keys) + len(self.square_keys)

    # -- coordinates ---------------------------------------------------------

    def cell_coords(self, dim: int) -> np.ndarray:
        """(n, 2) interleaved coordinates (a, b) of the dim-cells, canonical order."""
        keys = (self.vertex_keys, self.edge_keys, self.square_keys)[dim]
        return np.stack([keys % self.stride, keys // self.stride], axis=1)

    # -- boundary ------------------------------------------------------------

    def boundary_list(self, dim: int, index: int) -> Tuple[Tuple[int, int], ...]:
        """Ordered ((face_index, sign), ...) of one cell."""
        if dim == 1:
            head, tail = self.edge_faces[index]
            return ((int(head), 1), (int(tail), -1))
        if dim == 2:
            return tuple(
                (int(f), s) for f, s in zip(self.square_faces[index], SQUARE_SIGNS)
            )
        raise ValueError(f"cells of dimension {dim} have no stored boundary")

    def boundary_matrix(self, dim: int) -> "ChainBoundaryMatrix":
        """Dense signed boundary matrix d_dim (rows: (dim-1)-cells, cols: dim-cells)."""
        rows = self.n_cells(dim - 1)
        cols = self.n_cells(dim)
        if rows * cols > _DENSE_LIMIT:
            raise ValueError(f"boundary matrix {rows}x{cols} too large to materialize")
        mat = np.zeros((rows, cols), dtype=np.int8)
        if dim == 1 and cols:
            c = np.arange(cols)
            mat[self.edge_faces[:, 0], c] += 1
            mat[self.edge_faces[:, 1], c] += -1
        elif dim == 2 and cols:
            c = np.arange(cols)
            for j, s in enumerate(SQUARE_SIGNS):
                mat[self.square_faces[:, j], c] += s
        return ChainBoundaryMatrix(dim, mat)

    # -- coface adjacency (used by the reduction core) -----------------------

    def vertex_coedges(self) -> Tuple[np.ndarray, np.ndarray]:
        """CSR (indptr, edge indices sorted per vertex) of vertex -> incident edges."""
        return _csr_from_incidence(self.edge_faces.ravel(), len(self.vertex_keys), 2)

    def edge_cosquares(self) -> Tuple[np.ndarray, np.ndarray]:
        """CSR (indptr, square indices sorted per edge) of edge -> incident squares."""
        return _csr_from_incidence(self.square_faces.ravel(), len(self.edge_keys), 4)


def _csr_from_incidence(flat_faces: np.ndarray, n_faces: int, arity: int):
    counts = np.bincount(flat_faces, minlength=n_faces) if len(flat_faces) else np.zeros(n_faces, dtype=np.int64)
    indptr = np.zeros(n_faces + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    order = np.argsort(flat_faces, kind="stable")
    cofaces = (order // arity).astype(np.int64)
    return indptr, cofaces


@dataclass(frozen=True)
class ChainBoundaryMatrix:
    """Signed boundary matrix with a mod-2 view; columns follow cell order."""

    dimension: int
    data: np.ndarray

    def mod2(self) -> np.ndarray:
        return (self.data % 2).astype(bool)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape


def build_complex(bin_img: BinaryImage) -> CubicalComplex:
    """Cell complex of a mask: a closed unit square per foreground pixel.

    Shared faces are deduplicated, so edge-adjacent pixels share one edge and
    two vertices while diagonal pixels share exactly one vertex.
    """
    mask = bin_img.mask
    h, w = mask.shape
    stride = 2 * w + 1
    ys, xs = np.nonzero(mask)
    a = 2 * xs.astype(np.int64) + 1
    b = 2 * ys.astype(np.int64) + 1
    square_keys = b * stride + a  # nonzero() is raster order: already sorted

    if len(square_keys) == 0:
        empty_keys = np.empty(0, dtype=np.int64)
        return CubicalComplex(
            stride,
            empty_keys,
            empty_keys.copy(),
            empty_keys.copy(),
            np.empty((0, 2), dtype=np.int32),
            np.empty((0, 4), dtype=np.int32),
        )

    edge_keys = np.unique(
        np.concatenate(
            [square_keys - stride, square_keys + 1, square_keys + stride, square_keys - 1]
        )
    )
    vertex_keys = np.unique(
        np.concatenate(
            [
                square_keys - stride - 1,
                square_keys - stride + 1,
                square_keys + stride - 1,
                square_keys + stride + 1,
            ]
        )
    )

    horizontal = (edge_keys % stride) % 2 == 1
    head_keys = np.where(horizontal, edge_keys + 1, edge_keys + stride)
    tail_keys = np.where(horizontal, edge_keys - 1, edge_keys - stride)
    edge_faces = np.stack(
        [
            np.searchsorted(vertex_keys, head_keys),
            np.searchsorted(vertex_keys, tail_keys),
        ],
        axis=1,
    ).astype(np.int32)

    square_faces = np.stack(
        [
            np.searchsorted(edge_keys, square_keys - stride),  # south
            np.searchsorted(edge_keys, square_keys + 1),  # east
            np.searchsorted(edge_keys, square_keys + stride),  # north
            np.searchsorted(edge_keys, square_keys - 1),  # west
        ],
        axis=1,
    ).astype(np.int32)

    return CubicalComplex(stride, vertex_keys, edge_keys, square_keys, edge_faces, square_faces)


def euler_characteristic(cx: CubicalComplex) -> int:
    """#vertices - #edges + #squares."""
    return cx.n_cells(0) - cx.n_cells(1) + cx.n_cells(2)


# -- text dump format ---------------------------------------------------------
#
# One cell per line: "<dim> <a> <b>" followed by the signed boundary as
# one-based indices into the next-lower grade, e.g. "2 3 1 +1 +4 -6 -2".
# Used by fixtures and by the out-of-process oracle scripts.


def dump_text(cx: CubicalComplex) -> str:
    lines: List[str] = []
    for dim in (0, 1, 2):
        coords = cx.cell_coords(dim)
        for i, (a, b) in enumerate(coords):
            parts = [str(dim), str(a), str(b)]
            if dim > 0:
                parts += [f"{'+' if s > 0 else '-'}{f + 1}" for f, s in cx.boundary_list(dim, i)]
            lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_text(text: str) -> CubicalComplex:
    """Rebuild a complex from dump_text output, validating the listed boundary."""
    coords: List[List[Tuple[int, int]]] = [[], [], []]
    listed: List[List[List[Tuple[int, int]]]] = [[], [], []]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        dim, a, b = int(parts[0]), int(parts[1]), int(parts[2])
        if dim not in (0, 1, 2):
            raise ValueError(f"line {lineno}: bad dimension {dim}")
        if ((a % 2) + (b % 2)) != dim:
            raise ValueError(f"line {lineno}: coordinates ({a},{b}) are not a {dim}-cell")
        coords[dim].append((a, b))
        listed[dim].append([(abs(int(t)) - 1, 1 if t[0] != "-" else -1) for t in parts[3:]])

    max_a = max((a for dim_cells in coords for a, _ in dim_cells), default=0)
    stride = max_a + 2
    keys = []
    for dim in (0, 1, 2):
        arr = np.array(sorted(b * stride + a for a, b in coords[dim]), dtype=np.int64)
        if len(np.unique(arr)) != len(arr):
            raise ValueError(f"duplicate {dim}-cells in dump")
        keys.append(arr)
    vertex_keys, edge_keys, square_keys = keys

    def _face_index(face_keys: np.ndarray, key: int, what: str) -> int:
        idx = int(np.searchsorted(face_keys, key))
        if idx >= len(face_keys) or face_keys[idx] != key:
            raise ValueError(f"face closure violated: missing {what} with key {key}")
        return idx

    edge_faces = np.empty((len(edge_keys), 2), dtype=np.int32)
    for i, key in enumerate(edge_keys):
        horizontal = (key % stride) % 2 == 1
        head = key + 1 if horizontal else key + stride
        tail = key - 1 if horizontal else key - stride
        edge_faces[i] = (_face_index(vertex_keys, head, "vertex"), _face_index(vertex_keys, tail, "vertex"))

    square_faces = np.empty((len(square_keys), 4), dtype=np.int32)
    for i, key in enumerate(square_keys):
        square_faces[i] = [
            _face_index(edge_keys, key - stride, "edge"),
            _face_index(edge_keys, key + 1, "edge"),
            _face_index(edge_keys, key + stride, "edge"),
            _face_index(edge_keys, key - 1, "edge"),
        ]

    cx = CubicalComplex(stride, vertex_keys, edge_keys, square_keys, edge_faces, square_faces)

    # cross-check the dumped boundary lists against the reconstruction
    for dim in (1, 2):
        order = np.argsort([b * stride + a for a, b in coords[dim]], kind="stable")
        for new_idx, old_idx in enumerate(order):
            want = listed[dim][old_idx]
            if not want:
                continue
            got = cx.boundary_list(dim, new_idx)
            if sorted(got) != sorted(_remap(listed_entry, coords, stride, dim) for listed_entry in want):
                raise ValueError(f"dumped boundary of {dim}-cell {coords[dim][old_idx]} does not match")
    return cx


def _remap(entry: Tuple[int, int], coords, stride: int, dim: int) -> Tuple[int, int]:
    # dump order within a grade is already canonical, so indices carry over
    face_idx, sign = entry
    a, b = coords[dim - 1][face_idx]
    face_keys = sorted(bb * stride + aa for aa, bb in coords[dim - 1])
    return int(np.searchsorted(face_keys, b * stride + a)), sign
