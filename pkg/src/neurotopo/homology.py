"""Betti numbers and integral homology of cubical complexes.

Two independent routes are kept side by side as mutual oracles: Gaussian
elimination over Z/2 (bitset columns) and Smith normal form over Z. The
integral route certifies torsion-freeness rather than assuming it; free
ranks from both routes must agree whenever torsion is empty, and the test
suite enforces that on every fixture and on randomized masks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .cubical import CubicalComplex, build_complex
from .images import BinaryImage

_INT64_GUARD = 1 << 31  # entries beyond this rerun the reduction in exact arithmetic


@dataclass(frozen=True)
class HomologyResult:
    """Free ranks and invariant-factor torsion of H0 and H1."""

    betti0: int
    betti1: int
    torsion: Tuple[Tuple[int, ...], Tuple[int, ...]]  # per dimension 0, 1

    @property
    def torsion_free(self) -> bool:
        return not self.torsion[0] and not self.torsion[1]


# -- mod-2 route ---------------------------------------------------------------


def rank_mod2(columns: Iterable[int]) -> int:
    """Rank over GF(2) of a matrix given as bitset columns."""
    pivots = {}
    rank = 0
    for col in columns:
        while col:
            high = col.bit_length() - 1
            if high in pivots:
                col ^= pivots[high]
            else:
                pivots[high] = col
                rank += 1
                break
    return rank


def boundary_bit_columns(cx: CubicalComplex, dim: int) -> List[int]:
    """Bitset columns of the mod-2 boundary matrix d_dim."""
    if dim == 1:
        return [(1 << int(h)) | (1 << int(t)) for h, t in cx.edge_faces]
    if dim == 2:
        cols = []
        for faces in cx.square_faces:
            col = 0
            for f in faces:
                col ^= 1 << int(f)
            cols.append(col)
        return cols
    raise ValueError(f"no boundary in dimension {dim}")


def betti_from_ranks(n_cells: Sequence[int], rank1: int, rank2: int) -> Tuple[int, int]:
    b0 = n_cells[0] - rank1
    b1 = n_cells[1] - rank1 - rank2
    return b0, b1


def betti_mod2(cx: CubicalComplex) -> Tuple[int, int]:
    """(b0, b1) over Z/2 via Gaussian elimination on bitset columns."""
    r1 = rank_mod2(boundary_bit_columns(cx, 1))
    r2 = rank_mod2(boundary_bit_columns(cx, 2))
    return betti_from_ranks([cx.n_cells(0), cx.n_cells(1), cx.n_cells(2)], r1, r2)


# -- integral route ------------------------------------------------------------


def smith_normal_form(matrix: np.ndarray) -> List[int]:
    """Invariant factors (positive, each dividing the next) of an integer matrix.

    Runs on int64 with an explicit magnitude guard; if entries ever grow past
    the guard the whole reduction is redone with Python integers, so results
    are always exact and overflow can never wrap silently.
    """
    mat = np.asarray(matrix)
    if mat.size == 0:
        return []
    if mat.dtype != object and np.abs(mat).max() >= _INT64_GUARD:
        mat = mat.astype(object)
    try:
        return _snf_inplace(mat.astype(np.int64 if mat.dtype != object else object, copy=True))
    except _NeedsExactArithmetic:
        return _snf_inplace(np.array([[int(v) for v in row] for row in mat], dtype=object))


class _NeedsExactArithmetic(Exception):
    pass


def _guard(a: np.ndarray) -> None:
    if a.dtype != object and a.size and np.abs(a).max() >= _INT64_GUARD:
        raise _NeedsExactArithmetic


def _snf_inplace(a: np.ndarray) -> List[int]:
    m, n = a.shape
    t = 0
    while t < min(m, n):
        sub = a[t:, t:]
        nz = np.nonzero(sub)
        if len(nz[0]) == 0:
            break
        # smallest-magnitude pivot keeps quotients (and fill-in) small
        vals = np.abs(sub[nz])
        k = int(np.argmin(vals))
        pi, pj = int(nz[0][k]) + t, int(nz[1][k]) + t
        a[[t, pi], :] = a[[pi, t], :]
        a[:, [t, pj]] = a[:, [pj, t]]
        while True:
            if a[t, t] < 0:
                a[t, :] = -a[t, :]
            pivot = a[t, t]
            col = a[t + 1 :, t]
            if np.any(col != 0):
                q = col // pivot
                a[t + 1 :, :] -= q[:, None] * a[t, :][None, :]
                _guard(a)
                rem = a[t + 1 :, t]
                if np.any(rem != 0):
                    i = int(np.nonzero(rem)[0][0]) + t + 1
                    a[[t, i], :] = a[[i, t], :]
                    continue
            row = a[t, t + 1 :]
            if np.any(row != 0):
                q = row // pivot
                a[:, t + 1 :] -= a[:, t][:, None] * q[None, :]
                _guard(a)
                rem = a[t, t + 1 :]
                if np.any(rem != 0):
                    j = int(np.nonzero(rem)[0][0]) + t + 1
                    a[:, [t, j]] = a[:, [j, t]]
                    continue
                continue  # row ops may have refilled the column
            # divisibility: the pivot must divide everything that remains
            rest = a[t + 1 :, t + 1 :]
            if rest.size:
                bad = np.nonzero(rest % pivot != 0)
                if len(bad[0]):
                    a[t, :] += a[t + 1 + int(bad[0][0]), :]
                    _guard(a)
                    continue
            break
        t += 1
    return [int(abs(a[i, i])) for i in range(min(m, n)) if a[i, i] != 0]


def _signed_boundary_int64(cx: CubicalComplex, dim: int) -> np.ndarray:
    rows, cols = cx.n_cells(dim - 1), cx.n_cells(dim)
    mat = np.zeros((rows, cols), dtype=np.int64)
    for j in range(cols):
        for f, s in cx.boundary_list(dim, j):
            mat[f, j] += s
    return mat


def homology_integral(cx: CubicalComplex) -> HomologyResult:
    """Integral homology via Smith normal form of the boundary matrices."""
    factors1 = smith_normal_form(_signed_boundary_int64(cx, 1)) if cx.n_cells(1) else []
    factors2 = smith_normal_form(_signed_boundary_int64(cx, 2)) if cx.n_cells(2) else []
    rank1, rank2 = len(factors1), len(factors2)
    b0, b1 = betti_from_ranks([cx.n_cells(0), cx.n_cells(1), cx.n_cells(2)], rank1, rank2)
    torsion0 = tuple(d for d in factors1 if d > 1)
    torsion1 = tuple(d for d in factors2 if d > 1)
    return HomologyResult(b0, b1, (torsion0, torsion1))


# -- component counting away from the graph algorithms --------------------------


def count_components_homological(bin_img: BinaryImage) -> int:
    """b0 of the mask's cell complex; the homological twin of run labeling."""
    return betti_mod2(build_complex(bin_img))[0]
