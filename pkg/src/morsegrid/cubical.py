"""Filtered cubical complex of a 2D grayscale image.

Cells live on the doubled grid: cell ``(a, b)`` with ``0 <= a <= 2(W-1)`` and
``0 <= b <= 2(H-1)``. The number of odd coordinates is the dimension, so
vertex ``(2x, 2y)`` is pixel ``(x, y)``, ``(2x+1, 2y)`` is the horizontal
edge to its right and ``(2x+1, 2y+1)`` the square below-right of it. A cell
enters the filtration at the maximum gray value of its vertices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from morsegrid.errors import BoundsError
from morsegrid.image_io import GrayImage

Cell = tuple[int, int]


def cell_dim(c: Cell) -> int:
    return (c[0] & 1) + (c[1] & 1)


def cell_filtration(values: np.ndarray) -> np.ndarray:
    """Doubled-grid array of cell values: each cell takes the max over its vertices."""
    h, w = values.shape
    v = values.astype(np.int64)
    out = np.empty((2 * h - 1, 2 * w - 1), dtype=np.int64)
    out[0::2, 0::2] = v
    out[0::2, 1::2] = np.maximum(v[:, :-1], v[:, 1:])
    out[1::2, 0::2] = np.maximum(v[:-1, :], v[1:, :])
    out[1::2, 1::2] = np.maximum(np.maximum(v[:-1, :-1], v[:-1, 1:]), np.maximum(v[1:, :-1], v[1:, 1:]))
    return out


@dataclass(frozen=True, eq=False)
class CubicalComplex:
    image: GrayImage
    filtration: np.ndarray  # (2H-1, 2W-1), indexed [b, a]

    @property
    def width(self) -> int:
        return self.image.width

    @property
    def height(self) -> int:
        return self.image.height

    @property
    def shape(self) -> tuple[int, int]:
        """Doubled-grid extent as (rows, cols) = (2H-1, 2W-1)."""
        return self.filtration.shape

    def __contains__(self, c: Cell) -> bool:
        a, b = c
        return 0 <= a < self.shape[1] and 0 <= b < self.shape[0]

    def value(self, c: Cell) -> int:
        self._check(c)
        return int(self.filtration[c[1], c[0]])

    def _check(self, c: Cell):
        if c not in self:
            raise BoundsError(f"cell {c} outside the {self.shape[1]}x{self.shape[0]} doubled grid")

    def cells(self, dim: int | None = None):
        """All cells, row by row (b outer, a inner), optionally of one dimension."""
        rows, cols = self.shape
        for b in range(rows):
            for a in range(cols):
                if dim is None or (a & 1) + (b & 1) == dim:
                    yield (a, b)

    def count(self, dim: int) -> int:
        w, h = self.width, self.height
        return (w * h, w * (h - 1) + h * (w - 1), (w - 1) * (h - 1))[dim]

    def faces(self, c: Cell) -> list[Cell]:
        self._check(c)
        a, b = c
        out = []
        if a & 1:
            out += [(a - 1, b), (a + 1, b)]
        if b & 1:
            out += [(a, b - 1), (a, b + 1)]
        return out

    def cofaces(self, c: Cell) -> list[Cell]:
        self._check(c)
        a, b = c
        rows, cols = self.shape
        out = []
        if not a & 1:
            out += [(x, b) for x in (a - 1, a + 1) if 0 <= x < cols]
        if not b & 1:
            out += [(a, y) for y in (b - 1, b + 1) if 0 <= y < rows]
        return out

    def vertices(self, c: Cell) -> list[Cell]:
        self._check(c)
        a, b = c
        xs = (a - 1, a + 1) if a & 1 else (a,)
        ys = (b - 1, b + 1) if b & 1 else (b,)
        return [(x, y) for y in ys for x in xs]


def build_complex(img: GrayImage) -> CubicalComplex:
    f = cell_filtration(img.values)
    f.setflags(write=False)
    return CubicalComplex(img, f)


def euler_characteristic(K: CubicalComplex) -> int:
    return K.count(0) - K.count(1) + K.count(2)
