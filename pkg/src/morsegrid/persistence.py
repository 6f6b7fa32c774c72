"""Persistence pairing of the Morse complex, a brute-force oracle, and bottleneck distance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit
from numba.typed import List
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from morsegrid.cubical import Cell, CubicalComplex, cell_dim
from morsegrid.errors import OracleTooLarge
from morsegrid.morse import MorseComplex

INF = math.inf


@dataclass(frozen=True)
class PersistencePair:
    dimension: int
    birth: int
    death: float  # int for finite pairs, math.inf for essential classes
    creator: Cell
    destructor: Cell | None = None

    @property
    def essential(self) -> bool:
        return self.death == INF

    @property
    def zero_length(self) -> bool:
        return self.death == self.birth

    @property
    def lifespan(self) -> float:
        return self.death - self.birth

    def sort_key(self):
        return (self.dimension, self.birth, self.death, self.creator, self.destructor or (-1, -1))


@dataclass(frozen=True)
class PersistenceDiagram:
    pairs: tuple[PersistencePair, ...]

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(sorted(self.pairs, key=PersistencePair.sort_key)))

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def in_dim(self, dim: int) -> list[PersistencePair]:
        return [p for p in self.pairs if p.dimension == dim]

    def essential(self) -> list[PersistencePair]:
        return [p for p in self.pairs if p.essential]

    def finite(self, keep_zero: bool = False) -> list[PersistencePair]:
        return [p for p in self.pairs if not p.essential and (keep_zero or not p.zero_length)]

    def visible(self, keep_zero: bool = False) -> "PersistenceDiagram":
        return PersistenceDiagram(tuple(p for p in self.pairs if keep_zero or not p.zero_length))

    def multiset(self, keep_zero: bool = False) -> list[tuple]:
        """Sorted (dim, birth, death) triples; zero-length pairs dropped by default."""
        return sorted((p.dimension, p.birth, p.death) for p in self.pairs if keep_zero or not p.zero_length)


# --------------------------------------------------------------------------
# Morse route


@njit(cache=True)
def _symdiff(x, y):
    out = np.empty(x.size + y.size, dtype=np.int64)
    i = j = k = 0
    while i < x.size and j < y.size:
        if x[i] < y[j]:
            out[k] = x[i]
            i += 1
            k += 1
        elif y[j] < x[i]:
            out[k] = y[j]
            j += 1
            k += 1
        else:
            i += 1
            j += 1
    while i < x.size:
        out[k] = x[i]
        i += 1
        k += 1
    while j < y.size:
        out[k] = y[j]
        j += 1
        k += 1
    return out[:k]


@njit(cache=True)
def _reduce_with_clearing(ptr, idx, dims, top):
    """Left-to-right column reduction, highest dimension first.

    Returns ``low[j]``: the pivot row of reduced column j, or -1.
    """
    n = dims.size
    low = np.full(n, -1, dtype=np.int64)
    owner = np.full(n, -1, dtype=np.int64)
    cleared = np.zeros(n, dtype=np.bool_)
    reduced = List()
    for _ in range(n):
        reduced.append(np.empty(0, dtype=np.int64))
    for d in range(top, 0, -1):
        for j in range(n):
            if dims[j] != d or cleared[j]:
                continue
            col = idx[ptr[j]:ptr[j + 1]].copy()
            while col.size > 0:
                o = owner[col[-1]]
                if o < 0:
                    break
                col = _symdiff(col, reduced[o])
            if col.size > 0:
                p = col[-1]
                low[j] = p
                owner[p] = j
                cleared[p] = True
                reduced[j] = col
    return low


def compute_persistence(M: MorseComplex) -> PersistenceDiagram:
    """Pair the critical cells by reducing the Morse boundary in filtration order.

    Zero-length pairs are kept (flagged through ``PersistencePair.zero_length``).
    """
    n = len(M)
    if n == 0:
        return PersistenceDiagram(())
    top = int(M.dims.max())
    low = _reduce_with_clearing(M.bd_ptr, M.bd_idx, M.dims, max(top, 1))
    killed = np.zeros(n, dtype=bool)
    killed[low[low >= 0]] = True
    coords = [tuple(int(v) for v in c) for c in M.coords]
    pairs = []
    for j in np.flatnonzero(low >= 0):
        i = low[j]
        pairs.append(PersistencePair(int(M.dims[i]), int(M.values[i]), int(M.values[j]), coords[i], coords[j]))
    for i in np.flatnonzero(~killed & (low < 0)):
        pairs.append(PersistencePair(int(M.dims[i]), int(M.values[i]), INF, coords[i], None))
    return PersistenceDiagram(tuple(pairs))


def betti_numbers(M: MorseComplex, top_dim: int = 1) -> tuple[int, ...]:
    """Ranks of the mod-2 homology of M in dimensions 0..top_dim."""
    n = len(M)
    low = _reduce_with_clearing(M.bd_ptr, M.bd_idx, M.dims, max(int(M.dims.max()) if n else 0, 1)) if n else np.empty(0, dtype=np.int64)
    out = []
    for p in range(top_dim + 1):
        cells = int((M.dims == p).sum())
        rank_out = int(((low >= 0) & (M.dims == p)).sum())  # rank of the boundary leaving dim p
        rank_in = int(((low >= 0) & (M.dims == p + 1)).sum())
        out.append(cells - rank_out - rank_in)
    return tuple(out)


# --------------------------------------------------------------------------
# oracle


def oracle_persistence(K: CubicalComplex, max_cells: int = 10_000) -> PersistenceDiagram:
    """Reduce the full boundary matrix of every cell; no Morse reduction, no clearing.

    Cells are ordered by (value, dim, b, a).
    """
    rows, cols = K.shape
    if rows * cols > max_cells:
        raise OracleTooLarge(f"{rows * cols} cells exceeds the oracle bound of {max_cells}")
    cells = sorted(K.cells(), key=lambda c: (K.value(c), cell_dim(c), c[1], c[0]))
    index = {c: i for i, c in enumerate(cells)}
    pivot_owner = {}
    columns = []
    for j, c in enumerate(cells):
        col = {index[f] for f in K.faces(c)}
        while col:
            p = max(col)
            if p not in pivot_owner:
                break
            col ^= columns[pivot_owner[p]]
        columns.append(col)
        if col:
            pivot_owner[max(col)] = j
    pairs = []
    paired = set()
    for p, j in pivot_owner.items():
        paired.update((p, j))
        pairs.append(PersistencePair(cell_dim(cells[p]), K.value(cells[p]), K.value(cells[j]), cells[p], cells[j]))
    for i, c in enumerate(cells):
        if i not in paired:
            pairs.append(PersistencePair(cell_dim(c), K.value(c), INF, c, None))
    return PersistenceDiagram(tuple(pairs))


# --------------------------------------------------------------------------
# bottleneck distance


def _points(D: PersistenceDiagram, dim: int):
    fin = [(p.birth, p.death) for p in D.pairs if p.dimension == dim and not p.essential and not p.zero_length]
    ess = sorted(p.birth for p in D.pairs if p.dimension == dim and p.essential)
    return fin, ess


def _perfect_matching(fin1, fin2, delta) -> bool:
    n1, n2 = len(fin1), len(fin2)
    size = n1 + n2
    rows, cols = [], []
    # left: fin1 then diagonal shadows of fin2; right: fin2 then shadows of fin1
    for i, (b1, d1) in enumerate(fin1):
        for j, (b2, d2) in enumerate(fin2):
            if max(abs(b1 - b2), abs(d1 - d2)) <= delta:
                rows.append(i)
                cols.append(j)
        if Fraction(d1 - b1, 2) <= delta:
            rows.append(i)
            cols.append(n2 + i)
    for j, (b2, d2) in enumerate(fin2):
        if Fraction(d2 - b2, 2) <= delta:
            rows.append(n1 + j)
            cols.append(j)
        for i in range(n1):
            rows.append(n1 + j)
            cols.append(n2 + i)
    if size == 0:
        return True
    graph = csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(size, size))
    match = maximum_bipartite_matching(graph, perm_type="column")
    return bool((match >= 0).all())


def bottleneck_distance(D1: PersistenceDiagram, D2: PersistenceDiagram, dimension: int) -> Fraction:
    """Exact bottleneck distance between the dimension-``dimension`` parts.

    Essential classes are matched only with each other, by sorted birth; a
    different number of them gives an infinite distance.
    """
    fin1, ess1 = _points(D1, dimension)
    fin2, ess2 = _points(D2, dimension)
    if len(ess1) != len(ess2):
        return INF
    floor = Fraction(max((abs(a - b) for a, b in zip(ess1, ess2)), default=0))
    candidates = {Fraction(0), floor}
    for b1, d1 in fin1:
        candidates.add(Fraction(d1 - b1, 2))
        for b2, d2 in fin2:
            candidates.add(Fraction(abs(b1 - b2)))
            candidates.add(Fraction(abs(d1 - d2)))
    for b2, d2 in fin2:
        candidates.add(Fraction(d2 - b2, 2))
    cands = sorted(c for c in candidates if c >= floor)
    lo, hi = 0, len(cands) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _perfect_matching(fin1, fin2, cands[mid]):
            hi = mid
        else:
            lo = mid + 1
    return cands[lo]
