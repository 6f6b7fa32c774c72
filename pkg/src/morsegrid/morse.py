"""Discrete gradient construction and the Morse chain complex.

The gradient is built one lower star at a time: every vertex owns the cells
whose highest vertex (under a strict total order of the pixels) it is, and
those cells are paired among themselves by a greedy sweep that always takes
the cheapest candidate first. Cells left over are critical.

Each classified cell gets a ``key``: ``16 * rank(owner vertex) + step`` where
``step`` counts classifications inside that lower star. Paired cells share
their key. Every V-path strictly decreases the key, which is what makes the
field acyclic and lets the Morse boundary be computed with a single
max-heap sweep per critical cell.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from numba import njit

from morsegrid.cubical import Cell, CubicalComplex, cell_dim
from morsegrid.errors import AcyclicityViolation, BoundsError

TIEBREAKS = ("row", "column", "reverse")


def vertex_ranks(values: np.ndarray, tiebreak: str = "row") -> np.ndarray:
    """Strict total order of pixels: by gray value, ties broken by position.

    ``row`` orders ties by (y, x), ``column`` by (x, y), ``reverse`` by (-y, -x).
    """
    h, w = values.shape
    flat = values.astype(np.int64).ravel()
    ys, xs = np.divmod(np.arange(h * w), w)
    if tiebreak == "row":
        order = np.lexsort((xs, ys, flat))
    elif tiebreak == "column":
        order = np.lexsort((ys, xs, flat))
    elif tiebreak == "reverse":
        order = np.lexsort((-xs, -ys, flat))
    else:
        raise ValueError(f"unknown tie-break {tiebreak!r}; choose from {TIEBREAKS}")
    rank = np.empty(h * w, dtype=np.int64)
    rank[order] = np.arange(h * w)
    return rank.reshape(h, w)


# --------------------------------------------------------------------------
# lower-star pairing


@njit(cache=True)
def _less(k1, k2, k3, i, j):
    if k1[i] != k1[j]:
        return k1[i] < k1[j]
    if k2[i] != k2[j]:
        return k2[i] < k2[j]
    return k3[i] < k3[j]


@njit(cache=True)
def _pop_min(flag, k1, k2, k3, m):
    best = -1
    for i in range(m):
        if flag[i] and (best < 0 or _less(k1, k2, k3, i, best)):
            best = i
    flag[best] = False
    return best


@njit(cache=True)
def _find(la, lb, m, a, b):
    for i in range(m):
        if la[i] == a and lb[i] == b:
            return i
    return -1


@njit(cache=True)
def _unpaired_faces(i, la, lb, state, m, cx, cy):
    # a square's faces inside the lower star are the two edges through the owner
    f1 = _find(la, lb, m, la[i], cy)
    f2 = _find(la, lb, m, cx, lb[i])
    n = 0
    last = -1
    if state[f1] == 0:
        n += 1
        last = f1
    if state[f2] == 0:
        n += 1
        last = f2
    return n, last


@njit(cache=True)
def _push_cofaces(e, la, lb, ld, state, inone, m, cx, cy):
    # squares of the lower star having edge e as a face, with one unpaired face left
    for i in range(m):
        if ld[i] != 2 or state[i] != 0:
            continue
        if (la[e] == la[i] and lb[e] == cy) or (lb[e] == lb[i] and la[e] == cx):
            n, _ = _unpaired_faces(i, la, lb, state, m, cx, cy)
            if n == 1:
                inone[i] = True


@njit(cache=True)
def _gradient_kernel(rank):
    h, w = rank.shape
    dh, dw = 2 * h - 1, 2 * w - 1
    n = dh * dw
    partner = np.full(n, -1, dtype=np.int64)
    key = np.zeros(n, dtype=np.int64)
    crit = np.zeros(n, dtype=np.bool_)
    la = np.empty(8, dtype=np.int64)
    lb = np.empty(8, dtype=np.int64)
    ld = np.empty(8, dtype=np.int64)
    k1 = np.empty(8, dtype=np.int64)
    k2 = np.empty(8, dtype=np.int64)
    k3 = np.empty(8, dtype=np.int64)
    state = np.zeros(8, dtype=np.int64)
    inzero = np.zeros(8, dtype=np.bool_)
    inone = np.zeros(8, dtype=np.bool_)
    dxs = (-1, 1, 0, 0)
    dys = (0, 0, -1, 1)
    for y in range(h):
        for x in range(w):
            r = rank[y, x]
            cx, cy = 2 * x, 2 * y
            vidx = cy * dw + cx
            m = 0
            for t in range(4):
                nx, ny = x + dxs[t], y + dys[t]
                if 0 <= nx < w and 0 <= ny < h and rank[ny, nx] < r:
                    la[m] = cx + dxs[t]
                    lb[m] = cy + dys[t]
                    ld[m] = 1
                    k1[m] = rank[ny, nx]
                    k2[m] = -1
                    k3[m] = -1
                    m += 1
            n_edges = m
            for sy in (-1, 1):
                for sx in (-1, 1):
                    px, py = x + sx, y + sy
                    if not (0 <= px < w and 0 <= py < h):
                        continue
                    ra, rb, rc = rank[y, px], rank[py, x], rank[py, px]
                    if ra < r and rb < r and rc < r:
                        # sort the three other ranks descending
                        if ra < rb:
                            ra, rb = rb, ra
                        if rb < rc:
                            rb, rc = rc, rb
                        if ra < rb:
                            ra, rb = rb, ra
                        la[m] = cx + sx
                        lb[m] = cy + sy
                        ld[m] = 2
                        k1[m] = ra
                        k2[m] = rb
                        k3[m] = rc
                        m += 1
            if n_edges == 0:
                crit[vidx] = True
                key[vidx] = 16 * r
                continue
            for i in range(m):
                state[i] = 0
                inzero[i] = False
                inone[i] = False
            step = 0
            # the owner vertex pairs with its cheapest edge
            delta = 0
            for i in range(1, n_edges):
                if _less(k1, k2, k3, i, delta):
                    delta = i
            didx = lb[delta] * dw + la[delta]
            partner[vidx] = didx
            partner[didx] = vidx
            key[vidx] = 16 * r
            key[didx] = 16 * r
            state[delta] = 1
            for i in range(n_edges):
                if i != delta:
                    inzero[i] = True
            _push_cofaces(delta, la, lb, ld, state, inone, m, cx, cy)
            while True:
                any_one = False
                for i in range(m):
                    any_one = any_one or inone[i]
                while any_one:
                    alpha = _pop_min(inone, k1, k2, k3, m)
                    if state[alpha] == 0:
                        nf, f = _unpaired_faces(alpha, la, lb, state, m, cx, cy)
                        if nf == 0:
                            inzero[alpha] = True
                        else:
                            step += 1
                            aidx = lb[alpha] * dw + la[alpha]
                            fidx = lb[f] * dw + la[f]
                            partner[aidx] = fidx
                            partner[fidx] = aidx
                            key[aidx] = 16 * r + step
                            key[fidx] = 16 * r + step
                            state[alpha] = 1
                            state[f] = 1
                            inzero[f] = False
                            _push_cofaces(f, la, lb, ld, state, inone, m, cx, cy)
                    any_one = False
                    for i in range(m):
                        any_one = any_one or inone[i]
                any_zero = False
                for i in range(m):
                    any_zero = any_zero or (inzero[i] and state[i] == 0)
                if not any_zero:
                    break
                gamma = _pop_min(inzero, k1, k2, k3, m)
                if state[gamma] != 0:
                    continue
                step += 1
                gidx = lb[gamma] * dw + la[gamma]
                crit[gidx] = True
                key[gidx] = 16 * r + step
                state[gamma] = 2
                if ld[gamma] == 1:
                    _push_cofaces(gamma, la, lb, ld, state, inone, m, cx, cy)
    return partner, key, crit


# --------------------------------------------------------------------------
# V-path flow


@njit(cache=True)
def _vertex_terminals(partner, crit, order, dw):
    """Critical vertex reached by the unique V-path leaving each vertex."""
    term = np.full(partner.size, -1, dtype=np.int64)
    for v_flat in order:
        y, x = divmod(v_flat, (dw + 1) // 2)
        v = 2 * y * dw + 2 * x
        if crit[v]:
            term[v] = v
        else:
            # the other endpoint of the paired edge e is the reflection of v through e
            u = 2 * partner[v] - v
            term[v] = term[u]
    return term


@njit(cache=True)
def _square_flow(s, partner, key, crit, dw, n):
    """Critical edges hit an odd number of times by V-paths out of square s."""
    heap = [np.int64(0) for _ in range(0)]
    for f in (s - 1, s + 1, s - dw, s + dw):
        heapq.heappush(heap, -(key[f] * n + f))
    out = [np.int64(0) for _ in range(0)]
    while len(heap) > 0:
        top = heapq.heappop(heap)
        count = 1
        while len(heap) > 0 and heap[0] == top:
            heapq.heappop(heap)
            count += 1
        if count % 2 == 0:
            continue
        code = -top
        f = code % n
        if crit[f]:
            out.append(f)
            continue
        p = partner[f]
        pb, pa = divmod(p, dw)
        if (pa & 1) and (pb & 1):
            for g in (p - 1, p + 1, p - dw, p + dw):
                if g != f:
                    if key[g] >= key[f]:
                        return out, False
                    heapq.heappush(heap, -(key[g] * n + g))
    return out, True


@njit(cache=True)
def _all_square_flows(squares, partner, key, crit, dw, n):
    ptr = np.zeros(squares.size + 1, dtype=np.int64)
    chunks = []
    ok = True
    for i in range(squares.size):
        out, good = _square_flow(squares[i], partner, key, crit, dw, n)
        ok = ok and good
        arr = np.empty(len(out), dtype=np.int64)
        for j in range(len(out)):
            arr[j] = out[j]
        chunks.append(arr)
        ptr[i + 1] = ptr[i] + len(out)
    idx = np.empty(ptr[-1], dtype=np.int64)
    for i in range(squares.size):
        idx[ptr[i]:ptr[i + 1]] = chunks[i]
    return ptr, idx, ok


# --------------------------------------------------------------------------
# public types


@dataclass(frozen=True, eq=False)
class GradientField:
    complex: CubicalComplex
    partner: np.ndarray  # flat doubled-grid index of the partner cell, -1 if unpaired
    key: np.ndarray  # flow order; V-paths strictly decrease it
    critical: np.ndarray  # flat bool mask
    tiebreak: str = "row"

    @property
    def _dw(self) -> int:
        return self.complex.shape[1]

    def _flat(self, c: Cell) -> int:
        if c not in self.complex:
            raise BoundsError(f"cell {c} outside the complex")
        return c[1] * self._dw + c[0]

    def _cell(self, i: int) -> Cell:
        b, a = divmod(int(i), self._dw)
        return (a, b)

    def is_critical(self, c: Cell) -> bool:
        return bool(self.critical[self._flat(c)])

    def pair_of(self, c: Cell) -> Cell | None:
        p = self.partner[self._flat(c)]
        return None if p < 0 else self._cell(p)

    def pairs(self):
        """(lower, upper) arrows, lower cell being the face."""
        idx = np.flatnonzero(self.partner >= 0)
        for i in idx:
            p = self.partner[i]
            if self._dim_flat(i) < self._dim_flat(p):
                yield self._cell(i), self._cell(p)

    def _dim_flat(self, i) -> int:
        b, a = divmod(int(i), self._dw)
        return (a & 1) + (b & 1)

    def critical_flat(self) -> np.ndarray:
        """Flat indices of critical cells in global order (value, dim, b, a)."""
        idx = np.flatnonzero(self.critical)
        b, a = np.divmod(idx, self._dw)
        dims = (a & 1) + (b & 1)
        vals = self.complex.filtration.ravel()[idx]
        return idx[np.lexsort((a, b, dims, vals))]

    def critical_cells(self) -> dict[int, list[Cell]]:
        out = {0: [], 1: [], 2: []}
        for i in self.critical_flat():
            c = self._cell(i)
            out[cell_dim(c)].append(c)
        return out

    def counts(self) -> tuple[int, int, int]:
        cc = self.critical_cells()
        return len(cc[0]), len(cc[1]), len(cc[2])

    def dump(self) -> str:
        """Text listing ``CELL a b dim value CRITICAL`` / ``... PAIR a' b'`` in row order."""
        lines = []
        f = self.complex.filtration
        rows, cols = f.shape
        for b in range(rows):
            for a in range(cols):
                i = b * cols + a
                head = f"CELL {a} {b} {(a & 1) + (b & 1)} {int(f[b, a])}"
                if self.critical[i]:
                    lines.append(head + " CRITICAL")
                else:
                    pa, pb = self._cell(self.partner[i])
                    lines.append(f"{head} PAIR {pa} {pb}")
        return "\n".join(lines) + "\n"

    def is_acyclic(self) -> bool:
        """Check the modified Hasse diagram for cycles by exhaustive topological sort.

        Arcs go from each cell to its faces, except that a gradient pair's arc
        is reversed. Independent of ``key``, so it also validates the keys.
        """
        K = self.complex
        rows, cols = K.shape
        n = rows * cols
        succ = [[] for _ in range(n)]
        indeg = [0] * n
        for c in K.cells():
            i = self._flat(c)
            for f in K.faces(c):
                j = self._flat(f)
                if self.partner[j] == i:
                    succ[j].append(i)
                    indeg[i] += 1
                else:
                    succ[i].append(j)
                    indeg[j] += 1
        stack = [i for i in range(n) if indeg[i] == 0]
        seen = 0
        while stack:
            i = stack.pop()
            seen += 1
            for j in succ[i]:
                indeg[j] -= 1
                if indeg[j] == 0:
                    stack.append(j)
        return seen == n


def build_gradient(K: CubicalComplex, tiebreak: str = "row") -> GradientField:
    rank = vertex_ranks(K.image.values, tiebreak)
    partner, key, crit = _gradient_kernel(rank)
    for arr in (partner, key, crit):
        arr.setflags(write=False)
    return GradientField(K, partner, key, crit, tiebreak)


def critical_cells(G: GradientField) -> dict[int, list[Cell]]:
    return G.critical_cells()


def _vertex_order(G: GradientField) -> np.ndarray:
    rank = vertex_ranks(G.complex.image.values, G.tiebreak).ravel()
    order = np.empty_like(rank)
    order[rank] = np.arange(rank.size)
    return order


def trace_vpaths(G: GradientField, start: Cell) -> dict[Cell, int]:
    """Critical (p-1)-cells reached by an odd number of V-paths from critical ``start``.

    Values are the path-count parity (always 1; even counts are omitted).
    """
    i = G._flat(start)
    if not G.critical[i]:
        raise ValueError(f"{start} is not critical")
    p = cell_dim(start)
    dw = G._dw
    if p == 0:
        return {}
    if p == 1:
        term = _vertex_terminals(G.partner, G.critical, _vertex_order(G), dw)
        ends = [term[G._flat(v)] for v in G.complex.faces(start)]
        return {} if ends[0] == ends[1] else {G._cell(e): 1 for e in sorted(ends)}
    out, ok = _square_flow(np.int64(i), G.partner, G.key, G.critical, dw, G.partner.size)
    if not ok:
        raise AcyclicityViolation(f"V-path out of {start} does not descend")
    return {G._cell(e): 1 for e in sorted(out)}


@dataclass(frozen=True, eq=False)
class MorseComplex:
    """Critical cells in filtration order with their mod-2 Morse boundary.

    ``bd_ptr``/``bd_idx`` hold the boundary in CSR form: the faces of cell j
    are ``bd_idx[bd_ptr[j]:bd_ptr[j+1]]`` (indices into the cell list, all < j).
    ``coords`` are doubled-grid positions for image complexes and free labels
    for hand-built ones.
    """

    dims: np.ndarray
    values: np.ndarray
    coords: np.ndarray
    bd_ptr: np.ndarray
    bd_idx: np.ndarray

    def __post_init__(self):
        n = len(self.dims)
        if len(self.values) != n or len(self.coords) != n or len(self.bd_ptr) != n + 1:
            raise ValueError("inconsistent MorseComplex array lengths")
        for arr in (self.dims, self.values, self.coords, self.bd_ptr, self.bd_idx):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.dims)

    def boundary(self, j: int) -> np.ndarray:
        return self.bd_idx[self.bd_ptr[j]:self.bd_ptr[j + 1]]

    def ranks(self) -> tuple[int, ...]:
        top = int(self.dims.max()) if len(self.dims) else 0
        return tuple(int((self.dims == p).sum()) for p in range(max(top, 2) + 1))

    @classmethod
    def from_lists(cls, dims, values, boundaries, coords=None) -> "MorseComplex":
        """Hand-build a complex; cells must already be listed faces-first."""
        n = len(dims)
        ptr = [0]
        idx = []
        for j, faces in enumerate(boundaries):
            odd = sorted(f for f in set(faces) if list(faces).count(f) % 2)
            for f in odd:
                if not 0 <= f < j:
                    raise ValueError(f"face {f} of cell {j} must precede it")
                if dims[f] != dims[j] - 1:
                    raise ValueError(f"face {f} of cell {j} has the wrong dimension")
                if values[f] > values[j]:
                    raise ValueError(f"face {f} enters after its coface {j}")
            idx += odd
            ptr.append(len(idx))
        if coords is None:
            coords = [(j, 0) for j in range(n)]
        return cls(
            np.asarray(dims, dtype=np.int64),
            np.asarray(values, dtype=np.int64),
            np.asarray(coords, dtype=np.int64).reshape(n, 2),
            np.asarray(ptr, dtype=np.int64),
            np.asarray(idx, dtype=np.int64),
        )

    def boundary_squared_is_zero(self) -> bool:
        for j in range(len(self)):
            acc = {}
            for f in self.boundary(j):
                for g in self.boundary(int(f)):
                    acc[int(g)] = acc.get(int(g), 0) ^ 1
            if any(acc.values()):
                return False
        return True


def build_morse_complex(G: GradientField) -> MorseComplex:
    crit = G.critical_flat()
    dw = G._dw
    n = G.partner.size
    pos = np.full(n, -1, dtype=np.int64)
    pos[crit] = np.arange(crit.size)
    b, a = np.divmod(crit, dw)
    dims = (a & 1) + (b & 1)
    values = G.complex.filtration.ravel()[crit]

    term = _vertex_terminals(G.partner, G.critical, _vertex_order(G), dw)
    # edges: endpoints flow to critical vertices; equal ends cancel
    edges = crit[dims == 1]
    horiz = (edges % dw) & 1 == 1
    lo = np.where(horiz, edges - 1, edges - dw)
    hi = np.where(horiz, edges + 1, edges + dw)
    t1, t2 = pos[term[lo]], pos[term[hi]]
    squares = crit[dims == 2]
    sq_ptr, sq_idx, ok = _all_square_flows(squares, G.partner, G.key, G.critical, dw, n)
    if not ok:
        raise AcyclicityViolation("a V-path failed to descend in the flow order")

    counts = np.zeros(crit.size, dtype=np.int64)
    edge_rows = np.flatnonzero(dims == 1)
    counts[edge_rows] = np.where(t1 != t2, 2, 0)
    sq_rows = np.flatnonzero(dims == 2)
    counts[sq_rows] = np.diff(sq_ptr)
    ptr = np.zeros(crit.size + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    idx = np.empty(ptr[-1], dtype=np.int64)
    e_start = ptr[edge_rows]
    live = t1 != t2
    idx[e_start[live]] = np.minimum(t1, t2)[live]
    idx[e_start[live] + 1] = np.maximum(t1, t2)[live]
    if squares.size:
        seg_len = np.diff(sq_ptr)
        seg_id = np.repeat(np.arange(squares.size), seg_len)
        faces = pos[sq_idx]
        faces = faces[np.lexsort((faces, seg_id))]
        offset = np.arange(faces.size) - np.repeat(sq_ptr[:-1], seg_len)
        idx[np.repeat(ptr[sq_rows], seg_len) + offset] = faces
    coords = np.stack([a, b], axis=1)
    return MorseComplex(dims.astype(np.int64), values.astype(np.int64), coords, ptr, idx)
