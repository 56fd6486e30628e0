"""Grids, cube sets and the transition graph over-approximating the time-tau flow."""
from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from ._accel import kernels
from .errors import ConleyError
from .flow import FlowConfig, VectorFieldSpec, advance


def thread_count() -> int:
    """Parallelism cap taken from ``CONLEY_THREADS`` (default 1)."""
    raw = os.environ.get("CONLEY_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    box_lo: tuple
    box_hi: tuple
    res: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.box_lo)
        hi = tuple(float(v) for v in self.box_hi)
        res = tuple(int(r) for r in self.res)
        if not (len(lo) == len(hi) == len(res)) or not lo:
            raise ConleyError("grid corners and resolution must share one dimension")
        if any(r <= 0 for r in res):
            raise ConleyError("grid resolution must be positive")
        if any(not (a < b) for a, b in zip(lo, hi)):
            raise ConleyError("box_lo must be below box_hi in every coordinate")
        object.__setattr__(self, "box_lo", lo)
        object.__setattr__(self, "box_hi", hi)
        object.__setattr__(self, "res", res)

    @property
    def dim(self) -> int:
        return len(self.res)

    @property
    def ncubes(self) -> int:
        return int(np.prod(self.res))

    @property
    def widths(self) -> np.ndarray:
        return (np.array(self.box_hi) - np.array(self.box_lo)) / np.array(self.res)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.box_lo)

    def multi(self, lin) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(lin, dtype=np.int64), self.res), axis=-1)

    def linear(self, multi) -> np.ndarray:
        m = np.asarray(multi, dtype=np.int64)
        return np.ravel_multi_index(tuple(m.T), self.res)

    def centers(self, lin=None) -> np.ndarray:
        if lin is None:
            lin = np.arange(self.ncubes)
        return self.lo + (self.multi(lin) + 0.5) * self.widths

    def cube_of_point(self, pts) -> np.ndarray:
        """Linear index of the half-open cube containing each point, -1 if outside."""
        P = np.atleast_2d(np.asarray(pts, dtype=float))
        idx = np.floor((P - self.lo) / self.widths).astype(np.int64)
        # points on the upper box face belong to the last cube
        on_hi = np.isclose(P, np.array(self.box_hi), rtol=0, atol=1e-12)
        idx = np.where(on_hi, np.array(self.res) - 1, idx)
        ok = np.all((idx >= 0) & (idx < np.array(self.res)), axis=1)
        out = np.full(P.shape[0], -1, dtype=np.int64)
        if ok.any():
            out[ok] = self.linear(idx[ok])
        return out

    def refine(self, factor: int) -> "Grid":
        return Grid(self.box_lo, self.box_hi, tuple(r * factor for r in self.res))

    def header(self) -> str:
        parts = ["dim", str(self.dim), "res"] + [str(r) for r in self.res]
        parts += ["box"] + [repr(v) for v in self.box_lo] + [repr(v) for v in self.box_hi]
        return " ".join(parts)

    def to_json(self):
        return {"box_lo": list(self.box_lo), "box_hi": list(self.box_hi), "res": list(self.res)}


class CubeSet:
    """An immutable set of grid cubes, stored as a boolean mask over the grid."""

    __slots__ = ("grid", "_mask", "_hash")

    def __init__(self, grid: Grid, mask):
        m = np.asarray(mask, dtype=bool).reshape(-1)
        if m.shape[0] != grid.ncubes:
            raise ConleyError("mask size does not match the grid")
        m = m.copy()
        m.setflags(write=False)
        self.grid = grid
        self._mask = m
        self._hash = None

    # constructors ---------------------------------------------------------
    @classmethod
    def empty(cls, grid: Grid) -> "CubeSet":
        return cls(grid, np.zeros(grid.ncubes, dtype=bool))

    @classmethod
    def full(cls, grid: Grid) -> "CubeSet":
        return cls(grid, np.ones(grid.ncubes, dtype=bool))

    @classmethod
    def from_linear(cls, grid: Grid, lin: Iterable[int]) -> "CubeSet":
        m = np.zeros(grid.ncubes, dtype=bool)
        lin = np.asarray(list(lin) if not isinstance(lin, np.ndarray) else lin, dtype=np.int64)
        if lin.size and (lin.min() < 0 or lin.max() >= grid.ncubes):
            raise ConleyError("cube index out of range")
        m[lin] = True
        return cls(grid, m)

    @classmethod
    def from_multi(cls, grid: Grid, multi) -> "CubeSet":
        multi = np.asarray(list(multi), dtype=np.int64).reshape(-1, grid.dim)
        if multi.size and (np.any(multi < 0) or np.any(multi >= np.array(grid.res))):
            raise ConleyError("multi-index out of range")
        return cls.from_linear(grid, grid.linear(multi) if multi.size else [])

    # basic protocol -------------------------------------------------------
    @property
    def mask(self) -> np.ndarray:
        return self._mask

    def u8(self) -> np.ndarray:
        return self._mask.view(np.uint8)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self._mask)

    def multi_indices(self) -> np.ndarray:
        return self.grid.multi(self.indices)

    def __len__(self) -> int:
        return int(self._mask.sum())

    def __bool__(self) -> bool:
        return bool(self._mask.any())

    def __contains__(self, item) -> bool:
        if isinstance(item, (int, np.integer)):
            return bool(self._mask[int(item)])
        return bool(self._mask[int(self.grid.linear(np.asarray(item)[None, :])[0])])

    def _check(self, other: "CubeSet") -> None:
        if self.grid != other.grid:
            raise ConleyError("cube sets live on different grids")

    def __or__(self, other):
        self._check(other)
        return CubeSet(self.grid, self._mask | other._mask)

    def __and__(self, other):
        self._check(other)
        return CubeSet(self.grid, self._mask & other._mask)

    def __sub__(self, other):
        self._check(other)
        return CubeSet(self.grid, self._mask & ~other._mask)

    def __xor__(self, other):
        self._check(other)
        return CubeSet(self.grid, self._mask ^ other._mask)

    def __eq__(self, other):
        return (isinstance(other, CubeSet) and self.grid == other.grid
                and bool(np.array_equal(self._mask, other._mask)))

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.grid, self._mask.tobytes()))
        return self._hash

    def __le__(self, other):
        return self.issubset(other)

    def issubset(self, other: "CubeSet") -> bool:
        self._check(other)
        return not bool(np.any(self._mask & ~other._mask))

    def complement(self) -> "CubeSet":
        return CubeSet(self.grid, ~self._mask)

    def __repr__(self):
        return f"CubeSet({len(self)} cubes on res {self.grid.res})"

    # morphology -----------------------------------------------------------
    def dilate(self, layers: int = 1) -> "CubeSet":
        """Grow by ``layers`` Moore-neighbourhood layers (clipped to the grid)."""
        m = self._mask.reshape(self.grid.res)
        for _ in range(layers):
            m = _moore_or(m)
        return CubeSet(self.grid, m)

    def to_json(self):
        return [list(map(int, r)) for r in self.multi_indices()]

    # text format ----------------------------------------------------------
    def to_text(self) -> str:
        lines = [self.grid.header()]
        lines += [" ".join(str(int(v)) for v in row) for row in self.multi_indices()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CubeSet":
        rows = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not rows:
            raise ConleyError("empty cube set file")
        head = rows[0].split()
        try:
            if head[0] != "dim" or head[2] != "res":
                raise ValueError
            d = int(head[1])
            res = tuple(int(v) for v in head[3:3 + d])
            if head[3 + d] != "box":
                raise ValueError
            lo = tuple(float(v) for v in head[4 + d:4 + 2 * d])
            hi = tuple(float(v) for v in head[4 + 2 * d:4 + 3 * d])
            if len(head) != 4 + 3 * d:
                raise ValueError
        except (ValueError, IndexError) as exc:
            raise ConleyError(f"malformed cube set header: {rows[0]!r}") from exc
        grid = Grid(lo, hi, res)
        try:
            multi = [[int(v) for v in r.split()] for r in rows[1:]]
        except ValueError as exc:
            raise ConleyError("malformed multi-index line") from exc
        if any(len(r) != d for r in multi):
            raise ConleyError("multi-index with wrong arity")
        return cls.from_multi(grid, multi)


def _moore_or(m: np.ndarray) -> np.ndarray:
    out = m.copy()
    d = m.ndim
    for off in itertools.product((-1, 0, 1), repeat=d):
        if not any(off):
            continue
        src = []
        dst = []
        for o, n in zip(off, m.shape):
            if o == 1:
                src.append(slice(0, n - 1))
                dst.append(slice(1, n))
            elif o == -1:
                src.append(slice(1, n))
                dst.append(slice(0, n - 1))
            else:
                src.append(slice(None))
                dst.append(slice(None))
        out[tuple(dst)] |= m[tuple(src)]
    return out


def build_cubeset_from_predicate(grid: Grid, pred: Callable) -> CubeSet:
    """Cubes whose center satisfies ``pred``.

    ``pred`` receives an (n, dim) array of centers and returns booleans; scalar
    predicates are applied row by row as a fallback.
    """
    C = grid.centers()
    try:
        vals = np.asarray(pred(C), dtype=bool)
        if vals.shape != (C.shape[0],):
            raise TypeError
    except (TypeError, ValueError, IndexError):
        vals = np.array([bool(pred(c)) for c in C], dtype=bool)
    return CubeSet(grid, vals)


def topological_interior(A: CubeSet) -> CubeSet:
    """Cubes of ``A`` whose whole Moore neighbourhood is in ``A`` and off the grid edge."""
    m = A.mask.reshape(A.grid.res)
    padded = np.pad(m, 1, constant_values=False)
    comp = ~padded
    hit = _moore_or(comp)
    inner = ~hit[tuple(slice(1, -1) for _ in range(m.ndim))]
    return CubeSet(A.grid, inner & m)


def boundary_cubes(A: CubeSet) -> CubeSet:
    return A - topological_interior(A)


# ---------------------------------------------------------------------------
# transition graph

def boundary_faces(N: CubeSet, S: Optional[CubeSet] = None):
    """Faces of cubes of ``S`` (default N) that separate N from its complement.

    Each face is ``(axis, side, lo, hi)`` with ``side`` the outward direction
    and ``lo``/``hi`` the corners of the owning cube.
    """
    g = N.grid
    S = N if S is None else S
    res = np.array(g.res)
    idx = S.multi_indices()
    faces = []
    for a in range(g.dim):
        for side in (-1, 1):
            nb = idx.copy()
            nb[:, a] += side
            inside = np.all((nb >= 0) & (nb < res), axis=1)
            outside = ~inside
            outside[inside] = ~N.mask[g.linear(nb[inside])]
            for c in idx[outside]:
                lo = g.lo + c * g.widths
                faces.append((a, side, lo, lo + g.widths))
    return faces


def face_distances(P: np.ndarray, faces) -> np.ndarray:
    """Distance from each point to the nearest face of each normal class.

    Column ``2*axis + (side > 0)``; ``inf`` where a class has no face.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    n, d = P.shape
    best = np.full((n, 2 * d), np.inf)
    if not faces:
        return best
    axes = np.array([f[0] for f in faces])
    sides = np.array([f[1] for f in faces])
    lo = np.array([f[2] for f in faces])
    hi = np.array([f[3] for f in faces])
    r = np.arange(len(faces))
    plane = np.where(sides > 0, hi[r, axes], lo[r, axes])
    flo, fhi = lo.copy(), hi.copy()
    flo[r, axes] = plane
    fhi[r, axes] = plane
    cls = 2 * axes + (sides > 0)
    for s in range(0, len(faces), 256):
        sl = slice(s, s + 256)
        q = np.clip(P[:, None, :], flo[None, sl], fhi[None, sl])
        dist = np.linalg.norm(P[:, None, :] - q, axis=2)
        for c in np.unique(cls[sl]):
            sel = cls[sl] == c
            best[:, c] = np.minimum(best[:, c], dist[:, sel].min(axis=1))
    return best


def nearest_face_distance(P: np.ndarray, faces) -> np.ndarray:
    return face_distances(P, faces).min(axis=1)


def _halton(n: int, d: int) -> np.ndarray:
    primes = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29][:d]
    out = np.empty((n, d))
    for j, b in enumerate(primes):
        for i in range(n):
            f, r, k = 1.0, 0.0, i + 1
            while k > 0:
                f /= b
                r += f * (k % b)
                k //= b
            out[i, j] = r
    return out


def sample_offsets(dim: int, samples_per_cube: int) -> np.ndarray:
    """Unit-cube sample offsets: corners, center, then Halton interior points."""
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=dim)))
    base = np.vstack([corners, np.full((1, dim), 0.5)])
    extra = max(0, samples_per_cube - base.shape[0])
    if extra:
        base = np.vstack([base, _halton(extra, dim)])
    return base


class TransitionGraph:
    """Directed relation on cubes; node ``grid.ncubes`` stands for "outside the grid"."""

    def __init__(self, grid: Grid, tau: float, pad: float, samples: int,
                 indptr: np.ndarray, indices: np.ndarray, provenance: Optional[dict] = None):
        self.grid = grid
        self.tau = float(tau)
        self.pad = float(pad)
        self.samples = int(samples)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.provenance = provenance or {}
        n = grid.ncubes
        src = np.repeat(np.arange(n, dtype=np.int64), np.diff(self.indptr))
        keep = self.indices < n
        order = np.lexsort((src[keep], self.indices[keep]))
        rsrc = self.indices[keep][order]
        rdst = src[keep][order]
        self.rindptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.rindptr, rsrc + 1, 1)
        self.rindptr = np.cumsum(self.rindptr)
        self.rindices = np.ascontiguousarray(rdst, dtype=np.int64)
        self._src = src

    @property
    def n(self) -> int:
        return self.grid.ncubes

    def successors(self, c: int) -> np.ndarray:
        return self.indices[self.indptr[c]:self.indptr[c + 1]]

    def predecessors(self, c: int) -> np.ndarray:
        return self.rindices[self.rindptr[c]:self.rindptr[c + 1]]

    def edges(self):
        return self._src, self.indices

    def adjacency(self, c: int) -> set:
        return {int(v) for v in self.successors(c)}

    def image(self, S: CubeSet) -> CubeSet:
        """Cubes hit in one step from ``S`` (the outside node is dropped)."""
        src, dst = self.edges()
        sel = S.mask[src] & (dst < self.n)
        m = np.zeros(self.n, dtype=bool)
        m[dst[sel]] = True
        return CubeSet(self.grid, m)

    def leaves(self, S: CubeSet, T: CubeSet) -> np.ndarray:
        """Cubes of ``S`` with a successor outside ``T`` (outside node counts)."""
        src, dst = self.edges()
        tm = np.append(T.mask, False)
        bad = S.mask[src] & ~tm[dst]
        return np.unique(src[bad])

    def transpose(self) -> "TransitionGraph":
        """The inverse relation (no outside-node edges)."""
        return TransitionGraph(self.grid, self.tau, self.pad, self.samples,
                               self.rindptr, self.rindices,
                               dict(self.provenance, transposed=True))


def transition_graph(field: VectorFieldSpec, cfg: FlowConfig, grid: Grid,
                     pad: float = 0.25, samples_per_cube: int = 0) -> TransitionGraph:
    """Over-approximate the time-``cfg.tau`` map on cubes.

    Each cube maps to every cube whose interior meets the bounding box of the
    images of its samples, inflated by ``pad`` cell widths per side.
    """
    if field.dim != grid.dim:
        raise ConleyError("field and grid dimensions differ")
    if samples_per_cube <= 0:
        samples_per_cube = 2 ** grid.dim + 1 + 8
    offs = sample_offsets(grid.dim, samples_per_cube)
    S = offs.shape[0]
    w = grid.widths
    corners = grid.lo + grid.multi(np.arange(grid.ncubes)) * w
    pts = (corners[:, None, :] + offs[None, :, :] * w).reshape(-1, grid.dim)

    nthreads = thread_count()
    if nthreads > 1 and pts.shape[0] > 4096:
        chunks = np.array_split(pts, nthreads)
        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            imgs = list(ex.map(lambda c: advance(field, cfg, c, cfg.tau), chunks))
        img = np.vstack(imgs)
    else:
        img = advance(field, cfg, pts, cfg.tau)
    img = img.reshape(grid.ncubes, S, grid.dim)
    bmin = img.min(axis=1) - pad * w
    bmax = img.max(axis=1) + pad * w
    eps = 1e-9
    lo_idx = np.floor((bmin - grid.lo) / w + eps).astype(np.int64)
    hi_idx = np.ceil((bmax - grid.lo) / w - eps).astype(np.int64) - 1
    hi_idx = np.maximum(hi_idx, lo_idx)
    indptr, indices = kernels.box_adjacency(lo_idx, hi_idx, np.array(grid.res, dtype=np.int64))
    prov = {"tau": cfg.tau, "step": cfg.step, "direction": cfg.direction,
            "pad": pad, "samples": int(S)}
    return TransitionGraph(grid, cfg.tau, pad, S, indptr, indices, prov)
