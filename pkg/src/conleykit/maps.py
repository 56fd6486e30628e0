"""Homology maps induced by point maps between cubical pairs.

A point map sends points of N to points of N' or to the basepoint.  Cycles
of the source are pushed forward by sampling the map along their cells:

* degree 0: each vertex goes to the lattice vertex nearest its image;
* degree 1: each edge is bisected until consecutive image samples share a
  closed target cube, then the samples are joined by axis-parallel
  staircase paths; a sample that hits the basepoint must be flanked by
  samples landing on the closure of L';
* top degree: a target cube receives the coefficient of the source cube
  containing the preimage of its centre.

The pushed-forward chain is checked to be a relative cycle before its
homology coordinates are read off; anything else raises NotCellular.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .conley import flow_map_batch
from .cubical import CubeSet
from .errors import DimUnsupported, NotCellular
from .flow import FlowConfig, VectorFieldSpec, advance
from .homology import Chain, HomologyMorphism, PairHomology, chain_map_matrices

BatchMap = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]

MAX_DEPTH = 18


@dataclass
class PointMap:
    """A batch point map with optional preimage (for top-degree push-forward).

    ``forward(X) -> (Y, ok)``; ``ok`` is False where the value is the basepoint.
    ``preimage(Y) -> (X, ok)`` returns source points with forward(X) = Y.
    """

    forward: BatchMap
    preimage: Optional[BatchMap] = None


def flow_point_map(field: VectorFieldSpec, cfg: FlowConfig, pair1, pair2, T: float,
                   tame: bool = False, A: Optional[CubeSet] = None) -> PointMap:
    """The time-T flow map between two index pairs as a PointMap."""

    def fwd(X):
        return flow_map_batch(field, cfg, pair1, pair2, T, X, tame, A)

    def back(Y):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        rev = cfg.reversed()
        try:
            X = advance(field, rev, Y, 3.0 * T)
        except Exception:
            X = np.array([_safe(field, rev, y, 3.0 * T) for y in Y])
        img, ok = fwd(X)
        tol = 1e-6 * max(1.0, float(np.max(np.abs(Y)))) if Y.size else 1e-6
        ok &= np.all(np.abs(img - Y) < 1e3 * tol, axis=1)
        return X, ok

    return PointMap(fwd, back)


def _safe(field, cfg, y, t):
    try:
        return advance(field, cfg, y, t)
    except Exception:
        return np.full(len(y), np.inf)


class _Pusher:
    def __init__(self, f: PointMap, src: PairHomology, dst: PairHomology):
        self.f, self.src, self.dst = f, src, dst
        self.grid = dst.grid
        self.codec = dst.codec
        self.d = self.grid.dim
        self.w = self.grid.widths
        self.lo = self.grid.lo
        self.vshape = np.array(self.codec.vshape)
        self.target_closure = set(self.codec.closure(dst.N).tolist())
        self.Lsrc = set(src.codec.closure(src.L).tolist())
        self.Ldst = set(self.codec.closure(dst.L).tolist())

    # lattice helpers
    def snap(self, Y: np.ndarray) -> np.ndarray:
        v = np.rint((Y - self.lo) / self.w).astype(np.int64)
        return v

    def vkey(self, v) -> int:
        v = np.asarray(v, dtype=np.int64)
        if np.any(v < 0) or np.any(v >= self.vshape):
            return -1
        return int(self.codec.encode(v[None, :], [0])[0])

    def src_vertex_in_L(self, P: np.ndarray) -> np.ndarray:
        sg = self.src.grid
        v = np.rint((P - sg.lo) / sg.widths).astype(np.int64)
        on = np.all(np.abs(P - (sg.lo + v * sg.widths)) < 1e-9 * sg.widths, axis=1)
        out = np.zeros(P.shape[0], dtype=bool)
        for i in np.flatnonzero(on):
            vv = v[i]
            if np.all(vv >= 0) and np.all(vv <= np.array(sg.res)):
                out[i] = int(self.src.codec.encode(vv[None, :], [0])[0]) in self.Lsrc
        return out

    def evaluate(self, P: np.ndarray):
        Y, ok = self.f.forward(P)
        ok = ok & ~self.src_vertex_in_L(P)
        return Y, ok

    def staircase(self, a, b, coef: int, out: Chain) -> None:
        """Edge path from lattice vertex a to b, one axis at a time."""
        cur = np.array(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        for ax in range(self.d):
            while cur[ax] != b[ax]:
                step = 1 if b[ax] > cur[ax] else -1
                base = cur.copy()
                if step < 0:
                    base[ax] -= 1
                key = self.vkey(base)
                if key < 0:
                    raise NotCellular("image path leaves the target grid", witnesses=cur.tolist())
                ek = key + (1 << ax)
                if ek not in self.target_closure:
                    raise NotCellular("image path leaves the closure of N'", witnesses=base.tolist())
                out[ek] = out.get(ek, 0) + coef * step
                cur[ax] += step

    # degree pushers
    def push0(self, chain: Chain) -> Chain:
        keys = np.array(sorted(chain), dtype=np.int64)
        out: Chain = {}
        if keys.size == 0:
            return out
        P = np.array([self.src.codec.center(int(k)) for k in keys])
        Y, ok = self.evaluate(P)
        for k, y, good in zip(keys.tolist(), Y, ok):
            if not good:
                continue
            key = self.vkey(self.snap(y[None, :])[0])
            if key < 0 or key not in self.target_closure:
                raise NotCellular("vertex image outside the closure of N'", witnesses=y.tolist())
            out[key] = out.get(key, 0) + chain[k]
        return out

    def push1(self, chain: Chain) -> Chain:
        out: Chain = {}
        if not chain:
            return out
        sg = self.src.grid
        keys = np.array(sorted(chain), dtype=np.int64)
        v, m = self.src.codec.decode(keys)
        axes = np.array([int(mm).bit_length() - 1 for mm in m])
        P0 = sg.lo + v * sg.widths
        E = np.zeros_like(P0)
        E[np.arange(len(keys)), axes] = sg.widths[axes]
        # per edge: sorted parameters with cached images
        ts = [np.array([0.0, 1.0]) for _ in keys]
        Y0, ok0 = self.evaluate(np.concatenate([P0, P0 + E]))
        n = len(keys)
        Ys = [np.stack([Y0[i], Y0[n + i]]) for i in range(n)]
        oks = [np.array([ok0[i], ok0[n + i]]) for i in range(n)]
        active = list(range(n))
        for depth in range(MAX_DEPTH + 1):
            pending = []
            for i in active:
                V = self.snap(np.where(oks[i][:, None], Ys[i], 0.0))
                bad = self._bad_segments(V, oks[i])
                if bad.any():
                    pending.append((i, bad))
                else:
                    for a in range(len(ts[i]) - 1):
                        if oks[i][a] and oks[i][a + 1]:
                            self.staircase(V[a], V[a + 1], chain[int(keys[i])], out)
            if not pending:
                return out
            if depth == MAX_DEPTH:
                i = pending[0][0]
                raise NotCellular("edge image not resolved by bisection",
                                  witnesses=[P0[i].tolist(), (P0[i] + E[i]).tolist()])
            mids = [0.5 * (ts[i][:-1] + ts[i][1:])[bad] for i, bad in pending]
            P = np.concatenate([P0[i][None, :] + mt[:, None] * E[i][None, :]
                                for (i, _), mt in zip(pending, mids)])
            Y, ok = self.evaluate(P)
            pos = 0
            for (i, _), mt in zip(pending, mids):
                cnt = len(mt)
                t_all = np.concatenate([ts[i], mt])
                order = np.argsort(t_all, kind="stable")
                ts[i] = t_all[order]
                Ys[i] = np.concatenate([Ys[i], Y[pos:pos + cnt]])[order]
                oks[i] = np.concatenate([oks[i], ok[pos:pos + cnt]])[order]
                pos += cnt
            active = [i for i, _ in pending]
        return out

    def _bad_segments(self, V, ok) -> np.ndarray:
        both = ok[:-1] & ok[1:]
        far = np.max(np.abs(V[1:] - V[:-1]), axis=1) > 1
        bad = both & far
        for a in np.flatnonzero(ok[:-1] != ok[1:]):
            j = a if ok[a] else a + 1
            bad[a] = self.vkey(V[j]) not in self.Ldst
        return bad

    def push_top(self, chain: Chain) -> Chain:
        if self.f.preimage is None:
            raise DimUnsupported("top-degree push-forward needs a preimage map")
        dst = self.dst
        cubes = (dst.N - dst.L)
        lin = cubes.indices
        out: Chain = {}
        if lin.size == 0:
            return out
        Yc = self.grid.centers(lin)
        X, ok = self.f.preimage(Yc)
        sg = self.src.grid
        src_cube = sg.cube_of_point(np.where(ok[:, None], X, np.inf))
        full = (1 << self.d) - 1
        src_keys = self.src.codec.encode(sg.multi(np.maximum(src_cube, 0)), np.full(lin.size, full))
        dst_keys = self.codec.encode(self.grid.multi(lin), np.full(lin.size, full))
        for good, sc, sk, dk in zip(ok, src_cube, src_keys.tolist(), dst_keys.tolist()):
            if good and sc >= 0:
                c = chain.get(sk, 0)
                if c:
                    out[dk] = c
        return out


def induced_homology_map(f, src: PairHomology, dst: PairHomology, check: bool = True) -> HomologyMorphism:
    """Graded matrices of the map on H_*(N, L) -> H_*(N', L') induced by ``f``.

    ``f`` is either a PointMap or a cell map (key -> chain) for cellular maps
    such as inclusions and quotients.
    """
    if not isinstance(f, PointMap):
        return chain_map_matrices(src, dst, f, check)
    push = _Pusher(f, src, dst)
    d = src.grid.dim
    mats = {}
    for k in range(d + 1):
        rows, cols = dst.rank(k), src.rank(k)
        if not rows and not cols:
            continue
        M = [[0] * cols for _ in range(rows)]
        for j, g in enumerate(src.generators(k)):
            if k == 0:
                img = push.push0(g)
            elif k == d:
                img = push.push_top(g)
            elif k == 1:
                img = push.push1(g)
            else:
                raise DimUnsupported(f"point-map push-forward in degree {k} of dimension {d}")
            img = dst.restrict(img)
            if check and dst.boundary(img):
                raise NotCellular("pushed-forward generator is not a relative cycle",
                                  witnesses=[k, j])
            col = dst.coords(k, img)
            for i in range(rows):
                M[i][j] = col[i]
        mats[k] = M
    return HomologyMorphism(mats, 0, src.signature, dst.signature)
