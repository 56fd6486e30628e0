"""Vector fields, fixed-step RK4 integration and lattice translations."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import ConleyError, NoLattice, NonFinite

BLOWUP = 1.0e6

CATALOG_DIMS = {
    "SADDLE2": 2,
    "SINK2": 2,
    "SOURCE2": 2,
    "DOUBLEWELL2": 2,
    "PERIODIC1": 1,
}

_CATALOG_LATTICE = {"PERIODIC1": ((Fraction(1),),)}


def _catalog_eval(kind: str, X: np.ndarray) -> np.ndarray:
    if kind == "SADDLE2":
        return np.stack([X[:, 0], -X[:, 1]], axis=1)
    if kind == "SINK2":
        return -X
    if kind == "SOURCE2":
        return X.copy()
    if kind == "DOUBLEWELL2":
        x = X[:, 0]
        return np.stack([x - x ** 3, -X[:, 1]], axis=1)
    if kind == "PERIODIC1":
        return -np.sin(2.0 * np.pi * X)
    raise ConleyError(f"unknown catalog field {kind!r}")


def _as_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        return Fraction(v).limit_denominator(10 ** 12)
    return Fraction(v)


@dataclass(frozen=True)
class VectorFieldSpec:
    """A vector field on R^dim.

    ``kind`` is a catalog tag or ``"polynomial"``; for polynomials ``terms`` holds,
    per output coordinate, a tuple of ``(coefficient, exponents)`` monomials.
    ``lattice`` optionally lists translation generators (rational coordinates)
    under which the field is invariant.
    """

    dim: int
    kind: str
    terms: tuple = ()
    lattice: Optional[tuple] = None

    def __post_init__(self):
        if self.dim <= 0:
            raise ConleyError("dim must be positive")
        if self.kind == "polynomial":
            if len(self.terms) != self.dim:
                raise ConleyError(
                    f"polynomial table has {len(self.terms)} components, expected {self.dim}")
            for comp in self.terms:
                for coef, exps in comp:
                    if len(exps) != self.dim or any(int(e) != e or e < 0 for e in exps):
                        raise ConleyError(f"bad monomial exponents {exps!r}")
        elif self.kind in CATALOG_DIMS:
            if CATALOG_DIMS[self.kind] != self.dim:
                raise ConleyError(f"{self.kind} has dimension {CATALOG_DIMS[self.kind]}")
        else:
            raise ConleyError(f"unknown field kind {self.kind!r}")
        if self.lattice is not None:
            lat = tuple(tuple(_as_fraction(c) for c in g) for g in self.lattice)
            for g in lat:
                if len(g) != self.dim:
                    raise ConleyError("lattice generator has wrong dimension")
            object.__setattr__(self, "lattice", lat)
            self._check_equivariance()

    # construction helpers -------------------------------------------------
    @classmethod
    def catalog(cls, kind: str) -> "VectorFieldSpec":
        if kind not in CATALOG_DIMS:
            raise ConleyError(f"unknown catalog field {kind!r}")
        return cls(CATALOG_DIMS[kind], kind, (), _CATALOG_LATTICE.get(kind))

    @classmethod
    def polynomial(cls, table: Sequence, lattice=None) -> "VectorFieldSpec":
        terms = tuple(
            tuple((float(c), tuple(int(e) for e in exps)) for c, exps in comp)
            for comp in table)
        return cls(len(terms), "polynomial", terms, lattice)

    @classmethod
    def linear(cls, matrix) -> "VectorFieldSpec":
        """Polynomial field x' = M x."""
        m = np.asarray(matrix, dtype=float)
        d = m.shape[0]
        table = []
        for i in range(d):
            comp = []
            for j in range(d):
                if m[i, j] != 0.0:
                    e = [0] * d
                    e[j] = 1
                    comp.append((float(m[i, j]), e))
            table.append(comp)
        return cls.polynomial(table)

    @classmethod
    def zero(cls, dim: int) -> "VectorFieldSpec":
        return cls.polynomial([[] for _ in range(dim)])

    # evaluation -----------------------------------------------------------
    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if self.kind == "polynomial":
            out = np.zeros_like(X)
            for i, comp in enumerate(self.terms):
                for coef, exps in comp:
                    mono = np.full(X.shape[0], coef)
                    for j, e in enumerate(exps):
                        if e:
                            mono = mono * X[:, j] ** e
                    out[:, i] += mono
        else:
            out = _catalog_eval(self.kind, X)
        return out[0] if single else out

    def lattice_matrix(self) -> np.ndarray:
        if self.lattice is None:
            raise NoLattice("field has no lattice")
        return np.array([[float(c) for c in g] for g in self.lattice], dtype=float)

    def _check_equivariance(self) -> None:
        rng = np.random.default_rng(12345)
        X = rng.uniform(-2.0, 2.0, size=(100, self.dim))
        base = self(X)
        for g in self.lattice_matrix():
            err = np.abs(self(X + g) - base).max()
            if not err < 1e-9:
                raise ConleyError(
                    f"field is not invariant under lattice generator {g.tolist()} (err {err:.3g})")

    def to_json(self):
        d = {"dim": self.dim, "kind": self.kind}
        if self.kind == "polynomial":
            d["terms"] = [[[c, list(e)] for c, e in comp] for comp in self.terms]
        if self.lattice is not None:
            d["lattice"] = [[str(c) for c in g] for g in self.lattice]
        return d


def stationary_points(field: VectorFieldSpec, lo, hi) -> Optional[np.ndarray]:
    """Closed-form stationary points of catalog fields inside the box, else None."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if field.kind in ("SADDLE2", "SINK2", "SOURCE2"):
        pts = np.zeros((1, 2))
    elif field.kind == "DOUBLEWELL2":
        pts = np.array([[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    elif field.kind == "PERIODIC1":
        ks = np.arange(math.floor(2 * lo[0]) - 1, math.ceil(2 * hi[0]) + 2)
        pts = (ks / 2.0)[:, None]
    else:
        return None
    keep = np.all((pts >= lo) & (pts <= hi), axis=1)
    return pts[keep]


@dataclass(frozen=True)
class FlowConfig:
    tau: float = 0.125
    step: Optional[float] = None
    direction: str = "forward"

    def __post_init__(self):
        if not self.tau > 0:
            raise ConleyError("tau must be positive")
        if self.step is None:
            object.__setattr__(self, "step", self.tau / 8.0)
        if not (0 < self.step <= self.tau):
            raise ConleyError("step must satisfy 0 < step <= tau")
        if self.direction not in ("forward", "reversed"):
            raise ConleyError("direction must be 'forward' or 'reversed'")

    def reversed(self) -> "FlowConfig":
        return replace(self, direction="reversed" if self.direction == "forward" else "forward")


def _guard(X: np.ndarray) -> None:
    if not np.all(np.isfinite(X)) or np.abs(X).max(initial=0.0) > BLOWUP:
        raise NonFinite("state left the blow-up guard box [-1e6, 1e6]^dim")


def advance(field: VectorFieldSpec, cfg: FlowConfig, x, t: float) -> np.ndarray:
    """Flow ``x`` (a point or an (n, dim) batch) for time ``t`` with fixed-step RK4."""
    if t < 0:
        raise ConleyError("time must be nonnegative")
    X = np.array(x, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    _guard(X)
    if t == 0:
        return X[0] if single else X
    n = max(1, math.ceil(t / cfg.step - 1e-12))
    h = t / n
    sgn = -1.0 if cfg.direction == "reversed" else 1.0
    for _ in range(n):
        k1 = sgn * field(X)
        k2 = sgn * field(X + 0.5 * h * k1)
        k3 = sgn * field(X + 0.5 * h * k2)
        k4 = sgn * field(X + h * k3)
        X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _guard(X)
    return X[0] if single else X


def orbit_segment(field: VectorFieldSpec, cfg: FlowConfig, x, T: float) -> np.ndarray:
    """Samples of the orbit of ``x`` at times 0, tau, 2 tau, ... up to ``T``."""
    if T < 0:
        raise ConleyError("T must be nonnegative")
    count = int(math.floor(T / cfg.tau + 1e-12)) + 1
    cur = np.array(x, dtype=float)
    pts = [cur]
    for _ in range(count - 1):
        cur = advance(field, cfg, cur, cfg.tau)
        pts.append(cur)
    return np.array(pts)


def lattice_translate(field: VectorFieldSpec, coeffs, x) -> np.ndarray:
    """Translate ``x`` by the integer combination ``coeffs`` of lattice generators."""
    if field.lattice is None:
        raise NoLattice("field has no lattice")
    c = np.asarray(coeffs, dtype=float).reshape(-1)
    G = field.lattice_matrix()
    if c.shape[0] != G.shape[0]:
        raise ConleyError("coefficient count does not match the number of generators")
    return np.asarray(x, dtype=float) + c @ G
