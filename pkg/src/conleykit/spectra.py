"""Homology-level bookkeeping for formal suspensions of pointed spaces.

An object (A, m, n) stands for A suspended by m real and n complex
directions, so a class of degree k in A sits in stable degree k + m + 2n.
Morphisms are graded integer matrices on free parts; a morphism
(A1, m1, n1) -> (A2, m2, n2) sends degree k to degree k + s with
s = (m1 - m2) + 2 (n1 - n2), and exists only when n1 - n2 is an integer.
Smash products follow the integral Kunneth formula.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

from .errors import NonIntegerComplexShift, OddShift, ShiftMismatch, SquareFails
from .homology import HomologyMorphism, HomologySignature
from .snf import Matrix, matmul

Sig = HomologySignature


# ---------------------------------------------------------------------------
# torsion arithmetic

def _prime_powers(n: int) -> List[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            q = 1
            while n % p == 0:
                n //= p
                q *= p
            out.append(q)
        p += 1
    if n > 1:
        out.append(n)
    return out


def invariant_factors(tors: Sequence[int]) -> Tuple[int, ...]:
    """Canonical form d1 | d2 | ... of a finite abelian group given by cyclic orders."""
    by_prime: Dict[int, List[int]] = {}
    for t in tors:
        for q in _prime_powers(int(t)):
            p = next(d for d in range(2, q + 1) if q % d == 0)
            by_prime.setdefault(p, []).append(q)
    if not by_prime:
        return ()
    for v in by_prime.values():
        v.sort(reverse=True)
    n = max(len(v) for v in by_prime.values())
    out = []
    for i in range(n):
        d = 1
        for v in by_prime.values():
            if i < len(v):
                d *= v[i]
        out.append(d)
    return tuple(sorted(out))


def canonical(sig: Sig) -> Sig:
    return Sig({k: (r, invariant_factors(t)) for k, (r, t) in sig.degrees.items()})


def kunneth(a: Sig, b: Sig) -> Sig:
    """Reduced homology of a smash product from the factors."""
    deg: Dict[int, Tuple[int, List[int]]] = {}

    def put(k, r, tors):
        cr, ct = deg.get(k, (0, []))
        deg[k] = (cr + r, ct + list(tors))

    for p, (ra, ta) in a.degrees.items():
        for q, (rb, tb) in b.degrees.items():
            tors = [t for t in tb for _ in range(ra)] + [t for t in ta for _ in range(rb)]
            gcds = [math.gcd(x, y) for x in ta for y in tb]
            put(p + q, ra * rb, tors + gcds)
            if gcds:
                put(p + q + 1, 0, gcds)
    return canonical(Sig({k: (r, tuple(t)) for k, (r, t) in deg.items()}))


def sphere(k: int) -> Sig:
    return Sig({k: (1, ())})


# ---------------------------------------------------------------------------
# objects and morphisms

@dataclass(frozen=True)
class SpectrumObject:
    sig: Sig
    m: int = 0
    n: Fraction = Fraction(0)
    pointed: bool = True

    def __post_init__(self):
        if int(self.m) != self.m or self.m % 2:
            raise OddShift(f"real suspension index must be even, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "n", Fraction(self.n))
        object.__setattr__(self, "sig", canonical(self.sig))

    def rank(self, k: int) -> int:
        return self.sig.rank(k)

    def stable_degrees(self) -> Dict[int, Tuple[int, Tuple[int, ...]]]:
        off = self.m + 2 * self.n
        return {Fraction(k) + off: v for k, v in self.sig.degrees.items()}

    def __eq__(self, other):
        return (isinstance(other, SpectrumObject) and self.sig == other.sig
                and self.m == other.m and self.n == other.n)

    def __hash__(self):
        return hash((tuple(self.sig.degrees.items()), self.m, self.n))

    def to_json(self):
        return {"kind": "spectrum_object_h", "degrees": self.sig.to_json(),
                "susp": [self.m, str(self.n)]}


def smash(a: SpectrumObject, b: SpectrumObject) -> SpectrumObject:
    return SpectrumObject(kunneth(a.sig, b.sig), a.m + b.m, a.n + b.n)


def desuspend(a: SpectrumObject, dm: int, dn: int) -> SpectrumObject:
    if dm % 2:
        raise OddShift(f"desuspension by an odd number ({dm}) of real directions")
    return SpectrumObject(a.sig, a.m - dm, a.n - Fraction(dn))


def suspend(a: SpectrumObject, dm: int, dn: int) -> SpectrumObject:
    return desuspend(a, -dm, -dn)


def unit() -> SpectrumObject:
    return SpectrumObject(sphere(0))


def _shift(src: SpectrumObject, dst: SpectrumObject) -> int:
    dn = src.n - dst.n
    if dn.denominator != 1:
        raise NonIntegerComplexShift(
            f"no morphisms: complex indices differ by {dn}, which is not an integer")
    return (src.m - dst.m) + 2 * int(dn)


def _zeros(r: int, c: int) -> Matrix:
    return [[0] * c for _ in range(r)]


@dataclass
class SpectrumMorphism:
    source: SpectrumObject
    target: SpectrumObject
    matrices: Dict[int, Matrix]
    shift: int = field(init=False)

    def __post_init__(self):
        self.shift = _shift(self.source, self.target)
        full = {}
        for k, (r, _) in self.source.sig.degrees.items():
            rows = self.target.rank(k + self.shift)
            M = self.matrices.get(k)
            if M is None:
                M = _zeros(rows, r)
            if len(M) != rows or any(len(row) != r for row in M):
                raise ShiftMismatch(f"matrix in degree {k} has the wrong shape")
            if r and rows:
                full[k] = [list(map(int, row)) for row in M]
        self.matrices = full

    def matrix(self, k: int) -> Matrix:
        return self.matrices.get(k, _zeros(self.target.rank(k + self.shift), self.source.rank(k)))

    def __eq__(self, other):
        if not isinstance(other, SpectrumMorphism):
            return NotImplemented
        if self.source != other.source or self.target != other.target:
            return False
        keys = set(self.matrices) | set(other.matrices)
        return all(self.matrix(k) == other.matrix(k) for k in keys)

    def is_isomorphism(self) -> bool:
        from .snf import det
        if self.source.stable_degrees().keys() != self.target.stable_degrees().keys():
            return False
        for k, (r, _) in self.source.sig.degrees.items():
            M = self.matrix(k)
            if len(M) != r or (r and abs(det(M)) != 1):
                return False
        return True

    def to_json(self):
        return {"kind": "morphism_h", "source": self.source.to_json(), "target": self.target.to_json(),
                "shift": self.shift, "matrices": {str(k): v for k, v in sorted(self.matrices.items())}}


def identity(a: SpectrumObject) -> SpectrumMorphism:
    return SpectrumMorphism(a, a, {k: [[int(i == j) for j in range(r)] for i in range(r)]
                                   for k, (r, _) in a.sig.degrees.items()})


def zero(a: SpectrumObject, b: SpectrumObject) -> SpectrumMorphism:
    return SpectrumMorphism(a, b, {})


def from_homology(h: HomologyMorphism, a: SpectrumObject, b: SpectrumObject) -> SpectrumMorphism:
    return SpectrumMorphism(a, b, dict(h.matrices))


def compose(f: SpectrumMorphism, g: SpectrumMorphism) -> SpectrumMorphism:
    """g after f."""
    if g.source != f.target:
        raise ShiftMismatch("source of the second morphism differs from the target of the first")
    mats = {}
    for k, (r, _) in f.source.sig.degrees.items():
        A = f.matrix(k)
        B = g.matrix(k + f.shift)
        rows = g.target.rank(k + f.shift + g.shift)
        mats[k] = matmul(B, A) if A and B else _zeros(rows, r)
    return SpectrumMorphism(f.source, g.target, mats)


# ---------------------------------------------------------------------------
# smash of morphisms and the interchange

def _basis(a: Sig, b: Sig) -> Dict[int, List[Tuple[int, int, int]]]:
    """Free basis of each degree of a smash: (p, i, j) with i, j free indices."""
    out: Dict[int, List[Tuple[int, int, int]]] = {}
    for p, (ra, _) in a.degrees.items():
        for q, (rb, _) in b.degrees.items():
            for i in range(ra):
                for j in range(rb):
                    out.setdefault(p + q, []).append((p, i, j))
    for v in out.values():
        v.sort()
    return out


def smash_morphisms(f: SpectrumMorphism, g: SpectrumMorphism) -> SpectrumMorphism:
    """f ^ g with the sign (-1)^{shift(g) p} on H_p(source f) (x) H_q(source g)."""
    src, dst = smash(f.source, g.source), smash(f.target, g.target)
    bs = _basis(f.source.sig, g.source.sig)
    bt = _basis(f.target.sig, g.target.sig)
    s = f.shift + g.shift
    mats = {}
    for deg, cols in bs.items():
        rows = bt.get(deg + s, [])
        index = {b: r for r, b in enumerate(rows)}
        M = _zeros(len(rows), len(cols))
        for c, (p, i, j) in enumerate(cols):
            q = deg - p
            F, G = f.matrix(p), g.matrix(q)
            sign = -1 if (g.shift * p) % 2 else 1
            for i2 in range(len(F)):
                if not F[i2][i]:
                    continue
                for j2 in range(len(G)):
                    if G[j2][j]:
                        M[index[(p + f.shift, i2, j2)]][c] += sign * F[i2][i] * G[j2][j]
        mats[deg] = M
    return SpectrumMorphism(src, dst, mats)


def symmetry(a: SpectrumObject, b: SpectrumObject) -> SpectrumMorphism:
    """Interchange a ^ b -> b ^ a, with the Koszul sign (-1)^{pq}."""
    src, dst = smash(a, b), smash(b, a)
    bs, bt = _basis(a.sig, b.sig), _basis(b.sig, a.sig)
    mats = {}
    for deg, cols in bs.items():
        rows = bt.get(deg, [])
        index = {x: r for r, x in enumerate(rows)}
        M = _zeros(len(rows), len(cols))
        for c, (p, i, j) in enumerate(cols):
            q = deg - p
            M[index[(q, j, i)]][c] = -1 if (p * q) % 2 else 1
        mats[deg] = M
    return SpectrumMorphism(src, dst, mats)


def _triples_left(a: Sig, b: Sig, c: Sig):
    ab = _basis(a, b)
    ab_sig = Sig({k: (len(v), ()) for k, v in ab.items()})
    out = {}
    for deg, xs in _basis(ab_sig, c).items():
        out[deg] = [(ab[pq][x][0], ab[pq][x][1], pq - ab[pq][x][0], ab[pq][x][2], k) for pq, x, k in xs]
    return out


def _triples_right(a: Sig, b: Sig, c: Sig):
    bc = _basis(b, c)
    bc_sig = Sig({k: (len(v), ()) for k, v in bc.items()})
    out = {}
    for deg, xs in _basis(a, bc_sig).items():
        out[deg] = [(p, i, bc[deg - p][y][0], bc[deg - p][y][1], bc[deg - p][y][2]) for p, i, y in xs]
    return out


def associator(a: SpectrumObject, b: SpectrumObject, c: SpectrumObject) -> SpectrumMorphism:
    """(a ^ b) ^ c -> a ^ (b ^ c) on the free Kunneth bases."""
    left, right = smash(smash(a, b), c), smash(a, smash(b, c))
    tl = _triples_left(a.sig, b.sig, c.sig)
    tr = _triples_right(a.sig, b.sig, c.sig)
    mats = {}
    for deg, cols in tl.items():
        index = {t: r for r, t in enumerate(tr.get(deg, []))}
        M = _zeros(len(index), len(cols))
        for ci, t in enumerate(cols):
            M[index[t]][ci] = 1
        mats[deg] = M
    return SpectrumMorphism(left, right, mats)


def left_unitor(a: SpectrumObject) -> SpectrumMorphism:
    """S ^ a -> a."""
    return SpectrumMorphism(smash(unit(), a), a, identity(a).matrices)


# ---------------------------------------------------------------------------
# systems

@dataclass
class SystemObject:
    """Ind system (levels[i] -> levels[i+1]) or pro system (levels[i+1] -> levels[i])."""

    direction: str
    levels: List[SpectrumObject]
    connecting: List[SpectrumMorphism]

    def __post_init__(self):
        if self.direction not in ("ind", "pro"):
            raise ShiftMismatch("direction must be 'ind' or 'pro'")
        if len(self.connecting) != max(0, len(self.levels) - 1):
            raise ShiftMismatch("need one connecting morphism per consecutive pair of levels")
        for i, f in enumerate(self.connecting):
            src, dst = (i, i + 1) if self.direction == "ind" else (i + 1, i)
            if f.source != self.levels[src] or f.target != self.levels[dst]:
                raise ShiftMismatch(f"connecting morphism {i} has the wrong endpoints")

    @classmethod
    def from_unfolded(cls, system) -> "SystemObject":
        """Levels keep their homology; the odd lattice desuspension stays on the unfolded record."""
        levels = [SpectrumObject(o.signature) for o in system.objects]
        conn = []
        for i, h in enumerate(system.connecting):
            s, t = (i, i + 1) if system.direction == "ind" else (i + 1, i)
            conn.append(from_homology(h, levels[s], levels[t]))
        return cls(system.direction, levels, conn)

    def to_json(self):
        conn = []
        for i, f in enumerate(self.connecting):
            s, t = (i, i + 1) if self.direction == "ind" else (i + 1, i)
            conn.append({"from": s, "to": t, "matrices": f.to_json()["matrices"]})
        return {"kind": "system_h", "direction": self.direction,
                "objects": [{"degrees": o.sig.to_json(), "susp": [o.m, str(o.n)]} for o in self.levels],
                "connecting": conn}


def system_morphism(src: SystemObject, dst: SystemObject,
                    family: Sequence[SpectrumMorphism]) -> List[SpectrumMorphism]:
    """Check that per-level maps commute with the connecting morphisms."""
    if src.direction != dst.direction:
        raise ShiftMismatch("systems point in different directions")
    n = min(len(src.levels), len(dst.levels))
    if len(family) < n:
        raise ShiftMismatch("family is shorter than the systems")
    for i in range(n):
        if family[i].source != src.levels[i] or family[i].target != dst.levels[i]:
            raise ShiftMismatch(f"family member {i} has the wrong endpoints")
    for i in range(n - 1):
        if src.direction == "ind":
            lhs = compose(family[i], dst.connecting[i])
            rhs = compose(src.connecting[i], family[i + 1])
            name = f"level {i + 1} -> {i + 2}"
        else:
            lhs = compose(src.connecting[i], family[i])
            rhs = compose(family[i + 1], dst.connecting[i])
            name = f"level {i + 2} -> {i + 1}"
        if lhs != rhs:
            raise SquareFails(f"naturality square {name} does not commute",
                              witnesses={"lhs": lhs.to_json()["matrices"], "rhs": rhs.to_json()["matrices"]})
    return list(family[:n])
