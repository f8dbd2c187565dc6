"""Geometry of the forced mode set.

Everything here is exact integer arithmetic: wave vectors are pairs of
Python ints and no floating point enters the lattice computations.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple


class Mode(NamedTuple):
    k1: int
    k2: int

    @property
    def perp(self) -> "Mode":
        return Mode(self.k2, -self.k1)

    @property
    def norm2(self) -> int:
        return self.k1 * self.k1 + self.k2 * self.k2

    def __neg__(self) -> "Mode":
        return Mode(-self.k1, -self.k2)


ModeSet = frozenset  # frozenset[Mode]


def cross(a, b) -> int:
    """det(a, b) = <a_perp, b> up to sign; zero iff collinear."""
    return a[0] * b[1] - a[1] * b[0]


def as_modes(modes: Iterable) -> frozenset:
    out = frozenset(Mode(int(k[0]), int(k[1])) for k in modes)
    if not out:
        raise ValueError("mode set is empty")
    if Mode(0, 0) in out:
        raise ValueError("mode set contains the origin (0, 0)")
    return out


def parse_modes(text: str) -> frozenset:
    """Parse ``"1,0;-1,0;1,1"`` into a mode set."""
    pairs = []
    for chunk in text.replace(" ", "").split(";"):
        if not chunk:
            continue
        a, b = chunk.split(",")
        pairs.append((int(a), int(b)))
    return as_modes(pairs)


def symmetrize(z0: Iterable) -> frozenset:
    z0 = as_modes(z0)
    return z0 | frozenset(-k for k in z0)


def is_symmetric(z0: Iterable) -> bool:
    z0 = frozenset(Mode(*k) for k in z0)
    return all(-k in z0 for k in z0)


def _hermite_basis(vectors: list) -> tuple:
    """Canonical basis of the integer span of ``vectors``.

    Returns ``((a, 0), (b, d))`` with a, d > 0 and 0 <= b < a for a rank-2
    lattice, a single primitive-times-gcd generator for rank 1, and ``()``
    for the zero lattice.
    """
    cols = [list(v) for v in vectors if v[0] or v[1]]
    # Euclid on the second components, carrying the first along.
    pivot = None
    rest = []
    for c in cols:
        if c[1] == 0:
            rest.append(c)
            continue
        if pivot is None:
            pivot = c
            continue
        while c[1] != 0:
            q = pivot[1] // c[1]
            pivot = [pivot[0] - q * c[0], pivot[1] - q * c[1]]
            pivot, c = c, pivot
        rest.append(c)
    if pivot is not None and pivot[1] < 0:
        pivot = [-pivot[0], -pivot[1]]
    a = 0
    for c in rest:
        a = math.gcd(a, c[0])
    if pivot is None:
        return (Mode(a, 0),) if a else ()
    if a == 0:
        return (Mode(pivot[0], pivot[1]),)
    return Mode(a, 0), Mode(pivot[0] % a, pivot[1])


def gcd_of_determinants(z0: Iterable) -> int:
    z = sorted(set(Mode(*k) for k in z0))
    g = 0
    for i, k in enumerate(z):
        for l in z[i + 1:]:
            g = math.gcd(g, abs(cross(k, l)))
    return g


def generated_lattice(z0: Iterable) -> tuple:
    """Basis of the integer span of ``z0`` and gcd of all pairwise dets.

    The gcd equals the index of the sublattice in Z^2 (0 when the modes are
    all collinear), which is cross-checked against the basis determinant.
    """
    z0 = as_modes(z0)
    basis = _hermite_basis(sorted(z0))
    g = gcd_of_determinants(z0)
    if len(basis) == 2:
        assert basis[0][0] * basis[1][1] == g, (basis, g)
    else:
        assert g == 0
    return basis, g


def check_conditions(z0: Iterable) -> tuple:
    """Return ``(a1, a2)``: two distinct norms present / span is all of Z^2."""
    z0 = as_modes(z0)
    a1 = len({k.norm2 for k in z0}) > 1
    a2 = gcd_of_determinants(z0) == 1
    return a1, a2


def _admissible(l, j) -> bool:
    return cross(l, j) != 0 and (l[0] ** 2 + l[1] ** 2) != (j[0] ** 2 + j[1] ** 2)


def zn_step(prev: Iterable, z0: Iterable) -> frozenset:
    """One step of the mode recursion: sums l + j over admissible pairs."""
    z0 = [Mode(*j) for j in z0]
    out = set()
    for l in prev:
        for j in z0:
            if _admissible(l, j):
                out.add(Mode(l[0] + j[0], l[1] + j[1]))
    out.discard(Mode(0, 0))
    return frozenset(out)


def zinfty_ball(z0: Iterable, radius: float, margin: float | None = None) -> frozenset:
    """Modes reachable from Z0 without forbidden steps, restricted to a ball.

    The walk is seeded with Z0 itself and explores everything inside
    ``radius + margin``; the default margin is twice the largest forced
    wavenumber.
    """
    z0 = as_modes(z0)
    kmax = max(math.sqrt(k.norm2) for k in z0)
    if margin is None:
        margin = 2.0 * kmax
    r2 = radius * radius
    outer2 = (radius + margin) ** 2
    seen = set(z0)
    frontier = set(z0)
    while frontier:
        new = {k for k in zn_step(frontier, z0) if k.norm2 <= outer2} - seen
        seen |= new
        frontier = new
    return frozenset(k for k in seen if k.norm2 <= r2)


def lattice_ball(z0: Iterable, radius: float) -> frozenset:
    """All nonzero points of the integer span of ``z0`` with norm <= radius."""
    basis, g = generated_lattice(z0)
    r = int(math.floor(radius))
    out = set()
    for k1 in range(-r, r + 1):
        for k2 in range(-r, r + 1):
            if (k1, k2) == (0, 0) or k1 * k1 + k2 * k2 > radius * radius:
                continue
            if _in_lattice((k1, k2), basis):
                out.add(Mode(k1, k2))
    return frozenset(out)


def _in_lattice(k, basis) -> bool:
    if len(basis) == 0:
        return k == (0, 0)
    if len(basis) == 1:
        b = basis[0]
        if cross(b, k) != 0:
            return False
        num = k[0] * b[0] + k[1] * b[1]
        return num % b.norm2 == 0
    (a, _), (b, d) = basis
    if k[1] % d:
        return False
    x = k[0] - (k[1] // d) * b
    return x % a == 0


def dual_periods(basis) -> tuple:
    """Translation periods (in units of 2 pi) of fields living on the lattice.

    These are the columns of the inverse-transpose of the basis matrix, so
    that <k, v_i> / (2 pi) is an integer for every lattice point k.  For an
    orthogonal basis this reduces to k_i / |k_i|^2.
    """
    (a1, a2), (b1, b2) = basis
    det = a1 * b2 - a2 * b1
    # rows of B^{-1} where B has columns a, b
    return (
        (Fraction(b2, det), Fraction(-b1, det)),
        (Fraction(-a2, det), Fraction(a1, det)),
    )


class Classification(str, enum.Enum):
    FULL_SPACE = "FullSpace"
    FINITE_OU = "FiniteOU"
    PROPER_SUBLATTICE = "ProperSublattice"


@dataclass(frozen=True)
class GeometryReport:
    modes: tuple
    is_symmetric: bool
    a1: bool
    a2: bool
    gcd_det: int
    lattice_basis: tuple
    classification: Classification
    periods: tuple | None = None  # each entry: v_i / (2 pi) as a pair of Fractions

    def to_dict(self) -> dict:
        return {
            "modes": [list(k) for k in self.modes],
            "is_symmetric": self.is_symmetric,
            "a1": self.a1,
            "a2": self.a2,
            "gcd_det": self.gcd_det,
            "lattice_basis": [list(b) for b in self.lattice_basis],
            "classification": self.classification.value,
            "periods_over_2pi": None if self.periods is None
            else [[str(c) for c in v] for v in self.periods],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def classify(z0: Iterable) -> GeometryReport:
    z0 = as_modes(z0)
    basis, g = generated_lattice(z0)
    a1, a2 = check_conditions(z0)
    if g == 0 or not a1:
        cls = Classification.FINITE_OU
    elif a2:
        cls = Classification.FULL_SPACE
    else:
        cls = Classification.PROPER_SUBLATTICE
    periods = None
    if cls is Classification.PROPER_SUBLATTICE:
        periods = dual_periods(basis)
    return GeometryReport(
        modes=tuple(sorted(z0)),
        is_symmetric=is_symmetric(z0),
        a1=a1,
        a2=a2,
        gcd_det=g,
        lattice_basis=basis,
        classification=cls,
        periods=periods,
    )


FORCING_SPANNING = frozenset(Mode(*k) for k in [(1, 0), (-1, 0), (1, 1), (-1, -1)])
FORCING_AXES = frozenset(Mode(*k) for k in [(1, 0), (-1, 0), (0, 1), (0, -1)])
FORCING_EVEN = frozenset(Mode(*k) for k in [(2, 0), (-2, 0), (2, 2), (-2, -2)])
