"""Exact linear algebra over F_2: subspaces, cosets, duals, sampling.

Vectors are bit-packed into Python ints: coordinate ``i`` of a vector of
dimension ``d`` is the bit of significance ``d - 1 - i``, so the tuple of
coordinates reads the same way as the integer's binary representation.
All values are immutable after construction.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .errors import CapacityError, DimensionMismatchError, ParameterError

MAX_DIM = 64
MAX_ENUM_DIM = 24


def _parity(x: int) -> int:
    return x.bit_count() & 1


@dataclass(frozen=True)
class Gf2Vector:
    """A vector in F_2^d, packed into a machine word."""

    value: int
    dim: int

    def __post_init__(self) -> None:
        if not 0 < self.dim <= MAX_DIM:
            raise CapacityError(f"dimension {self.dim} outside 1..{MAX_DIM}")
        if not 0 <= self.value < (1 << self.dim):
            raise ParameterError(f"value {self.value} does not fit in {self.dim} bits")

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "Gf2Vector":
        value = 0
        for b in bits:
            value = (value << 1) | (b & 1)
        return cls(value, len(bits))

    @classmethod
    def zero(cls, dim: int) -> "Gf2Vector":
        return cls(0, dim)

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.value >> (self.dim - 1 - i)) & 1 for i in range(self.dim))

    def bit(self, i: int) -> int:
        return (self.value >> (self.dim - 1 - i)) & 1

    def __xor__(self, other: "Gf2Vector") -> "Gf2Vector":
        if self.dim != other.dim:
            raise DimensionMismatchError(f"{self.dim} != {other.dim}")
        return Gf2Vector(self.value ^ other.value, self.dim)

    def dot(self, other: "Gf2Vector") -> int:
        """Inner product <self, other> over F_2."""
        if self.dim != other.dim:
            raise DimensionMismatchError(f"{self.dim} != {other.dim}")
        return _parity(self.value & other.value)

    def is_zero(self) -> bool:
        return self.value == 0

    def __repr__(self) -> str:
        return f"Gf2Vector({''.join(map(str, self.bits))})"


def _rref_rows(rows: Iterable[int], dim: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Row-reduce packed rows; returns (rref rows ordered by pivot, pivot columns)."""
    reduced: list[int] = []
    pivots: list[int] = []
    for row in rows:
        # eliminate against existing pivots
        for r, p in zip(reduced, pivots):
            if (row >> (dim - 1 - p)) & 1:
                row ^= r
        if row == 0:
            continue
        p = dim - row.bit_length()  # leading-coordinate index
        # back-substitute into existing rows
        reduced = [r ^ row if (r >> (dim - 1 - p)) & 1 else r for r in reduced]
        reduced.append(row)
        pivots.append(p)
    order = sorted(range(len(pivots)), key=lambda i: pivots[i])
    return (
        tuple(reduced[i] for i in order),
        tuple(pivots[i] for i in order),
    )


@dataclass(frozen=True)
class Gf2Subspace:
    """A subspace of F_2^d held as a row-reduced echelon basis."""

    ambient_dim: int
    basis: tuple[int, ...] = field(default=())
    pivots: tuple[int, ...] = field(default=())

    @property
    def dim(self) -> int:
        return len(self.basis)

    def contains(self, v: Gf2Vector) -> bool:
        if v.dim != self.ambient_dim:
            raise DimensionMismatchError(f"{v.dim} != {self.ambient_dim}")
        x = v.value
        for row, p in zip(self.basis, self.pivots):
            if (x >> (self.ambient_dim - 1 - p)) & 1:
                x ^= row
        return x == 0

    def reduce(self, v: Gf2Vector) -> Gf2Vector:
        """Unique representative of v's coset with zeros at all pivot coordinates."""
        if v.dim != self.ambient_dim:
            raise DimensionMismatchError(f"{v.dim} != {self.ambient_dim}")
        x = v.value
        for row, p in zip(self.basis, self.pivots):
            if (x >> (self.ambient_dim - 1 - p)) & 1:
                x ^= row
        return Gf2Vector(x, self.ambient_dim)

    def elements(self) -> Iterator[Gf2Vector]:
        """All 2^dim elements, enumerated by Gray-code XOR walk."""
        if self.dim > MAX_ENUM_DIM:
            raise CapacityError(f"refusing to enumerate dim {self.dim} > {MAX_ENUM_DIM}")
        x = 0
        yield Gf2Vector(0, self.ambient_dim)
        for i in range(1, 1 << self.dim):
            x ^= self.basis[(i & -i).bit_length() - 1]
            yield Gf2Vector(x, self.ambient_dim)

    def random_element(self, rng: random.Random) -> Gf2Vector:
        x = 0
        coeffs = rng.getrandbits(self.dim) if self.dim else 0
        for i, row in enumerate(self.basis):
            if (coeffs >> i) & 1:
                x ^= row
        return Gf2Vector(x, self.ambient_dim)

    def to_hex(self) -> str:
        """Serialize as ambient dimension plus hex-encoded packed basis rows."""
        rows = ",".join(f"{r:x}" for r in self.basis)
        return f"{self.ambient_dim}:{rows}"

    @classmethod
    def from_hex(cls, text: str) -> "Gf2Subspace":
        head, _, tail = text.partition(":")
        dim = int(head)
        rows = [int(r, 16) for r in tail.split(",") if r]
        return rref([Gf2Vector(r, dim) for r in rows], ambient_dim=dim)

    def __repr__(self) -> str:
        return f"Gf2Subspace(d={self.ambient_dim}, dim={self.dim})"


@dataclass(frozen=True)
class Gf2Coset:
    """An affine coset: subspace + shift (any representative)."""

    subspace: Gf2Subspace
    shift: Gf2Vector

    def __post_init__(self) -> None:
        if self.shift.dim != self.subspace.ambient_dim:
            raise DimensionMismatchError(
                f"shift dim {self.shift.dim} != ambient {self.subspace.ambient_dim}"
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Gf2Coset):
            return NotImplemented
        return self.subspace == other.subspace and self.subspace.contains(
            self.shift ^ other.shift
        )

    def __hash__(self) -> int:
        return hash((self.subspace, canonical_rep(self).value))

    def elements(self) -> Iterator[Gf2Vector]:
        for v in self.subspace.elements():
            yield v ^ self.shift


def rref(vectors: Sequence[Gf2Vector], ambient_dim: int | None = None) -> Gf2Subspace:
    """Canonical RREF span of the given vectors; deterministic in any input order."""
    if not vectors:
        if ambient_dim is None:
            raise ParameterError("ambient_dim required for an empty generating set")
        return Gf2Subspace(ambient_dim)
    dim = vectors[0].dim
    if ambient_dim is not None and ambient_dim != dim:
        raise DimensionMismatchError(f"ambient_dim {ambient_dim} != vector dim {dim}")
    for v in vectors:
        if v.dim != dim:
            raise DimensionMismatchError(f"mixed dimensions {dim} and {v.dim}")
    rows, pivots = _rref_rows((v.value for v in vectors), dim)
    return Gf2Subspace(dim, rows, pivots)


def dual(space: Gf2Subspace) -> Gf2Subspace:
    """Orthogonal complement {w : <w, v> = 0 for all v in the space}."""
    d = space.ambient_dim
    pivot_set = set(space.pivots)
    free = [c for c in range(d) if c not in pivot_set]
    gens = []
    for f in free:
        w = 1 << (d - 1 - f)
        for row, p in zip(space.basis, space.pivots):
            if (row >> (d - 1 - f)) & 1:
                w |= 1 << (d - 1 - p)
        gens.append(Gf2Vector(w, d))
    return rref(gens, ambient_dim=d)


def coset_contains(coset: Gf2Coset, v: Gf2Vector) -> bool:
    """True iff v xor shift lies in the coset's subspace."""
    return coset.subspace.contains(v ^ coset.shift)


def canonical_rep(coset: Gf2Coset) -> Gf2Vector:
    """The unique coset element with zeros at the subspace's RREF pivot coordinates."""
    return coset.subspace.reduce(coset.shift)


def random_vector(dim: int, rng: random.Random) -> Gf2Vector:
    return Gf2Vector(rng.getrandbits(dim), dim)


def random_subspace(dim: int, ambient_dim: int, rng: random.Random) -> Gf2Subspace:
    """Uniformly random subspace of the given dimension (uniform over spans).

    Samples random dim x ambient_dim matrices until full rank; RREF
    canonicalization then makes the draw uniform over subspaces rather
    than bases.
    """
    if dim > ambient_dim:
        raise ParameterError(f"dim {dim} > ambient {ambient_dim}")
    while True:
        cand = [random_vector(ambient_dim, rng) for _ in range(dim)]
        space = rref(cand, ambient_dim=ambient_dim)
        if space.dim == dim:
            return space


def random_superspace(
    space: Gf2Subspace, dim: int, rng: random.Random
) -> Gf2Subspace:
    """Uniformly random superspace of the given dimension."""
    if dim < space.dim or dim > space.ambient_dim:
        raise ParameterError(f"superspace dim {dim} outside {space.dim}..{space.ambient_dim}")
    vectors = [Gf2Vector(r, space.ambient_dim) for r in space.basis]
    current = space
    while current.dim < dim:
        v = random_vector(space.ambient_dim, rng)
        grown = rref(vectors + [v], ambient_dim=space.ambient_dim)
        if grown.dim > current.dim:
            vectors.append(v)
            current = grown
    return current


def random_subspace_of(space: Gf2Subspace, dim: int, rng: random.Random) -> Gf2Subspace:
    """Uniformly random subspace of ``space`` with the given dimension."""
    if dim > space.dim:
        raise ParameterError(f"subspace dim {dim} > {space.dim}")
    vectors: list[Gf2Vector] = []
    current = rref(vectors, ambient_dim=space.ambient_dim)
    while current.dim < dim:
        v = space.random_element(rng)
        grown = rref(vectors + [v], ambient_dim=space.ambient_dim)
        if grown.dim > current.dim:
            vectors.append(v)
            current = grown
    return current


@dataclass(frozen=True)
class CosetInstance:
    """A sampled coset-game instance: the hidden coset plus its public relaxations."""

    a_space: Gf2Subspace
    a1: Gf2Vector
    a2: Gf2Vector
    b1_space: Gf2Subspace
    b2_space: Gf2Subspace
    t: Gf2Vector
    t_prime: Gf2Vector


def sample_coset_instance(d: int, rng: random.Random) -> CosetInstance:
    """Sample (A, a1, a2, B1, B2, t, t') with dim A = d/2, B1 >= A of dim 3d/4,
    B2 <= A of dim d/4, t = z1 + a1 with z1 uniform in B1, t' = z2 + a2 with
    z2 uniform in the dual of B2.
    """
    if d % 4 != 0 or d < 4:
        raise ParameterError(f"d={d} must be a positive multiple of 4")
    if d > MAX_DIM:
        raise CapacityError(f"d={d} > {MAX_DIM}")
    a_space = random_subspace(d // 2, d, rng)
    a1 = random_vector(d, rng)
    a2 = random_vector(d, rng)
    b1_space = random_superspace(a_space, 3 * d // 4, rng)
    b2_space = random_subspace_of(a_space, d // 4, rng)
    z1 = b1_space.random_element(rng)
    z2 = dual(b2_space).random_element(rng)
    return CosetInstance(
        a_space=a_space,
        a1=a1,
        a2=a2,
        b1_space=b1_space,
        b2_space=b2_space,
        t=z1 ^ a1,
        t_prime=z2 ^ a2,
    )


def solve_linear_system(
    rows: Sequence[int], width: int, rhs: Sequence[int]
) -> tuple[int, list[int]] | None:
    """Solve M s = rhs over F_2 for packed matrix rows of the given width.

    Returns (particular solution, kernel basis) as packed ints, or None when
    the system is inconsistent.  Unknown s has ``width`` bits with the same
    coordinate convention as Gf2Vector.
    """
    if len(rows) != len(rhs):
        raise DimensionMismatchError(f"{len(rows)} rows vs {len(rhs)} rhs bits")
    # augmented rows: matrix bits shifted left, rhs in bit 0
    aug = [(r << 1) | (b & 1) for r, b in zip(rows, rhs)]
    pivots: list[int] = []
    reduced: list[int] = []
    for row in aug:
        for r, p in zip(reduced, pivots):
            if (row >> (width - p)) & 1:
                row ^= r
        if row >> 1 == 0:
            if row & 1:
                return None
            continue
        p = width - (row >> 1).bit_length()
        reduced = [r ^ row if (r >> (width - p)) & 1 else r for r in reduced]
        reduced.append(row)
        pivots.append(p)
    pivot_set = set(pivots)
    particular = 0
    for r, p in zip(reduced, pivots):
        if r & 1:
            particular |= 1 << (width - 1 - p)
    kernel: list[int] = []
    for f in range(width):
        if f in pivot_set:
            continue
        vec = 1 << (width - 1 - f)
        for r, p in zip(reduced, pivots):
            if (r >> (width - f)) & 1:
                vec |= 1 << (width - 1 - p)
        kernel.append(vec)
    return particular, kernel
