"""Pauli strings in symplectic (x|z) bit-mask form.

Qubit ``q`` is bit ``q`` of both masks and the ``q``-th letter of the text form,
so qubit 0 is the leftmost tensor factor.  Letter codes follow ``0=I, 1=X, 2=Y, 3=Z``.
The operator represented is ``i**phase`` times the tensor product of the letters,
where ``Y`` is the usual Hermitian matrix (not ``XZ``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

LETTERS = "IXYZ"
# letter code -> (x bit, z bit)
_CODE_TO_XZ = ((0, 0), (1, 0), (1, 1), (0, 1))
# (x bit, z bit) -> letter code
_XZ_TO_CODE = {xz: code for code, xz in enumerate(_CODE_TO_XZ)}

# sigma_a sigma_b = i**_PROD_PHASE[a][b] sigma_{a^b}, codes 1..3 for X, Y, Z
_PROD_PHASE = (
    (0, 0, 0, 0),
    (0, 0, 1, 3),
    (0, 3, 0, 1),
    (0, 1, 3, 0),
)


@dataclass(frozen=True)
class PauliString:
    """An ``n``-qubit Pauli operator ``i**phase * sigma_beta``."""

    n: int
    x: int = 0
    z: int = 0
    phase: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("a Pauli string needs at least one qubit")
        limit = 1 << self.n
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise ValueError(f"masks do not fit in {self.n} qubits")
        object.__setattr__(self, "phase", self.phase % 4)

    @classmethod
    def identity(cls, n: int) -> PauliString:
        return cls(n)

    @classmethod
    def from_letters(cls, codes, phase: int = 0) -> PauliString:
        """Build from a sequence of letter codes (0..3), qubit 0 first."""
        x = z = 0
        for q, c in enumerate(codes):
            bx, bz = _CODE_TO_XZ[int(c)]
            x |= bx << q
            z |= bz << q
        return cls(len(codes), x, z, phase)

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        """Parse ``"XIZY"`` with an optional leading ``+``, ``-``, ``i``, ``-i``."""
        phase = 0
        for prefix, ph in (("-i", 3), ("+i", 1), ("i", 1), ("-", 2), ("+", 0)):
            if label.startswith(prefix):
                phase, label = ph, label[len(prefix):]
                break
        try:
            codes = [LETTERS.index(ch) for ch in label.upper()]
        except ValueError:
            raise ValueError(f"not a Pauli label: {label!r}") from None
        if not codes:
            raise ValueError("empty Pauli label")
        return cls.from_letters(codes, phase)

    def letter(self, q: int) -> int:
        return _XZ_TO_CODE[((self.x >> q) & 1, (self.z >> q) & 1)]

    def letters(self) -> tuple[int, ...]:
        return tuple(self.letter(q) for q in range(self.n))

    @property
    def label(self) -> str:
        return "".join(LETTERS[c] for c in self.letters())

    def __str__(self) -> str:
        return ("", "i", "-", "-i")[self.phase] + self.label

    @property
    def weight(self) -> int:
        return (self.x | self.z).bit_count()

    @property
    def support(self) -> int:
        """Bit mask of qubits carrying a non-identity letter."""
        return self.x | self.z

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    @property
    def is_z_type(self) -> bool:
        return self.x == 0

    def unsigned(self) -> PauliString:
        return PauliString(self.n, self.x, self.z)

    def with_letter(self, q: int, code: int) -> PauliString:
        bx, bz = _CODE_TO_XZ[code]
        bit = 1 << q
        x = (self.x & ~bit) | (bx << q)
        z = (self.z & ~bit) | (bz << q)
        return PauliString(self.n, x, z, self.phase)

    def __mul__(self, other: PauliString) -> PauliString:
        return product(self, other)


def _check_dims(p: PauliString, q: PauliString) -> None:
    if p.n != q.n:
        raise DimensionError(f"qubit counts differ: {p.n} vs {q.n}")


def symplectic_product(p: PauliString, q: PauliString) -> int:
    """Symplectic form of two strings, 0 if they commute and 1 otherwise."""
    _check_dims(p, q)
    return ((p.x & q.z) ^ (p.z & q.x)).bit_count() & 1


def commutes(p: PauliString, q: PauliString) -> bool:
    return symplectic_product(p, q) == 0


def product(p: PauliString, q: PauliString) -> PauliString:
    """Operator product ``p @ q`` with the phase tracked mod 4."""
    _check_dims(p, q)
    phase = p.phase + q.phase
    overlap = p.support & q.support
    while overlap:
        low = overlap & -overlap
        k = low.bit_length() - 1
        phase += _PROD_PHASE[p.letter(k)][q.letter(k)]
        overlap ^= low
    return PauliString(p.n, p.x ^ q.x, p.z ^ q.z, phase)


@dataclass(frozen=True)
class AnticommutantWitness:
    """Pairing of ``source`` with its image under the anticommutant bijection."""

    source: PauliString
    image: PauliString
    pivot_qubit: int


def anticommutant_witness(target: PauliString, beta: PauliString) -> AnticommutantWitness:
    """Pair ``beta`` with a string of opposite commutation with ``target``.

    At the first qubit where ``target`` is nontrivial with letter ``a`` the
    letters are cycled through ``(I, a, a mod 3 + 1, (a + 1) mod 3 + 1)`` by two
    places, which flips commutation at that qubit only.  The map is an involution.
    """
    _check_dims(target, beta)
    if target.is_identity:
        raise ValueError("the identity string commutes with everything")
    support = target.support
    q = (support & -support).bit_length() - 1
    a = target.letter(q)
    omega = (0, a, a % 3 + 1, (a + 1) % 3 + 1)
    pos = omega.index(beta.letter(q))
    image = beta.with_letter(q, omega[(pos + 2) % 4])
    return AnticommutantWitness(beta, image, q)


def anticommutant_bijection(target: PauliString, beta: PauliString) -> PauliString:
    return anticommutant_witness(target, beta).image


def random_pauli(n: int, rng: np.random.Generator) -> PauliString:
    """Uniform draw over all ``4**n`` unsigned strings."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return PauliString.from_letters(rng.integers(0, 4, size=n))


# -- batched helpers on uint64 mask arrays (n <= 64) --------------------------

def masks_of(strings) -> tuple[np.ndarray, np.ndarray]:
    """Stack the x and z masks of several strings into uint64 arrays."""
    xs = np.array([s.x for s in strings], dtype=np.uint64)
    zs = np.array([s.z for s in strings], dtype=np.uint64)
    return xs, zs


def anticommute_matrix(xa, za, xb, zb) -> np.ndarray:
    """Boolean matrix ``[i, j]``: string ``a_i`` anticommutes with ``b_j``."""
    xa = np.asarray(xa, dtype=np.uint64)[:, None]
    za = np.asarray(za, dtype=np.uint64)[:, None]
    xb = np.asarray(xb, dtype=np.uint64)[None, :]
    zb = np.asarray(zb, dtype=np.uint64)[None, :]
    return (np.bitwise_count((xa & zb) ^ (za & xb)) & 1).astype(bool)


def letters_array(xs, zs, n: int) -> np.ndarray:
    """Letter codes of many strings as an ``(S, n)`` int array."""
    xs = np.asarray(xs, dtype=np.uint64)
    zs = np.asarray(zs, dtype=np.uint64)
    shifts = np.arange(n, dtype=np.uint64)
    xb = ((xs[:, None] >> shifts) & np.uint64(1)).astype(np.int64)
    zb = ((zs[:, None] >> shifts) & np.uint64(1)).astype(np.int64)
    # (x, z) -> code: (0,0)->0, (1,0)->1, (1,1)->2, (0,1)->3
    return np.where(zb == 1, 3 - xb, xb)
