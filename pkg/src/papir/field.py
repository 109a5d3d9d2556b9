"""Prime-field arithmetic and linear solving over GF(q).

Scalars exposed to callers are :class:`FieldElement` values bound to a
:class:`PrimeField`.  Message vectors and matrices are kept as plain tuples
of canonical ``int`` residues; the owning field is carried alongside them
(e.g. by ``Dataset``), which keeps the inner loops of the coding schemes
cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

MessageVector = tuple[int, ...]

# Deterministic Miller-Rabin witnesses, exact for every n < 3.3e24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


class FieldMismatchError(ValueError):
    """Operands belong to different fields."""


class SingularMatrixError(ArithmeticError):
    """The linear system has no unique solution."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n."""
    n = max(n, 2)
    while not is_prime(n):
        n += 1
    return n


@dataclass(frozen=True)
class PrimeField:
    q: int

    def __post_init__(self):
        if not isinstance(self.q, int) or self.q < 2:
            raise ValueError(f"field modulus must be an integer >= 2, got {self.q!r}")
        if self.q >= 1 << 64:
            raise ValueError("field modulus must fit in 64 bits")
        if not is_prime(self.q):
            raise ValueError(f"field modulus {self.q} is not prime")

    def __call__(self, value: int) -> FieldElement:
        return FieldElement(value % self.q, self)

    # Raw residue arithmetic, used on hot paths.

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def mul(self, a: int, b: int) -> int:
        return a * b % self.q

    def inv(self, a: int) -> int:
        a %= self.q
        if a == 0:
            raise ZeroDivisionError("zero has no inverse in GF(q)")
        return pow(a, self.q - 2, self.q)

    def vec_add(self, x: Sequence[int], y: Sequence[int]) -> MessageVector:
        q = self.q
        return tuple((a + b) % q for a, b in zip(x, y))

    def vec_sub(self, x: Sequence[int], y: Sequence[int]) -> MessageVector:
        q = self.q
        return tuple((a - b) % q for a, b in zip(x, y))

    def vec_scale(self, c: int, x: Sequence[int]) -> MessageVector:
        q = self.q
        return tuple(c * a % q for a in x)

    def zero_vector(self, n: int) -> MessageVector:
        return (0,) * n


@dataclass(frozen=True)
class FieldElement:
    value: int
    field: PrimeField

    def __post_init__(self):
        if not 0 <= self.value < self.field.q:
            raise ValueError(f"{self.value} is not a canonical residue mod {self.field.q}")

    def __int__(self):
        return self.value

    def __add__(self, other):
        return fadd(self, other)

    def __sub__(self, other):
        return fadd(self, -other)

    def __mul__(self, other):
        return fmul(self, other)

    def __neg__(self):
        return FieldElement(-self.value % self.field.q, self.field)

    def inverse(self) -> FieldElement:
        return finv(self)


def _resolve(f: PrimeField | None, *elems: FieldElement) -> PrimeField:
    field = f if f is not None else elems[0].field
    for e in elems:
        if e.field != field:
            raise FieldMismatchError(f"GF({e.field.q}) element used in GF({field.q})")
    return field


def fadd(a: FieldElement, b: FieldElement, f: PrimeField | None = None) -> FieldElement:
    field = _resolve(f, a, b)
    return FieldElement(field.add(a.value, b.value), field)


def fmul(a: FieldElement, b: FieldElement, f: PrimeField | None = None) -> FieldElement:
    field = _resolve(f, a, b)
    return FieldElement(field.mul(a.value, b.value), field)


def finv(a: FieldElement, f: PrimeField | None = None) -> FieldElement:
    field = _resolve(f, a)
    return FieldElement(field.inv(a.value), field)


def solve_square_system(
    A: Sequence[Sequence[int]],
    b: Sequence[Sequence[int]],
    field: PrimeField,
) -> list[MessageVector]:
    """Solve ``A x = b`` over GF(q) where each ``b[i]`` is a length-n vector.

    Gauss-Jordan elimination; the pivot is the first row (top-down) with a
    nonzero entry in the current column.  Raises :class:`SingularMatrixError`
    if ``A`` is not invertible.
    """
    m = len(A)
    if any(len(row) != m for row in A):
        raise ValueError("coefficient matrix must be square")
    if len(b) != m:
        raise ValueError(f"expected {m} right-hand sides, got {len(b)}")
    q = field.q
    n = len(b[0]) if m else 0
    if any(len(v) != n for v in b):
        raise ValueError("right-hand side vectors must share a common length")

    # Augmented rows: m coefficients followed by n right-hand-side coordinates.
    rows = [[a % q for a in A[i]] + [v % q for v in b[i]] for i in range(m)]
    for col in range(m):
        pivot = next((r for r in range(col, m) if rows[r][col]), None)
        if pivot is None:
            raise SingularMatrixError(f"matrix is singular (no pivot in column {col})")
        rows[col], rows[pivot] = rows[pivot], rows[col]
        prow = rows[col]
        inv = pow(prow[col], q - 2, q)
        if inv != 1:
            prow[:] = [x * inv % q for x in prow]
        for r in range(m):
            if r == col:
                continue
            factor = rows[r][col]
            if factor:
                row = rows[r]
                row[:] = [(x - factor * y) % q for x, y in zip(row, prow)]
    return [tuple(rows[i][m:]) for i in range(m)]


def mat_vec_apply(
    A: Sequence[Sequence[int]],
    x: Sequence[Sequence[int]],
    field: PrimeField,
) -> list[MessageVector]:
    """Compute ``A x`` where ``x`` is a list of coordinate vectors."""
    q = field.q
    n = len(x[0]) if x else 0
    out = []
    for row in A:
        acc = [0] * n
        for coef, vec in zip(row, x):
            if coef:
                for t in range(n):
                    acc[t] += coef * vec[t]
        out.append(tuple(v % q for v in acc))
    return out


def vandermonde(points: Sequence[int], rows: int, field: PrimeField) -> list[list[int]]:
    """``rows`` x len(points) matrix whose row j holds points**j."""
    q = field.q
    out = [[1] * len(points)]
    for _ in range(1, rows):
        out.append([a * w % q for a, w in zip(out[-1], points)])
    return out[:rows]
