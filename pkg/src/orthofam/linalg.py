"""Small exact linear algebra over the rationals and over radical sums."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from .exact import RadicalSum


class DependentVectors(ValueError):
    """Vectors expected to be independent are not; ``relation`` proves it."""

    def __init__(self, relation: list[Fraction]):
        self.relation = relation
        super().__init__(f"linearly dependent, relation coefficients {relation}")


def rank_radical(rows: Sequence[Sequence]) -> int:
    """Rank of a matrix with ``RadicalSum`` (or Radical/rational) entries.

    Fraction-free elimination: rows are only cross-multiplied, never divided,
    so entries stay in the ring generated by the input radicals.
    """
    m = [[RadicalSum.of(x) for x in row] for row in rows]
    if not m:
        return 0
    ncols = len(m[0])
    rank = 0
    for col in range(ncols):
        pivot = next((i for i in range(rank, len(m)) if not m[i][col].is_zero()), None)
        if pivot is None:
            continue
        m[rank], m[pivot] = m[pivot], m[rank]
        p = m[rank]
        for i in range(rank + 1, len(m)):
            f = m[i][col]
            if f.is_zero():
                continue
            piv = p[col]
            m[i] = [piv * m[i][c] - f * p[c] for c in range(ncols)]
        rank += 1
        if rank == len(m):
            break
    return rank


def rref(rows: Sequence[Sequence[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    m = [[Fraction(x) for x in row] for row in rows]
    pivots: list[int] = []
    if not m:
        return m, pivots
    ncols = len(m[0])
    r = 0
    for col in range(ncols):
        pivot = next((i for i in range(r, len(m)) if m[i][col] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        inv = 1 / m[r][col]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][col] != 0:
                f = m[i][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(col)
        r += 1
        if r == len(m):
            break
    return m, pivots


def rank(rows: Sequence[Sequence[Fraction]]) -> int:
    return len(rref(rows)[1])


def nullspace(rows: Sequence[Sequence[Fraction]], ncols: int | None = None) -> list[list[Fraction]]:
    """Basis of ``{u : A u = 0}`` with one free variable set to 1 per vector."""
    if ncols is None:
        ncols = len(rows[0])
    if not rows:
        return [[Fraction(int(i == j)) for i in range(ncols)] for j in range(ncols)]
    m, pivots = rref(rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        u = [Fraction(0)] * ncols
        u[f] = Fraction(1)
        for r, pc in enumerate(pivots):
            u[pc] = -m[r][f]
        basis.append(u)
    return basis


def dot(u: Sequence, v: Sequence) -> Fraction:
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


def independence_relation(vectors: Sequence[Sequence[Fraction]]) -> list[Fraction] | None:
    """``None`` if independent, else nonzero ``c`` with ``sum(c_i v_i) == 0``."""
    if not vectors:
        return None
    n = len(vectors[0])
    columns = [[vectors[i][k] for i in range(len(vectors))] for k in range(n)]
    kernel = nullspace(columns, len(vectors))
    return kernel[0] if kernel else None


def solve(a: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> list[Fraction]:
    """Unique solution of the square nonsingular system ``a x = b``."""
    n = len(a)
    aug = [list(map(Fraction, row)) + [Fraction(rhs)] for row, rhs in zip(a, b)]
    m, pivots = rref(aug)
    if pivots[:n] != list(range(n)) or len(pivots) > n:
        raise ValueError("singular system")
    return [m[i][n] for i in range(n)]


def inverse(a: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    n = len(a)
    aug = [list(map(Fraction, row)) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    m, pivots = rref(aug)
    if pivots[:n] != list(range(n)):
        raise ValueError("singular matrix")
    return [row[n:] for row in m[:n]]


def gram(vectors: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    return [[dot(u, v) for v in vectors] for u in vectors]
