"""Independent reference computations shared by the unit and acceptance tests.

Each oracle recomputes a quantity from the raw definitions, by brute force or
through sympy/numpy, without the shortcuts used by the package.
"""

from fractions import Fraction
import numpy as np
import sympy

from orthofam.comb import CombPath, comb_entry, comb_r
from orthofam.diagonal import MACondition
from orthofam.exact import RadicalSum


def sym(q: Fraction):
    return sympy.Rational(q.numerator, q.denominator)


def brute_min_k(n: int, p: Fraction) -> int:
    """Scan k = r+1, r+2, ... for k**(p/2 - 1) >= n**2 r**(p/2), powered up by 2q."""
    a, q = p.numerator, p.denominator
    r = comb_r(n)
    # k**((a - 2q) / 2q) >= n**2 r**(a / 2q)  <=>  k**(a - 2q) >= n**(4q) r**a
    k = r + 1
    while k ** (a - 2 * q) < n ** (4 * q) * r**a:
        k += 1
    return k


def block_inner(params, x: CombPath, y: CombPath, level: int) -> RadicalSum:
    """(x, y) summed block by block from raw entries."""
    acc = RadicalSum()
    for n in range(level + 1):
        for j in range(2**n):
            node = tuple((j >> (n - 1 - i)) & 1 for i in range(n))
            lo, hi = params.block(node)
            acc = acc + RadicalSum.of(comb_entry(params, x, lo) * comb_entry(params, y, lo)) * (hi - lo)
    return acc


B = sympy.symbols("b1:40", positive=True)


def _symbolic_weight(x: CombPath, node: tuple[int, ...]):
    n = len(node)
    if n == 0:
        return sympy.Integer(1)
    head = tuple(x.bit(i) for i in range(n))
    if node == head:
        return B[n - 1]
    if node == head[:-1] + (1 - head[-1],):
        return -B[n - 1]
    return sympy.Rational(1, 2 ** (4 * n))


def full_support_comb_partial(b_sq, x: CombPath, y: CombPath, level: int):
    """Entry-by-entry sum with symbolic b_n; b_n**2 substituted at the end, so any
    uncancelled b_n * a_n term survives as a symbol."""
    total = sympy.Integer(0)
    for n in range(level + 1):
        for j in range(2**n):
            node = tuple((j >> (n - 1 - i)) & 1 for i in range(n))
            total += _symbolic_weight(x, node) * _symbolic_weight(y, node)
    total = sympy.expand(total)
    return total.subs({B[n - 1] ** 2: sym(b_sq[n]) for n in range(1, level + 1)})


def brute_violations(c) -> list:
    """Every requirement of a sign condition checked on explicit running sums."""
    cols = c.explicit_columns()
    bad = [("zero", i) for col in cols for i, v in enumerate(col) if v == 0]
    for r in c.requirements:
        run, sums = Fraction(0), [Fraction(0)]
        for col in cols:
            run += col[r.i] * col[r.j]
            sums.append(run)
        head = sums[r.k]
        if abs(head) >= r.eps or any(abs(s - head) >= r.eps for s in sums[r.k :]):
            bad.append(("req", r))
    return bad


def grid_minmax(level, radius: float = 0.75, step: float = 1 / 64) -> float:
    """min over sampled ||x|| = radius of max_s |(s, x)|.

    Points come from a step grid on the faces ``x_i = 1`` of the cube, pushed
    radially onto the sphere; the objective is even, so the faces ``x_i = -1``
    add nothing.
    """
    mat = np.array([[float(v) for v in s.rationals()] for s in level])
    d = mat.shape[1]
    if d == 1:
        return float(radius * np.abs(mat).max())
    axis = np.arange(-1.0, 1.0 + step / 2, step)
    best = np.inf
    for face in range(d):
        free = [c for c in range(d) if c != face]
        # loop over the first free coordinate, vectorize the rest
        outer = axis if d > 2 else [None]
        for v0 in outer:
            rest = free[1:] if d > 2 else free
            grids = np.meshgrid(*([axis] * len(rest)), indexing="ij")
            pts = np.empty((grids[0].size, d))
            for c, g in zip(rest, grids):
                pts[:, c] = g.ravel()
            if d > 2:
                pts[:, free[0]] = v0
            pts[:, face] = 1.0
            pts *= radius / np.linalg.norm(pts, axis=1, keepdims=True)
            best = min(best, np.abs(pts @ mat.T).max(axis=1).min())
    return float(best)


def brute_check(c: MACondition) -> bool:
    """Every requirement and side total recomputed over all indices."""
    reg = c.registry
    for r in c.P:
        x = reg[r.x]
        head = sum((c.s[n] * x(n) for n in range(r.k)), Fraction(0))
        if abs(head) >= r.eps:
            return False
        run = Fraction(0)
        for n in range(r.k, c.N):
            run += c.s[n] * x(n)
            if abs(run) >= r.eps:
                return False
    for z in c.H:
        if sum((c.s[n] * reg[z](n) for n in range(c.N)), Fraction(0)) != 0:
            return False
    return True
