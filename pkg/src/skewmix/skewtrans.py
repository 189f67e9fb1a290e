"""Skew-translations of the d-torus.

A skew-translation is the affine map ``T x = x A + b  (mod 1)`` acting on
row vectors ``x`` in ``[0,1)^d``, where ``A`` is a d x d integer matrix,
upper triangular with unit diagonal and ``A != Id``, and ``b`` is a real
translation vector.  This module provides validation, exact matrix powers,
the filtration by images of ``(A - Id)^j``, factors onto leading
coordinates, shear vectors, and numeric Birkhoff sums.

All matrix arithmetic that must be exact is done with Python integers or
``fractions.Fraction``; floating point is reserved for torus coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, TYPE_CHECKING

import numpy as np

from .errors import (
    DimensionTooSmall,
    IdentityMatrixError,
    IndexOutOfRange,
    NoShearVector,
    NotUnipotentUpperTriangular,
)

if TYPE_CHECKING:  # pragma: no cover
    from .trigpoly import TrigPoly

IntMatrix = tuple[tuple[int, ...], ...]


def wrap_torus(x: Sequence[float] | np.ndarray) -> np.ndarray:
    """Reduce coordinates mod 1 into [0, 1)."""
    x = np.asarray(x, dtype=float)
    return x - np.floor(x)


def binomial(n: int, k: int) -> int:
    """Generalized binomial coefficient C(n, k) for integer n (any sign)
    and k >= 0, exact."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k == 0:
        return 1
    if n < 0:
        # C(n, k) = (-1)^k C(k - n - 1, k)
        return (-1) ** k * binomial(k - n - 1, k)
    if k > n:
        return 0
    return math.comb(n, k)


def _as_int_matrix(matrix) -> IntMatrix:
    rows = []
    for row in matrix:
        out = []
        for entry in row:
            value = int(round(float(entry)))
            if abs(float(entry) - value) > 0:
                raise NotUnipotentUpperTriangular(
                    f"matrix entry {entry!r} is not an integer"
                )
            out.append(value)
        rows.append(tuple(out))
    return tuple(rows)


def _mat_mul(a: IntMatrix, b: IntMatrix) -> IntMatrix:
    n = len(a)
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n))
        for i in range(n)
    )


def _mat_add(a: IntMatrix, b: IntMatrix) -> IntMatrix:
    n = len(a)
    return tuple(
        tuple(a[i][j] + b[i][j] for j in range(n)) for i in range(n)
    )


def _mat_scale(a: IntMatrix, c: int) -> IntMatrix:
    return tuple(tuple(c * entry for entry in row) for row in a)


def _identity(n: int) -> IntMatrix:
    return tuple(
        tuple(1 if i == j else 0 for j in range(n)) for i in range(n)
    )


def _nilpotent_powers(matrix: IntMatrix) -> list[IntMatrix]:
    """Powers N^0, N^1, ... of N = matrix - Id up to (and excluding) the
    first zero power."""
    n = len(matrix)
    nil = tuple(
        tuple(matrix[i][j] - (1 if i == j else 0) for j in range(n))
        for i in range(n)
    )
    powers = [_identity(n)]
    current = _identity(n)
    for _ in range(n):
        current = _mat_mul(current, nil)
        if all(entry == 0 for row in current for entry in row):
            break
        powers.append(current)
    return powers


def unipotent_matrix_power(matrix, exponent: int) -> IntMatrix:
    """Exact integer power M^n of a unipotent matrix, any integer n.

    Uses the terminating binomial expansion
    ``M^n = sum_i C(n, i) (M - Id)^i`` with arbitrary-precision integers,
    valid for negative exponents through the generalized binomial
    coefficients.
    """
    mat = _as_int_matrix(matrix)
    powers = _nilpotent_powers(mat)
    n = len(mat)
    result = tuple(tuple(0 for _ in range(n)) for _ in range(n))
    for i, nil_power in enumerate(powers):
        result = _mat_add(result, _mat_scale(nil_power, binomial(exponent, i)))
    return result


def _vec_mat(vec: Sequence[int], matrix: IntMatrix) -> tuple[int, ...]:
    n = len(matrix)
    return tuple(
        sum(vec[i] * matrix[i][j] for i in range(n)) for j in range(n)
    )


def _primitive(row: Sequence[Fraction]) -> tuple[int, ...]:
    """Scale a nonzero rational row vector to a primitive integer vector
    with positive leading entry."""
    denoms = [f.denominator for f in row]
    scale = math.lcm(*denoms) if denoms else 1
    ints = [int(f * scale) for f in row]
    g = math.gcd(*ints)
    if g:
        ints = [v // g for v in ints]
    lead = next((v for v in ints if v != 0), 0)
    if lead < 0:
        ints = [-v for v in ints]
    return tuple(ints)


def _row_echelon(rows: list[list[Fraction]]) -> list[list[Fraction]]:
    """In-place Gaussian elimination over the rationals; returns the
    nonzero rows in echelon form."""
    if not rows:
        return []
    n_cols = len(rows[0])
    pivot_row = 0
    for col in range(n_cols):
        pivot = next(
            (r for r in range(pivot_row, len(rows)) if rows[r][col] != 0),
            None,
        )
        if pivot is None:
            continue
        rows[pivot_row], rows[pivot] = rows[pivot], rows[pivot_row]
        lead = rows[pivot_row][col]
        rows[pivot_row] = [v / lead for v in rows[pivot_row]]
        for r in range(len(rows)):
            if r != pivot_row and rows[r][col] != 0:
                factor = rows[r][col]
                rows[r] = [
                    v - factor * p for v, p in zip(rows[r], rows[pivot_row])
                ]
        pivot_row += 1
        if pivot_row == len(rows):
            break
    return [row for row in rows if any(v != 0 for v in row)]


def _row_space_basis(matrix: IntMatrix) -> tuple[tuple[int, ...], ...]:
    rows = [[Fraction(v) for v in row] for row in matrix]
    echelon = _row_echelon(rows)
    return tuple(_primitive(row) for row in echelon)


def _nullspace(rows: list[list[Fraction]], n_unknowns: int) -> list[tuple[int, ...]]:
    """Primitive integer basis vectors of the rational nullspace of the
    homogeneous system ``rows . v = 0``."""
    echelon = _row_echelon([list(r) for r in rows])
    pivots: dict[int, list[Fraction]] = {}
    for row in echelon:
        col = next(i for i, v in enumerate(row) if v != 0)
        pivots[col] = row
    free_cols = [c for c in range(n_unknowns) if c not in pivots]
    basis = []
    for free in free_cols:
        vec = [Fraction(0)] * n_unknowns
        vec[free] = Fraction(1)
        for col in sorted(pivots, reverse=True):
            row = pivots[col]
            vec[col] = -sum(
                row[j] * vec[j] for j in range(col + 1, n_unknowns)
            )
        basis.append(_primitive(vec))
    return basis


@dataclass(frozen=True)
class SkewTranslation:
    """The map ``T x = x A + b`` on the d-torus, with derived data.

    Attributes:
        matrix: exact integer rows of A (upper triangular, unit diagonal).
        translation: b reduced mod 1, kept at full double precision.
        dim: d.
        nilpotency_degree: minimal k with (A - Id)^(k+1) = 0, k >= 1.
        filtration: primitive integer bases of the row spaces of
            (A - Id)^j for j = 0..k+1 (the last one empty).
        base_dim: d minus the dimension of the deepest nonzero level,
            i.e. the number of leading coordinates complementary to it.
    """

    matrix: IntMatrix
    translation: tuple[float, ...]
    dim: int = field(init=False)
    nilpotency_degree: int = field(init=False)
    filtration: tuple[tuple[tuple[int, ...], ...], ...] = field(init=False)
    base_dim: int = field(init=False)

    def __init__(self, matrix, translation):
        mat = _as_int_matrix(matrix)
        d = len(mat)
        if d < 2:
            raise DimensionTooSmall(f"torus dimension must be >= 2, got {d}")
        if any(len(row) != d for row in mat):
            raise NotUnipotentUpperTriangular("matrix must be square")
        for i in range(d):
            if mat[i][i] != 1:
                raise NotUnipotentUpperTriangular(
                    f"diagonal entry ({i},{i}) must be 1, got {mat[i][i]}"
                )
            for j in range(i):
                if mat[i][j] != 0:
                    raise NotUnipotentUpperTriangular(
                        f"entry ({i},{j}) below the diagonal must be 0"
                    )
        if mat == _identity(d):
            raise IdentityMatrixError("matrix must differ from the identity")
        b = tuple(float(v) - math.floor(float(v)) for v in translation)
        if len(b) != d:
            raise NotUnipotentUpperTriangular(
                f"translation length {len(b)} does not match dimension {d}"
            )

        nil_powers = _nilpotent_powers(mat)
        degree = len(nil_powers) - 1  # last nonzero power of (A - Id)
        filtration = [_row_space_basis(p) for p in nil_powers]
        filtration.append(())  # (A - Id)^(k+1) = 0

        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "translation", b)
        object.__setattr__(self, "dim", d)
        object.__setattr__(self, "nilpotency_degree", degree)
        object.__setattr__(self, "filtration", tuple(filtration))
        object.__setattr__(self, "base_dim", d - len(filtration[degree]))
        object.__setattr__(self, "_mat_f", np.array(mat, dtype=float))
        object.__setattr__(self, "_b_f", np.array(b, dtype=float))
        inv = unipotent_matrix_power(mat, -1)
        object.__setattr__(self, "_inv", inv)
        object.__setattr__(self, "_inv_f", np.array(inv, dtype=float))

    # -- basic dynamics ------------------------------------------------

    def apply(self, x: Sequence[float] | np.ndarray) -> np.ndarray:
        """One forward step, frac(x A + b)."""
        x = np.asarray(x, dtype=float)
        return wrap_torus(x @ self._mat_f + self._b_f)

    def apply_inverse(self, x: Sequence[float] | np.ndarray) -> np.ndarray:
        """One backward step, frac((x - b) A^{-1})."""
        x = np.asarray(x, dtype=float)
        return wrap_torus((x - self._b_f) @ self._inv_f)

    def apply_many(self, points: np.ndarray) -> np.ndarray:
        """Forward step applied to an (n, d) array of points."""
        return wrap_torus(points @ self._mat_f + self._b_f)

    def apply_inverse_many(self, points: np.ndarray) -> np.ndarray:
        return wrap_torus((points - self._b_f) @ self._inv_f)

    def iterate(self, x: Sequence[float] | np.ndarray, n: int) -> np.ndarray:
        """T^n x for any integer n, stepping once per iterate with mod-1
        reduction after every affine step (avoids magnitude growth)."""
        x = wrap_torus(x)
        step = self.apply if n >= 0 else self.apply_inverse
        for _ in range(abs(n)):
            x = step(x)
        return x

    def iterate_many(self, points: np.ndarray, n: int) -> np.ndarray:
        points = wrap_torus(points)
        step = self.apply_many if n >= 0 else self.apply_inverse_many
        for _ in range(abs(n)):
            points = step(points)
        return points

    # -- exact powers ----------------------------------------------------

    def power_matrix(self, n: int) -> IntMatrix:
        """A^n exactly, via the terminating binomial expansion.  Accepts
        any integer n (negative powers use the integer inverse)."""
        return unipotent_matrix_power(self.matrix, n)

    def power_translation(self, n: int) -> np.ndarray:
        """b(n) = sum_{i=0}^{n-1} b A^i, the accumulated translation with
        T^n x = frac(x A^n + b(n)).  Not reduced mod 1."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        # sum_{i<n} A^i = sum_j C(n, j+1) (A - Id)^j, exact integers
        nil_powers = _nilpotent_powers(self.matrix)
        d = self.dim
        total = tuple(tuple(0 for _ in range(d)) for _ in range(d))
        for j, p in enumerate(nil_powers):
            total = _mat_add(total, _mat_scale(p, binomial(n, j + 1)))
        return self._b_f @ np.array(total, dtype=float)

    # -- structure -------------------------------------------------------

    def factor(self, i: int) -> "SkewTranslation":
        """The factor on the first i coordinates (2 <= i <= d): top-left
        i x i block of A with the first i translation components."""
        if not 2 <= i <= self.dim:
            raise IndexOutOfRange(
                f"factor index must be in [2, {self.dim}], got {i}"
            )
        block = tuple(row[:i] for row in self.matrix[:i])
        return SkewTranslation(block, self.translation[:i])

    def shear_vector(self) -> tuple[tuple[int, ...], int]:
        """An integer vector v with v A = v + a e_d, last component zero,
        coprime coordinates, and a > 0 minimal.

        Solves the homogeneous system over the rationals, clears
        denominators, and combines kernel directions by extended gcd to
        minimize a.  Raises NoShearVector when a = 0 is forced.
        """
        d = self.dim
        a_mat = self.matrix
        # unknowns v_0..v_{d-2}; homogeneous equations for target columns
        # 1..d-2 (0-indexed), i.e. every column except the first and last
        eqs = [
            [Fraction(a_mat[i][j]) if i < j else Fraction(0) for i in range(d - 1)]
            for j in range(1, d - 1)
        ]
        kernel = _nullspace(eqs, d - 1)
        last_col = [a_mat[i][d - 1] for i in range(d - 1)]
        weighted = [
            (w, sum(wi * ci for wi, ci in zip(w, last_col))) for w in kernel
        ]
        nontrivial = [(w, a) for w, a in weighted if a != 0]
        if not nontrivial:
            raise NoShearVector(
                "the last basis direction is not reachable: v (A - Id) = a e_d "
                "has no integer solution with a != 0"
            )
        vec, a = nontrivial[0]
        vec = list(vec)
        for w, aw in nontrivial[1:]:
            g = math.gcd(a, aw)
            # Bezout: s*a + t*aw = g
            s, t = _bezout(a, aw)
            vec = [s * vi + t * wi for vi, wi in zip(vec, w)]
            a = g
        if a < 0:
            vec = [-v for v in vec]
            a = -a
        content = math.gcd(*[abs(v) for v in vec])
        if content > 1:
            vec = [v // content for v in vec]
            a //= content
        result = tuple(vec) + (0,)
        image = _vec_mat(result, a_mat)
        expected = tuple(
            result[j] + (a if j == d - 1 else 0) for j in range(d)
        )
        if image != expected:
            raise NoShearVector("internal solve failed verification")
        return result, a

    # -- Birkhoff sums ---------------------------------------------------

    def birkhoff_sum(self, f: "TrigPoly", x, n: int) -> float:
        """S_n(f)(x): forward sum over n iterates for n > 0, zero for
        n = 0, and -sum over the iterates T^{-1} x .. T^{n} x for n < 0."""
        x = wrap_torus(x)
        if n == 0:
            return 0.0
        total = 0.0
        if n > 0:
            for _ in range(n):
                total += f.eval(x)
                x = self.apply(x)
            return total
        for _ in range(-n):
            x = self.apply_inverse(x)
            total += f.eval(x)
        return -total

    def birkhoff_sum_many(self, f: "TrigPoly", points: np.ndarray, n: int) -> np.ndarray:
        """Vectorized S_n(f) over an (m, d) array of points."""
        points = wrap_torus(points)
        totals = np.zeros(len(points))
        if n == 0:
            return totals
        if n > 0:
            for _ in range(n):
                totals += f.eval_many(points)
                points = self.apply_many(points)
            return totals
        for _ in range(-n):
            points = self.apply_inverse_many(points)
            totals += f.eval_many(points)
        return -totals


def _bezout(a: int, b: int) -> tuple[int, int]:
    """Coefficients (s, t) with s*a + t*b = gcd(a, b)."""
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_s, old_t = -old_s, -old_t
    return old_s, old_t


def rationality_scan(
    values: Sequence[float], max_denominator: int = 10**6
) -> list[dict]:
    """Advisory heuristic: for each value report the best rational
    approximation with denominator <= max_denominator and whether the
    value is indistinguishable from it at double precision.

    A flagged component suggests the translation may be rational there,
    which would break unique ergodicity; the scan proves nothing either
    way and is reported as advisory only.
    """
    out = []
    for v in values:
        approx = Fraction(v).limit_denominator(max_denominator)
        err = abs(v - approx.numerator / approx.denominator)
        out.append(
            {
                "value": float(v),
                "numerator": approx.numerator,
                "denominator": approx.denominator,
                "error": err,
                "looks_rational": err < 1e-14,
            }
        )
    return out
