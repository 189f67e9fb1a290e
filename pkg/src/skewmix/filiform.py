"""Quasi-abelian filiform groups in exponential coordinates.

The algebra of rank d is spanned by f_0, ..., f_d with the only nonzero
brackets ``[f_0, f_i] = scale_i f_{i+1}`` for i < d (canonical scales are
all 1; a lattice with divisor chain E_1 | ... | E_d induces
``scale_i = E_{i+1} / E_i``).  Elements are coordinate tuples
``(x, y_1, ..., y_d)``; with rational coordinates every operation here is
exact, floats fall through transparently.

The group law is the Baker-Campbell-Hausdorff product computed through
the faithful (d+1) x (d+1) strictly upper-triangular matrix
representation, where the exponential and logarithm series terminate by
nilpotency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import (
    AssertionMismatch,
    DimensionTooSmall,
    NonIntegerEntry,
    NonPositiveRate,
    NonTransverseGenerator,
)
from .skewtrans import SkewTranslation, wrap_torus
from .trigpoly import TrigPoly
from .suspension import RoofFunction

Element = tuple


def _neg(v: Element) -> Element:
    return tuple(-c for c in v)


def _add(v: Element, w: Element) -> Element:
    return tuple(a + b for a, b in zip(v, w))


def _scale(v: Element, c) -> Element:
    return tuple(c * a for a in v)


class FiliformAlgebra:
    """Structure constants and the matrix representation for one rank."""

    def __init__(self, d: int, scales: Sequence[Fraction] | None = None):
        if d < 1:
            raise DimensionTooSmall(f"algebra rank must be >= 1, got {d}")
        self.d = d
        if scales is None:
            scales = tuple(Fraction(1) for _ in range(d - 1))
        scales = tuple(Fraction(s) for s in scales)
        if len(scales) != d - 1:
            raise ValueError(
                f"need {d - 1} bracket scales for rank {d}, got {len(scales)}"
            )
        if any(s <= 0 for s in scales):
            raise ValueError("bracket scales must be positive")
        self.scales = scales
        self._check_representation()

    @classmethod
    def canonical(cls, d: int) -> "FiliformAlgebra":
        return cls(d)

    @classmethod
    def from_lattice(cls, lattice: "Lattice") -> "FiliformAlgebra":
        E = lattice.divisors
        return cls(
            lattice.d,
            tuple(Fraction(E[i], E[i - 1]) for i in range(1, lattice.d)),
        )

    # -- algebra -----------------------------------------------------------

    def basis(self, i: int, value=1) -> Element:
        out = [0] * (self.d + 1)
        out[i] = value
        return tuple(out)

    def bracket(self, v: Element, w: Element) -> Element:
        """[v, w] from the structure constants: only x-components against
        y_i-components contribute, landing at y_{i+1}."""
        out = [0] * (self.d + 1)
        for i in range(1, self.d):
            out[i + 1] = self.scales[i - 1] * (v[0] * w[i] - w[0] * v[i])
        return tuple(out)

    # -- matrix representation ---------------------------------------------

    def to_matrix(self, v: Element) -> list[list]:
        """The (d+1) x (d+1) strictly upper-triangular image of v: the
        x-coordinate along the superdiagonal (scaled so the commutator of
        matrices matches the bracket) and y_d, ..., y_1 down the last
        column."""
        n = self.d + 1
        M = [[0] * n for _ in range(n)]
        for j in range(self.d - 1):
            M[j][j + 1] = v[0] * self.scales[self.d - 2 - j]
        for i in range(1, self.d + 1):
            M[self.d - i][self.d] = v[i]
        return M

    def from_matrix(self, M: Sequence[Sequence]) -> Element:
        if self.d < 2:
            raise DimensionTooSmall(
                "the matrix representation is faithful only for rank >= 2"
            )
        x = M[0][1] / self.scales[self.d - 2]
        ys = [M[self.d - i][self.d] for i in range(1, self.d + 1)]
        return (x, *ys)

    def _check_representation(self) -> None:
        # exact commutator check on every basis pair; bilinearity extends
        # the agreement to all elements
        if self.d < 2:
            return
        for i in range(self.d + 1):
            for j in range(self.d + 1):
                lhs = self.to_matrix(self.bracket(self.basis(i), self.basis(j)))
                a = self.to_matrix(self.basis(i))
                b = self.to_matrix(self.basis(j))
                rhs = _mat_sub(_mat_mul(a, b), _mat_mul(b, a))
                if lhs != rhs:
                    raise AssertionMismatch(
                        f"matrix commutator disagrees with the bracket on "
                        f"basis pair ({i}, {j})"
                    )

    def exp_matrix(self, M: list[list]) -> list[list]:
        """Terminating exponential series sum_{j<=d} M^j / j!."""
        n = len(M)
        out = _mat_identity(n)
        power = _mat_identity(n)
        for j in range(1, self.d + 1):
            power = _mat_mul(power, M)
            out = _mat_add(out, _mat_scalar(power, Fraction(1, math.factorial(j))))
        return out

    def log_matrix(self, U: list[list]) -> list[list]:
        """Terminating logarithm sum_{j<=d} (-1)^(j+1) (U - Id)^j / j."""
        n = len(U)
        N = _mat_sub(U, _mat_identity(n))
        out = [[0] * n for _ in range(n)]
        power = _mat_identity(n)
        for j in range(1, self.d + 1):
            power = _mat_mul(power, N)
            out = _mat_add(
                out, _mat_scalar(power, Fraction((-1) ** (j + 1), j))
            )
        return out

    # -- group law -----------------------------------------------------------

    def bch(self, v: Element, w: Element) -> Element:
        """The product log(exp(v) exp(w)) in exponential coordinates;
        exact for rational inputs.  Rank 1 is abelian, so the product is
        plain addition there."""
        if self.d == 1:
            return _add(v, w)
        U = _mat_mul(
            self.exp_matrix(self.to_matrix(v)),
            self.exp_matrix(self.to_matrix(w)),
        )
        return self.from_matrix(self.log_matrix(U))

    def bch_chain(self, *elements: Element) -> Element:
        out = self.basis(0, 0)
        for v in elements:
            out = self.bch(out, v)
        return out

    def adjoint_conjugation(self, v: Element, w: Element) -> Element:
        """(-w) * v * w computed two ways: through the group law, and as
        the terminating series sum_j ad(-w)^j v / j! with
        ad(u) x = [u, x].  Returns the series value after asserting the
        two agree (exactly for rational inputs, to 1e-12 otherwise)."""
        series = v
        term = v
        for j in range(1, self.d):
            term = self.bracket(_neg(w), term)
            series = _add(series, _scale(term, Fraction(1, math.factorial(j))))
        direct = self.bch(self.bch(_neg(w), v), w)
        exact = all(
            isinstance(c, (int, Fraction)) for c in tuple(v) + tuple(w)
        )
        if exact:
            if tuple(series) != tuple(direct):
                raise AssertionMismatch(
                    "adjoint series and group conjugation disagree"
                )
        else:
            gap = max(abs(a - b) for a, b in zip(series, direct))
            if gap > 1e-12:
                raise AssertionMismatch(
                    f"adjoint series and group conjugation differ by {gap:.3e}"
                )
        return series


def _mat_identity(n: int) -> list[list]:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def _mat_mul(a, b) -> list[list]:
    n = len(a)
    return [
        [sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n)]
        for i in range(n)
    ]


def _mat_add(a, b) -> list[list]:
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def _mat_sub(a, b) -> list[list]:
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def _mat_scalar(a, c) -> list[list]:
    return [[c * x for x in row] for row in a]


@dataclass(frozen=True)
class Lattice:
    """A divisor chain E_1 = 1 | E_2 | ... | E_d with i! | E_i, fixing
    the lattice Z^(d+1) in the adapted basis."""

    divisors: tuple[int, ...]

    def __post_init__(self):
        E = tuple(int(v) for v in self.divisors)
        object.__setattr__(self, "divisors", E)
        if not E or E[0] != 1:
            raise ValueError("the divisor chain must start with E_1 = 1")
        for i, v in enumerate(E, start=1):
            if v <= 0:
                raise ValueError("divisors must be positive")
            if v % math.factorial(i) != 0:
                raise ValueError(
                    f"divisor E_{i} = {v} is not a multiple of {i}!"
                )
        for prev, nxt in zip(E, E[1:]):
            if nxt % prev != 0:
                raise ValueError(
                    f"chain is not divisible: {prev} does not divide {nxt}"
                )

    @property
    def d(self) -> int:
        return len(self.divisors)


@dataclass(frozen=True)
class NilflowSpec:
    """A lattice together with the flow generator in the adapted basis.

    The generator's leading coordinate must be nonzero for the flow to
    cross the section; unique ergodicity additionally needs the ratio of
    the first two coordinates to be irrational, which is only scanned
    heuristically (see ergodicity_advisory).
    """

    lattice: Lattice
    generator: tuple[float, ...]

    def __post_init__(self):
        gen = tuple(float(v) for v in self.generator)
        object.__setattr__(self, "generator", gen)
        if len(gen) != self.lattice.d + 1:
            raise ValueError(
                f"generator needs {self.lattice.d + 1} coordinates, got {len(gen)}"
            )
        if gen[0] == 0.0:
            raise NonTransverseGenerator(
                "the generator's leading coordinate must be nonzero"
            )

    @property
    def d(self) -> int:
        return self.lattice.d

    @property
    def algebra(self) -> FiliformAlgebra:
        return FiliformAlgebra.from_lattice(self.lattice)

    def ergodicity_advisory(self) -> dict:
        """Continued-fraction scan of w_1 / w_0; advisory only."""
        from .skewtrans import rationality_scan

        ratio = self.generator[1] / self.generator[0]
        return rationality_scan([ratio])[0]

    def to_json_dict(self) -> dict:
        return {
            "d": self.d,
            "E": list(self.lattice.divisors),
            "w": [repr(v) for v in self.generator],
        }

    @classmethod
    def from_json_dict(cls, data) -> "NilflowSpec":
        d = int(data["d"])
        E = tuple(int(v) for v in data["E"])
        if len(E) != d:
            raise ValueError("divisor chain length does not match d")
        w = tuple(float(v) for v in data["w"])
        return cls(lattice=Lattice(E), generator=w)


def reduce_mod_lattice(
    spec: NilflowSpec, g: Element
) -> tuple[tuple[int, ...], Element]:
    """Write ``g = lam * g0`` with integer ``lam`` and ``g0`` in the
    fundamental domain [0,1)^(d+1).

    Coordinates are cleared greedily from the leading one down the chain;
    multiplying by a lattice basis element only disturbs strictly later
    coordinates, so one pass suffices.  ``lam`` is assembled exactly and
    checked to be integral.
    """
    alg = spec.algebra
    work = tuple(g)
    multipliers: list[Element] = []
    for idx in range(alg.d + 1):
        m = math.floor(work[idx])
        if m != 0:
            work = alg.bch(alg.basis(idx, -m), work)
            multipliers.append(alg.basis(idx, m))
    lam_exact = alg.bch_chain(
        *[tuple(Fraction(int(c)) for c in mult) for mult in multipliers]
    )
    lam: list[int] = []
    for c in lam_exact:
        frac = Fraction(c)
        if frac.denominator != 1:
            raise AssertionMismatch(
                "the divisor chain does not close under the group law: "
                f"lattice word has non-integer coordinate {frac}"
            )
        lam.append(int(frac))
    return tuple(lam), work


def poincare_section(spec: NilflowSpec) -> tuple[SkewTranslation, float]:
    """The first-return data of the nilflow on the section of zero
    leading coordinate: a skew-translation of T^d and the constant
    return time (reciprocal of the generator's leading coordinate).

    The return matrix has entries ``(-1)^(j-i) E_j / (E_i (j-i)!)``
    above the diagonal: the alternating signs come from conjugating by
    the inverse of the leading lattice generator (the exponential of the
    negative adjoint), and integrality is checked entry by entry.  The
    translation part collects the trailing coordinates of
    ``(-1, 0, ..., 0) * (1, w_1/w_0, ..., w_d/w_0)`` reduced mod 1.
    """
    d = spec.d
    if d < 2:
        raise DimensionTooSmall("the section construction needs rank >= 2")
    E = spec.lattice.divisors
    rows = []
    for i in range(1, d + 1):
        row = []
        for j in range(1, d + 1):
            if j < i:
                row.append(0)
                continue
            entry = Fraction((-1) ** (j - i) * E[j - 1], E[i - 1] * math.factorial(j - i))
            if entry.denominator != 1:
                raise NonIntegerEntry(
                    f"section matrix entry ({i},{j}) = {entry} is not an "
                    "integer for this divisor chain"
                )
            row.append(int(entry))
        rows.append(row)
    w = spec.generator
    w0 = w[0]
    alg = spec.algebra
    unit_flow = tuple([1.0] + [wi / w0 for wi in w[1:]])
    shifted = alg.bch(alg.basis(0, -1), unit_flow)
    if abs(shifted[0]) > 1e-12:
        raise AssertionMismatch(
            f"translation element has nonzero leading coordinate {shifted[0]}"
        )
    b = wrap_torus(np.array(shifted[1:], dtype=float))
    return SkewTranslation(rows, tuple(b)), 1.0 / w0


# -- batched float path for quadrature-heavy callers -----------------------


def _batched_to_matrix(alg: FiliformAlgebra, coords: np.ndarray) -> np.ndarray:
    n = alg.d + 1
    M = np.zeros((len(coords), n, n))
    for j in range(alg.d - 1):
        M[:, j, j + 1] = coords[:, 0] * float(alg.scales[alg.d - 2 - j])
    for i in range(1, alg.d + 1):
        M[:, alg.d - i, alg.d] = coords[:, i]
    return M


def _batched_from_matrix(alg: FiliformAlgebra, M: np.ndarray) -> np.ndarray:
    out = np.empty((len(M), alg.d + 1))
    out[:, 0] = M[:, 0, 1] / float(alg.scales[alg.d - 2])
    for i in range(1, alg.d + 1):
        out[:, i] = M[:, alg.d - i, alg.d]
    return out


def _batched_exp(alg: FiliformAlgebra, M: np.ndarray) -> np.ndarray:
    n = M.shape[-1]
    out = np.broadcast_to(np.eye(n), M.shape).copy()
    power = out.copy()
    for j in range(1, alg.d + 1):
        power = power @ M
        out += power / math.factorial(j)
    return out


def _batched_log(alg: FiliformAlgebra, U: np.ndarray) -> np.ndarray:
    n = U.shape[-1]
    N = U - np.eye(n)
    out = np.zeros_like(U)
    power = np.broadcast_to(np.eye(n), U.shape).copy()
    for j in range(1, alg.d + 1):
        power = power @ N
        out += ((-1) ** (j + 1) / j) * power
    return out


def _batched_bch(alg: FiliformAlgebra, V: np.ndarray, W: np.ndarray) -> np.ndarray:
    if alg.d == 1:
        return V + W
    U = _batched_exp(alg, _batched_to_matrix(alg, V)) @ _batched_exp(
        alg, _batched_to_matrix(alg, W)
    )
    return _batched_from_matrix(alg, _batched_log(alg, U))


def _batched_reduce(alg: FiliformAlgebra, G: np.ndarray) -> np.ndarray:
    """Fundamental-domain representatives of a batch of group elements
    (float path; integer lattice words are not assembled)."""
    work = np.array(G, dtype=float)
    for idx in range(alg.d + 1):
        m = np.floor(work[:, idx])
        if not np.any(m):
            continue
        shift = np.zeros_like(work)
        shift[:, idx] = -m
        work = _batched_bch(alg, shift, work)
    return work


@dataclass(frozen=True)
class TimeChangeFit:
    """Quadrature and fit diagnostics for a time-change roof."""

    max_residual: float
    grid_points: int
    quadrature_points: int


def time_change_roof(
    spec: NilflowSpec,
    rate: Callable[[np.ndarray], float],
    quad_panels: int = 8,
    fit_degree: int = 2,
    grid_per_axis: int | None = None,
) -> tuple[RoofFunction, TimeChangeFit]:
    """Roof function of the time-changed nilflow.

    For each section point x, integrates the rate function along the
    orbit from the section back to itself (time 1/w_0) by composite
    Gauss-Legendre quadrature of order 8 with ``quad_panels`` panels,
    evaluating the rate at fundamental-domain coordinates; the resulting
    grid of return times is least-squares fitted by a trigonometric
    polynomial of the given degree and the maximum grid residual is
    reported.
    """
    d = spec.d
    w = np.array(spec.generator)
    w0 = spec.generator[0]
    if w0 <= 0:
        raise NonTransverseGenerator(
            "the quadrature path assumes a positive leading coordinate"
        )
    alg = spec.algebra
    g = grid_per_axis or max(8, 4 * (fit_degree + 1))
    axis = np.arange(g} if False else np.arange(g) / g
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    section = np.column_stack([m.ravel() for m in grids])
    n_grid = len(section)

    nodes, weights = np.polynomial.legendre.leggauss(8)
    period = 1.0 / w0
    panel = period / quad_panels
    ts = np.concatenate(
        [
            panel * p + (nodes + 1.0) * (panel / 2.0)
            for p in range(quad_panels)
        ]
    )
    ws = np.tile(weights * (panel / 2.0), quad_panels)

    start = np.zeros((n_grid, d + 1))
    start[:, 1:] = section
    values = np.zeros(n_grid)
    for t, weight in zip(ts, ws):
        flow_step = np.broadcast_to(t * w, (n_grid, d + 1))
        moved = _batched_bch(alg, start, flow_step)
        moved = _batched_reduce(alg, moved)
        for row in range(n_grid):
            sample = float(rate(moved[row]))
            if sample <= 0.0:
                raise NonPositiveRate(
                    f"rate is {sample} at fundamental-domain point "
                    f"{moved[row].tolist()}"
                )
            values[row] += weight * sample

    freqs = _frequency_box(d, fit_degree)
    design = np.exp(2j * np.pi * (section @ np.array(freqs, dtype=float).T))
    coeffs, *_ = np.linalg.lstsq(design, values.astype(complex), rcond=None)
    fitted: dict[tuple[int, ...], complex] = {}
    lookup = {f: c for f, c in zip(freqs, coeffs)}
    for f, c in lookup.items():
        mirror = lookup.get(tuple(-v for v in f), 0.0)
        fitted[f] = 0.5 * (c + np.conj(mirror))
    poly = TrigPoly(d, fitted)
    residual = float(np.max(np.abs(np.real(poly.eval_many(section)) - values)))
    roof = RoofFunction.certify(poly)
    return roof, TimeChangeFit(
        max_residual=residual,
        grid_points=n_grid,
        quadrature_points=len(ts),
    )


def _frequency_box(dim: int, degree: int) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = [()]
    for _ in range(dim):
        out = [f + (v,) for f in out for v in range(-degree, degree + 1)]
    return out
