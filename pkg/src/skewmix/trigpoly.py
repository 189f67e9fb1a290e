"""Real and complex trigonometric polynomials on the d-torus.

A polynomial is a finite map from integer frequency vectors l to complex
coefficients c_l, representing ``f(x) = sum_l c_l e(l . x)`` with
``e(t) = exp(2 pi i t)``.  Frequencies are exact integer tuples;
coefficients are double-precision complex numbers.  Values are immutable;
every operation returns a new polynomial and prunes coefficients below
``PRUNE_TOL`` so floating cancellation cannot inflate supports.
"""
from __future__ import annotations

import cmath
import math
from typing import Iterable, Mapping, Sequence, TYPE_CHECKING

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, SupportExplosion

if TYPE_CHECKING:  # pragma: no cover
    from .skewtrans import SkewTranslation

PRUNE_TOL = 1e-15
TWO_PI = 2.0 * math.pi

Frequency = tuple[int, ...]


def _canonical(freq: Frequency) -> bool:
    """True when the first nonzero component is positive (picks one
    frequency out of each {l, -l} pair)."""
    for v in freq:
        if v:
            return v > 0
    return False


class TrigPoly:
    """Finite trigonometric polynomial ``sum_l c_l e(l . x)`` on T^dim."""

    __slots__ = ("dim", "_coeffs", "_is_real", "_eval_cache")

    def __init__(self, dim: int, terms: Mapping[Frequency, complex] | None = None):
        if dim < 1:
            raise DimensionMismatch(f"dimension must be >= 1, got {dim}")
        coeffs: dict[Frequency, complex] = {}
        for freq, c in (terms or {}).items():
            freq = tuple(int(v) for v in freq)
            if len(freq) != dim:
                raise DimensionMismatch(
                    f"frequency {freq} does not match dimension {dim}"
                )
            c = complex(c)
            if abs(c) > PRUNE_TOL:
                coeffs[freq] = coeffs.get(freq, 0.0) + c
        coeffs = {l: c for l, c in coeffs.items() if abs(c) > PRUNE_TOL}
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "_coeffs", coeffs)
        object.__setattr__(self, "_is_real", None)
        object.__setattr__(self, "_eval_cache", None)

    def __setattr__(self, name, value):  # immutability by construction
        raise AttributeError("TrigPoly is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> "TrigPoly":
        return cls(dim, {})

    @classmethod
    def constant(cls, dim: int, value: complex) -> "TrigPoly":
        return cls(dim, {(0,) * dim: value})

    @classmethod
    def harmonic(cls, dim: int, freq: Sequence[int], coeff: complex = 1.0) -> "TrigPoly":
        """The single term ``coeff * e(freq . x)``."""
        return cls(dim, {tuple(int(v) for v in freq): coeff})

    @classmethod
    def cosine(cls, dim: int, freq: Sequence[int], amplitude: float = 1.0) -> "TrigPoly":
        """``amplitude * cos(2 pi freq . x)`` as a Hermitian pair."""
        freq = tuple(int(v) for v in freq)
        neg = tuple(-v for v in freq)
        half = amplitude / 2.0
        if freq == neg:
            return cls(dim, {freq: amplitude})
        return cls(dim, {freq: half, neg: half})

    # -- basic structure ---------------------------------------------------

    @property
    def coeffs(self) -> dict[Frequency, complex]:
        return dict(self._coeffs)

    @property
    def support(self) -> tuple[Frequency, ...]:
        return tuple(sorted(self._coeffs))

    def coeff(self, freq: Sequence[int]) -> complex:
        return self._coeffs.get(tuple(int(v) for v in freq), 0.0)

    @property
    def degree(self) -> int:
        """Max sup-norm of a support frequency (0 for the zero polynomial)."""
        if not self._coeffs:
            return 0
        return max(max(abs(v) for v in l) for l in self._coeffs)

    def __len__(self) -> int:
        return len(self._coeffs)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TrigPoly)
            and self.dim == other.dim
            and self._coeffs == other._coeffs
        )

    def __repr__(self) -> str:
        return f"TrigPoly(dim={self.dim}, terms={len(self._coeffs)})"

    @property
    def is_real(self) -> bool:
        """Hermitian symmetry c_{-l} = conj(c_l), checked coefficientwise."""
        cached = self._is_real
        if cached is None:
            cached = True
            for l, c in self._coeffs.items():
                mirror = self._coeffs.get(tuple(-v for v in l), 0.0)
                if abs(mirror - c.conjugate()) > 1e-12 * max(1.0, abs(c)):
                    cached = False
                    break
            object.__setattr__(self, "_is_real", cached)
        return cached

    @property
    def mean(self) -> complex:
        """The zero-frequency coefficient, i.e. the integral over the torus."""
        return self._coeffs.get((0,) * self.dim, 0.0)

    @property
    def zero_mean_in_last(self) -> bool:
        """True when every support frequency has a nonzero last component,
        i.e. the average over the last coordinate vanishes identically."""
        return all(l[-1] != 0 for l in self._coeffs)

    # -- arithmetic ----------------------------------------------------------

    def _binary(self, other: "TrigPoly", sign: float) -> "TrigPoly":
        if self.dim != other.dim:
            raise DimensionMismatch(
                f"dimensions {self.dim} and {other.dim} differ"
            )
        merged = dict(self._coeffs)
        for l, c in other._coeffs.items():
            merged[l] = merged.get(l, 0.0) + sign * c
        return TrigPoly(self.dim, merged)

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        return self._binary(other, 1.0)

    def __sub__(self, other: "TrigPoly") -> "TrigPoly":
        return self._binary(other, -1.0)

    def __neg__(self) -> "TrigPoly":
        return TrigPoly(self.dim, {l: -c for l, c in self._coeffs.items()})

    def __mul__(self, scalar: complex) -> "TrigPoly":
        return TrigPoly(
            self.dim, {l: scalar * c for l, c in self._coeffs.items()}
        )

    __rmul__ = __mul__

    # -- evaluation ----------------------------------------------------------

    def _tables(self):
        """Cached (freqs, coeffs) arrays and a Hermitian half-support for
        fast real evaluation."""
        cached = self._eval_cache
        if cached is None:
            support = sorted(self._coeffs)
            freqs = np.array(support, dtype=float).reshape(
                len(support), self.dim
            )
            coeffs = np.array(
                [self._coeffs[l] for l in support], dtype=complex
            )
            half = [l for l in self._coeffs if _canonical(l)]
            half_freqs = np.array(half, dtype=float).reshape(len(half), self.dim)
            half_coeffs = np.array(
                [self._coeffs[l] for l in half], dtype=complex
            )
            cached = (freqs, coeffs, half_freqs, half_coeffs)
            object.__setattr__(self, "_eval_cache", cached)
        return cached

    def eval(self, x: Sequence[float] | np.ndarray) -> float | complex:
        """Value at a single point; real polynomials return a float after
        checking the imaginary residue is below 1e-12 (relative)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionMismatch(
                f"point of shape {x.shape} on a {self.dim}-torus"
            )
        total = 0.0 + 0.0j
        for l, c in self._coeffs.items():
            total += c * cmath.exp(2j * math.pi * float(np.dot(x, l)))
        if self.is_real:
            if abs(total.imag) > 1e-12 * max(1.0, abs(total)):
                raise ArithmeticError(
                    f"imaginary residue {total.imag} on a Hermitian polynomial"
                )
            return total.real
        return total

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        """Values on an (n, dim) array; float array for real polynomials,
        complex otherwise."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise DimensionMismatch(
                f"points of shape {points.shape} on a {self.dim}-torus"
            )
        freqs, coeffs, half_freqs, half_coeffs = self._tables()
        if not len(self._coeffs):
            dtype = float if self.is_real else complex
            return np.zeros(len(points), dtype=dtype)
        if self.is_real:
            out = np.full(len(points), float(np.real(self.mean)))
            if len(half_freqs):
                phases = points @ half_freqs.T
                out += 2.0 * (
                    np.exp(2j * np.pi * phases) @ half_coeffs
                ).real
            return out
        phases = points @ freqs.T
        return np.exp(2j * np.pi * phases) @ coeffs

    def sup_norm_grid(self, points_per_axis: int = 32) -> float:
        """Max of |f| over a regular grid (a lower bound for the sup norm)."""
        best = 0.0
        for chunk in iter_grid_chunks(self.dim, points_per_axis):
            values = self.eval_many(chunk)
            best = max(best, float(np.max(np.abs(values))))
        return best

    # -- transfer and calculus -------------------------------------------

    def compose(self, T: "SkewTranslation") -> "TrigPoly":
        """Coefficients of f o T: frequency l maps to l A^T with phase
        factor e(l . b); support size is preserved."""
        if T.dim != self.dim:
            raise DimensionMismatch(
                f"map on T^{T.dim} composed with polynomial on T^{self.dim}"
            )
        mat = T.matrix
        b = T.translation
        out: dict[Frequency, complex] = {}
        for l, c in self._coeffs.items():
            new_l = tuple(
                sum(mat[j][i] * l[i] for i in range(self.dim))
                for j in range(self.dim)
            )
            phase = cmath.exp(2j * math.pi * sum(li * bi for li, bi in zip(l, b)))
            out[new_l] = out.get(new_l, 0.0) + c * phase
        return TrigPoly(self.dim, out)

    def birkhoff(
        self, T: "SkewTranslation", n: int, support_cap: int = 10**6
    ) -> "TrigPoly":
        """The polynomial S_n(f) = sum_{r<n} f o T^r with exact frequency
        bookkeeping (n >= 0)."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        acc: dict[Frequency, complex] = {}
        term = self
        for _ in range(n):
            for l, c in term._coeffs.items():
                acc[l] = acc.get(l, 0.0) + c
            if len(acc) > support_cap:
                raise SupportExplosion(
                    f"Birkhoff support exceeded cap {support_cap}"
                )
            term = term.compose(T)
        return TrigPoly(self.dim, acc)

    def partial_derivative(self, axis: int) -> "TrigPoly":
        """d/dx_axis (0-based): c_l maps to 2 pi i l_axis c_l."""
        if not 0 <= axis < self.dim:
            raise IndexOutOfRange(
                f"axis must be in [0, {self.dim}), got {axis}"
            )
        return TrigPoly(
            self.dim,
            {
                l: 2j * math.pi * l[axis] * c
                for l, c in self._coeffs.items()
                if l[axis] != 0
            },
        )

    def directional_derivative(self, direction: Sequence[float]) -> "TrigPoly":
        """Derivative along a constant vector field: c_l maps to
        2 pi i (l . direction) c_l."""
        direction = tuple(float(v) for v in direction)
        if len(direction) != self.dim:
            raise DimensionMismatch("direction length does not match dim")
        return TrigPoly(
            self.dim,
            {
                l: 2j * math.pi * sum(a * b for a, b in zip(l, direction)) * c
                for l, c in self._coeffs.items()
            },
        )

    # -- decomposition ------------------------------------------------------

    def decompose(self, base_dim: int) -> tuple["TrigPoly", tuple["TrigPoly", ...]]:
        """Split by trailing-zero pattern of the frequencies.

        Returns ``(base, fibers)`` where ``base`` lives on T^base_dim and
        collects the frequencies whose last ``dim - base_dim`` components
        vanish, and ``fibers[j]`` (on T^(base_dim+1+j), for j = 0 ..
        dim-base_dim-1) collects the frequencies whose component at index
        base_dim+j is nonzero while all later ones vanish.  Each fiber part
        therefore integrates to zero in its own last coordinate, and
        lifting all parts back to T^dim reconstructs the polynomial
        exactly.
        """
        if not 1 <= base_dim <= self.dim - 1:
            raise IndexOutOfRange(
                f"base dimension must be in [1, {self.dim - 1}], got {base_dim}"
            )
        base: dict[Frequency, complex] = {}
        fibers: list[dict[Frequency, complex]] = [
            {} for _ in range(self.dim - base_dim)
        ]
        for l, c in self._coeffs.items():
            last = max(
                (i for i in range(self.dim) if l[i] != 0), default=-1
            )
            if last < base_dim:
                base[l[:base_dim]] = c
            else:
                fibers[last - base_dim][l[: last + 1]] = c
        return (
            TrigPoly(base_dim, base),
            tuple(
                TrigPoly(base_dim + 1 + j, part)
                for j, part in enumerate(fibers)
            ),
        )

    def lift(self, dim: int) -> "TrigPoly":
        """Zero-pad frequencies to view this polynomial on a larger torus."""
        if dim < self.dim:
            raise DimensionMismatch(
                f"cannot lift from dimension {self.dim} to {dim}"
            )
        pad = (0,) * (dim - self.dim)
        return TrigPoly(dim, {l + pad: c for l, c in self._coeffs.items()})

    def truncate(self, dim: int) -> "TrigPoly":
        """Drop trailing coordinates; valid only when every support
        frequency vanishes there."""
        if dim > self.dim:
            raise DimensionMismatch("truncate target exceeds dimension")
        for l in self._coeffs:
            if any(v != 0 for v in l[dim:]):
                raise DimensionMismatch(
                    f"frequency {l} depends on a truncated coordinate"
                )
        return TrigPoly(dim, {l[:dim]: c for l, c in self._coeffs.items()})

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        terms = [
            {"l": list(l), "re": c.real, "im": c.imag}
            for l, c in sorted(self._coeffs.items())
        ]
        return {"dim": self.dim, "terms": terms}

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "TrigPoly":
        dim = int(data["dim"])
        merged: dict[Frequency, complex] = {}
        for term in data.get("terms", []):
            l = tuple(int(v) for v in term["l"])
            c = complex(float(term.get("re", 0.0)), float(term.get("im", 0.0)))
            merged[l] = merged.get(l, 0.0) + c
        return cls(dim, merged)


def iter_grid_chunks(
    dim: int, points_per_axis: int, chunk: int = 1 << 18
) -> Iterable[np.ndarray]:
    """Yield the regular grid (i/g for each axis) on T^dim in row chunks,
    so large grids never materialize at once."""
    g = points_per_axis
    axis = np.arange(g, dtype=float) / g
    total = g**dim
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        idx = np.arange(start, stop)
        cols = []
        for axis_i in range(dim - 1, -1, -1):
            cols.append(axis[idx % g])
            idx = idx // g
        yield np.column_stack(cols[::-1])
