"""Coboundary criterion and cohomological-equation solver.

The transpose of the matrix of a skew-translation acts on integer
frequency vectors; a trigonometric polynomial whose support frequencies
all have nonzero last component splits along the orbits of that action.
Each orbit carries one obstruction: a phased sum of the coefficients
along the orbit.  The polynomial is a smooth coboundary ``u o T - u``
exactly when every orbit obstruction vanishes, and in that case the
Fourier coefficients of ``u`` are produced by a one-dimensional
recursion along each orbit.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    AssertionMismatch,
    DimensionMismatch,
    NotACoboundary,
    OrbitNotEscaping,
    PeriodicOrbit,
)
from .skewtrans import IntMatrix, SkewTranslation
from .trigpoly import Frequency, TrigPoly

DEFAULT_TOL = 1e-9
NEGLIGIBLE = 1e-12


def _e(theta: float) -> complex:
    return cmath.exp(2j * math.pi * theta)


def _transpose(mat: IntMatrix) -> IntMatrix:
    n = len(mat)
    return tuple(tuple(mat[j][i] for j in range(n)) for i in range(n))


def _freq_step(freq: Frequency, mat_t: IntMatrix) -> Frequency:
    n = len(mat_t)
    return tuple(
        sum(freq[i] * mat_t[i][j] for i in range(n)) for j in range(n)
    )


def default_walk_bound(T: SkewTranslation, degree: int) -> int:
    """Walk budget for orbit collection: 4 (m+1) (1 + max |a_ij|)^k."""
    biggest = max(abs(v) for row in T.matrix for v in row)
    return 4 * (degree + 1) * (1 + biggest) ** T.nilpotency_degree


@dataclass(frozen=True)
class OrbitSegment:
    """The support of a polynomial restricted to one transpose-orbit.

    ``coeffs`` maps integer offsets n to the coefficient at frequency
    ``base (A^T)^n``; by construction offset 0 is the support element with
    the most negative reachable offset, so stored offsets are >= 0 unless
    the segment has been rebased.
    """

    base: Frequency
    coeffs: dict[int, complex]
    transpose: IntMatrix
    transpose_inv: IntMatrix

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(sorted(self.coeffs))

    @property
    def min_offset(self) -> int:
        return min(self.coeffs)

    @property
    def max_offset(self) -> int:
        return max(self.coeffs)

    def frequency(self, offset: int) -> Frequency:
        """The orbit element ``base (A^T)^offset``."""
        freq = self.base
        step = self.transpose if offset >= 0 else self.transpose_inv
        for _ in range(abs(offset)):
            freq = _freq_step(freq, step)
        return freq

    def rebased(self, shift: int) -> "OrbitSegment":
        """Same orbit data with the base moved to offset ``shift``."""
        return OrbitSegment(
            base=self.frequency(shift),
            coeffs={n - shift: c for n, c in self.coeffs.items()},
            transpose=self.transpose,
            transpose_inv=self.transpose_inv,
        )


def _in_box(freq: Frequency, box: tuple[tuple[int, int], ...]) -> bool:
    return all(lo <= v <= hi for v, (lo, hi) in zip(freq, box))


def _collect_orbit(
    seed: Frequency,
    support: frozenset[Frequency],
    box: tuple[tuple[int, int], ...],
    mat_t: IntMatrix,
    mat_t_inv: IntMatrix,
    k_max: int,
) -> dict[int, Frequency]:
    """Walk the orbit of ``seed`` both ways and return the support hits
    keyed by signed offset from the seed.

    Raises OrbitNotEscaping unless, in each direction, the walk ends
    outside the support bounding box and never re-enters it after a
    support hit followed by an exit.
    """
    hits: dict[int, Frequency] = {0: seed}
    for direction, step in ((1, mat_t), (-1, mat_t_inv)):
        cur = seed
        exited = False
        for pos in range(1, k_max + 1):
            cur = _freq_step(cur, step)
            if cur == seed:
                raise PeriodicOrbit(
                    f"frequency {seed} is periodic under the transpose action"
                )
            if cur in support:
                hits[direction * pos] = cur
                exited = False
                continue
            if _in_box(cur, box):
                if exited:
                    raise OrbitNotEscaping(
                        f"orbit of {seed} re-entered the support box after "
                        f"leaving it; increase the walk bound (k_max={k_max})"
                    )
            else:
                exited = True
        if not exited:
            raise OrbitNotEscaping(
                f"orbit of {seed} is still inside the support box after "
                f"{k_max} steps; cannot certify exhaustion"
            )
    return hits


def orbit_decompose(
    f: TrigPoly, T: SkewTranslation, k_max: int | None = None
) -> list[OrbitSegment]:
    """Partition the support of ``f`` into transpose-orbit segments.

    Preconditions: every support frequency of ``f`` has nonzero last
    component (zero mean in the last coordinate), and every superdiagonal
    entry of the matrix is nonzero so orbits escape to infinity.
    """
    if f.dim != T.dim:
        raise DimensionMismatch(
            f"polynomial on T^{f.dim} against map on T^{T.dim}"
        )
    if not f.zero_mean_in_last:
        raise ValueError(
            "the polynomial must have zero mean in the last coordinate "
            "(every support frequency needs a nonzero last component)"
        )
    for i in range(T.dim - 1):
        if T.matrix[i][i + 1] == 0:
            raise ValueError(
                f"superdiagonal entry ({i},{i + 1}) is zero; the orbit "
                "criterion requires nonzero superdiagonal entries"
            )
    coeffs = f.coeffs
    if not coeffs:
        return []
    if k_max is None:
        k_max = default_walk_bound(T, f.degree)
    mat_t = _transpose(T.matrix)
    mat_t_inv = _transpose(T.power_matrix(-1))
    support = frozenset(coeffs)
    box = tuple(
        (min(l[i] for l in coeffs), max(l[i] for l in coeffs))
        for i in range(f.dim)
    )
    remaining = dict(coeffs)
    segments = []
    for seed in sorted(coeffs):
        if seed not in remaining:
            continue
        hits = _collect_orbit(seed, support, box, mat_t, mat_t_inv, k_max)
        start = min(hits)
        segment = OrbitSegment(
            base=hits[start],
            coeffs={
                pos - start: remaining.pop(freq)
                for pos, freq in sorted(hits.items())
            },
            transpose=mat_t,
            transpose_inv=mat_t_inv,
        )
        segments.append(segment)
    return segments


def obstruction_sum(
    segment: OrbitSegment, translation: Sequence[float]
) -> complex:
    """The phased coefficient sum deciding the coboundary property.

    Equals ``sum_{k>=1} c_k e(-sum_{j<k} l_j . b) + c_0
    + sum_{k>=1} c_{-k} e(sum_{j=1..k} l_{-j} . b)`` over the stored
    offsets, where ``l_j`` is the orbit element at offset j and the phase
    sums run over every intermediate offset, stored or not.
    """
    b = tuple(float(v) for v in translation)
    total = complex(segment.coeffs.get(0, 0.0))
    top = segment.max_offset
    if top > 0:
        phase = 0.0
        cur = segment.base
        for pos in range(1, top + 1):
            phase += sum(li * bi for li, bi in zip(cur, b))
            cur = _freq_step(cur, segment.transpose)
            c = segment.coeffs.get(pos)
            if c is not None:
                total += c * _e(-phase)
    bottom = segment.min_offset
    if bottom < 0:
        phase = 0.0
        cur = segment.base
        for pos in range(1, -bottom + 1):
            cur = _freq_step(cur, segment.transpose_inv)
            phase += sum(li * bi for li, bi in zip(cur, b))
            c = segment.coeffs.get(-pos)
            if c is not None:
                total += c * _e(phase)
    return total


@dataclass(frozen=True)
class OrbitObstruction:
    base: Frequency
    offsets: tuple[int, ...]
    obstruction: complex


@dataclass(frozen=True)
class CoboundaryReport:
    """Per-orbit obstructions with the tolerance used for the verdict."""

    orbits: tuple[OrbitObstruction, ...]
    tolerance: float

    @property
    def max_obstruction(self) -> float:
        if not self.orbits:
            return 0.0
        return max(abs(o.obstruction) for o in self.orbits)

    @property
    def verdict(self) -> bool:
        return self.max_obstruction < self.tolerance

    def to_json_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "max_obstruction": self.max_obstruction,
            "orbits": [
                {
                    "base": list(o.base),
                    "offsets": list(o.offsets),
                    "obstruction_re": o.obstruction.real,
                    "obstruction_im": o.obstruction.imag,
                    "obstruction_abs": abs(o.obstruction),
                }
                for o in self.orbits
            ],
        }


def is_smooth_coboundary(
    f: TrigPoly,
    T: SkewTranslation,
    tol: float = DEFAULT_TOL,
    k_max: int | None = None,
) -> CoboundaryReport:
    """Decide whether ``f = u o T - u`` for a trigonometric polynomial u:
    true exactly when every orbit obstruction has modulus below ``tol``."""
    segments = orbit_decompose(f, T, k_max=k_max)
    orbits = tuple(
        OrbitObstruction(
            base=seg.base,
            offsets=seg.offsets,
            obstruction=obstruction_sum(seg, T.translation),
        )
        for seg in segments
    )
    return CoboundaryReport(orbits=orbits, tolerance=tol)


def solve_cohomological_equation(
    f: TrigPoly,
    T: SkewTranslation,
    tol: float = DEFAULT_TOL,
    k_max: int | None = None,
) -> TrigPoly:
    """Solve ``f = u o T - u`` for u with finite support.

    The coefficient of u at the orbit base is the phased forward sum of
    the coefficients of f beyond it; the rest of the orbit follows from
    the recursion ``u_next = u_cur e(l_cur . b) - c_next``.  Zero
    obstruction makes the recursion terminate at the top of the support,
    so u vanishes beyond the stored extents.
    """
    segments = orbit_decompose(f, T, k_max=k_max)
    b = T.translation
    u_terms: dict[Frequency, complex] = {}
    for seg in segments:
        obstruction = obstruction_sum(seg, b)
        if abs(obstruction) >= tol:
            raise NotACoboundary(
                f"orbit of {seg.base} has obstruction {abs(obstruction):.3e} "
                f">= tolerance {tol:.1e}"
            )
        top = seg.max_offset
        # u at the base: phased sum of everything strictly above it
        phase = 0.0
        cur = seg.base
        u0 = 0.0 + 0.0j
        for pos in range(1, top + 1):
            phase += sum(li * bi for li, bi in zip(cur, b))
            cur = _freq_step(cur, seg.transpose)
            c = seg.coeffs.get(pos)
            if c is not None:
                u0 += c * _e(-phase)
        u_val = u0
        cur = seg.base
        for pos in range(0, top):
            if abs(u_val) > 0:
                u_terms[cur] = u_terms.get(cur, 0.0) + u_val
            step_phase = sum(li * bi for li, bi in zip(cur, b))
            nxt = _freq_step(cur, seg.transpose)
            u_val = u_val * _e(step_phase) - seg.coeffs.get(pos + 1, 0.0)
            cur = nxt
        # u at the top offset is the residual obstruction, zero in exact
        # arithmetic; it is dropped to keep the support finite.
    return TrigPoly(f.dim, u_terms)


def make_coboundary(
    f: TrigPoly,
    T: SkewTranslation,
    tol: float = DEFAULT_TOL,
    k_max: int | None = None,
    negligible: float = NEGLIGIBLE,
) -> TrigPoly:
    """Smallest-change projection onto coboundaries: shift each orbit's
    base coefficient by minus its obstruction.

    The support must be closed under frequency negation; conjugate orbits
    then receive conjugate shifts, so real polynomials stay real.  Orbits
    whose obstruction is already below ``negligible`` are left untouched,
    which makes the projection exactly idempotent.
    """
    adjusted = f.coeffs
    for l in adjusted:
        if tuple(-v for v in l) not in adjusted:
            raise ValueError(
                f"support is not closed under negation: missing {tuple(-v for v in l)}"
            )
    segments = orbit_decompose(f, T, k_max=k_max)
    for seg in segments:
        obstruction = obstruction_sum(seg, T.translation)
        if abs(obstruction) <= negligible:
            continue
        adjusted[seg.base] = adjusted.get(seg.base, 0.0) - obstruction
    return TrigPoly(f.dim, adjusted)


@dataclass(frozen=True)
class QuotientMixingVerdict:
    """Outcome of the two-dimensional mixing criterion: the suspension
    over the 2-torus factor mixes when some orbit obstruction of the
    fiber-frequency part of the roof is at least the tolerance."""

    mixing: bool
    witness_base: Frequency | None
    witness_obstruction: complex | None
    report: CoboundaryReport

    def to_json_dict(self) -> dict:
        return {
            "mixing": self.mixing,
            "witness_base": list(self.witness_base) if self.witness_base else None,
            "witness_obstruction_abs": (
                abs(self.witness_obstruction)
                if self.witness_obstruction is not None
                else None
            ),
            "report": self.report.to_json_dict(),
        }


def check_mixing_2d(
    quotient_roof: TrigPoly,
    T2: SkewTranslation,
    tol: float = DEFAULT_TOL,
    k_max: int | None = None,
) -> QuotientMixingVerdict:
    """Two-dimensional criterion: the part of the roof with nonzero
    second frequency component fails to be a coboundary (some orbit
    obstruction >= tol) if and only if the suspension mixes."""
    if T2.dim != 2 or quotient_roof.dim != 2:
        raise DimensionMismatch("the quotient criterion lives on the 2-torus")
    fiber_part = TrigPoly(
        2, {l: c for l, c in quotient_roof.coeffs.items() if l[1] != 0}
    )
    report = is_smooth_coboundary(fiber_part, T2, tol=tol, k_max=k_max)
    witness = None
    for orbit in report.orbits:
        if abs(orbit.obstruction) >= tol and (
            witness is None or abs(orbit.obstruction) > abs(witness.obstruction)
        ):
            witness = orbit
    return QuotientMixingVerdict(
        mixing=witness is not None,
        witness_base=witness.base if witness else None,
        witness_obstruction=witness.obstruction if witness else None,
        report=report,
    )


@dataclass(frozen=True)
class MixingRoofReport:
    """Joint verdict for the explicit mixing class: the 2-torus quotient
    criterion must hold and every higher fiber part must be a smooth
    coboundary for the matching factor."""

    satisfied: bool
    quotient: QuotientMixingVerdict
    fiber_reports: tuple[CoboundaryReport, ...]
    tolerance: float

    def to_json_dict(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "tolerance": self.tolerance,
            "quotient": self.quotient.to_json_dict(),
            "fiber_reports": [r.to_json_dict() for r in self.fiber_reports],
        }


def is_mixing_roof(
    roof: TrigPoly,
    T: SkewTranslation,
    tol: float = DEFAULT_TOL,
    k_max: int | None = None,
) -> MixingRoofReport:
    """Decide membership in the explicit class of mixing roofs, walking
    the factor chain down to the 2-torus."""
    if roof.dim != T.dim:
        raise DimensionMismatch(
            f"roof on T^{roof.dim} against map on T^{T.dim}"
        )
    for i in range(T.dim - 1):
        if T.matrix[i][i + 1] == 0:
            raise ValueError(
                "the explicit criterion requires nonzero superdiagonal entries"
            )
    if T.dim == 2:
        quotient = check_mixing_2d(roof, T, tol=tol, k_max=k_max)
        return MixingRoofReport(
            satisfied=quotient.mixing,
            quotient=quotient,
            fiber_reports=(),
            tolerance=tol,
        )
    base, fibers = roof.decompose(2)
    quotient = check_mixing_2d(base, T.factor(2), tol=tol, k_max=k_max)
    fiber_reports = tuple(
        is_smooth_coboundary(part, T.factor(part.dim), tol=tol, k_max=k_max)
        for part in fibers
    )
    satisfied = quotient.mixing and all(r.verdict for r in fiber_reports)
    return MixingRoofReport(
        satisfied=satisfied,
        quotient=quotient,
        fiber_reports=fiber_reports,
        tolerance=tol,
    )


@dataclass(frozen=True)
class RoofAdjustment:
    """What generate_mixing_roof changed: sup-distance to the target
    (grid estimate), the quotient bump if one was needed, the constant
    added for positivity, and the certified minimum of the result."""

    distance_sup: float
    bump_applied: float
    constant_added: float
    certified_min: float


def generate_mixing_roof(
    target: TrigPoly,
    T: SkewTranslation,
    tol: float = DEFAULT_TOL,
    bump: float = 0.01,
    positivity_margin: float = 0.05,
    k_max: int | None = None,
) -> tuple[TrigPoly, RoofAdjustment]:
    """Produce a positive roof in the explicit mixing class near ``target``.

    Every higher fiber part is projected onto coboundaries; if the
    2-torus quotient part fails the mixing criterion, a cosine bump of
    amplitude ``bump`` is added on the fiber frequency of the quotient;
    a constant is added when the certified minimum is not positive.  The
    achieved sup-distance is reported; no a-priori bound is claimed.
    """
    from .suspension import certified_bounds

    if not target.is_real:
        raise ValueError("the target roof must be real-valued")
    d = T.dim
    candidate = target

    def _assemble(base: TrigPoly, fibers: Sequence[TrigPoly]) -> TrigPoly:
        out = base.lift(d)
        for part in fibers:
            out = out + part.lift(d)
        return out

    report = is_mixing_roof(candidate, T, tol=tol, k_max=k_max)
    bump_applied = 0.0
    if not report.satisfied:
        if d == 2:
            base, fibers = candidate, ()
        else:
            base, fibers = candidate.decompose(2)
            fibers = tuple(
                part if not len(part) else make_coboundary(
                    part, T.factor(part.dim), tol=tol, k_max=k_max
                )
                for part in fibers
            )
        quotient = check_mixing_2d(base, T.factor(2), tol=tol, k_max=k_max)
        if not quotient.mixing:
            base = base + TrigPoly.cosine(2, (0, 1), bump)
            bump_applied = bump
        candidate = _assemble(base, fibers) if d > 2 else base
    lo, _hi = certified_bounds(candidate)
    constant_added = 0.0
    if lo <= 0.0:
        constant_added = positivity_margin - lo
        candidate = candidate + TrigPoly.constant(d, constant_added)
        lo, _hi = certified_bounds(candidate)
    final = is_mixing_roof(candidate, T, tol=tol, k_max=k_max)
    if not final.satisfied:
        raise AssertionMismatch(
            "adjusted roof still fails the explicit mixing criterion"
        )
    diff = candidate - target
    grid = 32 if d <= 3 else 16
    distance = diff.sup_norm_grid(grid)
    return candidate, RoofAdjustment(
        distance_sup=distance,
        bump_applied=bump_applied,
        constant_added=constant_added,
        certified_min=lo,
    )
