"""Suspension flows over skew-translations.

The flow moves points ``(x, r)`` with ``0 <= r < roof(x)`` upward at unit
speed, jumping ``(x, roof(x)) -> (T x, 0)``.  Explicitly, after time t the
point is ``(T^n x, r + t - S_n(roof)(x))`` where n is the unique integer
with ``S_n(roof)(x) <= r + t < S_{n+1}(roof)(x)``; extending n to negative
values through the signed Birkhoff sums makes backward flow well defined.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IndexOutOfRange, NonPositiveRoof, RoofNotFiberConstant
from .skewtrans import SkewTranslation, wrap_torus
from .trigpoly import TrigPoly, iter_grid_chunks

_HEIGHT_SLACK = 1e-12


def _default_grid(dim: int) -> int:
    if dim <= 4:
        return 64
    return 16 if dim == 5 else 8


def lipschitz_constant(poly: TrigPoly) -> float:
    """Bound for |f(x) - f(y)| / ||x - y||_inf: 2 pi sum |c_l| |l|_1."""
    return 2.0 * math.pi * sum(
        abs(c) * sum(abs(v) for v in l) for l, c in poly.coeffs.items()
    )


def certified_bounds(
    poly: TrigPoly, points_per_axis: int | None = None
) -> tuple[float, float]:
    """Grid extrema widened by the Lipschitz slack, so the true range of
    the polynomial is contained in the returned interval."""
    g = points_per_axis or _default_grid(poly.dim)
    lo = math.inf
    hi = -math.inf
    for chunk in iter_grid_chunks(poly.dim, g):
        values = np.real(poly.eval_many(chunk))
        lo = min(lo, float(values.min()))
        hi = max(hi, float(values.max()))
    slack = lipschitz_constant(poly) * (0.5 / g)
    return lo - slack, hi + slack


@dataclass(frozen=True)
class RoofFunction:
    """A positive trigonometric polynomial with certified range bounds."""

    poly: TrigPoly
    certified_min: float
    certified_max: float

    @classmethod
    def certify(
        cls, poly: TrigPoly, points_per_axis: int | None = None
    ) -> "RoofFunction":
        if not poly.is_real:
            raise NonPositiveRoof("a roof function must be real-valued")
        lo, hi = certified_bounds(poly, points_per_axis)
        if lo <= 0.0:
            raise NonPositiveRoof(
                f"certified minimum {lo:.6g} is not strictly positive"
            )
        return cls(poly=poly, certified_min=lo, certified_max=hi)

    @property
    def dim(self) -> int:
        return self.poly.dim

    @property
    def mean(self) -> float:
        return float(np.real(self.poly.mean))

    def eval(self, x) -> float:
        return float(self.poly.eval(x))

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        return np.real(self.poly.eval_many(points))


@dataclass(frozen=True)
class SuspensionPoint:
    """A base point with its height under the roof."""

    base: tuple[float, ...]
    height: float


class SuspensionFlow:
    """The suspension of a skew-translation under a certified roof."""

    def __init__(self, T: SkewTranslation, roof: RoofFunction):
        if roof.dim != T.dim:
            raise RoofNotFiberConstant(
                f"roof on T^{roof.dim} over a map on T^{T.dim}"
            )
        self.T = T
        self.roof = roof

    @property
    def dim(self) -> int:
        return self.T.dim

    @property
    def mean_roof(self) -> float:
        """The invariant-measure normalization: the mean of the roof."""
        return self.roof.mean

    def _check_point(self, x: np.ndarray, r: float) -> None:
        value = self.roof.eval(x)
        if not -_HEIGHT_SLACK <= r < value + _HEIGHT_SLACK:
            raise ValueError(
                f"height {r} outside [0, {value}) at the given base point"
            )

    def n_steps(self, x, r: float, t: float) -> int:
        """The number of base-map iterations after elapsed time t from
        height r: the unique n with S_n(roof)(x) <= r + t < S_{n+1}."""
        x = wrap_torus(x)
        n, _, _ = self._advance(x, r, t)
        return n

    def _advance(self, x: np.ndarray, r: float, t: float):
        target = r + t
        n = 0
        acc = 0.0
        if target >= 0.0:
            while True:
                value = self.roof.eval(x)
                if acc + value > target:
                    break
                acc += value
                x = self.T.apply(x)
                n += 1
        else:
            while acc > target:
                x = self.T.apply_inverse(x)
                acc -= self.roof.eval(x)
                n -= 1
        return n, x, acc

    def flow(self, p: SuspensionPoint, t: float) -> SuspensionPoint:
        """Flow a single point for time t (any sign)."""
        x = wrap_torus(p.base)
        self._check_point(x, p.height)
        _, x_end, acc = self._advance(x, p.height, t)
        r_end = p.height + t - acc
        if -_HEIGHT_SLACK <= r_end < 0.0:
            r_end = 0.0
        value = self.roof.eval(x_end)
        if not 0.0 <= r_end < value + _HEIGHT_SLACK:
            raise ArithmeticError(
                f"flow left the roof band: height {r_end} vs roof {value}"
            )
        return SuspensionPoint(base=tuple(x_end), height=min(r_end, value))

    def flow_arrays(
        self, points: np.ndarray, heights: np.ndarray, t: float
    ) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized flow of an ensemble by a common time t; returns new
        (points, heights) arrays without mutating the inputs."""
        x = wrap_torus(np.array(points, dtype=float))
        r = np.array(heights, dtype=float) + t
        if t >= 0.0:
            values = self.roof.eval_many(x)
            active = np.nonzero(r >= values)[0]
            while active.size:
                x[active] = self.T.apply_many(x[active])
                r[active] -= values[active]
                values[active] = self.roof.eval_many(x[active])
                active = active[r[active] >= values[active]]
        else:
            active = np.nonzero(r < 0.0)[0]
            while active.size:
                x[active] = self.T.apply_inverse_many(x[active])
                r[active] += self.roof.eval_many(x[active])
                active = active[r[active] < 0.0]
        return x, r

    # -- sampling ----------------------------------------------------------

    def sample_invariant(
        self, count: int, seed: int, stream: int = 0
    ) -> tuple[np.ndarray, np.ndarray]:
        """Draw i.i.d. samples from the normalized invariant measure:
        uniform base points with heights accepted below the roof.

        Counter-based randomness (Philox) keyed by ``seed`` and advanced
        by ``stream`` jumps, so concurrent workers with distinct stream
        indices are reproducible.
        """
        if count < 1:
            raise ValueError("count must be >= 1")
        bitgen = np.random.Philox(key=seed)
        if stream:
            bitgen = bitgen.jumped(stream)
        rng = np.random.Generator(bitgen)
        xs = np.empty((count, self.dim))
        rs = np.empty(count)
        cmax = self.roof.certified_max
        filled = 0
        while filled < count:
            need = count - filled
            x = rng.random((need, self.dim))
            r = rng.random(need) * cmax
            keep = r < self.roof.eval_many(x)
            kept = int(np.count_nonzero(keep))
            xs[filled : filled + kept] = x[keep]
            rs[filled : filled + kept] = r[keep]
            filled += kept
        return xs, rs

    def sample_points(
        self, count: int, seed: int, stream: int = 0
    ) -> list[SuspensionPoint]:
        xs, rs = self.sample_invariant(count, seed, stream)
        return [
            SuspensionPoint(base=tuple(x), height=float(r))
            for x, r in zip(xs, rs)
        ]

    # -- factor consistency --------------------------------------------------

    def factor_consistency(
        self,
        i: int,
        trials: int = 1000,
        seed: int = 0,
        t_scale: float = 50.0,
    ) -> float:
        """Max deviation between projecting after flowing and flowing the
        quotient suspension, over random points and times.

        Requires the roof to be constant in the suppressed coordinates
        (its fiber parts beyond the first i coordinates must vanish).
        """
        if not 2 <= i <= self.dim - 1:
            raise IndexOutOfRange(
                f"projection index must be in [2, {self.dim - 1}], got {i}"
            )
        base_part, fibers = self.roof.poly.decompose(i)
        if any(len(part) for part in fibers):
            raise RoofNotFiberConstant(
                f"roof depends on coordinates beyond the first {i}"
            )
        quotient = SuspensionFlow(
            self.T.factor(i), RoofFunction.certify(base_part)
        )
        xs, rs = self.sample_invariant(trials, seed)
        rng = np.random.Generator(np.random.Philox(key=seed).jumped(1))
        times = rng.uniform(-t_scale, t_scale, trials)
        worst = 0.0
        for x, r, t in zip(xs, rs, times):
            full = self.flow(SuspensionPoint(tuple(x), float(r)), float(t))
            quot = quotient.flow(
                SuspensionPoint(tuple(x[:i]), float(r)), float(t)
            )
            delta_base = max(
                _circle_dist(a, b)
                for a, b in zip(full.base[:i], quot.base)
            )
            worst = max(worst, delta_base, abs(full.height - quot.height))
        return worst


def _circle_dist(a: float, b: float) -> float:
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)
