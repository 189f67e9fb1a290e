"""Monte-Carlo and analytic diagnostics for mixing of suspension flows.

Everything here is an empirical probe of a qualitative statement: decay
of correlations, growth in measure of Birkhoff sums, decoupling of a sum
from its own shift, stretch of Birkhoff sums along the last coordinate,
and the shear of fiber segments transported by the flow.  All estimators
are deterministic functions of (seed, parameters), using counter-based
Philox streams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AssertionMismatch, EmptyCube, RoofNotFiberConstant
from .skewtrans import SkewTranslation, wrap_torus
from .suspension import RoofFunction, SuspensionFlow, SuspensionPoint
from .trigpoly import TrigPoly


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    bitgen = np.random.Philox(key=seed)
    if stream:
        bitgen = bitgen.jumped(stream)
    return np.random.Generator(bitgen)


@dataclass(frozen=True)
class Cube:
    """A box in the suspension space: per-coordinate base intervals inside
    [0, 1) and a height interval that must stay below the roof minimum."""

    intervals: tuple[tuple[float, float], ...]
    height: tuple[float, float]

    def __post_init__(self):
        for lo, hi in self.intervals:
            if not (0.0 <= lo < hi <= 1.0):
                raise EmptyCube(
                    f"base interval [{lo}, {hi}) is empty or leaves [0, 1)"
                )
        q1, q2 = self.height
        if not (0.0 <= q1 < q2):
            raise EmptyCube(f"height interval [{q1}, {q2}) is empty")

    @property
    def dim(self) -> int:
        return len(self.intervals)

    @property
    def base_volume(self) -> float:
        vol = 1.0
        for lo, hi in self.intervals:
            vol *= hi - lo
        return vol

    def measure(self, flow: SuspensionFlow) -> float:
        """Invariant measure: base volume times height, normalized by the
        mean roof (computed analytically, never estimated)."""
        q1, q2 = self.height
        return self.base_volume * (q2 - q1) / flow.mean_roof

    def contains(self, points: np.ndarray, heights: np.ndarray) -> np.ndarray:
        mask = (heights >= self.height[0]) & (heights < self.height[1])
        for axis, (lo, hi) in enumerate(self.intervals):
            mask &= (points[:, axis] >= lo) & (points[:, axis] < hi)
        return mask

    def sample(self, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Uniform samples inside the cube.  When the cube sits below the
        roof minimum this is exactly the invariant measure conditioned on
        the cube, so no rejection is needed."""
        lows = np.array([lo for lo, _ in self.intervals])
        highs = np.array([hi for _, hi in self.intervals])
        x = lows + rng.random((count, self.dim)) * (highs - lows)
        r = self.height[0] + rng.random(count) * (self.height[1] - self.height[0])
        return x, r

    @classmethod
    def from_json_dict(cls, data) -> "Cube":
        return cls(
            intervals=tuple(
                (float(lo), float(hi)) for lo, hi in data["intervals"]
            ),
            height=(float(data["height"][0]), float(data["height"][1])),
        )


def _require_under_roof(cube: Cube, flow: SuspensionFlow) -> None:
    if cube.dim != flow.dim:
        raise EmptyCube(
            f"cube dimension {cube.dim} does not match flow dimension {flow.dim}"
        )
    if cube.height[1] >= flow.roof.certified_min:
        raise EmptyCube(
            f"cube height {cube.height[1]} reaches the certified roof "
            f"minimum {flow.roof.certified_min}"
        )


@dataclass(frozen=True)
class CorrelationPoint:
    t: float
    estimate: float
    std_error: float
    samples: int


@dataclass(frozen=True)
class CorrelationCurve:
    """Estimates of mu(flow_t(R) intersect Q) on a time grid, with the
    analytic measures of both cubes for reference."""

    points: tuple[CorrelationPoint, ...]
    mu_r: float
    mu_q: float

    def rows(self) -> list[tuple]:
        return [
            (p.t, p.estimate, p.std_error, p.samples) for p in self.points
        ]


def correlation_curve(
    flow: SuspensionFlow,
    cube_q: Cube,
    cube_r: Cube,
    t_grid: Sequence[float],
    samples: int,
    seed: int,
) -> CorrelationCurve:
    """Monte-Carlo correlation: draw invariant-measure points conditioned
    in R, transport them, and report the fraction landing in Q times
    mu(R).  The ensemble is flowed incrementally through the sorted time
    grid, so the cost scales with max(t), not with the grid size.
    Output points are sorted by time.
    """
    _require_under_roof(cube_q, flow)
    _require_under_roof(cube_r, flow)
    rng = _rng(seed)
    x, r = cube_r.sample(samples, rng)
    mu_r = cube_r.measure(flow)
    mu_q = cube_q.measure(flow)
    points = []
    t_prev = 0.0
    for t in sorted(float(t) for t in t_grid):
        x, r = flow.flow_arrays(x, r, t - t_prev)
        t_prev = t
        frac = float(np.count_nonzero(cube_q.contains(x, r))) / samples
        points.append(
            CorrelationPoint(
                t=t,
                estimate=frac * mu_r,
                std_error=math.sqrt(frac * (1.0 - frac) / samples) * mu_r,
                samples=samples,
            )
        )
    return CorrelationCurve(points=tuple(points), mu_r=mu_r, mu_q=mu_q)


@dataclass(frozen=True)
class GrowthPoint:
    n: int
    fraction: float
    std_error: float


def growth_in_measure(
    T: SkewTranslation,
    fiber_part: TrigPoly,
    threshold: float,
    n_list: Sequence[int],
    samples: int,
    seed: int,
) -> list[GrowthPoint]:
    """Estimate mu(|S_n(f)| < threshold) at the requested n values with
    one incremental pass of the Birkhoff sums over a uniform ensemble."""
    if not fiber_part.is_real:
        raise ValueError("the summed function must be real-valued")
    checkpoints = sorted({int(n) for n in n_list})
    if checkpoints and checkpoints[0] < 0:
        raise ValueError("n values must be nonnegative")
    rng = _rng(seed)
    x = rng.random((samples, T.dim))
    sums = np.zeros(samples)
    out = []
    wanted = set(checkpoints)
    top = checkpoints[-1] if checkpoints else 0
    if 0 in wanted:
        frac = float(np.count_nonzero(np.abs(sums) < threshold)) / samples
        out.append(GrowthPoint(0, frac, math.sqrt(frac * (1 - frac) / samples)))
    for step in range(1, top + 1):
        sums += fiber_part.eval_many(x)
        x = T.apply_many(x)
        if step in wanted:
            frac = float(np.count_nonzero(np.abs(sums) < threshold)) / samples
            out.append(
                GrowthPoint(step, frac, math.sqrt(frac * (1 - frac) / samples))
            )
    return out


@dataclass(frozen=True)
class DecouplingResult:
    fraction: float
    std_error: float
    max_cocycle_deviation: float


def decoupling_stat(
    T: SkewTranslation,
    fiber_part: TrigPoly,
    n: int,
    big_n: int,
    threshold: float,
    samples: int,
    seed: int,
    check_points: int = 1000,
) -> DecouplingResult:
    """Estimate mu(|S_N(f) o T^n - S_N(f)| < 2 threshold).

    Internally evaluates the equivalent expression
    ``S_n(f) o T^N - S_n(f)`` (the two agree by the cocycle identity for
    Birkhoff sums) and verifies the identity pointwise on a subsample to
    1e-8, raising AssertionMismatch on disagreement.
    """
    if not fiber_part.is_real:
        raise ValueError("the summed function must be real-valued")
    rng = _rng(seed)
    x = rng.random((samples, T.dim))
    shifted = T.iterate_many(x, big_n)
    s_here = T.birkhoff_sum_many(fiber_part, x, n)
    s_there = T.birkhoff_sum_many(fiber_part, shifted, n)
    diff = s_there - s_here
    m = min(check_points, samples)
    direct = (
        T.birkhoff_sum_many(fiber_part, T.iterate_many(x[:m], n), big_n)
        - T.birkhoff_sum_many(fiber_part, x[:m], big_n)
    )
    deviation = float(np.max(np.abs(direct - diff[:m]))) if m else 0.0
    if deviation > 1e-8:
        raise AssertionMismatch(
            f"cocycle identity violated by {deviation:.3e} (> 1e-08)"
        )
    frac = float(np.count_nonzero(np.abs(diff) < 2.0 * threshold)) / samples
    return DecouplingResult(
        fraction=frac,
        std_error=math.sqrt(frac * (1 - frac) / samples),
        max_cocycle_deviation=deviation,
    )


def stretch(
    T: SkewTranslation,
    roof: RoofFunction | TrigPoly,
    base_head: Sequence[float],
    interval: tuple[float, float],
    n: int,
    rel_tol: float = 1e-3,
    max_grid: int = 1 << 22,
) -> float:
    """Oscillation (max - min) of S_n(roof) along the last-coordinate
    segment {base_head} x [a, b].

    The Birkhoff sum restricted to the segment is a trigonometric
    polynomial in the last coordinate whose coefficients are accumulated
    exactly over the n iterates; the oscillation is then read off a grid
    fine enough that the Lipschitz error is below ``rel_tol`` of the
    reported value.
    """
    poly = roof.poly if isinstance(roof, RoofFunction) else roof
    d = T.dim
    a, b = float(interval[0]), float(interval[1])
    if not 0.0 <= a < b < 1.0:
        raise ValueError(f"interval [{a}, {b}] must satisfy 0 <= a < b < 1")
    head = wrap_torus(base_head)
    if head.shape != (d - 1,):
        raise ValueError(
            f"expected the first {d - 1} coordinates, got shape {head.shape}"
        )
    translation = np.array(T.translation)
    # coefficient of e(m x_d) in S_n along the fiber over `head`
    fiber_coeffs: dict[int, complex] = {}
    terms = [
        [l, complex(c)] for l, c in poly.coeffs.items()
    ]  # current frequency and phase-accumulated coefficient per term
    for _ in range(n):
        for entry in terms:
            l, c = entry
            phase_head = sum(li * hi for li, hi in zip(l[: d - 1], head))
            m = l[d - 1]
            fiber_coeffs[m] = fiber_coeffs.get(m, 0.0) + c * np.exp(
                2j * np.pi * phase_head
            )
            # advance: frequency by the transpose action, phase by e(l . b)
            entry[1] = c * np.exp(
                2j * np.pi * float(np.dot(l, translation))
            )
            entry[0] = tuple(
                sum(T.matrix[j][i] * l[i] for i in range(d)) for j in range(d)
            )
    freqs = np.array(sorted(fiber_coeffs), dtype=float)
    coeffs = np.array([fiber_coeffs[int(m)] for m in freqs])

    def oscillation(num_points: int) -> float:
        xs = np.linspace(a, b, num_points)
        values = np.real(np.exp(2j * np.pi * np.outer(xs, freqs)) @ coeffs)
        return float(values.max() - values.min())

    lip = n * 2.0 * math.pi * sum(
        abs(c) * abs(l[d - 1]) for l, c in poly.coeffs.items()
    )
    first = oscillation(4097)
    if first <= 0.0 or lip <= 0.0:
        return first
    step_needed = rel_tol * first / lip
    points = int(min(max_grid, max(4097, math.ceil((b - a) / step_needed) + 1)))
    if points > 4097:
        return oscillation(points)
    return first


def shear_tangent(
    T: SkewTranslation,
    roof: RoofFunction,
    point: SuspensionPoint,
    shear: Sequence[int],
    wrap_count: int,
    t: float,
    s: float,
) -> np.ndarray:
    """Tangent vector of the flowed fiber segment s -> flow_t(point + s v).

    For a roof constant in the last coordinate and v with
    ``v A = v + a e_d``, the curve's velocity is
    ``(v + n a e_d, -S_n(dv roof))`` at parameter s, where n is the step
    count of the flowed point and dv is the derivative along v.
    """
    v = tuple(int(c) for c in shear)
    a = int(wrap_count)
    d = T.dim
    image = tuple(
        sum(v[i] * T.matrix[i][j] for i in range(d)) for j in range(d)
    )
    if image != tuple(v[j] + (a if j == d - 1 else 0) for j in range(d)):
        raise ValueError("shear data does not satisfy v A = v + a e_d")
    _, fibers = roof.poly.decompose(d - 1)
    if any(len(part) for part in fibers):
        raise RoofNotFiberConstant(
            "the roof must be constant in the last coordinate"
        )
    flow = SuspensionFlow(T, roof)
    base = wrap_torus(np.array(point.base) + s * np.array(v, dtype=float))
    n = flow.n_steps(base, point.height, t)
    derivative = roof.poly.directional_derivative(v)
    vertical = -T.birkhoff_sum(derivative, base, n)
    out = np.array(v, dtype=float)
    out[d - 1] += n * a
    return np.append(out, vertical)


def shear_tangent_fd(
    T: SkewTranslation,
    roof: RoofFunction,
    point: SuspensionPoint,
    shear: Sequence[int],
    t: float,
    s: float,
    h: float = 1e-6,
) -> np.ndarray:
    """Finite-difference tangent of the flowed segment (central, step h),
    with base-coordinate differences unwrapped on the circle."""
    flow = SuspensionFlow(T, roof)
    v = np.array(shear, dtype=float)

    def image(param: float) -> np.ndarray:
        base = wrap_torus(np.array(point.base) + param * v)
        end = flow.flow(SuspensionPoint(tuple(base), point.height), t)
        return np.append(np.array(end.base), end.height)

    plus = image(s + h)
    minus = image(s - h)
    diff = plus - minus
    d = T.dim
    diff[:d] = (diff[:d] + 0.5) % 1.0 - 0.5
    return diff / (2.0 * h)


def wrapped_fiber_displacement(
    T: SkewTranslation,
    roof: RoofFunction,
    point: SuspensionPoint,
    shear: Sequence[int],
    wrap_count: int,
    t: float,
    arc_samples: int = 257,
) -> float:
    """Total signed displacement of the last coordinate along the flowed
    image of the segment of length 1/(n a) in the shear direction.

    The segment is sampled, each sample flowed for time t, and the
    last-coordinate increments unwrapped on the circle; with the step
    count constant along the segment the result is exactly +-1.  Raises
    if the step count is not constant (pick a different point or time).
    """
    flow = SuspensionFlow(T, roof)
    v = np.array(shear, dtype=float)
    n0 = flow.n_steps(point.base, point.height, t)
    length = 1.0 / (abs(n0 * wrap_count))
    params = np.linspace(0.0, length, arc_samples)
    last = None
    total = 0.0
    for s in params:
        base = wrap_torus(np.array(point.base) + s * v)
        n = flow.n_steps(base, point.height, t)
        if n != n0:
            raise ValueError(
                "the step count is not constant along the segment; "
                "choose a larger time or a different base point"
            )
        end = flow.flow(SuspensionPoint(tuple(base), point.height), t)
        coord = end.base[-1]
        if last is not None:
            inc = (coord - last + 0.5) % 1.0 - 0.5
            total += inc
        last = coord
    return total
