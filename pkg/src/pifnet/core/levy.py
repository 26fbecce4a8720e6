"""Brownian-plus-compound-Poisson driver with sub-step crossing detection.

Jumps are positive, so a coordinate can only reach 0 through its continuous
part. Between grid points that part is a Brownian bridge, and the chance that
it dips below 0 between two positive values a and b over a time h is
exp(-2ab / (sigma^2 h)).
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DistributionError, ParameterError
from .models import LevySpec


def _check_dt(dt: float) -> float:
    if not math.isfinite(dt) or dt <= 0:
        raise ParameterError(f"dt must be finite and positive, got {dt}")
    return float(dt)


@dataclass(frozen=True)
class Increment:
    """Driver increment over one step; jumps are (offset in step, size) pairs."""
    continuous: float
    jumps: tuple[tuple[float, float], ...] = ()

    @property
    def total(self) -> float:
        return self.continuous + sum(size for _, size in self.jumps)


@dataclass(frozen=True)
class StepJumps:
    """Jumps inside one step.

    offsets are sorted fractions of the step, bridge holds the pre-drawn
    standard normals that place the continuous path at each offset, and
    uniforms feed the crossing test of every sub-interval after the first.
    """
    offsets: np.ndarray
    sizes: np.ndarray
    bridge: np.ndarray
    uniforms: np.ndarray


@dataclass
class DriverBlock:
    """Pre-drawn driver randomness for a run of consecutive steps.

    Jump details are stored in compressed form: the jumps of step k sit in
    rows pointer[k]:pointer[k + 1] of the flat arrays.
    """
    dt: float
    continuous: np.ndarray
    jump_total: np.ndarray
    uniforms: np.ndarray
    pointer: np.ndarray
    offsets: np.ndarray
    sizes: np.ndarray
    bridge: np.ndarray
    extra_uniforms: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.continuous)

    @property
    def increments(self) -> np.ndarray:
        return self.continuous + self.jump_total

    @property
    def has_jumps(self) -> np.ndarray:
        return np.diff(self.pointer) > 0

    def step_jumps(self, k: int) -> Optional[StepJumps]:
        lo, hi = self.pointer[k], self.pointer[k + 1]
        if lo == hi:
            return None
        return StepJumps(self.offsets[lo:hi], self.sizes[lo:hi], self.bridge[lo:hi], self.extra_uniforms[lo:hi])


def sample_block(spec: LevySpec, dt: float, steps: int, rng: np.random.Generator) -> DriverBlock:
    """Draw the driver for `steps` consecutive steps.

    Draw order is fixed: step normals, jump counts, step uniforms, then for
    all jumps together their offsets, sizes, bridge normals and uniforms.
    The stream consumed therefore depends only on (spec, dt, steps).
    """
    dt = _check_dt(dt)
    if steps < 0:
        raise ParameterError(f"steps must be non-negative, got {steps}")

    normals = rng.standard_normal(steps)
    continuous = spec.drift * dt + spec.sigma * math.sqrt(dt) * normals
    if spec.jump_rate > 0:
        counts = rng.poisson(spec.jump_rate * dt, steps)
    else:
        counts = np.zeros(steps, dtype=np.int64)
    uniforms = rng.random(steps)

    pointer = np.zeros(steps + 1, dtype=np.int64)
    np.cumsum(counts, out=pointer[1:])
    total = int(pointer[-1])
    offsets = rng.random(total)
    sizes = spec.jump_law.sample(rng, total) if total else np.zeros(0)
    bridge = rng.standard_normal(total)
    extra = rng.random(total)
    if total and not np.all(sizes > 0):
        raise DistributionError(f"jump law {spec.jump_law.kind.value} produced a non-positive size")

    jump_total = np.zeros(steps)
    if total:
        owner = np.repeat(np.arange(steps), counts)
        order = np.lexsort((offsets, owner))
        offsets = offsets[order]
        np.add.at(jump_total, owner, sizes)

    return DriverBlock(
        dt=dt,
        continuous=continuous,
        jump_total=jump_total,
        uniforms=uniforms,
        pointer=pointer,
        offsets=offsets,
        sizes=sizes,
        bridge=bridge,
        extra_uniforms=extra,
    )


def sample_increment(spec: LevySpec, dt: float, rng: np.random.Generator) -> Increment:
    """Draw one increment X(t + dt) - X(t)."""
    dt = _check_dt(dt)
    continuous = spec.drift * dt + spec.sigma * math.sqrt(dt) * rng.standard_normal()
    count = int(rng.poisson(spec.jump_rate * dt)) if spec.jump_rate > 0 else 0
    if count == 0:
        return Increment(float(continuous))
    offsets = np.sort(rng.random(count)) * dt
    sizes = spec.jump_law.sample(rng, count)
    if not np.all(sizes > 0):
        raise DistributionError(f"jump law {spec.jump_law.kind.value} produced a non-positive size")
    return Increment(float(continuous), tuple(zip(offsets.tolist(), sizes.tolist())))


def crossing_probability(z_start: float, z_end: float, sigma: float, dt: float) -> float:
    """Probability that the continuous path between two values touches 0."""
    dt = _check_dt(dt)
    if sigma < 0:
        raise ParameterError(f"sigma must be non-negative, got {sigma}")
    if z_start <= 0 or z_end <= 0:
        return 1.0
    if sigma == 0:
        return 0.0
    return math.exp(-2.0 * z_start * z_end / (sigma * sigma * dt))


def crossing_probabilities(z_start, z_end, sigma, dt: float) -> np.ndarray:
    """Array form of crossing_probability; arguments broadcast."""
    dt = _check_dt(dt)
    z_start = np.asarray(z_start, dtype=float)
    z_end = np.asarray(z_end, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise ParameterError("sigma must be non-negative")
    var = sigma * sigma * dt
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        p = np.exp(-2.0 * z_start * z_end / var)
    p = np.where(var > 0, p, 0.0)
    return np.where((z_start <= 0) | (z_end <= 0), 1.0, p)


def bridge_survival_closed_form(k: float, x: float, sigma: float, t: float) -> float:
    """P{inf over [0, t] of a bridge from 0 to x stays >= -k}."""
    if k <= 0 or sigma <= 0 or t <= 0:
        raise ParameterError("k, sigma and t must be positive")
    if k + x <= 0:
        return 0.0
    return 1.0 - math.exp(-2.0 * k * (k + x) / (sigma * sigma * t))


def bridge_values(continuous: float, offsets: np.ndarray, normals: np.ndarray, sigma: float, dt: float) -> np.ndarray:
    """Continuous path at the given step fractions, conditioned on its endpoint."""
    values = np.empty(len(offsets))
    prev_s, prev_v = 0.0, 0.0
    for k, (s, z) in enumerate(zip(offsets, normals)):
        remaining = 1.0 - prev_s
        if remaining <= 0:
            values[k] = continuous
            continue
        frac = (s - prev_s) / remaining
        mean = prev_v + (continuous - prev_v) * frac
        var = sigma * sigma * dt * (s - prev_s) * (1.0 - s) / remaining
        prev_v = mean + math.sqrt(max(var, 0.0)) * z
        prev_s = s
        values[k] = prev_v
    return values


def locate_crossing(
    start: float,
    continuous: float,
    jumps: StepJumps,
    sigma: float,
    dt: float,
    first_uniform: float,
) -> Optional[float]:
    """Find the first sub-interval of a jump step in which the path hits 0.

    The step is cut at the jump offsets. Each piece is tested against its
    endpoint and the bridge minimum with its own uniform. Returns the
    crossing time as a fraction of the step (piece end for an endpoint hit,
    piece midpoint for a bridge hit), or None.
    """
    inner = bridge_values(continuous, jumps.offsets, jumps.bridge, sigma, dt)
    points = np.concatenate(([0.0], jumps.offsets, [1.0]))
    path = np.concatenate(([0.0], inner, [continuous]))
    uniforms = np.concatenate(([first_uniform], jumps.uniforms))

    level = start
    for k in range(len(points) - 1):
        a = level + path[k]
        b = level + path[k + 1]
        if b <= 0:
            return float(points[k + 1])
        h = (points[k + 1] - points[k]) * dt
        if h > 0 and uniforms[k] < crossing_probability(a, b, sigma, h):
            return float(0.5 * (points[k] + points[k + 1]))
        if k < len(jumps.sizes):
            level += jumps.sizes[k]
    return None
