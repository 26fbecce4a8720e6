"""Fluid limit of the network under large initial potentials.

At fluid scale the neurons sitting at 0 (the active set A) fire at rates r
that keep them at 0, r_A @ B[A, A] = nu_A, while every other coordinate
moves with slope -nu_i + (r @ B)_i. The path is piecewise linear; it changes
slope whenever another coordinate reaches 0.
"""

import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..core.errors import ParameterError
from ..core.models import FluidSegment, FluidStatus, FluidTrajectory
from .linalg import check_system, solve_left

logger = logging.getLogger(__name__)

TOLERANCE = 1e-12


@dataclass
class ActiveRates:
    active: tuple[int, ...]
    rates: np.ndarray
    feasible: bool


def fluid_rates(active: Iterable[int], B, nu) -> ActiveRates:
    """Spike rates holding the active coordinates at 0; zero elsewhere.

    Raises RankError when B restricted to the active set is singular.
    """
    B, nu = check_system(B, nu)
    idx = tuple(sorted(set(int(i) for i in active)))
    rates = np.zeros(len(nu))
    if not idx:
        return ActiveRates(idx, rates, True)
    sub = solve_left(B[np.ix_(idx, idx)], nu[list(idx)], idx)
    rates[list(idx)] = sub
    floor = -TOLERANCE * max(1.0, float(np.abs(sub).max()))
    return ActiveRates(idx, rates, bool(np.all(sub >= floor)))


def fluid_slopes(active: Iterable[int], r, B, nu) -> np.ndarray:
    """Slopes of the fluid path: 0 on the active set, -nu + r @ B elsewhere."""
    B, nu = check_system(B, nu)
    slope = -nu + np.asarray(r, dtype=float) @ B
    idx = list(set(int(i) for i in active))
    slope[idx] = 0.0
    return slope


def integrate_fluid(phi0, B, nu, horizon: float) -> FluidTrajectory:
    """Integrate the fluid path from phi0 segment by segment.

    Stops at the first of: infeasible rates or a rising free coordinate with
    nothing left falling (diverges), every coordinate at 0 (emptied-at, with
    a final flat segment carrying the steady rates), or the horizon.
    """
    B, nu = check_system(B, nu)
    phi = np.asarray(phi0, dtype=float).reshape(-1).copy()
    n = len(nu)
    if phi.shape != (n,) or not np.all(np.isfinite(phi)) or np.any(phi < 0):
        raise ParameterError(f"phi0 must be {n} finite non-negative values")
    if not np.isfinite(horizon) or horizon <= 0:
        raise ParameterError(f"horizon must be finite and positive, got {horizon}")

    t = 0.0
    active = set(np.flatnonzero(phi <= TOLERANCE).tolist())
    phi[list(active)] = 0.0
    breakpoints: list[float] = []
    segments: list[FluidSegment] = []

    def finish(status: FluidStatus, at: float, diverging=()) -> FluidTrajectory:
        logger.debug("fluid path %s at t=%.6g after %d segments", status.value, at, len(segments))
        return FluidTrajectory(breakpoints, segments, status, at, tuple(int(i) for i in diverging))

    while True:
        rates = fluid_rates(active, B, nu)
        slope = fluid_slopes(active, rates.rates, B, nu)
        breakpoints.append(t)
        segments.append(FluidSegment(t, phi.copy(), slope, rates.rates, rates.active))

        if not rates.feasible:
            return finish(FluidStatus.DIVERGES, t, np.flatnonzero(rates.rates < 0))
        if len(active) == n:
            return finish(FluidStatus.EMPTIED, t)
        free = np.array([i not in active for i in range(n)])
        rising = np.flatnonzero(free & (slope > TOLERANCE))
        falling = np.flatnonzero(free & (slope < -TOLERANCE))
        # a rising coordinate only diverges once no other one can join the active set
        if not falling.size:
            if rising.size:
                return finish(FluidStatus.DIVERGES, t, rising)
            return finish(FluidStatus.TRUNCATED, horizon)

        hit = phi[falling] / -slope[falling]
        step = float(hit.min())
        if t + step > horizon:
            return finish(FluidStatus.TRUNCATED, horizon)

        t += step
        phi = np.maximum(phi + slope * step, 0.0)
        joining = falling[hit <= step + TOLERANCE]
        phi[joining] = 0.0
        active.update(joining.tolist())
        active.update(np.flatnonzero(phi <= TOLERANCE).tolist())
