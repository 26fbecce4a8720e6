"""Event-driven simulation of the interacting neuron network.

Between spikes every potential follows its own driver. When neuron i reaches
0 it fires: its potential is reset to the diagonal signal xi_ii and every
other neuron j receives the inhibitory signal xi_ij.

Crossings are decided on the additive level z0 + X + sum of received and
own signals, which keeps each step's undershoot. The recorded potential is
that level plus a non-negative lag holding the undershoot of the neuron's
last reset, so it shows the reset-to-value clamp without letting the clamp
shift later crossings. Two runs that share randomness therefore cross in
the same order whenever one level dominates the other.

The engine pre-draws driver randomness per neuron in fixed chunks and scans
short windows of steps with numpy. Spike-free stretches are advanced in bulk;
the first step of a window that contains a crossing is processed on its own.
"""

import logging
import math
from typing import Optional

import numpy as np

from .errors import DistributionError, ParameterError, SpikeRateError
from .levy import DriverBlock, crossing_probabilities, crossing_probability, locate_crossing, sample_block
from .models import NetworkConfig, SimRecord, SpikeEvent
from .seeding import ReplicaStreams, check_seed

logger = logging.getLogger(__name__)

CHUNK_STEPS = 4096
WINDOW_STEPS = 128
DEFAULT_MAX_SPIKES = 1_000_000


def apply_spike(potentials: np.ndarray, i: int, xi_row: np.ndarray) -> np.ndarray:
    """Return the potentials after neuron i fires with signal row xi_row.

    Coordinate i is set to xi_row[i] whatever its undershoot; every other
    coordinate j is raised by xi_row[j]. A positive value left at the end
    of a step whose crossing happened inside it is kept on top of the reset.
    """
    xi_row = np.asarray(xi_row, dtype=float)
    if not np.all(np.isfinite(xi_row)) or np.any(xi_row <= 0):
        raise DistributionError(f"signal row of neuron {i + 1} has non-positive entries: {xi_row.tolist()}")
    potentials = np.asarray(potentials, dtype=float)
    out = potentials + xi_row
    out[i] = xi_row[i] + max(float(potentials[i]), 0.0)
    return out


def step_count(horizon: float, dt: float) -> int:
    """Number of grid steps covering [0, horizon]."""
    if not math.isfinite(dt) or dt <= 0:
        raise ParameterError(f"dt must be finite and positive, got {dt}")
    if not math.isfinite(horizon) or horizon < dt:
        raise ParameterError(f"horizon must be finite and at least dt, got {horizon}")
    ratio = horizon / dt
    nearest = round(ratio)
    if abs(ratio - nearest) <= 1e-9 * max(1.0, ratio):
        return int(nearest)
    return int(math.ceil(ratio))


def _grid(horizon: float, dt: float) -> int:
    n_steps = step_count(horizon, dt)
    if n_steps * dt > horizon * (1 + 1e-9):
        logger.warning("horizon %g is not a multiple of dt %g, running to %g", horizon, dt, n_steps * dt)
    return n_steps


def _check_z0(config: NetworkConfig, z0) -> np.ndarray:
    z0 = np.asarray(z0, dtype=float).reshape(-1)
    if z0.shape != (config.n,):
        raise ParameterError(f"z0 must have {config.n} entries, got {z0.size}")
    if not np.all(np.isfinite(z0)) or np.any(z0 < 0):
        raise ParameterError(f"z0 must be finite and non-negative, got {z0.tolist()}")
    return z0


class _Simulation:
    """One run of the engine. Not reusable."""

    def __init__(
        self,
        config: NetworkConfig,
        z0: np.ndarray,
        dt: float,
        n_steps: int,
        streams: ReplicaStreams,
        *,
        decoupled: bool = False,
        stride: Optional[int] = None,
        max_spikes: int = DEFAULT_MAX_SPIKES,
        stop_radius: Optional[float] = None,
        stop_after: float = 0.0,
    ):
        self.config = config
        self.dt = dt
        self.n_steps = n_steps
        self.streams = streams
        self.decoupled = decoupled
        self.stride = max(1, n_steps // 1000) if stride is None else int(stride)
        if self.stride < 1:
            raise ParameterError(f"sample stride must be positive, got {stride}")
        self.max_spikes = int(max_spikes)
        self.stop_radius = stop_radius
        self.stop_after = stop_after

        self.sigma = config.sigma
        self.z0 = z0.copy()
        self.level = z0.copy()
        self.lag = np.zeros(config.n)
        self.x = np.zeros(config.n)
        self.counts = np.zeros(config.n, dtype=np.int64)
        self.log: list[SpikeEvent] = []
        self.stopped_at: Optional[float] = None
        self._signal_rngs = [streams.signals(i) for i in range(config.n)]

        self._times = [0.0]
        self._z = [self.z]
        self._x = [self.x.copy()]
        self._eta = [self.counts.copy()]

    @property
    def z(self) -> np.ndarray:
        """Recorded potentials."""
        return self.level + self.lag

    def run(self) -> SimRecord:
        drivers = [self.streams.driver(i) for i in range(self.config.n)]
        step = 0
        while step < self.n_steps and self.stopped_at is None:
            size = min(CHUNK_STEPS, self.n_steps - step)
            blocks = [sample_block(spec, self.dt, size, rng) for spec, rng in zip(self.config.specs, drivers)]
            self._run_chunk(blocks, step)
            step += size

        logger.debug(
            "replica %d: %d steps, spikes per neuron %s%s",
            self.streams.replica, self.n_steps, self.counts.tolist(),
            " (decoupled)" if self.decoupled else "",
        )
        return SimRecord(
            sample_times=np.array(self._times),
            z_samples=np.array(self._z),
            x_samples=np.array(self._x),
            eta_samples=np.array(self._eta),
            spike_log=self.log,
            eta_final=self.counts.copy(),
            z_final=self.z,
            z0=self.z0,
            seed=self.streams.seed,
            replica=self.streams.replica,
            decoupled=self.decoupled,
            stopped_at=self.stopped_at,
        )

    def _run_chunk(self, blocks: list[DriverBlock], base: int):
        inc = np.vstack([b.increments for b in blocks])
        uni = np.vstack([b.uniforms for b in blocks])
        jumpy = np.vstack([b.has_jumps for b in blocks])
        size = inc.shape[1]
        sigma = self.sigma[:, None]

        pos = 0
        while pos < size:
            end = min(pos + WINDOW_STEPS, size)
            width = end - pos
            # levels as if nobody fired inside the window
            path = self.level[:, None] + np.cumsum(inc[:, pos:end], axis=1)
            starts = np.hstack([self.level[:, None], path[:, :-1]])
            probs = crossing_probabilities(starts, path, sigma, self.dt)
            # a plain step crosses when it ends at or below 0 or its bridge dips there
            hit = ((path <= 0) | (uni[:, pos:end] < probs)) & ~jumpy[:, pos:end]
            cols = np.flatnonzero(hit.any(axis=0))
            first = int(cols[0]) if cols.size else width

            # jump steps need the piecewise test, only before the first plain hit
            rows_j, cols_j = np.nonzero(jumpy[:, pos:pos + min(first + 1, width)])
            for idx in np.argsort(cols_j, kind="stable"):
                i, c = int(rows_j[idx]), int(cols_j[idx])
                if c >= first:
                    break
                k = pos + c
                if locate_crossing(starts[i, c], blocks[i].continuous[k], blocks[i].step_jumps(k),
                                   self.sigma[i], self.dt, uni[i, k]) is not None:
                    first = c

            if first > 0:
                self._advance(path[:, :first], inc[:, pos:pos + first], base + pos)
                if self.stopped_at is not None:
                    return
            if first < width:
                self._spike_step(blocks, inc[:, pos + first], uni[:, pos + first], pos + first, base + pos + first)
                if self.stopped_at is not None:
                    return
                pos += first + 1
            else:
                pos = end

    def _advance(self, path: np.ndarray, inc: np.ndarray, base: int):
        """Apply spike-free steps base+1 .. base+m in bulk; path holds levels."""
        m = path.shape[1]
        x_path = self.x[:, None] + np.cumsum(inc, axis=1)
        z_path = path + self.lag[:, None]
        steps = np.arange(base + 1, base + m + 1)

        if self.stop_radius is not None:
            times = steps * self.dt
            inside = (times >= self.stop_after - 1e-12) & (z_path.sum(axis=0) < self.stop_radius)
            if inside.any():
                j = int(np.argmax(inside))
                self._record_range(steps[:j + 1], z_path[:, :j + 1], x_path[:, :j + 1])
                self.level = path[:, j].copy()
                self.x = x_path[:, j].copy()
                self._stop(int(steps[j]))
                return

        self._record_range(steps, z_path, x_path)
        self.level = path[:, -1].copy()
        self.x = x_path[:, -1].copy()

    def _spike_step(self, blocks, inc: np.ndarray, uni: np.ndarray, col: int, step: int):
        """Process step `step` (0-based) in which at least one crossing may occur."""
        t0 = step * self.dt
        fractions: dict[int, float] = {}
        for i in range(self.config.n):
            start = self.level[i]
            jumps = blocks[i].step_jumps(col)
            if jumps is None:
                end = start + inc[i]
                if end <= 0:
                    fractions[i] = 1.0
                elif uni[i] < crossing_probability(start, end, self.sigma[i], self.dt):
                    fractions[i] = 0.5
            else:
                frac = locate_crossing(start, blocks[i].continuous[col], jumps, self.sigma[i], self.dt, uni[i])
                if frac is not None:
                    fractions[i] = frac

        level = self.level + inc
        self.x = self.x + inc
        received = np.zeros(self.config.n, dtype=bool)
        for i in sorted(fractions):
            if received[i] and level[i] > 0:
                logger.debug("neuron %d crossing at t=%.6g lifted by an earlier spike", i + 1, t0)
                continue
            row = self.config.sample_signal_row(i, self._signal_rngs[i])

            # the clamp acts on the level, whose undershoot the old lag does not hide
            crossed_at = float(level[i])
            before = level + self.lag
            before[i] = crossed_at
            after = apply_spike(before, i, row)
            pre = crossed_at + float(self.lag[i]) + row[i] - float(after[i])
            if self.decoupled:
                level[i] += row[i]
            else:
                level = level + row
                received[:] = True
                received[i] = False
            self.lag[i] = after[i] - level[i]

            self.counts[i] += 1
            if self.counts[i] > self.max_spikes:
                raise SpikeRateError(i, int(self.counts[i]), self.max_spikes)
            self.log.append(SpikeEvent(
                time=t0 + fractions[i] * self.dt,
                neuron=i,
                ordinal=int(self.counts[i]),
                signals=tuple(float(v) for v in row),
                pre_reset=pre,
            ))
        self.level = level

        k = step + 1
        z = self.z
        self._record_range(np.array([k]), z[:, None], self.x[:, None])
        if (self.stop_radius is not None and k * self.dt >= self.stop_after - 1e-12
                and z.sum() < self.stop_radius):
            self._stop(k)

    def _record_range(self, steps: np.ndarray, z_cols: np.ndarray, x_cols: np.ndarray):
        keep = (steps % self.stride == 0) | (steps == self.n_steps)
        for j in np.flatnonzero(keep):
            self._times.append(float(steps[j] * self.dt))
            self._z.append(z_cols[:, j].copy())
            self._x.append(x_cols[:, j].copy())
            self._eta.append(self.counts.copy())

    def _stop(self, step: int):
        self.stopped_at = step * self.dt
        if self._times[-1] != self.stopped_at:
            self._times.append(self.stopped_at)
            self._z.append(self.z)
            self._x.append(self.x.copy())
            self._eta.append(self.counts.copy())


def simulate(
    config: NetworkConfig,
    z0,
    horizon: float,
    dt: float,
    seed: int,
    *,
    replica: int = 0,
    family: int = 0,
    sample_stride: Optional[int] = None,
    max_spikes: int = DEFAULT_MAX_SPIKES,
) -> SimRecord:
    """Simulate the full network from z0 up to horizon.

    The result is a deterministic function of the arguments. With
    sample_stride=None roughly a thousand samples are kept.
    """
    z0 = _check_z0(config, z0)
    n_steps = _grid(horizon, dt)
    streams = ReplicaStreams(check_seed(seed), replica, family)
    return _Simulation(config, z0, dt, n_steps, streams, stride=sample_stride, max_spikes=max_spikes).run()


def decoupled_simulate(
    config: NetworkConfig,
    z0,
    horizon: float,
    dt: float,
    seed: int,
    bar_mode: bool = False,
    *,
    replica: int = 0,
    family: int = 0,
    sample_stride: Optional[int] = None,
    max_spikes: int = DEFAULT_MAX_SPIKES,
) -> SimRecord:
    """Simulate the network with every cross-signal replaced by 0.

    Shares driver and signal streams with simulate() for the same seed, so
    the two runs are coupled. In bar mode each neuron starts from its own
    reset law instead of z0, which makes its spike train an undelayed
    renewal process.
    """
    streams = ReplicaStreams(check_seed(seed), replica, family)
    if bar_mode:
        z0 = np.array([
            config.signal_laws[i][i].sample(streams.init(i), 1)[0] for i in range(config.n)
        ])
    else:
        z0 = _check_z0(config, z0)
    n_steps = _grid(horizon, dt)
    return _Simulation(
        config, z0, dt, n_steps, streams, decoupled=True, stride=sample_stride, max_spikes=max_spikes
    ).run()


def first_entry_time(
    config: NetworkConfig,
    z0,
    radius: float,
    epsilon: float,
    dt: float,
    seed: int,
    *,
    replica: int = 0,
    family: int = 0,
    max_steps: int = 1_000_000,
    max_spikes: int = DEFAULT_MAX_SPIKES,
) -> Optional[float]:
    """First step-end time t >= epsilon with l1 norm of Z(t) below radius.

    Returns None when max_steps pass without an entry.
    """
    z0 = _check_z0(config, z0)
    if not radius > 0 or not epsilon >= 0:
        raise ParameterError(f"radius must be positive and epsilon non-negative, got {radius}, {epsilon}")
    if not math.isfinite(dt) or dt <= 0:
        raise ParameterError(f"dt must be finite and positive, got {dt}")
    if max_steps < 1:
        raise ParameterError(f"max_steps must be positive, got {max_steps}")
    streams = ReplicaStreams(check_seed(seed), replica, family)
    record = _Simulation(
        config, z0, dt, int(max_steps), streams, stride=int(max_steps), max_spikes=max_spikes,
        stop_radius=float(radius), stop_after=float(epsilon),
    ).run()
    return record.stopped_at
