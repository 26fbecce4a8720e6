"""Core data models for pifnet.

Neuron indices are 0-based everywhere in the API. Serialized payloads and
terminal output use 1-based labels.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import numpy as np

from .errors import DistributionError, ParameterError


class LawKind(Enum):
    CONSTANT = "constant"
    UNIFORM = "uniform"
    EXPONENTIAL = "exponential"
    LOGNORMAL = "lognormal"


_ARITY = {
    LawKind.CONSTANT: 1,
    LawKind.UNIFORM: 2,
    LawKind.EXPONENTIAL: 1,
    LawKind.LOGNORMAL: 2,
}


@dataclass(frozen=True)
class Law:
    """A distribution on (0, inf) with finite mean.

    Parameters by kind: constant (value), uniform (low, high),
    exponential (mean), lognormal (mu, variance of the log).
    """
    kind: LawKind
    params: tuple[float, ...]

    def __post_init__(self):
        if len(self.params) != _ARITY[self.kind]:
            raise DistributionError(
                f"{self.kind.value} law takes {_ARITY[self.kind]} parameter(s), got {len(self.params)}"
            )
        if not all(math.isfinite(p) for p in self.params):
            raise DistributionError(f"{self.kind.value} law has non-finite parameters {self.params}")
        if self.kind in (LawKind.CONSTANT, LawKind.EXPONENTIAL) and self.params[0] <= 0:
            raise DistributionError(f"{self.kind.value} law needs a positive parameter, got {self.params[0]}")
        if self.kind == LawKind.UNIFORM:
            low, high = self.params
            if not 0 < low <= high:
                raise DistributionError(f"uniform law needs 0 < low <= high, got ({low}, {high})")
        if self.kind == LawKind.LOGNORMAL and self.params[1] < 0:
            raise DistributionError(f"lognormal law needs a non-negative variance, got {self.params[1]}")

    @classmethod
    def constant(cls, value: float) -> "Law":
        return cls(LawKind.CONSTANT, (float(value),))

    @classmethod
    def uniform(cls, low: float, high: float) -> "Law":
        return cls(LawKind.UNIFORM, (float(low), float(high)))

    @classmethod
    def exponential(cls, mean: float) -> "Law":
        return cls(LawKind.EXPONENTIAL, (float(mean),))

    @classmethod
    def lognormal(cls, mu: float, variance: float) -> "Law":
        return cls(LawKind.LOGNORMAL, (float(mu), float(variance)))

    @property
    def mean(self) -> float:
        if self.kind == LawKind.CONSTANT:
            return self.params[0]
        if self.kind == LawKind.UNIFORM:
            return 0.5 * (self.params[0] + self.params[1])
        if self.kind == LawKind.EXPONENTIAL:
            return self.params[0]
        mu, variance = self.params
        return math.exp(mu + 0.5 * variance)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw `size` values. Constant laws consume no randomness."""
        if self.kind == LawKind.CONSTANT:
            return np.full(size, self.params[0])
        if self.kind == LawKind.UNIFORM:
            return rng.uniform(self.params[0], self.params[1], size)
        if self.kind == LawKind.EXPONENTIAL:
            return rng.exponential(self.params[0], size)
        return rng.lognormal(self.params[0], math.sqrt(self.params[1]), size)

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.kind.value, "params": list(self.params)}


@dataclass(frozen=True)
class LevySpec:
    """Driving noise of one neuron: Brownian motion plus compound Poisson jumps.

    The total mean rate of the driver is -nu; the continuous drift absorbs
    the mean jump contribution.
    """
    nu: float
    sigma: float = 0.0
    jump_rate: float = 0.0
    jump_law: Law = field(default_factory=lambda: Law.constant(1.0))

    def __post_init__(self):
        for name in ("nu", "sigma", "jump_rate"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite, got {getattr(self, name)}")
        if self.nu <= 0:
            raise ParameterError(f"nu must be positive, got {self.nu}")
        if self.sigma < 0:
            raise ParameterError(f"sigma must be non-negative, got {self.sigma}")
        if self.jump_rate < 0:
            raise ParameterError(f"jump_rate must be non-negative, got {self.jump_rate}")

    @property
    def drift(self) -> float:
        """Drift of the continuous component."""
        return -(self.nu + self.jump_rate * self.jump_law.mean)

    def to_dict(self) -> dict[str, Any]:
        return {
            "nu": self.nu,
            "sigma": self.sigma,
            "jump_rate": self.jump_rate,
            "jump_law": self.jump_law.to_dict(),
        }


@dataclass(frozen=True)
class NetworkConfig:
    """N neurons with their drivers and the laws of the signal matrix.

    signal_laws[i][j] is the law of the signal neuron i sends to neuron j when
    it spikes; the diagonal is the reset level of neuron i.
    """
    specs: tuple[LevySpec, ...]
    signal_laws: tuple[tuple[Law, ...], ...]

    def __post_init__(self):
        n = len(self.specs)
        if n < 1:
            raise ParameterError("a network needs at least one neuron")
        if len(self.signal_laws) != n or any(len(row) != n for row in self.signal_laws):
            raise ParameterError(f"signal law matrix must be {n}x{n}")

    @classmethod
    def symmetric(
        cls,
        n: int,
        H,
        w,
        nu: float,
        sigma: float = 0.0,
        jump_rate: float = 0.0,
        jump_law: Optional[Law] = None,
        signal_family: str = "constant",
    ) -> "NetworkConfig":
        """Equal drifts, b_ii = H_i and b_ij = w_i for j != i."""
        H = np.broadcast_to(np.asarray(H, dtype=float), (n,))
        w = np.broadcast_to(np.asarray(w, dtype=float), (n,))
        if np.any(w <= 0):
            raise ParameterError("w must be positive")
        if np.any(H <= w):
            raise ParameterError("H must exceed w: the symmetric preset requires b_ii = H_i > w_i")
        makers = {"constant": Law.constant, "exponential": Law.exponential}
        if signal_family not in makers:
            raise DistributionError(f"unknown signal family '{signal_family}'")
        make = makers[signal_family]
        spec = LevySpec(nu=nu, sigma=sigma, jump_rate=jump_rate,
                        jump_law=jump_law or Law.constant(1.0))
        laws = tuple(
            tuple(make(H[i] if i == j else w[i]) for j in range(n))
            for i in range(n)
        )
        return cls(specs=(spec,) * n, signal_laws=laws)

    @property
    def n(self) -> int:
        return len(self.specs)

    @property
    def mean_matrix(self) -> np.ndarray:
        return np.array([[law.mean for law in row] for row in self.signal_laws])

    @property
    def nu(self) -> np.ndarray:
        return np.array([spec.nu for spec in self.specs])

    @property
    def sigma(self) -> np.ndarray:
        return np.array([spec.sigma for spec in self.specs])

    def symmetric_parameters(self) -> Optional[tuple[np.ndarray, np.ndarray, float]]:
        """Return (H, w, nu) if the mean matrix has the symmetric form, else None."""
        if self.n < 2:
            return None
        nu = self.nu
        if not np.allclose(nu, nu[0], rtol=1e-12, atol=0.0):
            return None
        B = self.mean_matrix
        H = np.diag(B).copy()
        off = B[~np.eye(self.n, dtype=bool)].reshape(self.n, self.n - 1)
        w = off[:, 0].copy()
        if not np.allclose(off, w[:, None], rtol=1e-12, atol=0.0):
            return None
        if np.any(w <= 0) or np.any(H <= w):
            return None
        return H, w, float(nu[0])

    def sample_signal_row(self, i: int, rng: np.random.Generator) -> np.ndarray:
        """Draw the row of signals emitted by one spike of neuron i."""
        return np.array([law.sample(rng, 1)[0] for law in self.signal_laws[i]])

    def to_dict(self) -> dict[str, Any]:
        return {
            "neurons": [spec.to_dict() for spec in self.specs],
            "signals": [[law.to_dict() for law in row] for row in self.signal_laws],
        }


@dataclass(frozen=True)
class SpikeEvent:
    """One threshold hit: neuron i's k-th spike and the signal row it emitted."""
    time: float
    neuron: int
    ordinal: int
    signals: tuple[float, ...]
    pre_reset: float


@dataclass
class SimRecord:
    """Trajectory of one simulation run.

    Samples are taken at step ends, after the spikes of that step, so the
    recorded potentials are right limits and eta counts spikes at times <= t.
    """
    sample_times: np.ndarray
    z_samples: np.ndarray
    x_samples: np.ndarray
    eta_samples: np.ndarray
    spike_log: list[SpikeEvent]
    eta_final: np.ndarray
    z_final: np.ndarray
    z0: np.ndarray
    seed: int
    replica: int = 0
    decoupled: bool = False
    stopped_at: Optional[float] = None

    @property
    def horizon(self) -> float:
        return float(self.sample_times[-1])

    def spike_times(self, neuron: int) -> np.ndarray:
        return np.array([e.time for e in self.spike_log if e.neuron == neuron])

    def counts_until(self, t: float) -> np.ndarray:
        """Spike counts per neuron at times <= t."""
        counts = np.zeros(len(self.z0), dtype=int)
        for event in self.spike_log:
            if event.time <= t:
                counts[event.neuron] += 1
        return counts

    def sample_rows(self) -> list[dict[str, Any]]:
        return [
            {
                "t": float(t),
                "z": [float(v) for v in z],
                "x": [float(v) for v in x],
                "eta": [int(v) for v in eta],
            }
            for t, z, x, eta in zip(self.sample_times, self.z_samples, self.x_samples, self.eta_samples)
        ]


class FluidStatus(Enum):
    EMPTIED = "emptied-at"
    DIVERGES = "diverges"
    TRUNCATED = "horizon-truncated"


@dataclass
class FluidSegment:
    """A linear piece of the fluid limit starting at `start`."""
    start: float
    phi_start: np.ndarray
    slope: np.ndarray
    rates: np.ndarray
    active: tuple[int, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "start": self.start,
            "phi_start": self.phi_start.tolist(),
            "slope": self.slope.tolist(),
            "rates": self.rates.tolist(),
            "active": [i + 1 for i in self.active],
        }


@dataclass
class FluidTrajectory:
    """Piecewise-linear fluid path; segments[k] starts at breakpoints[k]."""
    breakpoints: list[float]
    segments: list[FluidSegment]
    status: FluidStatus
    status_time: float
    diverging: tuple[int, ...] = ()

    @property
    def emptied_at(self) -> Optional[float]:
        return self.status_time if self.status == FluidStatus.EMPTIED else None

    def phi(self, t: float) -> np.ndarray:
        """Evaluate the fluid path at time t >= 0."""
        k = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        seg = self.segments[max(k, 0)]
        return np.maximum(seg.phi_start + seg.slope * (t - seg.start), 0.0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "breakpoints": list(self.breakpoints),
            "segments": [seg.to_dict() for seg in self.segments],
            "status": self.status.value,
            "status_time": self.status_time,
            "diverging": [i + 1 for i in self.diverging],
        }


class Verdict(Enum):
    STABLE = "stable"
    PARTIAL_RISK = "partial-risk"


@dataclass
class SubsetCheck:
    """Sufficient-condition test for one proper subset S of neurons."""
    subset: tuple[int, ...]
    invertible: bool
    a: Optional[np.ndarray]
    load: Optional[float]
    budget: float
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "subset": [i + 1 for i in self.subset],
            "invertible": self.invertible,
            "a": None if self.a is None else self.a.tolist(),
            "load": self.load,
            "budget": self.budget,
            "pass": self.passed,
        }


@dataclass
class StabilityReport:
    rates: Optional[np.ndarray]
    feasible: bool
    subset_checks: list[SubsetCheck]
    verdict: Verdict
    witness: Optional[tuple[int, ...]] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "rates": None if self.rates is None else self.rates.tolist(),
            "feasible": self.feasible,
            "subset_checks": [check.to_dict() for check in self.subset_checks],
            "verdict": self.verdict.value,
            "witness": None if self.witness is None else [i + 1 for i in self.witness],
        }


@dataclass
class CheckResult:
    """Outcome of one statistical verification check."""
    name: str
    statistic: float
    threshold: float
    passed: bool
    replicas: int
    seed: int
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "pass": self.passed,
            "replicas": self.replicas,
            "seed": self.seed,
            "details": self.details,
        }


@dataclass
class SimSettings:
    """Run parameters shared by every subcommand."""
    seed: int
    horizon: float = 100.0
    dt: float = 0.01
    replicas: int = 1
    sample_stride: int = 100
    max_spikes: int = 1_000_000
    workers: int = 1
    z0: Optional[tuple[float, ...]] = None
    phi0: Optional[tuple[float, ...]] = None
    burn_in: float = 0.0
    scale: float = 2000.0
    window: float = 2.0
    window_start: Optional[float] = None
    k0: Optional[float] = None
    epsilon: float = 0.01
    bins: int = 50


@dataclass
class VerifySettings:
    checks: tuple[str, ...] = ("dominance",)
    neuron: int = 0
    bridge_k: float = 0.5
    bridge_sigma: float = 1.0
    bridge_t: float = 1.0
    bridge_x: tuple[float, ...] = (-1.0, 0.0, 1.0, 2.0)
    bridge_replicas: int = 100_000
    tv_start_a: Optional[tuple[float, ...]] = None
    tv_start_b: Optional[tuple[float, ...]] = None


@dataclass
class OutputSettings:
    directory: str = "pifnet-out"
    format: str = "json"


@dataclass
class RunConfig:
    """A validated run configuration plus the normalized document it came from."""
    network: NetworkConfig
    sim: SimSettings
    outputs: OutputSettings
    verify: VerifySettings
    document: dict[str, Any] = field(default_factory=dict)
