"""Parser for pifnet run configuration documents.

A configuration is a JSON object with sections `network`, `sim`, `outputs`
and `verify`. Every section except `network` and `sim.seed` has defaults,
listed in docs/CONFIG.md. A law is written either as a bare number (a
constant law) or as {"family": ..., "params": [...]}.
"""

import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..errors import ConfigError, ParameterError
from ..models import (
    Law,
    LawKind,
    LevySpec,
    NetworkConfig,
    OutputSettings,
    RunConfig,
    SimSettings,
    VerifySettings,
)

CHECK_NAMES = (
    "dominance",
    "renewal_rate",
    "empirical_rate",
    "divergence",
    "fluid_deviation",
    "spike_rate_window",
    "return_time",
    "bridge_monotonicity",
    "tv_diagnostic",
)


class _Schema(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LawSchema(_Schema):
    family: Literal["constant", "uniform", "exponential", "lognormal"]
    params: list[float]

    @model_validator(mode="after")
    def check_law(self):
        try:
            Law(LawKind(self.family), tuple(self.params))
        except ParameterError as exc:
            raise ValueError(str(exc)) from None
        return self

    def build(self) -> Law:
        return Law(LawKind(self.family), tuple(self.params))


LawField = Union[float, LawSchema]


def _build_law(value: LawField) -> Law:
    if isinstance(value, LawSchema):
        return value.build()
    return Law.constant(value)


def _positive_law(value: LawField) -> LawField:
    if not isinstance(value, LawSchema) and not value > 0:
        raise ValueError(f"a constant law needs a positive value, got {value}")
    return value


class NeuronSchema(_Schema):
    nu: float = Field(gt=0)
    sigma: float = Field(default=0.0, ge=0)
    jump_rate: float = Field(default=0.0, ge=0)
    jump_law: LawField = 1.0

    @field_validator("jump_law")
    @classmethod
    def check_jump_law(cls, value):
        return _positive_law(value)

    def build(self) -> LevySpec:
        return LevySpec(self.nu, self.sigma, self.jump_rate, _build_law(self.jump_law))


class SymmetricSchema(_Schema):
    n: int = Field(ge=1)
    H: Union[float, list[float]]
    w: Union[float, list[float]]
    nu: float = Field(gt=0)
    sigma: float = Field(default=0.0, ge=0)
    jump_rate: float = Field(default=0.0, ge=0)
    jump_law: LawField = 1.0
    signal_family: Literal["constant", "exponential"] = "constant"

    @field_validator("jump_law")
    @classmethod
    def check_jump_law(cls, value):
        return _positive_law(value)

    def _vector(self, value) -> list[float]:
        return [float(value)] * self.n if isinstance(value, (int, float)) else list(value)

    @model_validator(mode="after")
    def check_shape(self):
        H, w = self._vector(self.H), self._vector(self.w)
        if len(H) != self.n or len(w) != self.n:
            raise ValueError(f"H and w must be scalars or lists of n = {self.n} values")
        if any(wi <= 0 for wi in w):
            raise ValueError("w must be positive")
        if any(hi <= wi for hi, wi in zip(H, w)):
            raise ValueError("H must exceed w: the symmetric preset requires b_ii = H_i > w_i")
        return self

    def build(self) -> NetworkConfig:
        return NetworkConfig.symmetric(
            self.n, self._vector(self.H), self._vector(self.w), self.nu,
            sigma=self.sigma, jump_rate=self.jump_rate, jump_law=_build_law(self.jump_law),
            signal_family=self.signal_family,
        )


class ExplicitSchema(_Schema):
    neurons: list[NeuronSchema] = Field(min_length=1)
    signals: list[list[LawField]]

    @field_validator("signals")
    @classmethod
    def check_signals(cls, rows):
        for row in rows:
            for value in row:
                _positive_law(value)
        return rows

    @model_validator(mode="after")
    def check_shape(self):
        n = len(self.neurons)
        if len(self.signals) != n or any(len(row) != n for row in self.signals):
            raise ValueError(f"signals must be a {n}x{n} matrix of laws")
        return self

    def build(self) -> NetworkConfig:
        return NetworkConfig(
            specs=tuple(neuron.build() for neuron in self.neurons),
            signal_laws=tuple(tuple(_build_law(v) for v in row) for row in self.signals),
        )


class NetworkSchema(_Schema):
    symmetric: Optional[SymmetricSchema] = None
    explicit: Optional[ExplicitSchema] = None

    @model_validator(mode="after")
    def check_one(self):
        if (self.symmetric is None) == (self.explicit is None):
            raise ValueError("give exactly one of 'symmetric' or 'explicit'")
        return self

    def build(self) -> NetworkConfig:
        return (self.symmetric or self.explicit).build()


class SimSchema(_Schema):
    seed: int = Field(ge=0, le=2**64 - 1)
    horizon: float = Field(default=100.0, gt=0)
    dt: float = Field(default=0.01, gt=0)
    replicas: int = Field(default=1, ge=1)
    sample_stride: int = Field(default=100, ge=1)
    max_spikes: int = Field(default=1_000_000, ge=1)
    workers: int = Field(default=1, ge=1)
    z0: Optional[list[float]] = None
    phi0: Optional[list[float]] = None
    burn_in: float = Field(default=0.0, ge=0)
    scale: float = Field(default=2000.0, gt=0)
    window: float = Field(default=2.0, gt=0)
    window_start: Optional[float] = Field(default=None, gt=0)
    k0: Optional[float] = Field(default=None, gt=0)
    epsilon: float = Field(default=0.01, ge=0)
    bins: int = Field(default=50, ge=1)

    @field_validator("z0", "phi0")
    @classmethod
    def check_vector(cls, value):
        if value is not None and any(v < 0 for v in value):
            raise ValueError("entries must be non-negative")
        return value


class OutputSchema(_Schema):
    directory: str = "pifnet-out"
    format: Literal["json", "csv"] = "json"


class BridgeSchema(_Schema):
    k: float = Field(default=0.5, gt=0)
    sigma: float = Field(default=1.0, gt=0)
    t: float = Field(default=1.0, gt=0)
    x_grid: list[float] = Field(default_factory=lambda: [-1.0, 0.0, 1.0, 2.0], min_length=2)
    replicas: int = Field(default=100_000, ge=1)


class VerifySchema(_Schema):
    checks: list[Literal[CHECK_NAMES]] = Field(default_factory=lambda: ["dominance"])
    neuron: int = Field(default=1, ge=1)
    bridge: BridgeSchema = Field(default_factory=BridgeSchema)
    tv_start_a: Optional[list[float]] = None
    tv_start_b: Optional[list[float]] = None


class RunSchema(_Schema):
    network: NetworkSchema
    sim: SimSchema
    outputs: OutputSchema = Field(default_factory=OutputSchema)
    verify: VerifySchema = Field(default_factory=VerifySchema)


def _path(loc) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def _check_length(name: str, value, n: int):
    if value is not None and len(value) != n:
        raise ConfigError(f"{name}: expected {n} values, got {len(value)}")


def parse_config(text: str, seed: Optional[int] = None) -> RunConfig:
    """Parse and validate a configuration document.

    `seed` overrides sim.seed. Raises ConfigError with dotted paths.
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(document, dict):
        raise ConfigError("<root>: configuration must be a JSON object")
    if seed is not None:
        document.setdefault("sim", {})
        if isinstance(document["sim"], dict):
            document["sim"]["seed"] = seed

    try:
        schema = RunSchema.model_validate(document)
    except ValidationError as exc:
        lines = [f"{_path(err['loc'])}: {err['msg']}" for err in exc.errors()]
        raise ConfigError("invalid configuration\n" + "\n".join(lines)) from None

    try:
        network = schema.network.build()
    except ParameterError as exc:
        raise ConfigError(f"network: {exc}") from None

    sim = schema.sim
    n = network.n
    _check_length("sim.z0", sim.z0, n)
    _check_length("sim.phi0", sim.phi0, n)
    _check_length("verify.tv_start_a", schema.verify.tv_start_a, n)
    _check_length("verify.tv_start_b", schema.verify.tv_start_b, n)
    if schema.verify.neuron > n:
        raise ConfigError(f"verify.neuron: must be at most {n}, got {schema.verify.neuron}")

    bridge = schema.verify.bridge
    return RunConfig(
        network=network,
        sim=SimSettings(
            seed=sim.seed,
            horizon=sim.horizon,
            dt=sim.dt,
            replicas=sim.replicas,
            sample_stride=sim.sample_stride,
            max_spikes=sim.max_spikes,
            workers=sim.workers,
            z0=None if sim.z0 is None else tuple(sim.z0),
            phi0=None if sim.phi0 is None else tuple(sim.phi0),
            burn_in=sim.burn_in,
            scale=sim.scale,
            window=sim.window,
            window_start=sim.window_start,
            k0=sim.k0,
            epsilon=sim.epsilon,
            bins=sim.bins,
        ),
        outputs=OutputSettings(directory=schema.outputs.directory, format=schema.outputs.format),
        verify=VerifySettings(
            checks=tuple(schema.verify.checks),
            neuron=schema.verify.neuron - 1,
            bridge_k=bridge.k,
            bridge_sigma=bridge.sigma,
            bridge_t=bridge.t,
            bridge_x=tuple(bridge.x_grid),
            bridge_replicas=bridge.replicas,
            tv_start_a=None if schema.verify.tv_start_a is None else tuple(schema.verify.tv_start_a),
            tv_start_b=None if schema.verify.tv_start_b is None else tuple(schema.verify.tv_start_b),
        ),
        document=schema.model_dump(mode="json", exclude_none=True),
    )


def load_config(path: Path, seed: Optional[int] = None) -> RunConfig:
    """Read and parse a configuration file."""
    return parse_config(Path(path).read_text(encoding="utf-8"), seed=seed)


def serialize_config(config: RunConfig) -> str:
    """Normalized JSON form; parsing it again yields the same document."""
    return json.dumps(config.document, sort_keys=True, indent=2) + "\n"
