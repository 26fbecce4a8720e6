"""Exception hierarchy for pifnet."""

from typing import Iterable, Optional


class PifnetError(Exception):
    """Base class for every error raised by pifnet."""


class ParameterError(PifnetError, ValueError):
    """A numeric parameter is non-finite or out of range."""


class DistributionError(ParameterError):
    """A jump or signal law is malformed or produced a non-positive draw."""


class PreconditionError(ParameterError):
    """An operation was called outside the regime it is defined for."""


class SizeError(ParameterError):
    """A problem is too large for exhaustive enumeration."""


class ConfigError(PifnetError):
    """The run configuration document failed validation."""


class RankError(PifnetError):
    """A restricted mean matrix is singular."""

    def __init__(self, indices: Iterable[int], message: Optional[str] = None):
        self.indices = tuple(int(i) for i in indices)
        label = "{" + ", ".join(str(i + 1) for i in self.indices) + "}"
        super().__init__(message or f"mean matrix restricted to {label} is singular")


class SpikeRateError(PifnetError):
    """A neuron exceeded the spike budget of a single run."""

    def __init__(self, neuron: int, spikes: int, limit: int):
        self.neuron = neuron
        self.spikes = spikes
        self.limit = limit
        super().__init__(
            f"neuron {neuron + 1} fired {spikes} times, above the limit of {limit}; "
            "check that its signal laws keep the potential away from the threshold"
        )
