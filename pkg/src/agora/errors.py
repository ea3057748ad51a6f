"""Exception hierarchy shared across the simulation, harness and analysis layers."""

from __future__ import annotations


class AgoraError(Exception):
    """Base class for every error raised by this package."""


# -- world / config ----------------------------------------------------------


class ConfigError(AgoraError):
    pass


class SchemaError(ConfigError):
    """A scenario config is missing a field or has a field of the wrong type."""


class ConfigReferenceError(ConfigError, ReferenceError):
    """A plan or allowed-agents list names a location or agent that does not exist."""


class DuplicateNameError(ConfigError):
    pass


class ActorNotPresentError(AgoraError):
    pass


class UnknownLocationError(AgoraError):
    pass


class LocationNotAllowedError(AgoraError):
    pass


class TimeoutHalt(AgoraError):
    """Raised when a run reaches ``max_ticks`` before its halt condition fires."""

    def __init__(self, message: str, *, tick: int | None = None, missing: list[str] | None = None):
        super().__init__(message)
        self.tick = tick
        self.missing = list(missing or [])


# -- cognition ---------------------------------------------------------------


class BackendError(AgoraError):
    """A cognition backend failed to produce a reply."""

    def __init__(self, message: str, *, agent: str | None = None, tick: int | None = None):
        super().__init__(message)
        self.agent = agent
        self.tick = tick

    def __str__(self) -> str:
        base = super().__str__()
        ctx = []
        if self.agent is not None:
            ctx.append(f"agent={self.agent}")
        if self.tick is not None:
            ctx.append(f"tick={self.tick}")
        return f"{base} ({', '.join(ctx)})" if ctx else base


class ReplayMissError(BackendError):
    """The replay transcript has no (remaining) reply for a prompt."""


class BackendConfigurationError(ConfigError):
    pass


# -- public goods game ---------------------------------------------------------


class SpecError(AgoraError):
    pass


class ContributionOutOfBounds(AgoraError):
    pass


class LengthMismatch(AgoraError):
    pass


# -- extraction ----------------------------------------------------------------


class ExtractionError(AgoraError):
    pass


class NoContributionFound(ExtractionError):
    pass


class AmbiguousContribution(ExtractionError):
    def __init__(self, message: str, candidates: list[int], evidence=None):
        super().__init__(message)
        self.candidates = list(candidates)
        self.evidence = evidence


class MissingExtraction(AgoraError):
    pass


# -- statistics ----------------------------------------------------------------


class StatsError(AgoraError):
    pass


class DegenerateVariance(StatsError):
    pass


class TooFewObservations(StatsError):
    pass


class DomainError(StatsError, ValueError):
    pass


# -- experiment packs ----------------------------------------------------------


class PackError(AgoraError):
    pass
