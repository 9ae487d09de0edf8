"""Exception hierarchy. Everything raised on purpose derives from PeriopError."""


class PeriopError(Exception):
    """Base class for domain errors (CLI maps these to exit code 1)."""


# -- kinematics ---------------------------------------------------------------

class UnknownVariant(PeriopError):
    pass


class InvalidGeometry(PeriopError):
    pass


class DimensionMismatch(PeriopError):
    pass


class UnknownPhalanx(PeriopError):
    pass


# -- linkage ------------------------------------------------------------------

class NotAssemblable(PeriopError):
    pass


class BranchJump(PeriopError):
    pass


class SingularConfiguration(PeriopError):
    pass


# -- contact / tactile --------------------------------------------------------

class ForceLimitExceeded(PeriopError):
    pass


class SensorMismatch(PeriopError):
    pass


class WrongSensorSet(PeriopError):
    pass


class OutOfBounds(PeriopError):
    pass


# -- wire / session -----------------------------------------------------------

class CountOutOfRange(PeriopError):
    pass


class StreamStalled(PeriopError):
    def __init__(self, stream_id: str, message: str = ""):
        self.stream_id = stream_id
        super().__init__(message or f"stream stalled: {stream_id}")


class MissingStream(PeriopError):
    pass


class IoFailure(PeriopError):
    pass


class BadMagic(PeriopError):
    pass


class VersionUnsupported(PeriopError):
    pass


class CorruptIndex(PeriopError):
    pass


class CorruptChunk(PeriopError):
    pass


# -- export / metrics ---------------------------------------------------------

class TooShort(PeriopError):
    pass


class BadHorizon(PeriopError):
    pass


class InvalidConfig(PeriopError):
    pass


class EmptyInput(PeriopError):
    pass


class WrongStageCount(PeriopError):
    pass


class RateOutOfRange(PeriopError):
    pass


class EmptyStage(PeriopError):
    pass


class ConfigError(PeriopError):
    pass
