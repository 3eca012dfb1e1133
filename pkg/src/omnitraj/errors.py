"""Exception taxonomy shared by all engine modules."""


class OmniTrajError(Exception):
    """Base class; `code` is the stable machine-readable identifier."""

    code = "error"


class ParameterError(OmniTrajError):
    """Caller passed an argument outside the documented domain."""

    code = "parameter"


class DegenerateInputError(ParameterError):
    """Geometry collapsed to a point or otherwise carries no extent."""

    code = "degenerate"


class ShapeError(OmniTrajError):
    """Tensor or matrix dimensions do not line up."""

    code = "shape"


class NumericError(OmniTrajError):
    """NaN/Inf appeared where a finite value is required."""

    code = "numeric"


class VocabularyError(OmniTrajError):
    """A road or region id falls outside the embedding table."""

    code = "vocabulary"


class ConfigError(OmniTrajError):
    """Artifacts are mutually inconsistent (fingerprints, vocab sizes, ...)."""

    code = "config"


class UnsupportedSubsetError(ConfigError):
    """No fusion projector was trained for the requested modality subset."""

    code = "unsupported_subset"

    def __init__(self, requested: str, supported: list[str]):
        super().__init__(
            f"unsupported modality subset {requested!r}; supported: {supported}"
        )
        self.requested = requested
        self.supported = supported


class DataError(OmniTrajError):
    """A dataset record is missing a required field or view."""

    code = "data"


class GenerationError(OmniTrajError):
    """Synthetic data generation cannot proceed (e.g. disconnected network)."""

    code = "generation"
