"""cgate exceptions.

Every exception carries a stable ``code`` used by the CLI error line and by
error responses on the wire.
"""


class CGateError(Exception):
    """Base exception for cgate."""

    code = "cgate_error"


class DatasetIOError(CGateError):
    """A dataset file is missing, unreadable or not valid JSON lines."""

    code = "io_error"


class SchemaMismatchError(CGateError):
    """A schema hash or feature layout does not match the expected one."""

    code = "schema_mismatch"


class LeakageError(CGateError):
    """Encoder fitting was attempted on test-tagged data."""

    code = "leakage"


class DegenerateLabelsError(CGateError):
    """Training labels contain a single class."""

    code = "degenerate_labels"


class ArtifactError(CGateError):
    """A model or policy artifact is malformed."""

    code = "bad_artifact"


class ArtifactVersionError(ArtifactError):
    """An artifact declares a format version this build cannot read."""

    code = "artifact_version"


class DimensionError(CGateError):
    """A feature vector does not match the model's input width."""

    code = "dimension_mismatch"


class SplitError(CGateError):
    """A dataset cannot be split by user."""

    code = "cannot_split"


class ProvenanceError(CGateError):
    """A dataset was logged under an active gating policy."""

    code = "provenance"


class CalibrationError(CGateError):
    """Threshold calibration has no valid answer for the inputs."""

    code = "calibration"


class ModalityError(CGateError):
    """The hybrid model was given a record without code context."""

    code = "missing_context"


class ClosedLoopError(CGateError):
    """Closed-loop generation was requested with dependence disabled."""

    code = "use_generate"


class SynthConfigError(CGateError):
    """A synthetic world configuration cannot be generated."""

    code = "bad_world"


class ConfigurationError(CGateError):
    """Configuration-related errors."""

    code = "config"


class ConnectionError(CGateError):
    """Connection-related errors."""

    code = "connection_refused"


class BadRequestError(CGateError):
    """A request line could not be parsed or validated."""

    code = "bad_request"

    def __init__(self, message: str, request_id: str | None = None):
        super().__init__(message)
        self.request_id = request_id
