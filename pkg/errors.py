"""
errors.py - exception hierarchy shared by every module.

ValidationError subclasses map to CLI exit code 1, FormatError subclasses
(and OSError) to exit code 2.
"""


class RWSError(Exception):
    """Base class for all toolkit errors."""


# ============================================================================
# VALIDATION ERRORS (exit 1)
# ============================================================================
class ValidationError(RWSError):
    pass


class DimensionError(ValidationError):
    pass


class ArchitectureMismatchError(ValidationError):
    pass


class FingerprintMismatchError(ValidationError):
    def __init__(self, expected: str, actual: str, what: str = "signature"):
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"fingerprint mismatch for {what}: target={expected} got={actual}"
        )


class QuantizationError(ValidationError):
    pass


class CorruptionSpecError(ValidationError):
    pass


class DivergenceError(ValidationError):
    pass


# ============================================================================
# FORMAT ERRORS (exit 2)
# ============================================================================
class FormatError(RWSError):
    pass


class CheckpointParseError(FormatError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{message} [{field}]")


class IdxFormatError(FormatError):
    pass
