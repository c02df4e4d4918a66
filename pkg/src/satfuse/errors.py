"""Shared exception types for the satisfaction-prediction pipeline."""


class PipelineError(Exception):
    """Base class for recoverable pipeline failures (exit code 1 at the CLI)."""


class ConfigError(PipelineError):
    """Invalid or inconsistent experiment configuration (exit code 2 at the CLI)."""


class FormatError(PipelineError):
    """A persisted artifact does not conform to its on-disk format."""


class ProviderError(PipelineError):
    """An embedding provider failed permanently.

    ``failed_ids`` lists the review ids whose embeddings could not be resolved.
    """

    def __init__(self, message, failed_ids=()):
        super().__init__(message)
        self.failed_ids = list(failed_ids)


class TransientProviderError(ProviderError):
    """A retryable provider failure (connection trouble, 429/5xx responses)."""
