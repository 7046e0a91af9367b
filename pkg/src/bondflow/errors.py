"""Exception types shared across the package."""

from __future__ import annotations


class ConfigError(ValueError):
    """Raised for invalid, contradictory, or unusable configuration."""


class ProviderHardFailure(RuntimeError):
    """Raised when a decision provider fails in a way retries cannot fix.

    Examples: rejected credentials, a structurally malformed gateway reply.
    A hard failure aborts the batch after partial logs are flushed; it is
    never silently converted into decision outcomes.
    """
