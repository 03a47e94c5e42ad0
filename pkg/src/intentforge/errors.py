"""Exception hierarchy shared by every engine module and the CLI."""

from __future__ import annotations


class IntentForgeError(Exception):
    """Base class for all errors raised by intentforge."""


class OutOfBounds(IntentForgeError, IndexError):
    """A lattice cell lies outside the lattice."""


class DimensionError(IntentForgeError, ValueError):
    """Two lattice-shaped arrays do not have the same shape."""


class Unreachable(IntentForgeError):
    """No walkable path connects the requested endpoints."""


class ModelError(IntentForgeError, ValueError):
    """A model component cannot be evaluated (e.g. degenerate covariance)."""


class DomainError(IntentForgeError, ValueError):
    """A probability term was requested outside its domain."""


class InputError(IntentForgeError, ValueError):
    """User-supplied input is missing or inconsistent."""


class SceneFormatError(InputError):
    """A scene or result document cannot be parsed."""


class ConfigError(IntentForgeError, ValueError):
    """A configuration value is invalid."""


class MetricError(IntentForgeError, ValueError):
    """A metric was asked for on empty or malformed input."""


class PredictionError(IntentForgeError):
    """No hypothesis for an agent has finite likelihood."""


class GenerationError(IntentForgeError):
    """Synthetic scene generation failed within its attempt budget."""


class InferenceError(IntentForgeError):
    """The MCMC chain reached an inconsistent state."""
