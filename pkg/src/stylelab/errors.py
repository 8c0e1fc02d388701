"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: configuration and missing
input problems exit 2, numeric failures (NaN/Inf, divergence) exit 3.
"""


class StylelabError(Exception):
    """Base class for all package errors."""


class ShapeError(StylelabError):
    """Tensor shapes do not conform to the requested operation."""


class DomainError(StylelabError):
    """Mathematical domain violation (log of non-positive, zero-norm, ...)."""


class ContractError(StylelabError):
    """A call violated an operation's precondition."""


class ConfigError(StylelabError):
    """Invalid or inconsistent configuration parameters."""


class NotFoundError(StylelabError):
    """A referenced id or file does not exist."""


class MiningError(StylelabError):
    """Not enough qualifying candidates to satisfy a mining request."""


class ParseError(StylelabError):
    """Decision text does not match the expected grammar."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class NumericsError(StylelabError):
    """A forward op produced NaN/Inf, or training diverged."""
