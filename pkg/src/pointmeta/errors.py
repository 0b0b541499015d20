"""Exception types shared across the package.

Every error raised on a contract violation names the violated constraint so
that the CLI can print it verbatim and exit with a stable code.
"""


class PointMetaError(Exception):
    """Base class for all package errors."""


class DimensionError(PointMetaError, ValueError):
    """Array shapes do not satisfy an operation's contract."""


class ParameterError(PointMetaError, ValueError):
    """A scalar argument (k, radius, temperature, ...) is out of range."""


class NumericError(PointMetaError, ValueError):
    """An operation produced non-finite values."""


class MissingWeightError(PointMetaError, KeyError):
    """A named parameter required by a spec is absent from the weight set."""

    def __str__(self):  # KeyError quotes its message by default
        return self.args[0] if self.args else ""


class SpecError(PointMetaError, ValueError):
    """A block spec is internally inconsistent."""


class FormatError(PointMetaError, ValueError):
    """A file does not parse under the declared format."""


class EmptyCloudError(FormatError):
    """A cloud file contained no points."""


class RegistryError(PointMetaError, KeyError):
    """An unknown variant name was requested from the registry."""

    def __str__(self):
        return self.args[0] if self.args else ""


class ConfigError(PointMetaError, ValueError):
    """A network configuration violates a structural invariant."""


class WeightsIOError(PointMetaError, ValueError):
    """A weights container does not match the target network."""
