"""Exception hierarchy shared by the whole kit.

The CLI maps these onto exit codes: NumericsError exits 2, every other
RfrlError exits 1.
"""


class RfrlError(Exception):
    """Base class for all errors raised by rfrlkit."""


class ShapeError(RfrlError):
    """Operand shapes are incompatible with the requested operation."""


class ContractError(RfrlError):
    """An argument violates a documented precondition."""


class NumericsError(RfrlError):
    """A computation produced (or received) non-finite values."""


class ConfigError(RfrlError):
    """An experiment or model configuration is invalid."""


class FormatError(RfrlError):
    """A binary or text file does not match its expected format."""


class DatasetError(RfrlError):
    """A dataset is structurally unusable (empty class, too few samples...)."""
