"""Exception types shared across the package."""


class QpirError(Exception):
    """Base class for all package errors."""


class ResourceLimitError(QpirError):
    """A state would exceed the configured qubit cap."""


class UnknownLabelError(QpirError, KeyError):
    """A qubit label or register name does not exist in the state."""


class ArityError(QpirError, ValueError):
    """Gate applied to the wrong number of targets."""


class DimensionMismatchError(QpirError, ValueError):
    """Operands have incompatible dimensions."""


class DomainError(QpirError, ValueError):
    """Argument outside its documented domain."""


class CapabilityError(QpirError, PermissionError):
    """A party tried to use a secret it is not entitled to."""


class OwnershipError(QpirError, PermissionError):
    """A party touched a qubit it does not currently own."""


class InsufficientRoundsError(QpirError, ValueError):
    """Statistical test invoked with too small a sample."""


class DecryptionIntegrityError(QpirError):
    """Ciphertext does not match the key ledger it is decrypted with."""


class ConfigError(QpirError, ValueError):
    """Invalid CLI or config-file input."""
