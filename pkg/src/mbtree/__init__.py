"""MBTree: host-level MLTree signatures for encrypted RAT C&C detection."""

__version__ = "0.1.0"

from .errors import ConfigurationError, InputError, MBTreeError, PcapFormatError

__all__ = [
    "ConfigurationError",
    "InputError",
    "MBTreeError",
    "PcapFormatError",
    "__version__",
]
