class MBTreeError(Exception):
    """Base class for all errors raised by this package."""


class InputError(MBTreeError, ValueError):
    """Malformed or inconsistent input to an operation."""


class ConfigurationError(MBTreeError, ValueError):
    """Invalid user configuration (empty signature set, empty C&C list, ...)."""


class PcapFormatError(MBTreeError, ValueError):
    """The capture file is not a classic pcap file we can decode."""
