"""System-level simulator for multicast MMSE precoding on a multibeam HTS forward link."""

__version__ = "0.1.0"
