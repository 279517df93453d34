"""Link-level simulator for the 5G NR physical layer."""

from nrlink.errors import CollisionError, ConfigError, DomainError, IoError

__version__ = "0.1.0"

__all__ = ["CollisionError", "ConfigError", "DomainError", "IoError", "__version__"]
