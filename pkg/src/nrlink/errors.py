"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation accepts."""


class CollisionError(DomainError):
    """Two channels were mapped onto the same resource element."""

    def __init__(self, re, existing, incoming):
        self.re = re
        self.existing = existing
        self.incoming = incoming
        super().__init__(
            f"RE {re} already occupied by {existing!r}, cannot map {incoming!r}"
        )


class ConfigError(ValueError):
    """A simulation configuration is inconsistent or malformed."""


class IoError(OSError):
    """Reading or writing a simulator file failed; the message names the path."""
