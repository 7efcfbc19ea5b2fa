"""Exception hierarchy shared across the package.

Every domain error raised by whalesift derives from :class:`WhalesiftError`
so callers (and the CLI) can distinguish domain failures from bugs.
"""


class WhalesiftError(Exception):
    """Base class for all domain errors raised by this package."""
