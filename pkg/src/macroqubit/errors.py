"""Exception types raised across the package."""


class MacroQubitError(Exception):
    """Base class for all package errors."""


class CutoffError(MacroQubitError, ValueError):
    """A photon number lies outside the truncated Fock space."""


class IncompatibleSpaceError(MacroQubitError, ValueError):
    """Two objects live on different truncated spaces or polarization bases."""


class NormalizationError(MacroQubitError, ValueError):
    """A state that must be unit-norm is not."""


class InvariantError(MacroQubitError, ValueError):
    """A numerical invariant (hermiticity, unitarity, positivity, ...) is violated."""


class TruncationError(MacroQubitError):
    """The requested cutoff cannot hold the state within the tail tolerance."""


class FilterError(MacroQubitError):
    """Post-selection left (numerically) nothing to renormalize."""
