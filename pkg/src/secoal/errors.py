"""Exception types shared across the package."""


class SecoalError(Exception):
    """Base class for all package-specific errors."""


class ZeroDistance(SecoalError):
    """Two nodes coincide; the pathloss channel model is undefined at d = 0."""


class NoDestinations(SecoalError):
    """Closest-destination assignment requested with an empty destination set."""


class InfeasibleNulling(SecoalError):
    """The eavesdropper channels leave no null space to beamform in."""


class NoPower(SecoalError):
    """No residual power is left for the data phase."""


class InvalidCoalitionSize(SecoalError):
    """Coalition size violates the 1-or-more-than-K rule."""


class MismatchedPlayers(SecoalError):
    """Pareto comparison between collections covering different player sets."""


class TooLargeToVerify(SecoalError):
    """Exhaustive stability verification refused for tractability."""


class RoundCapExceeded(SecoalError):
    """Merge-split iteration hit the safety round cap (should not happen)."""


class ParseError(SecoalError):
    """Malformed or unknown-key configuration document."""


class ValidationError(SecoalError):
    """Configuration or state value violates an invariant."""
