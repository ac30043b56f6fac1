"""Exception hierarchy shared across the package."""


class RankfuseError(Exception):
    """Base class for all package errors."""


# --- profile validation ---

class ProfileError(RankfuseError):
    """A profile document violates a structural or value invariant."""


class ProfileSchemaError(ProfileError):
    """Document is not structurally a profile (missing/mistyped fields)."""


class EmptyLayerError(ProfileError):
    """Layer has fewer than 2 channels (rank grid needs n - 1 > 0)."""


class NegativeValueError(ProfileError):
    """Magnitude or importance value below zero."""


class LengthMismatchError(ProfileError):
    """Magnitude and importance vectors differ in length."""


class NonFiniteError(ProfileError):
    """NaN or infinity in a profile vector."""


# --- budgets ---

class BudgetInfeasibleError(RankfuseError):
    """Keep target is 0 or the full channel count (degenerate selection)."""


class BudgetExceedsLayerError(RankfuseError):
    """A per-layer keep budget exceeds the layer's channel count."""


# --- features ---

class OutOfRangeError(RankfuseError):
    """Scalar argument outside its documented domain."""


class InvalidInitError(RankfuseError):
    """Logistic-map initial point outside (0, 1)."""


class TooShortError(RankfuseError):
    """Orbit too short for the requested statistic."""


class BadWindowError(RankfuseError):
    """Smoothing window even or not larger than the polynomial order."""


class WindowTooLargeError(RankfuseError):
    """Input shorter than the smoothing window."""


class UnknownKindError(RankfuseError):
    """Feature spec names a kind the generator does not know."""


# --- fusion ---

class NonPositiveFeatureError(RankfuseError):
    """Feature matrix contains an entry <= 0 (breaks exponent fusion)."""


class MisalignedError(RankfuseError):
    """Feature rows / selection indices do not match the profile layout."""


# --- oracle protocol ---

class OracleError(RankfuseError):
    """Base class for evaluation-oracle failures."""


class ProtocolError(OracleError):
    """Malformed or out-of-contract message on the wire."""


class RemoteFailureError(OracleError):
    """Remote evaluator reported an error."""


class OracleTimeoutError(OracleError):
    """Remote evaluator did not answer within the deadline."""


# --- analysis ---

class TooFewError(RankfuseError):
    """Not enough variants/cells for the requested statistic."""


class GridTooCoarseError(RankfuseError):
    """Sample grid too small for the requested expansion sweep."""


# --- experiment ---

class ConfigError(RankfuseError):
    """Experiment configuration invalid or unresolvable."""
