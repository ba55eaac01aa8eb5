"""Exception types shared across the package."""


class SemmapError(Exception):
    """Base class for all semmap errors."""


class MalformedFile(SemmapError):
    """Input file exists but cannot be parsed (bad header, truncated data)."""


class UnsupportedFormat(SemmapError):
    """Input file format is not one we read."""


class InvalidThresholds(SemmapError):
    """Classification thresholds out of order or out of range."""


class DimensionMismatch(SemmapError):
    """Two grids that must share a frame have different shapes."""


class InconsistentEvidence(SemmapError):
    """Evidence violates a structural constraint (e.g. geometry one-of-three)."""


class UnknownPredicate(SemmapError):
    """A rule or query references a predicate outside the vocabulary."""


class RulesParseError(SemmapError):
    """Rules file line could not be parsed."""


class TooLarge(SemmapError):
    """Exact inference refused: free atom count above the enumeration budget."""


class AllWorldsExcluded(SemmapError):
    """Hard clauses are unsatisfiable; evidence is contradictory."""


class NoFeasibleState(SemmapError):
    """Gibbs could not find an assignment satisfying all hard clauses."""


class NotQueried(SemmapError):
    """Requested marginal for an atom that was not part of the query set."""


class NotAdjacent(SemmapError):
    """Operation requires an adjacent unit pair."""


class MissingWalls(SemmapError):
    """No connecting wall could be identified for a pair flagged by SaLe."""


class NotApplicable(SemmapError):
    """Kernel preconditions unmet for the current state; step is skipped."""


class EmptyMap(SemmapError):
    """No free space to initialize a world from."""


class EmptyRoi(SemmapError):
    """Region of interest contains no cells."""


class InvalidSpec(SemmapError):
    """Synthetic floor spec violates its invariants."""


class ConfigError(SemmapError):
    """Run-config file is malformed or holds invalid values."""
