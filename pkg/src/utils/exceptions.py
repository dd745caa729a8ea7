"""Custom exceptions for the ldpfeat toolkit."""

from typing import Any, List, Optional


class LdpFeatError(Exception):
    """Base exception for the ldpfeat toolkit."""
    pass


class ConfigurationError(LdpFeatError):
    """Raised when there's a configuration issue."""
    pass


class GeometryError(LdpFeatError):
    """Raised when a subspace or projection cannot be formed."""
    pass


class DimensionMismatch(GeometryError):
    """Raised when vector and subspace dimensions disagree."""
    pass


class AllDegenerate(GeometryError):
    """Raised when every input vector is linearly dependent on the others."""
    pass


class LiftingError(LdpFeatError):
    """Raised when a descriptor cannot be lifted."""
    pass


class InsufficientDatabase(LiftingError):
    """Raised when the lifting database holds fewer than m/2 entries."""
    pass


class SpanFailure(LiftingError):
    """Raised when re-parameterization cannot recover a full-rank basis."""
    pass


class PrivacyError(LdpFeatError):
    """Raised when the privacy mechanism cannot run."""
    pass


class EmptyDictionary(PrivacyError):
    """Raised when privatizing against an empty domain."""
    pass


class DomainTooLarge(PrivacyError):
    """Raised when an exhaustive check would enumerate too many subsets."""
    pass


class DictionaryError(LdpFeatError):
    """Raised when a dictionary cannot be built or served."""
    pass


class DegenerateData(DictionaryError):
    """Raised when the training data cannot produce distinct centroids."""
    pass


class FileProcessingError(LdpFeatError):
    """Raised when there's an error processing files."""
    pass


class FileSizeError(FileProcessingError):
    """Raised when file size exceeds limits."""
    pass


class CorruptFile(FileProcessingError):
    """Raised when a binary file has a bad magic number or length."""
    pass


class VersionUnsupported(FileProcessingError):
    """Raised when a binary file was written by an unknown format version."""
    pass


class AttackError(LdpFeatError):
    """Raised when an inversion attack cannot produce an estimate."""
    pass


class InsufficientNeighbors(AttackError):
    """Raised when too few database neighbors survive selection."""
    pass


class NoIntersectingAux(AttackError):
    """Raised when no auxiliary subspace intersects the attacked one.

    The unranked candidate centers are kept on the exception so that a
    caller may fall back to reporting all of them.
    """

    def __init__(self, message: str, candidates: Optional[List[Any]] = None):
        super().__init__(message)
        self.candidates = candidates or []


class MatchingError(LdpFeatError):
    """Raised when matching or verification fails."""
    pass


class InsufficientCandidates(MatchingError):
    """Raised when RANSAC gets fewer correspondences than a minimal sample."""
    pass


class CorpusError(LdpFeatError):
    """Raised when a synthetic corpus specification is invalid."""
    pass


class ExperimentError(LdpFeatError):
    """Raised when an experiment trial fails."""

    def __init__(self, message: str, trial: Optional[int] = None):
        super().__init__(message if trial is None else f"trial {trial}: {message}")
        self.trial = trial
