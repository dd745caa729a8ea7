"""Utilities package for the ldpfeat toolkit."""

from .exceptions import (
    LdpFeatError,
    ConfigurationError,
    GeometryError,
    DimensionMismatch,
    AllDegenerate,
    LiftingError,
    InsufficientDatabase,
    SpanFailure,
    PrivacyError,
    EmptyDictionary,
    DomainTooLarge,
    DictionaryError,
    DegenerateData,
    FileProcessingError,
    FileSizeError,
    CorruptFile,
    VersionUnsupported,
    AttackError,
    InsufficientNeighbors,
    NoIntersectingAux,
    MatchingError,
    InsufficientCandidates,
    CorpusError,
    ExperimentError
)

from .validators import (
    validate_file_size,
    as_vector,
    as_matrix,
    validate_dimension,
    validate_epsilon
)

from .logging_config import (
    setup_logging,
    get_logger
)

from .random_streams import (
    counter_stream,
    derive_seed,
    resolve_stream,
    SecureStream
)

__all__ = [
    # Exceptions
    'LdpFeatError',
    'ConfigurationError',
    'GeometryError',
    'DimensionMismatch',
    'AllDegenerate',
    'LiftingError',
    'InsufficientDatabase',
    'SpanFailure',
    'PrivacyError',
    'EmptyDictionary',
    'DomainTooLarge',
    'DictionaryError',
    'DegenerateData',
    'FileProcessingError',
    'FileSizeError',
    'CorruptFile',
    'VersionUnsupported',
    'AttackError',
    'InsufficientNeighbors',
    'NoIntersectingAux',
    'MatchingError',
    'InsufficientCandidates',
    'CorpusError',
    'ExperimentError',
    
    # Validators
    'validate_file_size',
    'as_vector',
    'as_matrix',
    'validate_dimension',
    'validate_epsilon',
    
    # Logging
    'setup_logging',
    'get_logger',

    # Randomness
    'counter_stream',
    'derive_seed',
    'resolve_stream',
    'SecureStream'
]
