"""Services package for the ldpfeat toolkit."""

from .file_processor import FileProcessor
from .matchers import Matcher, MatcherFactory, MatcherType
from .experiments import ExperimentRunner

__all__ = [
    'FileProcessor',
    'Matcher',
    'MatcherFactory',
    'MatcherType',
    'ExperimentRunner'
]
