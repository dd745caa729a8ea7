"""Matcher strategies used by the utility pipeline."""

from abc import ABC, abstractmethod
from enum import Enum
from typing import List, Sequence

from ..models.descriptors import Dictionary
from ..models.lifting import LiftingConfig
from ..models.matching import Correspondence, SyntheticScene
from ..models.privacy import PrivatizedFeature
from ..utils.logging_config import get_logger
from .lifting import lift_many, strip_ground_truth
from .matching import DEFAULT_RATIO, match_mutual_nn_features, match_point_to_subspace, match_vocabulary

logger = get_logger(__name__)


class MatcherType(Enum):
    """Enumeration of supported matchers."""
    MUTUAL_NN = "mutual_nn"
    VOCABULARY = "vocabulary"
    POINT_TO_SUBSPACE = "point_to_subspace"


class Matcher(ABC):
    """Abstract base class for matchers."""

    @abstractmethod
    def match(self, scene: SyntheticScene, features: Sequence[PrivatizedFeature],
              dictionary: Dictionary) -> List[Correspondence]:
        """
        Produce putative correspondences for a scene.

        Args:
            scene: The scene (reference side is always raw)
            features: The query keypoints after privatization
            dictionary: The dictionary the query was privatized against

        Returns:
            Correspondences from reference to query keypoints
        """

    @abstractmethod
    def get_matcher_name(self) -> str:
        """Get the name of the matcher."""


class VocabularyMatcher(Matcher):
    """Shared-word matching of privatized queries."""

    def match(self, scene, features, dictionary):
        return match_vocabulary(features, scene.ref_descriptors, dictionary, scene.ref_keypoints)

    def get_matcher_name(self) -> str:
        return MatcherType.VOCABULARY.value


class MutualNNMatcher(Matcher):
    """Mutual nearest neighbors between the reported words and raw references."""

    def match(self, scene, features, dictionary):
        return match_mutual_nn_features(features, scene.ref_descriptors, dictionary, scene.ref_keypoints)

    def get_matcher_name(self) -> str:
        return MatcherType.MUTUAL_NN.value


class PointToSubspaceMatcher(Matcher):
    """Lifts the query descriptors and matches them to raw references."""

    def __init__(self, m: int = 2, ratio: float = DEFAULT_RATIO, seed: int = 0):
        self.m = m
        self.ratio = ratio
        self.seed = seed

    def match(self, scene, features, dictionary):
        cfg = LiftingConfig(m=self.m, database=dictionary, rng_seed=self.seed)
        lifted = [strip_ground_truth(rec) for rec in lift_many(scene.query_descriptors, cfg)]
        return match_point_to_subspace(scene.ref_descriptors, lifted, self.ratio,
                                       scene.query_keypoints, scene.ref_keypoints)

    def get_matcher_name(self) -> str:
        return MatcherType.POINT_TO_SUBSPACE.value


class MatcherFactory:
    """Factory for creating matchers."""

    @staticmethod
    def create_matcher(matcher_type: MatcherType, **kwargs) -> Matcher:
        """
        Create a matcher instance.

        Args:
            matcher_type: Type of matcher to create
            **kwargs: Matcher-specific configuration (m, ratio, seed for
                point-to-subspace matching)

        Returns:
            Matcher instance

        Raises:
            ValueError: If matcher type is not supported
        """
        if isinstance(matcher_type, str):
            matcher_type = MatcherType(matcher_type)
        if matcher_type == MatcherType.VOCABULARY:
            return VocabularyMatcher()
        elif matcher_type == MatcherType.MUTUAL_NN:
            return MutualNNMatcher()
        elif matcher_type == MatcherType.POINT_TO_SUBSPACE:
            return PointToSubspaceMatcher(
                m=kwargs.get('m', 2),
                ratio=kwargs.get('ratio', DEFAULT_RATIO),
                seed=kwargs.get('seed', 0),
            )
        else:
            raise ValueError(f"Unsupported matcher type: {matcher_type}")

    @staticmethod
    def get_available_matchers() -> List[MatcherType]:
        """Get list of available matchers."""
        return list(MatcherType)
