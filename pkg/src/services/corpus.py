"""Synthetic descriptor corpora."""

from typing import List, Tuple

import numpy as np
from pydantic import ValidationError

from ..models.descriptors import Descriptor
from ..models.experiment import SyntheticCorpusSpec, coerce_corpus_spec
from ..utils.exceptions import CorpusError, LdpFeatError
from ..utils.logging_config import get_logger
from ..utils.random_streams import counter_stream

logger = get_logger(__name__)

# spawn key of the corpus stream, kept apart from trial streams
_CORPUS_STREAM = 0xC0


def _spec(spec) -> SyntheticCorpusSpec:
    try:
        return coerce_corpus_spec(spec)
    except ValidationError as e:
        raise CorpusError(f"Invalid corpus spec: {e.errors()[0].get('msg')}") from e


def sample_mixture(spec, seed: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Draw a Gaussian mixture on the unit sphere.

    Returns:
        (points, component means, component label of each point)
    """
    spec = _spec(spec)
    rng = counter_stream(seed, _CORPUS_STREAM)
    means = rng.normal(size=(spec.components, spec.n))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    labels = rng.integers(0, spec.components, size=spec.size)
    points = means[labels] + rng.normal(0.0, spec.spread, size=(spec.size, spec.n))
    norms = np.linalg.norm(points, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise CorpusError("Mixture sample collapsed to the origin")
    return points / norms, means, labels


def generate_corpus_matrix(spec, seed: int) -> np.ndarray:
    """Corpus as an (size, n) float64 matrix; deterministic under seed."""
    spec = _spec(spec)
    try:
        if spec.generator == "gaussian-mixture-on-sphere":
            points, _, _ = sample_mixture(spec, seed)
        elif spec.generator == "uniform-cube":
            points = counter_stream(seed, _CORPUS_STREAM).uniform(0.0, 1.0, size=(spec.size, spec.n))
        else:
            if not spec.path:
                raise CorpusError("A file corpus needs a path")
            from ..di.container import container
            points = container.get_file_processor().load_descriptor_matrix(spec.path)
            if points.shape[1] != spec.n:
                raise CorpusError(f"Corpus file has dimension {points.shape[1]}, expected {spec.n}")
            points = points[:spec.size]
    except LdpFeatError:
        raise
    except Exception as e:
        logger.error(f"Corpus generation failed: {e}")
        raise CorpusError(f"Corpus generation failed: {e}") from e
    logger.info(f"Generated {points.shape[0]} {spec.generator} descriptors in R^{spec.n}")
    return points


def generate_corpus(spec, seed: int) -> List[Descriptor]:
    """
    Generate a descriptor corpus.

    Args:
        spec: SyntheticCorpusSpec or an equivalent mapping
        seed: Master seed

    Returns:
        The descriptors, identical for identical (spec, seed)

    Raises:
        CorpusError: If the spec is invalid (size 0, spread <= 0, ...)
    """
    return [Descriptor(values=row) for row in generate_corpus_matrix(spec, seed)]
