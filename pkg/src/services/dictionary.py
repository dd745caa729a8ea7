"""Dictionary construction and exact nearest-neighbor queries."""

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.cluster import kmeans_plusplus
from tqdm import tqdm

from ..config import config
from ..models.descriptors import AffineSubspace, Dictionary, DictionaryMetric
from ..utils.exceptions import DegenerateData, GeometryError
from ..utils.logging_config import get_logger
from ..utils.validators import as_matrix, as_vector, validate_dimension
from .geometry import distances_to_subspace

logger = get_logger(__name__)

# rows of the pairwise distance block computed at once
_BLOCK_CELLS = 1 << 22


def _metric_name(dictionary: Dictionary) -> str:
    return 'cosine' if dictionary.metric is DictionaryMetric.COSINE else 'euclidean'


def nearest_many(dictionary: Dictionary, queries) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exact nearest dictionary entry for every query row.

    Distances are computed pair by pair (no expanded-norm shortcut) so the
    result is identical to a linear scan; ties go to the lowest index.
    Distances below config.zero_distance_snap are reported as exactly zero.

    Returns:
        (indices, distances) arrays, one element per query

    Raises:
        DimensionMismatch: If the query dimension differs from the dictionary
    """
    mat = as_matrix(queries)
    validate_dimension(dictionary.n, mat.shape[1], "query")
    if dictionary.metric is DictionaryMetric.COSINE and np.any(np.linalg.norm(mat, axis=1) == 0):
        raise GeometryError("Cosine nearest neighbor is undefined for a zero query")
    entries = dictionary.vectors()
    metric = _metric_name(dictionary)
    rows_per_block = max(1, _BLOCK_CELLS // max(1, dictionary.size))
    indices = np.empty(mat.shape[0], dtype=np.int64)
    distances = np.empty(mat.shape[0], dtype=np.float64)
    for start in range(0, mat.shape[0], rows_per_block):
        block = cdist(mat[start:start + rows_per_block], entries, metric=metric)
        best = np.argmin(block, axis=1)
        indices[start:start + rows_per_block] = best
        distances[start:start + rows_per_block] = block[np.arange(block.shape[0]), best]
    # 1 - cos leaves rounding residue (possibly negative) on exact hits
    np.maximum(distances, 0.0, out=distances)
    distances[distances < config.zero_distance_snap] = 0.0
    return indices, distances


def nearest(dictionary: Dictionary, q) -> Tuple[int, float]:
    """
    Exact nearest neighbor of one descriptor.

    Returns:
        (index, distance) under the dictionary metric; ties by lowest index
    """
    indices, distances = nearest_many(dictionary, as_vector(q)[None, :])
    return int(indices[0]), float(distances[0])


def ranked_distances(dictionary: Dictionary, subspace: AffineSubspace,
                     snap: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Dictionary indices sorted by ascending distance to a subspace.

    Args:
        dictionary: Dictionary to rank
        subspace: Query subspace
        snap: Distances below this value are set to exactly zero so that exact
            intersections tie and fall back to index order

    Returns:
        (indices, distances) in ascending order, stable in index
    """
    validate_dimension(dictionary.n, subspace.n, "subspace")
    entries = dictionary.vectors()
    block = max(1, _BLOCK_CELLS // dictionary.n)
    distances = np.concatenate([
        distances_to_subspace(subspace, entries[start:start + block])
        for start in range(0, dictionary.size, block)
    ])
    if snap > 0:
        distances[distances < snap] = 0.0
    order = np.argsort(distances, kind='stable')
    return order, distances[order]


def sorted_distances_to_subspace(dictionary: Dictionary, subspace: AffineSubspace) -> List[Tuple[int, float]]:
    """All (index, distance) pairs in ascending distance order."""
    order, distances = ranked_distances(dictionary, subspace)
    return [(int(i), float(dist)) for i, dist in zip(order, distances)]


def _normalize_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0):
        raise DegenerateData("Spherical k-means cannot normalize zero descriptors")
    return mat / norms[:, None]


def build_spherical_kmeans(
    data,
    k: int,
    iters: int = 25,
    seed: int = 0,
    source_id: Optional[str] = None,
    partitions: int = 1
) -> Dictionary:
    """
    Build a cosine dictionary with spherical k-means.

    Centroids are seeded with k-means++ on the unit-normalized data and
    re-normalized after every mean update; points are assigned by maximum
    cosine similarity. Empty clusters are re-seeded from the points with the
    lowest similarity to their centroid.

    Args:
        data: Training descriptors
        k: Number of centroids (at most the number of data points)
        iters: Maximum number of assignment/update rounds
        seed: Seed for k-means++ initialization
        source_id: Corpus identifier recorded in the provenance
        partitions: Number of sub-databases recorded in the partition map

    Returns:
        Dictionary of k unit-norm centroids

    Raises:
        DegenerateData: If the inputs cannot produce k distinct centroids
    """
    X = _normalize_rows(as_matrix(data))
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"k must lie in [1, {X.shape[0]}], got {k}")
    distinct = np.unique(X, axis=0).shape[0]
    if distinct == 1:
        raise DegenerateData("All training descriptors are identical")
    if distinct < k:
        raise DegenerateData(f"Only {distinct} distinct descriptors for k={k} centroids")

    centers, _ = kmeans_plusplus(X, n_clusters=k, random_state=seed)
    centers = _normalize_rows(centers)

    labels = None
    history: List[float] = []
    rounds = 0
    for rounds in tqdm(range(1, iters + 1), desc="spherical k-means", disable=not config.show_progress):
        sims = X @ centers.T
        new_labels = np.argmax(sims, axis=1)
        best = sims[np.arange(X.shape[0]), new_labels]
        history.append(float(best.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels

        sums = np.zeros_like(centers)
        np.add.at(sums, labels, X)
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            logger.warning(f"Re-seeding {empty.size} empty cluster(s) in round {rounds}")
            farthest = np.argsort(best, kind='stable')[:empty.size]
            sums[empty] = X[farthest]
        centers = _normalize_rows(sums)

    entries = _normalize_rows(centers).astype(np.float32)
    logger.info(f"Built spherical k-means dictionary: k={k}, rounds={rounds}, objective={history[-1]:.4f}")
    provenance: Dict[str, Any] = {
        'builder': 'spherical-kmeans',
        'source': source_id,
        'k': int(k),
        'iters': int(iters),
        'seed': int(seed),
        'rounds': int(rounds),
        'objective_history': history,
        'loss': float(X.shape[0] - history[-1]),
    }
    try:
        dictionary = Dictionary(entries=entries, metric=DictionaryMetric.COSINE, provenance=provenance)
    except GeometryError as e:
        raise DegenerateData(f"k-means produced an invalid dictionary: {e}") from e
    if partitions > 1:
        dictionary = with_partitions(dictionary, partitions)
    return dictionary


def from_descriptors(
    descriptors,
    metric: DictionaryMetric = DictionaryMetric.COSINE,
    source_id: Optional[str] = None,
    partitions: int = 1
) -> Dictionary:
    """Use descriptors directly as dictionary entries (normalized for cosine)."""
    mat = as_matrix(descriptors)
    if metric is DictionaryMetric.COSINE:
        mat = _normalize_rows(mat)
    entries = mat.astype(np.float32)
    _, first = np.unique(entries, axis=0, return_index=True)
    if first.size != entries.shape[0]:
        logger.warning(f"Dropping {entries.shape[0] - first.size} duplicate descriptor(s)")
        entries = entries[np.sort(first)]
    dictionary = Dictionary(
        entries=entries,
        metric=metric,
        provenance={'builder': 'descriptors', 'source': source_id},
    )
    return with_partitions(dictionary, partitions) if partitions > 1 else dictionary


def with_partitions(dictionary: Dictionary, partitions: int) -> Dictionary:
    """Attach a round-robin partition map into ``partitions`` sub-databases."""
    labels = np.arange(dictionary.size) % partitions
    provenance = dict(dictionary.provenance)
    provenance['partitions'] = int(partitions)
    return Dictionary(entries=dictionary.entries, metric=dictionary.metric,
                      provenance=provenance, partitions=labels)


def info(dictionary: Dictionary) -> Dict[str, Any]:
    """Summary of a dictionary for display."""
    return {
        'size': dictionary.size,
        'dim': dictionary.n,
        'metric': _metric_name(dictionary),
        'partitions': 1 if dictionary.partitions is None else int(dictionary.partitions.max()) + 1,
        'provenance': dict(dictionary.provenance),
    }


def save(dictionary: Dictionary, path: Union[str, Path]) -> None:
    """Write a dictionary in the LDPD format."""
    from .file_processor import FileProcessor
    FileProcessor(max_file_size_mb=config.max_file_size_mb).save_dictionary(dictionary, path)


def load(path: Union[str, Path]) -> Dictionary:
    """Read a dictionary written by ``save``."""
    from .file_processor import FileProcessor
    return FileProcessor(max_file_size_mb=config.max_file_size_mb).load_dictionary(path)
