"""Descriptor recovery attacks on adversarial affine subspaces.

The database attack assumes the attacker holds the exact lifting database:
the m/2 adversarial descriptors are the entries at distance zero from the
subspace, and the concealed descriptor is estimated from the next nearest
entries. The clustering attack only holds a public proxy database plus
auxiliary subspaces lifted from the same private database, and uses them to
tell the concealed descriptor's cluster apart from the adversarial ones.
"""

import time
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.cluster import KMeans

from ..config import config
from ..models.attacks import AttackEstimate, ClusterAttackConfig, DatabaseAttackConfig, RecoveryMetrics
from ..models.descriptors import AffineSubspace, Dictionary
from ..models.lifting import LiftingRecord
from ..utils.exceptions import AttackError, InsufficientNeighbors, NoIntersectingAux
from ..utils.logging_config import get_logger
from ..utils.validators import as_vector, validate_dimension
from .dictionary import ranked_distances
from .geometry import point_to_subspace_dist, project, subspace_to_subspace_dist

logger = get_logger(__name__)

# floor for the inverse-distance weights
MIN_WEIGHT_DISTANCE = 1e-12


def _weighted_center(subspace: AffineSubspace, members: np.ndarray, distances: np.ndarray) -> np.ndarray:
    """Projection onto the subspace of the inverse-distance-weighted mean."""
    weights = 1.0 / np.maximum(distances, MIN_WEIGHT_DISTANCE)
    center = (weights[:, None] * members).sum(axis=0) / weights.sum()
    return project(subspace, center)


def _neighbor_estimate(D: AffineSubspace, entries: np.ndarray, hats: np.ndarray,
                       neighbors: np.ndarray, near: np.ndarray, U_size: int):
    """Score V against the adversarial hats, keep the U_size farthest and average them onto D."""
    scores = cdist(entries[neighbors], hats).min(axis=1)
    chosen = np.argsort(-scores, kind='stable')[:U_size]
    return _weighted_center(D, entries[neighbors[chosen]], near[chosen]), scores, neighbors[chosen]


def database_attack(D: AffineSubspace, cfg: DatabaseAttackConfig) -> AttackEstimate:
    """
    Recover the concealed descriptor with the exact lifting database.

    When more than m/2 entries lie on D, the concealed descriptor is itself a
    database entry. Each zero-distance entry is then tried as the concealed
    one, and the entry closest to the neighbor estimate built against the
    others is returned exactly.

    Args:
        D: Attacked subspace
        cfg: Attack settings; cfg.database must be the lifting database

    Returns:
        Estimate whose adversarial_hats are the zero-distance entries other
        than d_hat

    Raises:
        DimensionMismatch: If D and the database disagree on dimension
        InsufficientNeighbors: If fewer than U_size neighbors remain
    """
    started = time.perf_counter()
    validate_dimension(cfg.database.n, D.n, "subspace")
    half = cfg.m // 2
    order, distances = ranked_distances(cfg.database, D, snap=config.zero_distance_snap)
    entries = cfg.database.vectors()

    on_subspace = int(np.sum(distances <= cfg.zero_tol))
    if on_subspace < half:
        logger.warning(
            f"Only {on_subspace} of {half} database entries lie on the subspace; "
            f"the database may not be the lifting database"
        )
    start = max(half, on_subspace)
    rest = order[start:]
    rest_dist = distances[start:]
    keep = rest_dist > cfg.zero_tol
    neighbors = rest[keep][:cfg.V_size]
    near = rest_dist[keep][:cfg.V_size]
    if neighbors.size < cfg.U_size:
        raise InsufficientNeighbors(
            f"Need {cfg.U_size} neighbors after the zero-distance prefix, found {neighbors.size}"
        )

    if on_subspace > half:
        zero = order[:on_subspace]
        best, best_gap, best_fit = None, np.inf, None
        for j, idx in enumerate(zero):
            others = np.delete(zero, j)
            fit = _neighbor_estimate(D, entries, entries[others], neighbors, near, cfg.U_size)
            gap = float(np.linalg.norm(fit[0] - entries[idx]))
            if gap < best_gap:
                best, best_gap, best_fit = j, gap, fit
        adversarial = np.delete(zero, best)
        d_hat = project(D, entries[zero[best]])
        _, scores, selected = best_fit
        logger.info(f"{on_subspace} entries lie on the subspace; entry {int(zero[best])} taken as the descriptor")
    else:
        adversarial = order[:half]
        d_hat, scores, selected = _neighbor_estimate(D, entries, entries[adversarial], neighbors, near, cfg.U_size)
    hats = entries[adversarial]

    elapsed = time.perf_counter() - started
    logger.debug(f"Database attack: U={selected.tolist()} in {elapsed:.4f}s")
    return AttackEstimate(
        d_hat=d_hat,
        adversarial_hats=[h.copy() for h in hats],
        candidate_scores=[(entries[i], float(s)) for i, s in zip(neighbors, scores)],
        recovered_indices=[int(i) for i in adversarial],
        elapsed_s=elapsed,
    )


def intersecting_aux(D: AffineSubspace, aux: Sequence[AffineSubspace], tol: float) -> List[int]:
    """Indices of auxiliary subspaces within ``tol`` of D, excluding D itself."""
    return [
        j for j, Q in enumerate(aux)
        if Q is not D and not Q == D and subspace_to_subspace_dist(D, Q) < tol
    ]


def cluster_attack(D: AffineSubspace, cfg: ClusterAttackConfig) -> AttackEstimate:
    """
    Recover the concealed descriptor with a public proxy database.

    The V_size public entries nearest to D are clustered into k = m/2 + 1
    groups; each group yields a candidate (inverse-distance-weighted mean,
    projected onto D). Candidates near an auxiliary subspace that crosses D
    are likely adversarial descriptors, so the candidate farthest from all of
    them is the estimate.

    Raises:
        NoIntersectingAux: If no auxiliary subspace crosses D; the exception
            carries the k unranked candidates
    """
    started = time.perf_counter()
    validate_dimension(cfg.public_db.n, D.n, "subspace")
    order, distances = ranked_distances(cfg.public_db, D)
    neighbors = order[:cfg.V_size]
    near = distances[:cfg.V_size]
    if neighbors.size < cfg.k:
        raise InsufficientNeighbors(f"Need at least {cfg.k} public entries, found {neighbors.size}")
    members = cfg.public_db.vectors()[neighbors]

    try:
        labels = KMeans(
            n_clusters=cfg.k, init='k-means++', n_init=1,
            max_iter=cfg.kmeans_iters, random_state=cfg.seed,
        ).fit_predict(members)
    except ValueError as e:
        logger.error(f"Clustering the neighborhood failed: {e}")
        raise AttackError(f"Clustering the neighborhood failed: {e}") from e

    candidates = []
    clusters = []
    for label in range(cfg.k):
        mask = labels == label
        if not mask.any():
            continue
        candidates.append(_weighted_center(D, members[mask], near[mask]))
        clusters.append(neighbors[mask])

    crossing = intersecting_aux(D, cfg.aux_subspaces, cfg.intersection_tol)
    if not crossing:
        raise NoIntersectingAux(
            "No auxiliary subspace intersects the attacked subspace", candidates=candidates,
        )
    scores = np.array([
        min(point_to_subspace_dist(cfg.aux_subspaces[j], c) for j in crossing)
        for c in candidates
    ])
    best = int(np.argmax(scores))

    elapsed = time.perf_counter() - started
    logger.debug(f"Cluster attack: scores={np.round(scores, 6).tolist()}, |Q'|={len(crossing)}")
    return AttackEstimate(
        d_hat=candidates[best],
        adversarial_hats=[c for i, c in enumerate(candidates) if i != best],
        candidate_scores=list(zip(candidates, scores.tolist())),
        recovered_indices=[int(i) for i in clusters[best]],
        intersecting_aux=crossing,
        elapsed_s=elapsed,
    )


def collision_rate(records: Sequence[LiftingRecord], cfg: ClusterAttackConfig) -> float:
    """
    Fraction of attacked subspaces whose true descriptor has no collision.

    A collision is an auxiliary subspace crossing the attacked one (other than
    the record's own subspace) that also passes within cfg.radius of the
    concealed descriptor.
    """
    if not records:
        raise ValueError("collision_rate needs at least one record")
    clean = 0
    for rec in records:
        if rec.original is None:
            raise AttackError("Collision rate needs records carrying the original descriptor")
        crossing = intersecting_aux(rec.subspace, cfg.aux_subspaces, cfg.intersection_tol)
        collided = any(point_to_subspace_dist(cfg.aux_subspaces[j], rec.original) < cfg.radius
                       for j in crossing)
        clean += not collided
    return clean / len(records)


def _ratio_match(query: np.ndarray, targets: np.ndarray, ratio: float):
    """Nearest target and whether it passes the ratio test."""
    dists = np.linalg.norm(targets - query, axis=1)
    order = np.argsort(dists, kind='stable')
    if order.size == 1:
        return int(order[0]), True
    best, second = dists[order[0]], dists[order[1]]
    if second == 0:
        return int(order[0]), False
    return int(order[0]), best / second < ratio


def intersection_success_rate(records: Sequence[LiftingRecord], database: Dictionary,
                              top_n: int, ratio: float = 0.8, tol: Optional[float] = None) -> float:
    """
    How often a lifted subspace meets the database only at its forming points.

    For each record the top_n database entries nearest to the subspace are
    matched to the m/2 + 1 forming descriptors (the original and the
    adversarial samples) with the ratio test. A planted sample succeeds when
    it matches its own entry; the original succeeds unless it matches some
    other entry it does not coincide with. The rate pools all forming
    descriptors of all records.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    tol = config.membership_tol if tol is None else tol
    entries = database.vectors()
    successes = 0
    total = 0
    for rec in records:
        if rec.original is None:
            raise AttackError("Intersection test needs records carrying the original descriptor")
        order, _ = ranked_distances(database, rec.subspace, snap=config.zero_distance_snap)
        top = order[:top_n]
        targets = entries[top]
        for idx in rec.adversarial_indices:
            match, accepted = _ratio_match(entries[idx], targets, ratio)
            successes += accepted and top[match] == idx
        match, accepted = _ratio_match(as_vector(rec.original), targets, ratio)
        successes += (not accepted) or np.linalg.norm(targets[match] - rec.original) < tol
        total += len(rec.adversarial_indices) + 1
    return successes / total if total else 0.0


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def recovery_metrics(estimate: AttackEstimate, original,
                     planted_indices: Optional[Iterable[int]] = None) -> RecoveryMetrics:
    """Cosine similarity and L2 error of d_hat against the concealed descriptor."""
    d = as_vector(original)
    exact = None
    if planted_indices is not None:
        exact = sorted(int(i) for i in planted_indices) == sorted(estimate.recovered_indices)
    return RecoveryMetrics(
        cosine=_cosine(estimate.d_hat, d),
        l2_error=float(np.linalg.norm(estimate.d_hat - d)),
        exact_adversarial=exact,
    )


def random_baseline(dictionary: Dictionary, original, rng: np.random.Generator) -> float:
    """Cosine of a uniformly chosen dictionary entry to the concealed descriptor."""
    entry = dictionary.vectors()[int(rng.integers(0, dictionary.size))]
    return _cosine(entry, as_vector(original))
