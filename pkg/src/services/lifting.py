"""Hybrid adversarial lifting of descriptors into affine subspaces."""

from typing import List, Optional, Sequence

import numpy as np
from tenacity import RetryError, Retrying, retry_if_exception_type, stop_after_attempt

from ..models.descriptors import AffineSubspace
from ..models.lifting import LiftingConfig, LiftingRecord
from ..utils.exceptions import AllDegenerate, InsufficientDatabase, SpanFailure
from ..utils.logging_config import get_logger
from ..utils.random_streams import counter_stream
from ..utils.validators import as_vector, validate_dimension
from .geometry import DEGENERACY_TOL, orthonormalize, project, project_many

logger = get_logger(__name__)

REPARAMETERIZE_ROUNDS = 16


class _RankDeficient(Exception):
    """Projected samples did not span the full subspace."""


def _sample_adversarial(cfg: LiftingConfig, rng: np.random.Generator,
                        forced: Sequence[int] = ()) -> np.ndarray:
    forced = np.asarray(sorted(set(int(i) for i in forced)), dtype=np.int64)
    if forced.size > cfg.half:
        raise ValueError(f"At most {cfg.half} forced samples, got {forced.size}")
    if forced.size and (forced.min() < 0 or forced.max() >= cfg.database.size):
        raise ValueError("Forced samples must index the database")
    members = cfg.database.partition_members(cfg.partitions)
    if cfg.partitions > 1:
        pool = members[int(rng.integers(0, len(members)))]
    else:
        pool = members[0]
    pool = np.setdiff1d(pool, forced)
    needed = cfg.half - forced.size
    if pool.size < needed:
        raise InsufficientDatabase(
            f"Lifting needs {cfg.half} database samples, sub-database has {pool.size + forced.size}"
        )
    drawn = rng.choice(pool, size=needed, replace=False) if needed else np.empty(0, dtype=np.int64)
    return np.sort(np.concatenate([forced, drawn]))


def lift(d, cfg: LiftingConfig, rng: Optional[np.random.Generator] = None,
         forced_indices: Sequence[int] = ()) -> LiftingRecord:
    """
    Lift a descriptor into an m-dimensional hybrid adversarial subspace.

    The subspace is d + span(a_1 - d, ..., a_{m/2} - d, e_1, ..., e_{m/2})
    with a_i drawn without replacement from the database and e_i uniform in
    the configured value range.

    Args:
        d: Descriptor to conceal
        cfg: Lifting configuration
        rng: Generator to use; defaults to one keyed by cfg.rng_seed
        forced_indices: Database entries that must be among the a_i (used to
            build auxiliary subspaces crossing a given lift)

    Returns:
        Lifting record with the ground truth attached

    Raises:
        InsufficientDatabase: If the database holds fewer than m/2 entries
        DimensionMismatch: If d does not match the database dimension
    """
    original = as_vector(d)
    validate_dimension(cfg.database.n, original.size, "descriptor")
    if cfg.database.size < cfg.half:
        raise InsufficientDatabase(
            f"Lifting needs {cfg.half} database samples, database has {cfg.database.size}"
        )
    rng = rng if rng is not None else counter_stream(cfg.rng_seed)

    indices = _sample_adversarial(cfg, rng, forced_indices)
    adversarial = cfg.database.vectors()[indices]
    low, high = cfg.value_range
    uniform = rng.uniform(low, high, size=(cfg.half, original.size))

    # identical adversarial samples (or one equal to d) add nothing to the span
    offsets = adversarial - original
    unique_rows = np.unique(offsets, axis=0)
    unique_rows = unique_rows[np.linalg.norm(unique_rows, axis=1) > DEGENERACY_TOL]
    directions = np.vstack([unique_rows, uniform]) if unique_rows.size else uniform

    basis = orthonormalize(directions)
    dropped = cfg.m - len(basis)
    if dropped:
        logger.warning(f"Lifting dropped {dropped} degenerate direction(s); subspace dimension is {len(basis)}")
    subspace = AffineSubspace(translation=original, basis=np.vstack(basis))
    return LiftingRecord(
        subspace=subspace,
        adversarial_indices=[int(i) for i in indices],
        original=original,
        dropped_directions=dropped,
    )


def lift_many(descriptors: Sequence, cfg: LiftingConfig) -> List[LiftingRecord]:
    """Lift each descriptor with its own stream split off ``cfg.rng_seed``."""
    return [lift(d, cfg, counter_stream(cfg.rng_seed, i)) for i, d in enumerate(descriptors)]


def _resample_basis(subspace: AffineSubspace, origin: np.ndarray, rng: np.random.Generator,
                    value_range) -> np.ndarray:
    low, high = value_range
    samples = rng.uniform(low, high, size=(subspace.dim, subspace.n))
    directions = project_many(subspace, samples) - origin
    try:
        basis = orthonormalize(directions)
    except AllDegenerate as e:
        raise _RankDeficient(str(e)) from e
    if len(basis) < subspace.dim:
        raise _RankDeficient(f"spanned {len(basis)} of {subspace.dim} dimensions")
    return np.vstack(basis)


def reparameterize(rec: LiftingRecord, rng_seed=None, value_range=(-1.0, 1.0)) -> LiftingRecord:
    """
    Re-parameterize a lifted subspace so it no longer exposes d or a_i.

    The new translation is the projection of a uniform sample e_0 and the new
    basis comes from the projections of m further uniform samples; the point
    set is unchanged.

    Args:
        rec: Lifting record to re-parameterize
        rng_seed: Seed or Generator
        value_range: Interval of the uniform samples

    Returns:
        Record with the new parameterization and the same ground truth

    Raises:
        SpanFailure: If 16 resampling rounds never span the full dimension
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else counter_stream(rng_seed or 0)
    subspace = rec.subspace
    low, high = value_range
    origin = project(subspace, rng.uniform(low, high, size=subspace.n))

    try:
        for attempt in Retrying(
            stop=stop_after_attempt(REPARAMETERIZE_ROUNDS),
            retry=retry_if_exception_type(_RankDeficient),
        ):
            with attempt:
                basis = _resample_basis(subspace, origin, rng, value_range)
    except RetryError as e:
        raise SpanFailure(
            f"Could not span {subspace.dim} dimensions after {REPARAMETERIZE_ROUNDS} rounds"
        ) from e

    return LiftingRecord(
        subspace=AffineSubspace(translation=origin, basis=basis),
        adversarial_indices=list(rec.adversarial_indices),
        original=rec.original,
        dropped_directions=rec.dropped_directions,
    )


def strip_ground_truth(rec: LiftingRecord) -> AffineSubspace:
    """The part of a lifting record that is actually transmitted."""
    return rec.subspace
