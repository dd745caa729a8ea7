"""Descriptor and affine subspace types."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

from ..utils.exceptions import DimensionMismatch, GeometryError

# orthonormality is checked loosely here; float32 round trips land near 1e-7
ORTHONORMAL_TOL = 1e-5


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


class DescriptorDType(Enum):
    """Storage type of a descriptor."""
    FLOAT32 = "float32"
    UINT8 = "uint8"


@dataclass(frozen=True, eq=False)
class Descriptor:
    """An n-dimensional local feature descriptor.

    uint8 descriptors keep their integer codes; ``as_array`` promotes them to
    floats k/255 so that all geometry runs on one numeric path.
    """

    values: np.ndarray
    dtype: DescriptorDType = DescriptorDType.FLOAT32

    def __post_init__(self) -> None:
        if self.dtype is DescriptorDType.UINT8:
            codes = np.asarray(self.values)
            if np.issubdtype(codes.dtype, np.floating):
                if not np.all(np.isfinite(codes)):
                    raise GeometryError("Descriptor contains non-finite entries")
                scaled = np.rint(codes * 255.0)
                if np.any(np.abs(scaled - codes * 255.0) > 1e-6) or np.any(codes < 0) or np.any(codes > 1):
                    raise GeometryError("uint8-normalized descriptor entries must equal k/255 in [0, 1]")
                codes = scaled
            values = np.asarray(codes).astype(np.uint8)
        else:
            values = np.asarray(self.values, dtype=np.float32)
            if not np.all(np.isfinite(values)):
                raise GeometryError("Descriptor contains non-finite entries")
        if values.ndim != 1 or values.size == 0:
            raise GeometryError(f"Descriptor must be a nonempty vector, got shape {values.shape}")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def n(self) -> int:
        return int(self.values.size)

    def as_array(self) -> np.ndarray:
        """Float64 view used by every geometric computation."""
        if self.dtype is DescriptorDType.UINT8:
            return self.values.astype(np.float64) / 255.0
        return self.values.astype(np.float64)

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, Descriptor):
            return NotImplemented
        return self.dtype is other.dtype and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.dtype, self.values.tobytes()))


@dataclass(frozen=True, eq=False)
class AffineSubspace:
    """The affine subspace d0 + span(d1, ..., dm) with an orthonormal basis.

    Build instances through ``services.geometry.affine_subspace`` which
    orthonormalizes the directions; the constructor only checks the result.
    """

    translation: np.ndarray
    basis: np.ndarray

    def __post_init__(self) -> None:
        translation = np.asarray(self.translation, dtype=np.float64)
        basis = np.atleast_2d(np.asarray(self.basis, dtype=np.float64))
        if translation.ndim != 1:
            raise GeometryError("Translation must be a vector")
        if basis.shape[1] != translation.size:
            raise DimensionMismatch(
                f"Basis rows have dimension {basis.shape[1]}, translation has {translation.size}"
            )
        if basis.shape[0] < 1:
            raise GeometryError("Subspace needs at least one basis vector")
        if basis.shape[0] >= translation.size:
            raise GeometryError(f"Subspace dimension {basis.shape[0]} must be below ambient {translation.size}")
        gram = basis @ basis.T
        deviation = np.max(np.abs(gram - np.eye(basis.shape[0])))
        if deviation > ORTHONORMAL_TOL:
            raise GeometryError(f"Basis is not orthonormal (max Gram deviation {deviation:.2e})")
        object.__setattr__(self, "translation", _frozen(translation))
        object.__setattr__(self, "basis", _frozen(basis))

    @property
    def n(self) -> int:
        """Ambient dimension."""
        return int(self.translation.size)

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])

    @classmethod
    def from_points(cls, points) -> "AffineSubspace":
        """The smallest subspace through ``points``; the first point is the translation."""
        from ..services.geometry import subspace_through
        return subspace_through(points)

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, AffineSubspace):
            return NotImplemented
        return np.array_equal(self.translation, other.translation) and np.array_equal(self.basis, other.basis)

    __hash__ = object.__hash__


@dataclass(frozen=True, eq=False)
class Dictionary:
    """A finite ordered set of descriptors; the LDP domain and lifting database.

    Entries are stored as float32 rows (the on-disk precision) so that a
    saved dictionary loads back bitwise-equal. Indices are stable identifiers.
    """

    entries: np.ndarray
    metric: "DictionaryMetric" = None  # type: ignore[assignment]
    provenance: Dict[str, Any] = field(default_factory=dict)
    partitions: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        entries = np.atleast_2d(np.asarray(self.entries, dtype=np.float32))
        if entries.shape[0] < 1 or entries.shape[1] < 1:
            raise GeometryError("Dictionary needs at least one nonempty entry")
        if not np.all(np.isfinite(entries)):
            raise GeometryError("Dictionary entries must be finite")
        metric = self.metric or DictionaryMetric.COSINE
        if metric is DictionaryMetric.COSINE:
            norms = np.linalg.norm(entries.astype(np.float64), axis=1)
            if np.max(np.abs(norms - 1.0)) > 1e-6:
                raise GeometryError("Cosine dictionaries need unit-norm entries")
        if np.unique(entries, axis=0).shape[0] != entries.shape[0]:
            raise GeometryError("Dictionary entries must be distinct")
        object.__setattr__(self, "entries", _frozen(entries))
        object.__setattr__(self, "metric", metric)
        if self.partitions is not None:
            partitions = np.asarray(self.partitions, dtype=np.int64)
            if partitions.shape != (entries.shape[0],) or np.any(partitions < 0):
                raise GeometryError("Partition map must assign a nonnegative label per entry")
            object.__setattr__(self, "partitions", _frozen(partitions))

    @property
    def size(self) -> int:
        return int(self.entries.shape[0])

    @property
    def n(self) -> int:
        return int(self.entries.shape[1])

    def __len__(self) -> int:
        return self.size

    def vectors(self) -> np.ndarray:
        """Float64 copy of the entries for geometry."""
        return self.entries.astype(np.float64)

    def partition_members(self, partitions: int) -> List[np.ndarray]:
        """Indices of each sub-database.

        Uses the stored partition map when it has the requested number of
        labels, otherwise a round-robin split.
        """
        if partitions <= 1:
            return [np.arange(self.size)]
        if self.partitions is not None and int(self.partitions.max()) + 1 == partitions:
            return [np.flatnonzero(self.partitions == p) for p in range(partitions)]
        return [np.arange(p, self.size, partitions) for p in range(partitions)]

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, Dictionary):
            return NotImplemented
        same_partitions = (
            (self.partitions is None and other.partitions is None)
            or (self.partitions is not None and other.partitions is not None
                and np.array_equal(self.partitions, other.partitions))
        )
        return (
            self.metric is other.metric
            and self.entries.dtype == other.entries.dtype
            and np.array_equal(self.entries, other.entries)
            and self.provenance == other.provenance
            and same_partitions
        )

    __hash__ = object.__hash__


class DictionaryMetric(Enum):
    """Nearest-neighbor metric of a dictionary."""
    EUCLIDEAN = 0
    COSINE = 1
