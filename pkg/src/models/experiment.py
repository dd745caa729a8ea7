"""Experiment configuration documents.

An experiment is one JSON document. Sections irrelevant to the chosen kind
keep their defaults.
"""

import json
import math
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..utils.exceptions import ConfigurationError

ExperimentKind = Literal[
    "lift-attack-db",
    "lift-attack-cluster",
    "lift-intersections",
    "ldp-verify",
    "ldp-utility",
    "dict-build",
    "bench",
]

EpsilonValue = Union[float, Literal["inf"]]


def _epsilon(value: EpsilonValue) -> float:
    return math.inf if value == "inf" else float(value)


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid')


class SyntheticCorpusSpec(_Section):
    """How to obtain a descriptor corpus."""

    n: int = Field(128, ge=2)
    generator: Literal["gaussian-mixture-on-sphere", "uniform-cube", "file"] = "gaussian-mixture-on-sphere"
    components: int = Field(64, ge=1)
    spread: float = Field(0.05, gt=0)
    size: int = Field(10000, ge=1)
    path: Optional[str] = None


class DictionarySettings(_Section):
    """Where the dictionary (domain K / database W) comes from."""

    source: Literal["corpus", "kmeans", "file"] = "corpus"
    path: Optional[str] = None
    size: int = Field(1000, ge=1)
    iters: int = Field(25, ge=1)
    metric: Literal["cosine", "euclidean"] = "cosine"
    partitions: int = Field(1, ge=1)
    corpus: SyntheticCorpusSpec = Field(default_factory=SyntheticCorpusSpec)


class LiftingSettings(_Section):
    m: int = Field(4, ge=2)
    partitions: int = Field(1, ge=1)
    value_range: Tuple[float, float] = (-1.0, 1.0)

    @field_validator('m')
    @classmethod
    def _even(cls, value: int) -> int:
        if value % 2:
            raise ValueError("m must be even")
        return value


class DatabaseAttackSettings(_Section):
    V_size: int = Field(64, ge=1)
    U_size: int = Field(8, ge=1)


class ClusterAttackSettings(_Section):
    V_size: int = Field(64, ge=2)
    aux_count: int = Field(500, ge=1)
    intersection_tol: float = Field(1e-4, gt=0)
    collision_radius: Optional[float] = Field(None, gt=0)
    public_size: int = Field(10000, ge=1)


class IntersectionSettings(_Section):
    ms: List[int] = Field(default_factory=lambda: [4, 16])
    top_ns: List[int] = Field(default_factory=lambda: [5, 10, 20, 50])
    ratio: float = Field(0.8, gt=0, le=1)

    @field_validator('ms')
    @classmethod
    def _even(cls, values: List[int]) -> List[int]:
        if not values or any(m < 2 or m % 2 for m in values):
            raise ValueError("ms must be nonempty, even and >= 2")
        return values

    @field_validator('top_ns')
    @classmethod
    def _positive(cls, values: List[int]) -> List[int]:
        if not values or any(n < 1 for n in values):
            raise ValueError("top_ns must be nonempty and >= 1")
        return values


class LdpSettings(_Section):
    epsilon: EpsilonValue = 1.0
    m: int = Field(2, ge=1)

    @property
    def epsilon_value(self) -> float:
        return _epsilon(self.epsilon)


class VerifySettings(_Section):
    domain_size: int = Field(6, ge=2)
    dim: int = Field(8, ge=2)
    samples_per_input: int = Field(100000, ge=1)


class UtilitySettings(_Section):
    domain_size: int = Field(256, ge=1)
    dim: int = Field(32, ge=2)
    epsilons: List[EpsilonValue] = Field(default_factory=lambda: [2.0, 6.0, 10.0])
    ms: List[int] = Field(default_factory=lambda: [2])
    keypoints: int = Field(50, ge=4)
    model: Literal["similarity", "homography"] = "similarity"
    noise_px: float = Field(1.0, ge=0)
    outlier_fraction: float = Field(0.0, ge=0, lt=1)
    descriptor_noise: float = Field(0.01, ge=0)
    ransac_iters: int = Field(1000, ge=1)
    inlier_px: float = Field(3.0, gt=0)
    success_px: float = Field(5.0, gt=0)
    min_inliers: int = Field(4, ge=2)
    matcher: Literal["vocabulary", "mutual_nn", "point_to_subspace"] = "vocabulary"

    @property
    def epsilon_values(self) -> List[float]:
        return [_epsilon(e) for e in self.epsilons]


class BenchSettings(_Section):
    domain_sizes: List[int] = Field(default_factory=lambda: [65536, 262144, 1048576])
    dim: int = Field(128, ge=2)
    repetitions: int = Field(10, ge=10)
    queries: int = Field(64, ge=1)
    m: int = Field(8, ge=2)


class ExperimentConfig(_Section):
    """A complete, replayable experiment description."""

    kind: ExperimentKind
    trials: int = Field(100, ge=1)
    seed: int = Field(0, ge=0)
    output: str = "report.json"
    corpus: SyntheticCorpusSpec = Field(default_factory=SyntheticCorpusSpec)
    dictionary: DictionarySettings = Field(default_factory=DictionarySettings)
    lifting: LiftingSettings = Field(default_factory=LiftingSettings)
    database_attack: DatabaseAttackSettings = Field(default_factory=DatabaseAttackSettings)
    cluster_attack: ClusterAttackSettings = Field(default_factory=ClusterAttackSettings)
    intersections: IntersectionSettings = Field(default_factory=IntersectionSettings)
    ldp: LdpSettings = Field(default_factory=LdpSettings)
    verify: VerifySettings = Field(default_factory=VerifySettings)
    utility: UtilitySettings = Field(default_factory=UtilitySettings)
    bench: BenchSettings = Field(default_factory=BenchSettings)

    def with_overrides(self, seed: Optional[int] = None, output: Optional[str] = None) -> "ExperimentConfig":
        update = {}
        if seed is not None:
            update['seed'] = seed
        if output is not None:
            update['output'] = output
        return self.model_copy(update=update) if update else self


def _describe_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item.get('loc', ())) or "<root>"
        parts.append(f"{location}: {item.get('msg')}")
    return "; ".join(parts)


def parse_experiment_config(text: str) -> ExperimentConfig:
    """
    Parse an experiment configuration document.

    Args:
        text: JSON document

    Returns:
        Validated experiment configuration

    Raises:
        ConfigurationError: With line/column for syntax errors and the dotted
            field path for validation errors
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(document, dict):
        raise ConfigurationError("Experiment configuration must be a JSON object")
    try:
        return ExperimentConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid experiment configuration: {_describe_validation_error(e)}") from e


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read and parse an experiment configuration file."""
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigurationError(f"Cannot read configuration {path}: {e}") from e
    return parse_experiment_config(text)


def coerce_corpus_spec(spec) -> SyntheticCorpusSpec:
    """Accept a spec object or a plain mapping."""
    if isinstance(spec, SyntheticCorpusSpec):
        return spec
    return SyntheticCorpusSpec.model_validate(spec)
