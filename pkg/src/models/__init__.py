"""Data models package for the ldpfeat toolkit."""

from .descriptors import (
    Descriptor,
    DescriptorDType,
    AffineSubspace,
    Dictionary,
    DictionaryMetric
)
from .lifting import LiftingConfig, LiftingRecord
from .privacy import LdpConfig, PrivatizedFeature, LdpVerdict
from .attacks import (
    DatabaseAttackConfig,
    ClusterAttackConfig,
    AttackEstimate,
    RecoveryMetrics
)
from .matching import (
    Correspondence,
    CorrespondenceSource,
    TransformModel,
    SyntheticScene,
    RansacParams,
    RansacResult,
    UtilityMetrics
)
from .experiment import (
    ExperimentConfig,
    SyntheticCorpusSpec,
    parse_experiment_config,
    load_experiment_config
)

__all__ = [
    'Descriptor',
    'DescriptorDType',
    'AffineSubspace',
    'Dictionary',
    'DictionaryMetric',
    'LiftingConfig',
    'LiftingRecord',
    'LdpConfig',
    'PrivatizedFeature',
    'LdpVerdict',
    'DatabaseAttackConfig',
    'ClusterAttackConfig',
    'AttackEstimate',
    'RecoveryMetrics',
    'Correspondence',
    'CorrespondenceSource',
    'TransformModel',
    'SyntheticScene',
    'RansacParams',
    'RansacResult',
    'UtilityMetrics',
    'ExperimentConfig',
    'SyntheticCorpusSpec',
    'parse_experiment_config',
    'load_experiment_config'
]
