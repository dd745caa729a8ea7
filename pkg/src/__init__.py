"""ldpfeat - privacy of local feature descriptors: lifting, attacks and LDP-Feat."""

__version__ = "1.0.0"
__description__ = "Adversarial lifting attacks and locally differentially private feature release"

from .config import config
from .models import (
    Descriptor,
    AffineSubspace,
    Dictionary,
    LiftingConfig,
    LdpConfig,
    PrivatizedFeature,
    ExperimentConfig
)
from .services import FileProcessor, ExperimentRunner
from .utils import (
    LdpFeatError,
    ConfigurationError,
    setup_logging,
    get_logger
)
from .di import container

__all__ = [
    '__version__',
    '__description__',
    'config',
    'Descriptor',
    'AffineSubspace',
    'Dictionary',
    'LiftingConfig',
    'LdpConfig',
    'PrivatizedFeature',
    'ExperimentConfig',
    'FileProcessor',
    'ExperimentRunner',
    'LdpFeatError',
    'ConfigurationError',
    'setup_logging',
    'get_logger',
    'container'
]
