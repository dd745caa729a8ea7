"""Configuration settings for the ldpfeat toolkit."""

import os
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator, Optional
from dotenv import load_dotenv
from ..utils.logging_config import get_logger

logger = get_logger(__name__)

# Load environment variables
load_dotenv()

_TRUE = ('1', 'true', 'yes', 'on')


@dataclass
class AppConfig:
    """Application configuration settings.

    Experiments are configured by JSON documents. Environment overrides are
    LDPFEAT_THREADS (worker count) and LDPFEAT_EVALUATION (allow seeded
    privatization). Logging and progress settings come from the command line.
    """

    # Worker pool
    threads: int = 0  # 0 means os.cpu_count()

    # Privacy
    evaluation_mode: bool = False  # allow seeded privatization streams

    # Numeric tolerances
    membership_tol: float = 1e-6
    degeneracy_tol: float = 1e-9
    zero_distance_snap: float = 1e-12

    # File Processing Configuration
    max_file_size_mb: int = 2048

    # Logging Configuration
    log_level: str = "INFO"
    log_file: Optional[str] = None
    show_progress: bool = False

    def __post_init__(self) -> None:
        """Initialize configuration from environment variables."""
        threads = os.getenv('LDPFEAT_THREADS')
        if threads:
            try:
                self.threads = int(threads)
            except ValueError:
                logger.warning(f"Ignoring non-integer LDPFEAT_THREADS={threads!r}")
        if self.threads <= 0:
            self.threads = os.cpu_count() or 1
        evaluation = os.getenv('LDPFEAT_EVALUATION')
        if evaluation:
            self.evaluation_mode = evaluation.strip().lower() in _TRUE

    @contextmanager
    def evaluation(self) -> Iterator["AppConfig"]:
        """Enable evaluation mode for the duration of a harness run."""
        previous = self.evaluation_mode
        self.evaluation_mode = True
        try:
            yield self
        finally:
            self.evaluation_mode = previous


# Global configuration instance
config = AppConfig()
