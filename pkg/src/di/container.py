"""Dependency injection container for the ldpfeat toolkit."""

from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from ..config import config
from ..services import ExperimentRunner, FileProcessor
from ..utils.exceptions import ConfigurationError
from ..utils.logging_config import get_logger

logger = get_logger(__name__)


class DIContainer:
    """Dependency injection container."""

    def __init__(self):
        """Initialize the container."""
        self._services = {}
        self._executor: Optional[ThreadPoolExecutor] = None
        self._initialize_services()

    def _initialize_services(self) -> None:
        """Initialize all services."""
        try:
            self._services['file_processor'] = FileProcessor(
                max_file_size_mb=config.max_file_size_mb
            )
            logger.debug("All services initialized successfully")
        except Exception as e:
            logger.error(f"Failed to initialize services: {str(e)}")
            raise ConfigurationError(f"Service initialization failed: {str(e)}") from e

    def get_file_processor(self) -> FileProcessor:
        """Get file processor service."""
        return self._services['file_processor']

    def get_executor(self) -> Optional[ThreadPoolExecutor]:
        """Get the trial worker pool (None when a single thread is configured)."""
        if config.threads <= 1:
            return None
        if self._executor is None:
            logger.info(f"Starting worker pool with {config.threads} threads")
            self._executor = ThreadPoolExecutor(max_workers=config.threads, thread_name_prefix="ldpfeat")
        return self._executor

    def get_experiment_runner(self) -> ExperimentRunner:
        """Get an experiment runner wired to the shared services."""
        return ExperimentRunner(self.get_file_processor(), self.get_executor())

    def shutdown(self) -> None:
        """Stop the worker pool, if one was started."""
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None


# Global container instance
container = DIContainer()
