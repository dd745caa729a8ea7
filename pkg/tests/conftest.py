"""Shared fixtures: seeded streams, small dictionaries and planted liftings."""

import numpy as np
import pytest

from src.config.settings import config
from src.models import Dictionary, DictionaryMetric, LiftingConfig
from src.services.file_processor import FileProcessor
from src.services.lifting import lift
from src.utils import counter_stream


def unit_rows(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    rows = rng.normal(size=(count, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def cosine_dictionary(rng: np.random.Generator, count: int, dim: int) -> Dictionary:
    return Dictionary(entries=unit_rows(rng, count, dim).astype(np.float32), metric=DictionaryMetric.COSINE)


@pytest.fixture(autouse=True)
def evaluation_mode(monkeypatch):
    """Seeded privatization streams are allowed in unit tests."""
    monkeypatch.setattr(config, "evaluation_mode", True)
    return config


@pytest.fixture
def rng():
    return counter_stream(1234)


@pytest.fixture
def small_dictionary():
    """Six cosine words in R^8, the smallest verification domain."""
    return cosine_dictionary(counter_stream(7), 6, 8)


@pytest.fixture
def database():
    """A lifting database of 1000 unit vectors in R^16."""
    return cosine_dictionary(counter_stream(11), 1000, 16)


@pytest.fixture
def planted_records(database):
    """Liftings (m=4) of descriptors drawn near database entries."""
    rng = counter_stream(13)
    cfg = LiftingConfig(m=4, database=database, rng_seed=13)
    entries = database.vectors()
    records = []
    for t in range(20):
        d = entries[int(rng.integers(0, database.size))] + rng.normal(0.0, 0.05, size=database.n)
        records.append(lift(d / np.linalg.norm(d), cfg, counter_stream(13, t)))
    return records


@pytest.fixture
def processor():
    return FileProcessor()
