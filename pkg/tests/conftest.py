import pytest

from gramshield.config import Config
from gramshield.datagen import campus_catalog
from gramshield.model import build_model


@pytest.fixture(scope="session")
def campus():
    return campus_catalog()


@pytest.fixture(scope="session")
def campus_model(campus):
    return build_model(campus, Config())
