import pytest

from mitmscan.engine import MitmMaterial


@pytest.fixture(scope="session")
def material():
    return MitmMaterial.generate()
