import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def fixture_csv():
    from pathlib import Path
    return str(Path(__file__).parent / "fixtures" / "synthetic200.csv")
