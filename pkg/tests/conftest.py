import pytest

from vegplan.dataio import write_dataset
from vegplan.synthetic import generate_dataset


@pytest.fixture(scope="session")
def synth():
    """One generated dataset plus its true demand curves."""
    return generate_dataset(seed=11)


@pytest.fixture(scope="session")
def dataset(synth):
    return synth[0]


@pytest.fixture(scope="session")
def disk_paths(tmp_path_factory, dataset):
    """The session dataset written out as the four input CSVs."""
    out = tmp_path_factory.mktemp("inputs")
    return write_dataset(dataset, out)
