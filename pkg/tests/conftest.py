import numpy as np
import pytest

from smlp.datamodel import LabeledDataset
from smlp.features import Gazetteer, extract_features
from smlp.synthetic import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="session")
def gazetteer():
    return Gazetteer.default()


@pytest.fixture(scope="session")
def default_items():
    return generate_synthetic(SyntheticSpec())


@pytest.fixture(scope="session")
def default_dataset(default_items, gazetteer):
    X = np.array([extract_features(inst, gazetteer) for inst, _ in default_items])
    y = np.array([int(c) for _, c in default_items])
    return LabeledDataset(X, y, provenance="synthetic seed 7")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
