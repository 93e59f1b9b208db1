import logging

import numpy as np
import pytest

from lrst.utils.dataset import TrialDataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240301)


@pytest.fixture
def separated():
    """x = (1, 2), y = (3, 4) at one visit and one outcome."""
    return TrialDataset(
        arm_x_values=np.array([1.0, 2.0]).reshape(2, 1, 1),
        arm_y_values=np.array([3.0, 4.0]).reshape(2, 1, 1),
        visit_labels=["78"],
        outcome_labels=["score"],
    )


@pytest.fixture
def all_tied():
    return TrialDataset(
        arm_x_values=np.full((2, 1, 1), 5.0),
        arm_y_values=np.full((2, 1, 1), 5.0),
        visit_labels=["78"],
        outcome_labels=["score"],
    )


@pytest.fixture
def write_csv(tmp_path):
    def write(text, name="trial.csv"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    return write


@pytest.fixture(autouse=True)
def reset_lrst_logger():
    """The CLI installs its own handler on the package logger; hand records back to caplog afterwards."""
    yield
    logger = logging.getLogger("lrst")
    logger.handlers.clear()
    logger.propagate = True
    logger.setLevel(logging.NOTSET)
