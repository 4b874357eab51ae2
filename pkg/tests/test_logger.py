import logging

import pytest

from lib.core.logger import TrialLogger, setup_logging


def test_trial_table(tmp_path):
    path = tmp_path / "runs" / "trials.csv"
    trials = TrialLogger(str(path))
    trials.log_trial(trial=0, path_len=3.0, realized=6.0, optimal=6.0)
    trials.log_trial(trial=1, path_len=0.0, realized=0.0, optimal=0.0, extra="weg")
    trials.flush()
    lines = path.read_text().splitlines()
    assert lines == ["trial,path_len,realized,optimal", "0,3.0,6.0,6.0", "1,0.0,0.0,0.0"]


def test_missing_column():
    with pytest.raises(KeyError):
        TrialLogger().log_trial(trial=0, path_len=1.0)


def test_setup_logging_level():
    setup_logging("debug")
    assert logging.getLogger().level == logging.DEBUG
    setup_logging("WARNING")
    assert logging.getLogger().level == logging.WARNING
