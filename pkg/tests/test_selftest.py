from selftest import run_tests


def test_selftest_runs(capsys):
    run_tests()
    assert 'Selftest OK' in capsys.readouterr().out
