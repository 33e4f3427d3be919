import pytest

from dimercorr.validate import SUITES, run_suite


@pytest.mark.parametrize("suite", SUITES)
def test_suite_passes(suite):
    checks = run_suite(suite)
    assert checks
    failed = [(c.name, c.residual, c.tolerance) for c in checks if not c.passed]
    assert not failed


def test_unknown_suite():
    with pytest.raises(ValueError):
        run_suite("nothing")
