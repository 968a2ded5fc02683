"""One test per acceptance criterion, each printing a PASS/FAIL line."""
import pytest

from qfluct import acceptance

from conftest import ACCEPTANCE_LINES


@pytest.mark.parametrize("criterion", acceptance.CRITERIA, ids=lambda c: f"criterion_{c.number:02d}")
def test_criterion(criterion):
    result = criterion.run()
    line = result.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert result.passed, line
