"""The twelve acceptance criteria at their stated tolerances and budgets.

Each test prints one PASS/FAIL line; the lines are repeated in the
"acceptance criteria" section of the terminal summary.
"""

import pytest

from zeronoise.acceptance import CRITERIA


@pytest.mark.slow
@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"{c.number:02d}-{c.name}" for c in CRITERIA])
def test_criterion(criterion, acceptance_log):
    result = criterion.run()
    line = result.line()
    print(line)
    acceptance_log.append(line)
    assert result.passed, line
