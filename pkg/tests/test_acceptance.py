"""Acceptance criteria AC-1 ... AC-14 at their stated tolerances.

Each criterion prints one PASS/FAIL line; the lines are also collected
into the pytest terminal summary. Run directly with
``python3 tests/test_acceptance.py`` for the lines alone.
"""

import pytest

from liftlab.acceptance import CRITERIA

RESULTS: list = []


@pytest.mark.parametrize("check", CRITERIA, ids=[f"AC-{n}" for n in range(1, len(CRITERIA) + 1)])
def test_criterion(check):
    result = check()
    RESULTS.append(result)
    print(result.line())
    assert result.passed, result.detail


if __name__ == "__main__":
    import sys

    from liftlab.acceptance import run_all

    sys.exit(0 if all(r.passed for r in run_all()) else 1)
