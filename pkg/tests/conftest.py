import sys
from pathlib import Path

import liftlab

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(liftlab.__file__).parent / "fixtures"


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for result in RESULTS:
            terminalreporter.write_line(result.line())
