import math
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_RESULTS: dict = {}
# conftest is imported when the session starts
SESSION_START = time.perf_counter()

TWO_PI = 2.0 * math.pi
OMEGA0 = TWO_PI * 1e5
OMEGA_I = TWO_PI * 50.0
DENSITY = 8570.0


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {key}: {detail}")
