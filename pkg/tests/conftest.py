import sys
from functools import lru_cache
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from vencoord.config import load_fixture  # noqa: E402
from vencoord.simulator import run_to_quiescence  # noqa: E402

ACCEPTANCE_LINES: list = []


@lru_cache(maxsize=None)
def run_case(name: str):
    cfg = load_fixture(name)
    return cfg, run_to_quiescence(cfg.network, cfg.orders)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
