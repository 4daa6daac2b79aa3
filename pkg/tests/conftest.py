import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (passed, detail)
    print(f"acceptance {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture
def small_env_config():
    return {
        "seed": 3,
        "cities": ["Alpha"],
        "zones": [
            {"name": "res", "city": "Alpha", "class": "residential", "rect": [0, 0, 1000, 1000]},
            {"name": "work", "city": "Alpha", "class": "commercial", "rect": [1000, 0, 1000, 1000]},
        ],
        "locations": [
            {"name": "home-a", "zone": "res", "kind": "home"},
            {"name": "home-b", "zone": "res", "kind": "home"},
            {"name": "park", "zone": "res", "kind": "residential"},
            {"name": "school", "zone": "work", "kind": "school"},
            {"name": "bank", "zone": "work", "kind": "bank"},
            {"name": "market", "zone": "work", "kind": "market"},
        ],
    }
