from collections import defaultdict

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# acceptance results: criterion -> list of (label, ok, detail)
_ACCEPTANCE = defaultdict(list)


@pytest.fixture
def record():
    """Record one acceptance check and print its verdict line."""
    def _record(criterion, label, ok, detail=""):
        _ACCEPTANCE[criterion].append((label, bool(ok), detail))
        print(f"[criterion {criterion}] {label}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE):
        checks = _ACCEPTANCE[crit]
        ok = all(c[1] for c in checks)
        failed = [f"{label} ({detail})" for label, good, detail in checks if not good]
        extra = "" if ok else "  failing: " + "; ".join(failed)
        tr.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'} "
                      f"({sum(c[1] for c in checks)}/{len(checks)} checks){extra}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
