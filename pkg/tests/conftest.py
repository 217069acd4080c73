import numpy as np
import pytest

from decaf.fingerprint import Featurizer
from decaf.io.config import RunConfig

# criterion number -> list of (ok, detail); filled by test_acceptance
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture(scope="session")
def featurizer():
    return Featurizer.from_config(RunConfig())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        rows = ACCEPTANCE[k]
        ok = all(r[0] for r in rows)
        failed = [d for good, d in rows if not good]
        detail = "; ".join(failed) if failed else "; ".join(d for _, d in rows[:3])
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
