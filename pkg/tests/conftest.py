import numpy as np
import pytest

from sigcomplex.signal_io import RawSignature
from sigcomplex.synth import generate_dataset


def make_signature(t, x, y, pen_down=None, **meta):
    t = np.asarray(t, dtype=float)
    if pen_down is None:
        pen_down = np.ones(t.size, bool)
    return RawSignature(t=t, x=x, y=y, pen_down=pen_down, **meta)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Six pen-only users, e-BioSign layout, no development split."""
    root = tmp_path_factory.mktemp("ds_small")
    return generate_dataset(root, seed=11, n_users=6, dev_fraction=0.0)


@pytest.fixture(scope="session")
def mixed_dataset(tmp_path_factory):
    """Four users with pen and finger signatures."""
    root = tmp_path_factory.mktemp("ds_mixed")
    return generate_dataset(root, seed=5, n_users=4, modalities=("pen", "finger"),
                            dev_fraction=0.0)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    Usage: ``criterion(n, ok, detail)``; the test still asserts ``ok``.
    """
    def record(n, ok, detail):
        ACCEPTANCE_LINES[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE_LINES[n])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
