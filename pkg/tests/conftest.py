import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vqnn_inversion.datasets import write_digits_idx, write_synthetic_fraud  # noqa: E402


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory):
    """Stand-in digit IDX files and a synthetic fraud CSV."""
    root = tmp_path_factory.mktemp("data")
    write_digits_idx(root, prefix="digits")
    write_synthetic_fraud(root / "creditcard.csv", seed=0)
    return root


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
