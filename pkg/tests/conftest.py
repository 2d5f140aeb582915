import numpy as np
import pytest

from fedimb.dataset import LabeledDataset, make_synthetic_blobs


@pytest.fixture
def blobs():
    return make_synthetic_blobs(50, 10, 4, 0.1, seed=3)


@pytest.fixture
def tiny_labels():
    def make(labels, num_classes):
        labels = np.asarray(labels, dtype=np.int64)
        return LabeledDataset(np.zeros((labels.size, 2)), labels, num_classes)

    return make


ACCEPTANCE_LINES = {}


def record(criterion, ok, detail):
    """Register the verdict line for one acceptance criterion (printed in the terminal summary)."""
    status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion}: {status}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
