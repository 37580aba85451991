import os
from pathlib import Path

import pytest

from lmul_lab.nn.idx import load_idx
from lmul_lab.nn.model import train_reference

ROOT = Path(__file__).resolve().parents[1]
SUBSET = ROOT / "data" / "mnist-5k"
# optional directory with the standard MNIST IDX files
FULL_MNIST = os.environ.get("LMUL_LAB_MNIST")

# pinned reference setup
MODEL_SPEC = (784, 32, 10)
EPOCHS = 3
SEED = 7


def _pair(d, split):
    d = Path(d)
    stem = "train" if split == "train" else "t10k"
    found = []
    for kind in ("images-idx3", "labels-idx1"):
        for suffix in ("-ubyte", "-ubyte.gz"):
            p = d / f"{stem}-{kind}{suffix}"
            if p.exists():
                found.append(p)
                break
    return found


@pytest.fixture(scope="session")
def mnist_train():
    return load_idx(*_pair(SUBSET, "train"), name="mnist-5k", split="train")


@pytest.fixture(scope="session")
def mnist_test():
    return load_idx(*_pair(SUBSET, "test"), name="mnist-5k", split="test")


@pytest.fixture(scope="session")
def reference_model(mnist_train):
    return train_reference(MODEL_SPEC, mnist_train, EPOCHS, SEED)


@pytest.fixture(scope="session")
def full_mnist_dir():
    if not FULL_MNIST or len(_pair(FULL_MNIST, "test")) != 2:
        pytest.skip("set LMUL_LAB_MNIST to a directory with the standard MNIST IDX files")
    return Path(FULL_MNIST)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
