import json
from importlib import resources

import numpy as np
import pytest

from samrule.dataset import BinaryDataset

TOY_CSV = "x1,x2,x3,x4,label\n0,1,0,0,1\n1,1,0,0,1\n0,0,1,1,1\n0,0,0,0,0\n1,0,1,1,0\n"


def toy_dataset() -> BinaryDataset:
    X = np.array([[0, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 0, 0], [1, 0, 1, 1]])
    y = np.array([1, 1, 1, 0, 0])
    return BinaryDataset(X, y, ("x1", "x2", "x3", "x4"))


def random_dataset(rng: np.random.Generator, n: int, d: int, p: float | None = None) -> BinaryDataset:
    p = rng.uniform(0.2, 0.8) if p is None else p
    X = (rng.random((n, d)) < p).astype(np.uint8)
    y = rng.integers(0, 2, size=n)
    return BinaryDataset(X, y, tuple(f"f{j}" for j in range(d)))


def load_schema(name: str) -> dict:
    text = resources.files("samrule").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


@pytest.fixture
def toy():
    return toy_dataset()


@pytest.fixture
def toy_csv(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text(TOY_CSV)
    return path


# Acceptance reporting: one line per criterion in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
