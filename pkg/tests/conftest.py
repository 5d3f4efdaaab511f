import numpy as np
import pytest

from clickmix.seqdata import ClickSequence, Dataset, dataset_stats


def make_dataset(rows, num_states=None):
    """rows: iterables of states, or (states, times) / (states, times, label) tuples."""
    seqs = []
    for row in rows:
        if isinstance(row, ClickSequence):
            seqs.append(row)
        elif isinstance(row, tuple) and row and isinstance(row[0], (list, tuple)):
            seqs.append(ClickSequence(tuple(row[0]), *[None if v is None else tuple(v) if isinstance(v, list) else v for v in row[1:]]))
        else:
            seqs.append(ClickSequence(tuple(row)))
    j = num_states or max(max(s.states) for s in seqs)
    return Dataset(tuple(seqs), j)


def stats_of(rows, num_states=None):
    return dataset_stats(make_dataset(rows, num_states))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
