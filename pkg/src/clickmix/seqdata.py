"""Click sequences, labelled/unlabelled datasets and their sufficient statistics.

Text format, one sequence per line::

    1,2,1,3                 states only
    1,2,3;0.5,1.2,0.3       states with holding times
    1,2,3;0.5,1.2,0.3|2     ... and a known group label

States and labels are 1-based in files and on :class:`ClickSequence`.
Array-valued statistics (:class:`TransitionCounts`, :class:`SequenceStats`)
are 0-based so they index numpy arrays directly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class DataFormatError(ValueError):
    """Raised for malformed or invalid sequence input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SequenceFormat(str, enum.Enum):
    SEQUENCES_ONLY = "sequences-only"
    WITH_TIMES = "sequences-with-times"


@dataclass(frozen=True)
class ClickSequence:
    states: tuple[int, ...]
    times: tuple[float, ...] | None = None
    label: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(int(s) for s in self.states))
        if self.times is not None:
            object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        if len(self.states) < 1:
            raise DataFormatError("empty sequence")
        if min(self.states) < 1:
            raise DataFormatError(f"state index below 1: {min(self.states)}")
        if self.times is not None:
            if len(self.times) != len(self.states):
                raise DataFormatError(
                    f"length mismatch: {len(self.states)} states, {len(self.times)} times"
                )
            if not all(t > 0 and np.isfinite(t) for t in self.times):
                raise DataFormatError("holding times must be positive and finite")
        if self.label is not None and int(self.label) < 1:
            raise DataFormatError(f"group label below 1: {self.label}")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def has_repeats(self) -> bool:
        return any(a == b for a, b in zip(self.states, self.states[1:]))

    def with_label(self, label: int | None) -> "ClickSequence":
        return ClickSequence(self.states, self.times, label)


@dataclass(frozen=True)
class Dataset:
    sequences: tuple[ClickSequence, ...]
    num_states: int

    def __post_init__(self):
        object.__setattr__(self, "sequences", tuple(self.sequences))
        if self.num_states < 1:
            raise DataFormatError("num_states must be at least 1")
        for i, seq in enumerate(self.sequences):
            if max(seq.states) > self.num_states:
                raise DataFormatError(
                    f"sequence {i + 1}: state {max(seq.states)} exceeds J={self.num_states}"
                )

    def __len__(self) -> int:
        return len(self.sequences)

    @property
    def n_total(self) -> int:
        return len(self.sequences)

    @property
    def n_labelled(self) -> int:
        return sum(s.label is not None for s in self.sequences)

    @property
    def n_unlabelled(self) -> int:
        return self.n_total - self.n_labelled

    @property
    def has_times(self) -> bool:
        return bool(self.sequences) and all(s.times is not None for s in self.sequences)

    @property
    def has_repeats(self) -> bool:
        return any(s.has_repeats for s in self.sequences)

    @property
    def max_label(self) -> int:
        return max((s.label for s in self.sequences if s.label is not None), default=0)

    def check_labels(self, n_groups: int) -> None:
        if self.max_label > n_groups:
            raise DataFormatError(
                f"label {self.max_label} outside 1..{n_groups}"
            )

    def without_labels(self) -> "Dataset":
        return Dataset(tuple(s.with_label(None) for s in self.sequences), self.num_states)

    def with_labels(self, labels: Sequence[int | None]) -> "Dataset":
        if len(labels) != len(self.sequences):
            raise ValueError("one label (or None) per sequence required")
        seqs = tuple(s.with_label(lab) for s, lab in zip(self.sequences, labels))
        return Dataset(seqs, self.num_states)


@dataclass(frozen=True)
class TransitionCounts:
    """Sufficient statistics of one sequence (0-based indices)."""

    counts: np.ndarray
    time_in_state: np.ndarray
    first_state: int
    last_state: int

    @property
    def num_transitions(self) -> int:
        return int(self.counts.sum())


def summarize(seq: ClickSequence, num_states: int) -> TransitionCounts:
    x = np.asarray(seq.states, dtype=np.intp) - 1
    if x.max() >= num_states:
        raise DataFormatError(f"state {x.max() + 1} exceeds J={num_states}")
    counts = np.zeros((num_states, num_states), dtype=np.int64)
    np.add.at(counts, (x[:-1], x[1:]), 1)
    time_in_state = np.zeros(num_states)
    if seq.times is not None:
        np.add.at(time_in_state, x, np.asarray(seq.times))
    return TransitionCounts(counts, time_in_state, int(x[0]), int(x[-1]))


def collapse_repeats(seq: ClickSequence) -> ClickSequence:
    """Merge runs of one state into a single visit, summing their times."""
    states = [seq.states[0]]
    times = None if seq.times is None else [seq.times[0]]
    for i in range(1, len(seq.states)):
        if seq.states[i] == states[-1]:
            if times is not None:
                times[-1] += seq.times[i]
        else:
            states.append(seq.states[i])
            if times is not None:
                times.append(seq.times[i])
    return ClickSequence(tuple(states), None if times is None else tuple(times), seq.label)


def collapse_dataset(dataset: Dataset) -> Dataset:
    return Dataset(tuple(collapse_repeats(s) for s in dataset.sequences), dataset.num_states)


@dataclass(frozen=True)
class SequenceStats:
    """Stacked sufficient statistics for a whole dataset.

    ``labels`` holds 0-based groups, -1 for unlabelled sequences.
    """

    counts: np.ndarray  # (N, J, J)
    time_in_state: np.ndarray  # (N, J)
    first: np.ndarray  # (N,)
    last: np.ndarray  # (N,)
    labels: np.ndarray  # (N,)
    has_times: bool = False
    lengths: np.ndarray = field(default=None)

    @property
    def n(self) -> int:
        return self.first.shape[0]

    @property
    def num_states(self) -> int:
        return self.counts.shape[1]

    @property
    def labelled(self) -> np.ndarray:
        return self.labels >= 0

    @property
    def has_self_transitions(self) -> bool:
        return bool(np.einsum("njj->", self.counts) > 0)

    @classmethod
    def from_counts(cls, items: Sequence[TransitionCounts], labels=None, has_times=False):
        n = len(items)
        if n == 0:
            raise ValueError("from_counts needs at least one item; use SequenceStats.empty")
        counts = np.stack([t.counts for t in items]).astype(float)
        times = np.stack([t.time_in_state for t in items])
        first = np.array([t.first_state for t in items], dtype=np.intp)
        last = np.array([t.last_state for t in items], dtype=np.intp)
        if labels is None:
            labels = np.full(n, -1, dtype=np.intp)
        lengths = counts.sum(axis=(1, 2)).astype(np.intp) + 1
        return cls(counts, times, first, last, np.asarray(labels, dtype=np.intp), has_times, lengths)

    @classmethod
    def empty(cls, num_states: int, has_times: bool = False):
        j = num_states
        return cls(
            np.zeros((0, j, j)), np.zeros((0, j)), np.zeros(0, np.intp),
            np.zeros(0, np.intp), np.zeros(0, np.intp), has_times, np.zeros(0, np.intp),
        )


def dataset_stats(dataset: Dataset) -> SequenceStats:
    if not dataset.sequences:
        return SequenceStats.empty(dataset.num_states, False)
    items = [summarize(s, dataset.num_states) for s in dataset.sequences]
    labels = [-1 if s.label is None else s.label - 1 for s in dataset.sequences]
    return SequenceStats.from_counts(items, labels, has_times=dataset.has_times)


# -- text format ------------------------------------------------------------

def _parse_line(text: str, fmt: SequenceFormat, lineno: int, allow_labels: bool) -> ClickSequence:
    body, label = text, None
    if "|" in body:
        body, _, lab = body.partition("|")
        if not allow_labels:
            raise DataFormatError("label field present but labels are disabled", lineno)
        try:
            label = int(lab.strip())
        except ValueError:
            raise DataFormatError(f"bad label {lab.strip()!r}", lineno) from None
    state_part, sep, time_part = body.partition(";")
    try:
        states = [int(tok) for tok in state_part.split(",")]
    except ValueError:
        raise DataFormatError(f"bad state list {state_part.strip()!r}", lineno) from None
    times = None
    if fmt is SequenceFormat.WITH_TIMES:
        if not sep:
            raise DataFormatError("holding times requested but absent", lineno)
        try:
            times = [float(tok) for tok in time_part.split(",")]
        except ValueError:
            raise DataFormatError(f"bad time list {time_part.strip()!r}", lineno) from None
    # sequences-only mode silently drops a time field if one is present
    try:
        return ClickSequence(tuple(states), None if times is None else tuple(times), label)
    except DataFormatError as exc:
        raise DataFormatError(str(exc), lineno) from None


def parse_lines(
    lines: Iterable[str],
    fmt: SequenceFormat | str = SequenceFormat.SEQUENCES_ONLY,
    num_states: int | None = None,
    labels: bool = True,
) -> Dataset:
    fmt = SequenceFormat(fmt)
    seqs = []
    for lineno, raw in enumerate(lines, start=1):
        text = raw.rstrip("\n").strip()
        if not text or text.startswith("#"):
            continue
        seqs.append(_parse_line(text, fmt, lineno, labels))
    observed = max((max(s.states) for s in seqs), default=1)
    if num_states is None:
        num_states = observed
    elif observed > num_states:
        raise DataFormatError(f"state {observed} exceeds J={num_states}")
    return Dataset(tuple(seqs), num_states)


def parse_dataset(
    path: str | Path,
    fmt: SequenceFormat | str = SequenceFormat.SEQUENCES_ONLY,
    label_column: bool = True,
    num_states: int | None = None,
) -> Dataset:
    """Read a sequence file; J defaults to the largest state index seen."""
    with open(path, encoding="utf-8") as fh:
        return parse_lines(fh, fmt, num_states=num_states, labels=label_column)


def format_sequence(seq: ClickSequence, with_times: bool | None = None) -> str:
    if with_times is None:
        with_times = seq.times is not None
    out = ",".join(str(s) for s in seq.states)
    if with_times:
        if seq.times is None:
            raise DataFormatError("sequence has no times to write")
        out += ";" + ",".join(repr(t) for t in seq.times)
    if seq.label is not None:
        out += f"|{seq.label}"
    return out


def format_dataset(dataset: Dataset, with_times: bool | None = None) -> str:
    return "".join(format_sequence(s, with_times) + "\n" for s in dataset.sequences)


def write_dataset(dataset: Dataset, path: str | Path, with_times: bool | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_dataset(dataset, with_times))
