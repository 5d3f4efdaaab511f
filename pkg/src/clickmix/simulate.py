"""Sampling click sequences and the bundled simulation scenarios."""

from __future__ import annotations

import enum
import functools
import json
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .continuous import ContinuousMixtureModel
from .seqdata import ClickSequence, DataFormatError, Dataset, collapse_repeats


@functools.lru_cache(maxsize=None)
def load_constants() -> dict:
    text = resources.files("clickmix").joinpath("data/constants.json").read_text(encoding="utf-8")
    return json.loads(text)


def constants_version() -> str:
    return load_constants()["version"]


def normalise_generator(printed) -> np.ndarray:
    """Generator keeping the printed exit rates (diagonal) exactly.

    Off-diagonals are rescaled so each row sums to zero; rows that already do
    are returned unchanged.
    """
    q = np.array(printed, dtype=float)
    off = ~np.eye(q.shape[0], dtype=bool)
    out = np.where(off, q, 0.0)
    rate = -np.diag(q)
    out *= (rate / out.sum(axis=1))[:, None]
    np.fill_diagonal(out, -rate)
    return out


def scenario_model(name: str) -> ContinuousMixtureModel:
    """True mixture for ``sim1`` or ``sim2``."""
    c = load_constants()[name]
    gens = np.stack([normalise_generator(q) for q in c["generators"]])
    return ContinuousMixtureModel(np.array(c["weights"]), np.array(c["initial"]), gens)


# -- path samplers -----------------------------------------------------------

def _draw(cdf_row: np.ndarray, u: float) -> int:
    return int(np.searchsorted(cdf_row, u * cdf_row[-1], side="right"))


def sample_ctmc_path(alpha, q, length: int, rng: np.random.Generator, label: int | None = None) -> ClickSequence:
    """``length`` visits of a CTMC started from ``alpha``, with holding times."""
    if length < 1:
        raise ValueError("length must be at least 1")
    q = np.asarray(q, dtype=float)
    rate = -np.diag(q)
    jump = np.where(np.eye(q.shape[0], dtype=bool), 0.0, q)
    cdf = np.cumsum(jump, axis=1)
    alpha_cdf = np.cumsum(np.asarray(alpha, dtype=float))
    u = rng.random(length)
    e = rng.standard_exponential(length)
    states = [_draw(alpha_cdf, u[0])]
    for step in range(1, length):
        states.append(_draw(cdf[states[-1]], u[step]))
    times = e / rate[states]
    return ClickSequence(tuple(s + 1 for s in states), tuple(times.tolist()), label)


def sample_dtmc_path(
    alpha, transitions, length: int, rng: np.random.Generator,
    allow_repeats: bool = True, label: int | None = None,
) -> ClickSequence:
    if length < 1:
        raise ValueError("length must be at least 1")
    lam = np.asarray(transitions, dtype=float)
    if not allow_repeats and np.any(np.diag(lam) != 0):
        raise ValueError("allow_repeats=False needs a zero-diagonal transition matrix")
    cdf = np.cumsum(lam, axis=1)
    alpha_cdf = np.cumsum(np.asarray(alpha, dtype=float))
    u = rng.random(length)
    states = [_draw(alpha_cdf, u[0])]
    for step in range(1, length):
        states.append(_draw(cdf[states[-1]], u[step]))
    return ClickSequence(tuple(s + 1 for s in states), None, label)


# -- scenarios ---------------------------------------------------------------

class ScenarioKind(str, enum.Enum):
    SIM1_SMALL = "sim1-small"
    SIM1_LARGE = "sim1-large"
    SIM2_SMALL = "sim2-small"
    SIM2_LARGE = "sim2-large"
    SIM3 = "sim3"
    SIM3_SMALL = "sim3-small"
    SIM3_LARGE = "sim3-large"
    MSNBC = "msnbc-augment"
    CUSTOM = "custom"


SMALL = (50, (4, 25))
LARGE = (100, (25, 100))
MSNBC_SIZE = (1500, (20, 80))

_PRESETS = {
    ScenarioKind.SIM1_SMALL: (*SMALL, 0.0),
    ScenarioKind.SIM1_LARGE: (*LARGE, 0.0),
    ScenarioKind.SIM2_SMALL: (*SMALL, 0.0),
    ScenarioKind.SIM2_LARGE: (*LARGE, 0.0),
    ScenarioKind.SIM3: (*LARGE, 0.7),
    ScenarioKind.SIM3_SMALL: (*SMALL, 0.7),
    ScenarioKind.SIM3_LARGE: (*LARGE, 0.7),
    ScenarioKind.MSNBC: (*MSNBC_SIZE, 0.0),
    ScenarioKind.CUSTOM: (*LARGE, 0.0),
}


@dataclass(frozen=True)
class ScenarioSpec:
    kind: ScenarioKind
    n: int
    length_range: tuple[int, int]
    labelled_fraction: float = 0.0
    replicates: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        object.__setattr__(self, "length_range", tuple(int(v) for v in self.length_range))
        lo, hi = self.length_range
        if lo < 1 or hi < lo:
            raise ValueError(f"bad length range {self.length_range}")
        if not 0.0 <= self.labelled_fraction <= 1.0:
            raise ValueError("labelled_fraction must lie in [0, 1]")
        if self.n < 1 or self.replicates < 1:
            raise ValueError("n and replicates must be positive")

    @classmethod
    def preset(cls, kind, replicates: int = 1, seed: int = 0, **overrides) -> "ScenarioSpec":
        kind = ScenarioKind(kind)
        n, lengths, frac = _PRESETS[kind]
        spec = cls(kind, n, lengths, frac, replicates, seed)
        return replace(spec, **overrides) if overrides else spec

    @property
    def base(self) -> str:
        return self.kind.value.split("-")[0]


@dataclass
class SimulatedReplicate:
    dataset: Dataset
    truth: np.ndarray  # 1-based true group per sequence
    raw: Dataset | None = None  # uncollapsed streams (msnbc-augment only)
    extra: dict = field(default_factory=dict)


def replicate_rng(seed: int, replicate: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate, stream)))


def sample_mixture(model: ContinuousMixtureModel, n: int, length_range, rng) -> tuple[Dataset, np.ndarray]:
    lo, hi = length_range
    groups = rng.choice(model.n_groups, size=n, p=model.weights)
    lengths = rng.integers(lo, hi + 1, size=n)
    seqs = [
        sample_ctmc_path(model.initial_probs[g], model.generators[g], int(length), rng)
        for g, length in zip(groups, lengths)
    ]
    return Dataset(tuple(seqs), model.num_states), groups + 1


def label_fraction(dataset: Dataset, truth: np.ndarray, fraction: float, rng) -> Dataset:
    """Reveal the true group of round(fraction * N) sequences chosen uniformly."""
    n = len(dataset)
    k = int(round(fraction * n))
    chosen = np.zeros(n, dtype=bool)
    chosen[rng.choice(n, size=k, replace=False)] = True
    labels = [int(t) if c else None for t, c in zip(truth, chosen)]
    return dataset.with_labels(labels)


def augment_with_times(
    dataset: Dataset, rng: np.random.Generator, num_rate_sets: int = 4, rate_sets=None,
) -> tuple[Dataset, np.ndarray]:
    """Attach exponential holding times from one randomly chosen rate set per sequence.

    Returns the timed dataset and the 1-based rate set used for each sequence.
    """
    if rate_sets is None:
        rate_sets = load_constants()["msnbc"]["rate_sets"]
    rates = np.asarray(rate_sets, dtype=float)[:num_rate_sets]
    if dataset.num_states > rates.shape[1]:
        raise DataFormatError(f"J={dataset.num_states} exceeds the {rates.shape[1]} rates per set")
    hidden = rng.integers(0, num_rate_sets, size=len(dataset))
    seqs = []
    for seq, m in zip(dataset.sequences, hidden):
        x = np.asarray(seq.states) - 1
        times = rng.standard_exponential(len(x)) / rates[m, x]
        seqs.append(ClickSequence(seq.states, tuple(times.tolist()), seq.label))
    return Dataset(tuple(seqs), dataset.num_states), hidden + 1


def _msnbc_replicate(spec: ScenarioSpec, rng) -> SimulatedReplicate:
    c = load_constants()["msnbc"]
    j = len(c["categories"])
    weights = np.asarray(c["dwm_weights"])
    initial = np.asarray(c["dwm_initial"])
    trans = np.asarray(c["dwm_transitions"])
    lo, hi = spec.length_range
    groups = rng.choice(len(weights), size=spec.n, p=weights)
    lengths = rng.integers(lo, hi + 1, size=spec.n)
    raw = Dataset(
        tuple(sample_dtmc_path(initial[h], trans[h], int(L), rng) for h, L in zip(groups, lengths)), j
    )
    collapsed = Dataset(tuple(collapse_repeats(s) for s in raw.sequences), j)
    timed, hidden = augment_with_times(collapsed, rng, len(c["rate_sets"]), c["rate_sets"])
    return SimulatedReplicate(timed, hidden, raw, {"stream_group": groups + 1})


def generate_replicate(spec: ScenarioSpec, r: int, model: ContinuousMixtureModel | None = None) -> SimulatedReplicate:
    """Replicate ``r`` of ``spec``; each index has its own random stream."""
    rng = replicate_rng(spec.seed, r)
    if spec.kind is ScenarioKind.MSNBC:
        return _msnbc_replicate(spec, rng)
    if spec.kind is ScenarioKind.CUSTOM:
        if model is None:
            raise ValueError("custom scenarios need a model")
        truth_model = model
    else:
        truth_model = scenario_model("sim1" if spec.base == "sim1" else "sim2")
    dataset, truth = sample_mixture(truth_model, spec.n, spec.length_range, rng)
    if spec.labelled_fraction > 0:
        dataset = label_fraction(dataset, truth, spec.labelled_fraction, replicate_rng(spec.seed, r, 1))
    return SimulatedReplicate(dataset, truth)


def generate_scenario(spec: ScenarioSpec, model: ContinuousMixtureModel | None = None) -> list[SimulatedReplicate]:
    """Draw ``spec.replicates`` datasets with their true groups.

    sim3 reuses the sim2 draws for the same seed and size, then reveals 70%
    of the labels using a separate random stream.
    """
    return [generate_replicate(spec, r, model) for r in range(spec.replicates)]
