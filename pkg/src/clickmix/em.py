"""EM fitting: emEM multi-start initialisation, Aitken stopping, BIC sweeps."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import continuous, discrete
from .continuous import ContinuousMixtureModel, generator_from_offdiagonal
from .discrete import DiscreteMixtureModel, Variant
from .mixture import (
    DEFAULT_FLOOR,
    DegenerateGroupError,
    floored_simplex,
    observed_loglik,
    responsibilities,
)
from .seqdata import DataFormatError, Dataset, SequenceStats, dataset_stats

log = logging.getLogger(__name__)

MONOTONE_RTOL = 1e-8
FLAT_TRACE = 1e-14


class ModelKind(str, enum.Enum):
    CM = "CM"
    DM = "DM"
    DWM = "DWM"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        return cls(str(value.value if isinstance(value, enum.Enum) else value).upper())


class FitFailure(RuntimeError):
    """No usable start survived for a given number of groups."""


@dataclass(frozen=True)
class EmConfig:
    num_starts: int = 50
    short_iters: int = 5
    epsilon: float = 1e-6
    max_iters: int = 1000
    floor: float = DEFAULT_FLOOR
    g_range: tuple[int, int] = (1, 5)
    seed: int = 0
    model_kind: ModelKind = ModelKind.CM

    def __post_init__(self):
        object.__setattr__(self, "model_kind", ModelKind.parse(self.model_kind))
        object.__setattr__(self, "g_range", tuple(int(g) for g in self.g_range))
        if self.num_starts < 1 or self.short_iters < 1 or self.max_iters < 1:
            raise ValueError("num_starts, short_iters and max_iters must be positive")
        if not (self.epsilon > 0 and self.floor > 0):
            raise ValueError("epsilon and floor must be positive")
        lo, hi = self.g_range
        if lo < 1 or hi < lo:
            raise ValueError(f"bad group range {self.g_range}")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    @property
    def groups(self) -> list[int]:
        return list(range(self.g_range[0], self.g_range[1] + 1))


Model = DiscreteMixtureModel | ContinuousMixtureModel


@dataclass
class FitResult:
    model: Model
    responsibilities: np.ndarray  # (G, N), labelled columns one-hot
    loglik_trace: list[float]
    bic: float
    iterations: int
    chosen_start: int | None
    converged: bool
    labelled: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    floor_events: int = 0
    monotonicity_violations: int = 0
    failed_starts: int = 0

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]

    @property
    def kind(self) -> ModelKind:
        return ModelKind.parse(self.model.kind)

    @property
    def n_groups(self) -> int:
        return self.model.n_groups

    def assignments(self) -> np.ndarray:
        """1-based MAP group per sequence."""
        return np.argmax(self.responsibilities, axis=0) + 1


class InitResult(NamedTuple):
    model: Model
    start: int
    loglik: float


@dataclass
class MonotonicityLog:
    floor_events: int = 0
    violations: int = 0

    def check(self, previous: float, current: float, model: Model, floor: float) -> None:
        if current >= previous - MONOTONE_RTOL * abs(previous):
            return
        if model.at_floor(floor):
            self.floor_events += 1
            log.debug("log-likelihood fell %.3g with the floor binding", previous - current)
        else:
            self.violations += 1
            log.warning("log-likelihood fell %.3g without the floor binding", previous - current)


# -- per-kind dispatch -------------------------------------------------------

class _Ops(NamedTuple):
    log_joint: Callable[[SequenceStats, Model], np.ndarray]
    m_step: Callable[[SequenceStats, np.ndarray, float], Model]


def _ops(kind: ModelKind) -> _Ops:
    if kind is ModelKind.CM:
        return _Ops(continuous.log_joint, continuous.m_step)
    variant = Variant(kind.value)
    return _Ops(discrete.log_joint, lambda s, r, f: discrete.m_step(s, r, variant, f))


def prepare_stats(dataset: Dataset, kind: ModelKind | str) -> SequenceStats:
    """Sufficient statistics after checking the data suits ``kind``."""
    kind = ModelKind.parse(kind)
    if kind is ModelKind.CM and not dataset.has_times:
        raise DataFormatError("the continuous-time model needs holding times for every sequence")
    if kind in (ModelKind.CM, ModelKind.DM) and dataset.has_repeats:
        raise DataFormatError(
            f"{kind.value} forbids self-transitions but the data repeats states; collapse repeats first"
        )
    if kind is ModelKind.DM and dataset.num_states < 2:
        raise DataFormatError("DM needs at least two states")
    if kind is ModelKind.CM and dataset.num_states < 2:
        raise DataFormatError("CM needs at least two states")
    return dataset_stats(dataset)


# -- parameter counting and BIC ---------------------------------------------

def free_parameter_count(kind: ModelKind | str, n_groups: int, num_states: int) -> int:
    kind = ModelKind.parse(kind)
    g, j = n_groups, num_states
    if g < 1 or j < 1:
        raise ValueError("G and J must be positive")
    if kind is ModelKind.DM:
        if j < 2:
            raise ValueError("DM needs J >= 2")
        return (g - 1) + g * (j - 1) + g * j * (j - 2)
    return (g - 1) + g * (j - 1) + g * j * (j - 1)


def bic(loglik: float, n_params: int, n: int) -> float:
    """2 loglik - p log N; larger is better."""
    if n < 1:
        raise ValueError("N must be at least 1")
    return 2.0 * loglik - n_params * math.log(n)


# -- initialisation ----------------------------------------------------------

def start_rng(seed: int, n_groups: int, start: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, n_groups, start]))


def random_initialize(
    num_states: int | Dataset,
    n_groups: int,
    kind: ModelKind | str,
    rng: np.random.Generator,
    floor: float = DEFAULT_FLOOR,
) -> Model:
    """Random parameters: flat Dirichlet simplices, or uniform(0.05, 1) rates."""
    if isinstance(num_states, Dataset):
        num_states = num_states.num_states
    kind = ModelKind.parse(kind)
    g, j = n_groups, num_states
    if g < 1:
        raise ValueError("G must be at least 1")
    weights = floored_simplex(rng.dirichlet(np.ones(g)), floor)
    alpha = floored_simplex(rng.dirichlet(np.ones(j), size=g), floor)
    if kind is ModelKind.CM:
        off = rng.uniform(0.05, 1.0, size=(g, j, j))
        return ContinuousMixtureModel(weights, alpha, generator_from_offdiagonal(off))
    variant = Variant(kind.value)
    if variant is Variant.DM:
        rows = rng.dirichlet(np.ones(j - 1), size=(g, j))
        trans = np.zeros((g, j, j))
        for a in range(j):
            trans[:, a, np.arange(j) != a] = rows[:, a]
    else:
        trans = rng.dirichlet(np.ones(j), size=(g, j))
    allowed = discrete.allowed_mask(j, variant)
    return DiscreteMixtureModel(weights, alpha, floored_simplex(trans, floor, allowed), variant)


# -- EM loop -----------------------------------------------------------------

def aitken_should_stop(l_prev: float, l_curr: float, l_next: float, epsilon: float) -> bool:
    """Aitken-accelerated stopping rule on three consecutive log-likelihoods.

    Stops when ``0 <= l_inf - l_curr < epsilon``. A flat trace (previous
    increment under 1e-14) also stops; a negative difference keeps going.
    """
    denom = l_curr - l_prev
    if abs(denom) < FLAT_TRACE:
        return True
    a = (l_next - l_curr) / denom
    if a == 1.0:
        return False
    l_inf = l_curr + (l_next - l_curr) / (1.0 - a)
    diff = l_inf - l_curr
    return 0.0 <= diff < epsilon


def _short_run(stats, model, ops, n_iter, floor, monitor):
    lj = ops.log_joint(stats, model)
    ll = observed_loglik(lj, stats.labels)
    for _ in range(n_iter):
        model = ops.m_step(stats, responsibilities(lj, stats.labels), floor)
        lj = ops.log_joint(stats, model)
        new = observed_loglik(lj, stats.labels)
        monitor.check(ll, new, model, floor)
        ll = new
    return model, ll


def _rank_starts(stats, n_groups, config, monitor) -> tuple[list[InitResult], int]:
    ops = _ops(config.model_kind)
    results, failed = [], 0
    for start in range(config.num_starts):
        rng = start_rng(config.seed, n_groups, start)
        model = random_initialize(stats.num_states, n_groups, config.model_kind, rng, config.floor)
        try:
            model, ll = _short_run(stats, model, ops, config.short_iters, config.floor, monitor)
        except DegenerateGroupError as exc:
            log.debug("G=%d start %d degenerate: %s", n_groups, start, exc)
            failed += 1
            continue
        results.append(InitResult(model, start, ll))
    results.sort(key=lambda r: (-r.loglik, r.start))
    return results, failed


def em_em(dataset: Dataset, n_groups: int, config: EmConfig) -> InitResult:
    """Best end state over ``num_starts`` short EM runs."""
    stats = prepare_stats(dataset, config.model_kind)
    ranked, _ = _rank_starts(stats, n_groups, config, MonotonicityLog())
    if not ranked:
        raise FitFailure(f"all {config.num_starts} starts degenerate for G={n_groups}")
    return ranked[0]


def _run_em(stats, model, ops, config, monitor):
    lj = ops.log_joint(stats, model)
    trace = [observed_loglik(lj, stats.labels)]
    converged = False
    iterations = 0
    while iterations < config.max_iters:
        model = ops.m_step(stats, responsibilities(lj, stats.labels), config.floor)
        iterations += 1
        lj = ops.log_joint(stats, model)
        trace.append(observed_loglik(lj, stats.labels))
        monitor.check(trace[-2], trace[-1], model, config.floor)
        if len(trace) >= 3 and aitken_should_stop(trace[-3], trace[-2], trace[-1], config.epsilon):
            converged = True
            break
    return model, responsibilities(lj, stats.labels), trace, iterations, converged


def fit_stats(stats: SequenceStats, n_groups: int, config: EmConfig) -> FitResult:
    ops = _ops(config.model_kind)
    labels = stats.labels
    if labels.size and labels.max() >= n_groups:
        raise DataFormatError(f"label {labels.max() + 1} outside 1..{n_groups}")
    monitor = MonotonicityLog()
    p = free_parameter_count(config.model_kind, n_groups, stats.num_states)

    if n_groups == 1 or (stats.n and stats.labelled.all()):
        # nothing latent: one M-step from the known memberships is the MLE
        resp = responsibilities(np.zeros((n_groups, stats.n)), labels)
        try:
            model = ops.m_step(stats, resp, config.floor)
        except DegenerateGroupError as exc:
            raise FitFailure(str(exc)) from exc
        ll = observed_loglik(ops.log_joint(stats, model), labels)
        return FitResult(model, resp, [ll], bic(ll, p, stats.n), 1, None, True, stats.labelled.copy())

    ranked, failed = _rank_starts(stats, n_groups, config, monitor)
    for init in ranked:
        try:
            model, resp, trace, iterations, converged = _run_em(stats, init.model, ops, config, monitor)
        except DegenerateGroupError as exc:
            log.info("G=%d start %d degenerated in the full run: %s", n_groups, init.start, exc)
            failed += 1
            continue
        return FitResult(
            model, resp, trace, bic(trace[-1], p, stats.n), iterations, init.start, converged,
            stats.labelled.copy(), monitor.floor_events, monitor.violations, failed,
        )
    raise FitFailure(f"no usable start for G={n_groups} ({failed} degenerate)")


def fit(dataset: Dataset, n_groups: int, config: EmConfig) -> FitResult:
    """Fit a G-group mixture of the configured kind; labelled sequences stay fixed."""
    dataset.check_labels(n_groups)
    return fit_stats(prepare_stats(dataset, config.model_kind), n_groups, config)


@dataclass
class SweepResult:
    best: FitResult
    fits: dict[int, FitResult]
    failures: dict[int, str]

    @property
    def best_g(self) -> int:
        return self.best.n_groups

    def bic_by_g(self) -> dict[int, float | None]:
        groups = sorted(set(self.fits) | set(self.failures))
        return {g: (self.fits[g].bic if g in self.fits else None) for g in groups}


BIC_TIE_RTOL = 1e-9


def select_by_bic(fits: dict[int, FitResult]) -> FitResult:
    """Largest BIC; values within rounding of the best count as ties and go to the smaller G."""
    best = max(f.bic for f in fits.values())
    tol = BIC_TIE_RTOL * max(1.0, abs(best))
    return fits[min(g for g, f in fits.items() if f.bic >= best - tol)]


def sweep_stats(stats: SequenceStats, config: EmConfig, groups: Sequence[int] | None = None) -> SweepResult:
    fits, failures = {}, {}
    for g in groups or config.groups:
        try:
            fits[g] = fit_stats(stats, g, config)
        except (FitFailure, DataFormatError) as exc:
            failures[g] = str(exc)
            log.warning("fit failed for G=%d: %s", g, exc)
    if not fits:
        raise FitFailure("every G in the sweep failed")
    return SweepResult(select_by_bic(fits), fits, failures)


def sweep(dataset: Dataset, config: EmConfig) -> SweepResult:
    """Fit every G in ``config.g_range`` and keep the BIC maximiser.

    A G too small for the largest known label is recorded as a failure.
    """
    dataset.check_labels(config.g_range[1])
    return sweep_stats(prepare_stats(dataset, config.model_kind), config)


def classify(model: Model, dataset: Dataset) -> np.ndarray:
    """1-based MAP group per sequence; ties go to the lowest group index."""
    kind = ModelKind.parse(model.kind)
    stats = prepare_stats(dataset, kind)
    resp = responsibilities(_ops(kind).log_joint(stats, model), stats.labels)
    return np.argmax(resp, axis=0) + 1
