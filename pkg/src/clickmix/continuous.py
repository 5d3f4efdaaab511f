"""Mixtures of continuous-time first-order Markov chains.

Each group g has an initial distribution and an infinitesimal generator Q_g.
A visit to state j lasts Exp(-q_jj) time units and then jumps to k != j with
probability -q_jk / q_jj. The last visit of a sequence contributes its full
exponential density, so its holding time must be observed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mixture import (
    DEFAULT_FLOOR,
    check_simplex,
    first_state_weights,
    floor_binds,
    floored_simplex,
    group_mass,
    observed_loglik,
    responsibilities,
    weighted_log_joint,
)
from .seqdata import SequenceStats, TransitionCounts

MIN_STATE_TIME = 1e-12


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    rates: np.ndarray

    def __post_init__(self):
        q = np.array(self.rates, dtype=float)
        q.setflags(write=False)
        object.__setattr__(self, "rates", q)
        validate_generator(q)

    @property
    def num_states(self) -> int:
        return self.rates.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.rates, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, GeneratorMatrix):
            return NotImplemented
        return np.array_equal(self.rates, other.rates)


def validate_generator(q: np.ndarray, floor: float = 0.0) -> None:
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError("generator must be square")
    off = ~np.eye(q.shape[0], dtype=bool)
    if not np.all(np.isfinite(q)):
        raise ValueError("generator has non-finite entries")
    if np.any(q[off] < floor):
        raise ValueError("generator off-diagonal entries below the floor")
    diag = np.diag(q)
    expected = -np.where(off, q, 0.0).sum(axis=1)
    if not np.allclose(diag, expected, rtol=0, atol=1e-12 * max(1.0, np.abs(diag).max())):
        raise ValueError("generator diagonal must equal minus the off-diagonal row sum")


def generator_from_offdiagonal(off: np.ndarray) -> np.ndarray:
    """Copy ``off`` with each diagonal entry reset to minus its row's off-diagonal sum."""
    q = np.array(off, dtype=float)
    j = q.shape[-1]
    eye = np.eye(j, dtype=bool)
    q = np.where(eye, 0.0, q)
    q[..., eye] = -q.sum(axis=-1)
    return q


def embedded_transition_probs(q) -> np.ndarray:
    """Jump-chain transition matrix (zero diagonal) of a generator."""
    q = np.asarray(q, dtype=float)
    rate = -np.diag(q)
    p = q / rate[:, None]
    np.fill_diagonal(p, 0.0)
    return p


def expected_holding_time(q, j: int) -> float:
    """Mean sojourn in state ``j`` (0-based)."""
    return 1.0 / -float(np.asarray(q)[j, j])


@dataclass(frozen=True, eq=False)
class ContinuousMixtureModel:
    weights: np.ndarray  # (G,)
    initial_probs: np.ndarray  # (G, J)
    generators: np.ndarray  # (G, J, J)

    def __post_init__(self):
        gens = self.generators
        if isinstance(gens, (list, tuple)) and gens and isinstance(gens[0], GeneratorMatrix):
            gens = np.stack([g.rates for g in gens])
        object.__setattr__(self, "generators", gens)
        for name in ("weights", "initial_probs", "generators"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        g, j = self.initial_probs.shape
        if self.weights.shape != (g,) or self.generators.shape != (g, j, j):
            raise ValueError("inconsistent parameter shapes")
        if j < 2:
            raise ValueError("continuous-time model needs at least two states")
        check_simplex("weights", self.weights, 1e-12)
        check_simplex("initial_probs", self.initial_probs, 1e-12)
        for q in self.generators:
            validate_generator(q)
            if np.any(np.diag(q) >= 0):
                raise ValueError("every state needs a positive exit rate")

    kind = "CM"

    @property
    def n_groups(self) -> int:
        return self.weights.shape[0]

    @property
    def num_states(self) -> int:
        return self.initial_probs.shape[1]

    def generator(self, g: int) -> GeneratorMatrix:
        return GeneratorMatrix(self.generators[g])

    def holding_times(self) -> np.ndarray:
        """(G, J) expected holding times."""
        return 1.0 / -np.einsum("gjj->gj", self.generators)

    def at_floor(self, floor: float = DEFAULT_FLOOR) -> bool:
        off = ~np.eye(self.num_states, dtype=bool)
        return (
            floor_binds(self.weights, floor)
            or floor_binds(self.initial_probs, floor)
            or floor_binds(self.generators, floor, off)
        )

    def __eq__(self, other):
        if not isinstance(other, ContinuousMixtureModel):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and np.array_equal(self.initial_probs, other.initial_probs)
            and np.array_equal(self.generators, other.generators)
        )


def _check_stats(stats: SequenceStats, model: ContinuousMixtureModel) -> None:
    if stats.num_states != model.num_states:
        raise ValueError(f"data has J={stats.num_states}, model has J={model.num_states}")
    if stats.n and not stats.has_times:
        raise ValueError("continuous-time model needs holding times")
    if stats.n and stats.has_self_transitions:
        raise ValueError("continuous-time model cannot score self-transitions; collapse repeats first")


def _log_offdiagonal(q: np.ndarray) -> np.ndarray:
    eye = np.eye(q.shape[-1], dtype=bool)
    with np.errstate(divide="ignore"):
        return np.where(eye, 0.0, np.log(np.where(eye, 1.0, q)))


def component_log_densities(stats: SequenceStats, model: ContinuousMixtureModel) -> np.ndarray:
    """(G, N) array of log f_g(x_i, t_i)."""
    _check_stats(stats, model)
    q = model.generators
    diag = np.einsum("gjj->gj", q)
    return (
        np.log(model.initial_probs)[:, stats.first]
        + np.einsum("njk,gjk->gn", stats.counts, _log_offdiagonal(q))
        + np.log(-diag)[:, stats.last]
        + diag @ stats.time_in_state.T
    )


def log_component_density(stats: TransitionCounts, g: int, model: ContinuousMixtureModel) -> float:
    counts = np.asarray(stats.counts, dtype=float)
    if np.trace(counts) > 0:
        raise ValueError("continuous-time model cannot score self-transitions")
    if not np.any(np.asarray(stats.time_in_state) > 0):
        raise ValueError("holding times are required")
    q = model.generators[g]
    diag = np.diag(q)
    return float(
        np.log(model.initial_probs[g, stats.first_state])
        + np.sum(counts * _log_offdiagonal(q))
        + np.log(-diag[stats.last_state])
        + diag @ stats.time_in_state
    )


def log_joint(stats: SequenceStats, model: ContinuousMixtureModel) -> np.ndarray:
    return weighted_log_joint(np.log(model.weights), component_log_densities(stats, model))


def e_step(stats: SequenceStats, model: ContinuousMixtureModel) -> np.ndarray:
    """Responsibilities for the unlabelled sequences, shape (G, N1)."""
    resp = responsibilities(log_joint(stats, model), stats.labels)
    return resp[:, ~stats.labelled]


def full_responsibilities(stats: SequenceStats, model: ContinuousMixtureModel) -> np.ndarray:
    return responsibilities(log_joint(stats, model), stats.labels)


def rate_aggregates(stats: SequenceStats, resp: np.ndarray):
    """Weighted transition counts (G,J,J), terminal visits (G,J), time in state (G,J)."""
    nbar = np.einsum("gn,njk->gjk", resp, stats.counts)
    eye = np.eye(stats.num_states, dtype=bool)
    nbar[:, eye] = 0.0
    terminal = first_state_weights(resp, stats.last, stats.num_states)
    time = resp @ stats.time_in_state
    return nbar, terminal, time


def solve_rates(nbar: np.ndarray, terminal: np.ndarray, time: np.ndarray, floor: float) -> np.ndarray:
    """Off-diagonal rates maximising the expected complete-data log-likelihood.

    Row (g, j) maximises ``sum_k n_k log q_k + E log r - T r`` with
    ``r = sum_k q_k`` and ``q_k >= floor``. Free entries satisfy
    ``q_k = n_k / c`` with ``c = T - E / r``; without active bounds this is
    ``q_k = n_k (N + E) / (T N)``. With ``s`` entries pinned at the floor, c is
    the positive root of ``s f c^2 + (N_free + E - T s f) c - T N_free = 0``,
    evaluated in whichever form avoids cancellation.
    """
    g, j, _ = nbar.shape
    off = np.broadcast_to(~np.eye(j, dtype=bool), nbar.shape)
    k = j - 1
    informed = time >= MIN_STATE_TIME
    t = np.where(informed, time, 1.0)
    exits = nbar.sum(axis=-1)

    pinned = off & (nbar <= 0)
    q = np.full(nbar.shape, floor)
    for _ in range(j + 1):
        sf = pinned.sum(axis=-1) * floor
        n_free = np.where(off & ~pinned, nbar, 0.0).sum(axis=-1)
        b = n_free + terminal - t * sf
        root = np.sqrt(b * b + 4.0 * sf * t * n_free)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(b > 0, 2.0 * t * n_free / (b + root), (root - b) / (2.0 * sf))
            q = np.where(pinned, floor, nbar / c[..., None])
        newly = off & ~pinned & (n_free[..., None] > 0) & ~(q >= floor)
        if not newly.any():
            break
        pinned |= newly

    # no observed exits: only the total rate is identified, spread it evenly
    silent = exits <= 0
    even = np.maximum(terminal / t, k * floor) / k
    q = np.where(silent[..., None], even[..., None], q)
    q = np.where(informed[..., None], q, floor)
    return np.where(off, q, 0.0)


def m_step(stats: SequenceStats, resp: np.ndarray, floor: float = DEFAULT_FLOOR) -> ContinuousMixtureModel:
    """M-step over all sequences; labelled columns of ``resp`` are one-hot."""
    if stats.has_self_transitions:
        raise ValueError("continuous-time data cannot contain self-transitions")
    mass = group_mass(resp)
    weights = floored_simplex(mass / stats.n, floor)
    alpha = floored_simplex(first_state_weights(resp, stats.first, stats.num_states), floor)
    nbar, terminal, time = rate_aggregates(stats, resp)
    q = generator_from_offdiagonal(solve_rates(nbar, terminal, time, floor))
    return ContinuousMixtureModel(weights, alpha, q)


def literal_rate_update(stats: SequenceStats, resp: np.ndarray, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """Generators from the alternative a/b rate expression, for comparison only.

    Here q_jk = nbar_jk / (a / b) with a = time in j + exits from j and
    b = terminal visits in j + exits from j. It mixes time with counts and is
    not the maximiser used by :func:`m_step`.
    """
    nbar, terminal, time = rate_aggregates(stats, resp)
    exits = nbar.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = (time + exits) / (terminal + exits)
        off = nbar / lam[..., None]
    off = np.where(np.isfinite(off), np.maximum(off, floor), floor)
    return generator_from_offdiagonal(off)


def expected_complete_rate_loglik(nbar, terminal, time, q: np.ndarray) -> float:
    """Generator part of the expected complete-data log-likelihood."""
    diag = np.einsum("gjj->gj", q)
    return float(np.sum(nbar * _log_offdiagonal(q)) + np.sum(terminal * np.log(-diag)) + np.sum(diag * time))


def observed_log_likelihood(stats: SequenceStats, model: ContinuousMixtureModel) -> float:
    if stats.n == 0:
        return 0.0
    return observed_loglik(log_joint(stats, model), stats.labels)
