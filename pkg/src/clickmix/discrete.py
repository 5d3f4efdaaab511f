"""Mixtures of discrete-time first-order Markov chains.

Two variants: ``DWM`` allows self-transitions (repeated visits to a state),
``DM`` forbids them and keeps the transition diagonal at exactly zero.
"""

from __future__ import annotations

import enum
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


class Variant(str, enum.Enum):
    DWM = "DWM"
    DM = "DM"


@dataclass(frozen=True, eq=False)
class DiscreteMixtureModel:
    weights: np.ndarray  # (G,)
    initial_probs: np.ndarray  # (G, J)
    transitions: np.ndarray  # (G, J, J)
    variant: Variant = Variant.DWM

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        for name in ("weights", "initial_probs", "transitions"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        g, j = self.initial_probs.shape
        if self.weights.shape != (g,) or self.transitions.shape != (g, j, j):
            raise ValueError("inconsistent parameter shapes")
        check_simplex("weights", self.weights, 1e-12)
        check_simplex("initial_probs", self.initial_probs, 1e-12)
        check_simplex("transitions", self.transitions, 1e-12)
        if self.variant is Variant.DM and np.any(np.einsum("gjj->gj", self.transitions) != 0):
            raise ValueError("DM variant requires a zero transition diagonal")

    @property
    def n_groups(self) -> int:
        return self.weights.shape[0]

    @property
    def num_states(self) -> int:
        return self.initial_probs.shape[1]

    @property
    def kind(self) -> str:
        return self.variant.value

    def allowed_transitions(self) -> np.ndarray:
        return allowed_mask(self.num_states, self.variant)

    def at_floor(self, floor: float = DEFAULT_FLOOR) -> bool:
        return (
            floor_binds(self.weights, floor)
            or floor_binds(self.initial_probs, floor)
            or floor_binds(self.transitions, floor, self.allowed_transitions())
        )

    def __eq__(self, other):
        if not isinstance(other, DiscreteMixtureModel):
            return NotImplemented
        return (
            self.variant == other.variant
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.initial_probs, other.initial_probs)
            and np.array_equal(self.transitions, other.transitions)
        )


def allowed_mask(num_states: int, variant: Variant) -> np.ndarray:
    mask = np.ones((num_states, num_states), dtype=bool)
    if Variant(variant) is Variant.DM:
        np.fill_diagonal(mask, False)
    return mask


def _log_transitions(model: DiscreteMixtureModel) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logt = np.log(model.transitions)
    # forbidden DM self-transitions carry zero counts; avoid 0 * -inf
    return np.where(model.allowed_transitions(), logt, 0.0)


def _check_counts(stats: SequenceStats, model: DiscreteMixtureModel) -> None:
    if stats.num_states != model.num_states:
        raise ValueError(f"data has J={stats.num_states}, model has J={model.num_states}")
    if model.variant is Variant.DM and stats.n and stats.has_self_transitions:
        raise ValueError("DM model cannot score sequences with self-transitions")


def component_log_densities(stats: SequenceStats, model: DiscreteMixtureModel) -> np.ndarray:
    """(G, N) array of log f_g(x_i)."""
    _check_counts(stats, model)
    log_alpha = np.log(model.initial_probs)
    return log_alpha[:, stats.first] + np.einsum("njk,gjk->gn", stats.counts, _log_transitions(model))


def log_component_density(stats: TransitionCounts, g: int, model: DiscreteMixtureModel) -> float:
    """log density of one sequence under group ``g`` (0-based)."""
    counts = np.asarray(stats.counts, dtype=float)
    if model.variant is Variant.DM and np.trace(counts) > 0:
        raise ValueError("DM model cannot score sequences with self-transitions")
    return float(
        np.log(model.initial_probs[g, stats.first_state])
        + np.sum(counts * _log_transitions(model)[g])
    )


def log_joint(stats: SequenceStats, model: DiscreteMixtureModel) -> np.ndarray:
    return weighted_log_joint(np.log(model.weights), component_log_densities(stats, model))


def e_step(stats: SequenceStats, model: DiscreteMixtureModel) -> np.ndarray:
    """Responsibilities for the unlabelled sequences, shape (G, N1)."""
    resp = responsibilities(log_joint(stats, model), stats.labels)
    return resp[:, ~stats.labelled]


def full_responsibilities(stats: SequenceStats, model: DiscreteMixtureModel) -> np.ndarray:
    return responsibilities(log_joint(stats, model), stats.labels)


def m_step(
    stats: SequenceStats,
    resp: np.ndarray,
    variant: Variant | str = Variant.DWM,
    floor: float = DEFAULT_FLOOR,
) -> DiscreteMixtureModel:
    """Weighted-count updates for weights, initial and transition probabilities.

    ``resp`` is the (G, N) matrix over all sequences, labelled columns one-hot.
    Each row is normalised under the lower bound ``floor``.
    """
    variant = Variant(variant)
    mass = group_mass(resp)
    weights = floored_simplex(mass / stats.n, floor)
    alpha = floored_simplex(first_state_weights(resp, stats.first, stats.num_states), floor)
    allowed = allowed_mask(stats.num_states, variant)
    counts = np.einsum("gn,njk->gjk", resp, stats.counts)
    trans = floored_simplex(counts, floor, allowed)
    return DiscreteMixtureModel(weights, alpha, trans, variant)


def observed_log_likelihood(stats: SequenceStats, model: DiscreteMixtureModel) -> float:
    if stats.n == 0:
        return 0.0
    return observed_loglik(log_joint(stats, model), stats.labels)
