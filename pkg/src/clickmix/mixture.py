"""Pieces shared by the discrete- and continuous-time mixtures."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

DEFAULT_FLOOR = 1e-6
DEGENERATE_MASS = 1e-8


class DegenerateGroupError(RuntimeError):
    """A group lost (almost) all responsibility mass during an M-step."""


def floored_simplex(weights: np.ndarray, floor: float, allowed: np.ndarray | None = None) -> np.ndarray:
    """Normalise nonnegative ``weights`` along the last axis with a lower bound.

    Returns the maximiser of ``sum_k w_k log p_k`` over the simplex restricted
    to ``p_k >= floor`` on allowed entries (disallowed entries are exactly 0).
    The solution is ``p_k = max(floor, w_k / mu)``: entries pinned at the floor
    never leave it as more get pinned, so a growing active set converges in at
    most K passes. All-zero rows come out uniform.
    """
    w = np.array(weights, dtype=float)
    if allowed is None:
        allowed = np.ones(w.shape, dtype=bool)
    else:
        allowed = np.broadcast_to(allowed, w.shape)
    w = np.where(allowed, w, 0.0)
    k = allowed.sum(axis=-1, keepdims=True)
    if np.any(k * floor > 1.0 + 1e-12):
        raise ValueError("floor too large for the number of free entries")
    zero_rows = w.sum(axis=-1, keepdims=True) <= 0
    w = np.where(zero_rows & allowed, 1.0, w)

    pinned = np.zeros(w.shape, dtype=bool)
    for _ in range(w.shape[-1] + 1):
        free_w = np.where(allowed & ~pinned, w, 0.0).sum(axis=-1, keepdims=True)
        mass = 1.0 - floor * pinned.sum(axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(pinned, floor, w * (mass / free_w))
        p = np.where(allowed, p, 0.0)
        newly = allowed & ~pinned & (p < floor)
        if not newly.any():
            break
        pinned |= newly
    return p


def floor_binds(p: np.ndarray, floor: float, allowed: np.ndarray | None = None) -> bool:
    at = p <= floor * (1.0 + 1e-9)
    if allowed is not None:
        at &= np.broadcast_to(allowed, p.shape)
    return bool(at.any())


def weighted_log_joint(log_weights: np.ndarray, log_dens: np.ndarray) -> np.ndarray:
    """log(pi_g f_g(x_i)) as a (G, N) array."""
    return log_weights[:, None] + log_dens


def responsibilities(log_joint: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Posterior group probabilities, (G, N); labelled columns are one-hot.

    Normalised with log-sum-exp, which is algebraically the reciprocal-sum
    form of the update but never overflows or underflows to 0/0.
    """
    if np.isnan(log_joint).any():
        raise FloatingPointError("NaN in component log-densities")
    g, n = log_joint.shape
    resp = np.exp(log_joint - logsumexp(log_joint, axis=0, keepdims=True)) if n else np.zeros((g, 0))
    lab = labels >= 0
    if lab.any():
        resp[:, lab] = 0.0
        resp[labels[lab], np.nonzero(lab)[0]] = 1.0
    return resp


def observed_loglik(log_joint: np.ndarray, labels: np.ndarray) -> float:
    if log_joint.shape[1] == 0:
        return 0.0
    lab = labels >= 0
    total = 0.0
    if (~lab).any():
        total += float(logsumexp(log_joint[:, ~lab], axis=0).sum())
    if lab.any():
        total += float(log_joint[labels[lab], np.nonzero(lab)[0]].sum())
    return total


def group_mass(resp: np.ndarray) -> np.ndarray:
    mass = resp.sum(axis=1)
    if mass.size and mass.min() < DEGENERATE_MASS:
        raise DegenerateGroupError(
            f"group {int(mass.argmin()) + 1} has responsibility mass {mass.min():.3g}"
        )
    return mass


def first_state_weights(resp: np.ndarray, first: np.ndarray, num_states: int) -> np.ndarray:
    out = np.zeros((resp.shape[0], num_states))
    np.add.at(out.T, first, resp.T)
    return out


def check_simplex(name: str, p: np.ndarray, tol: float = 1e-10) -> None:
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError(f"{name} has negative or non-finite entries")
    if not np.allclose(p.sum(axis=-1), 1.0, rtol=0, atol=tol):
        raise ValueError(f"{name} rows must sum to 1")
