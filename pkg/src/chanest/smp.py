"""Bernoulli-Gaussian sparse message passing on the training factor graph.

The graph is bipartite: sum nodes are received samples y[i, tau], variable
nodes are the per-entry occupancy bits of the beamspace channel. Because the
lifted training matrix is block-diagonal over receive antennas, the graph
splits into n_r independent (t_blocks x n_t) blocks, and all messages are
stored as (n_r, t_blocks, n_t) arrays.

One detection sweep is the flooding schedule: every sum node updates the
Gaussian interference statistics of its outgoing edges, converts them into
per-edge occupancy probabilities, then every variable node broadcasts its
extrinsic occupancy probability back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import Observation, SystemDims, TrainingDesign, layout, round_half_up, _abs2
from .numerics import bernoulli_from_lr

# Message variances are floored here so noise-free runs stay well defined:
# a zero-variance edge saturates its probability at the clamp.
VAR_FLOOR = 1e-30


@dataclass(frozen=True)
class SmpPrior:
    """Prior occupancy probability of one beamspace entry."""

    p1: float

    def __post_init__(self):
        if not 0.0 < self.p1 < 1.0:
            raise ValueError("prior nonzero probability must lie in (0, 1)")

    @property
    def p0(self) -> float:
        return 1.0 - self.p1

    @property
    def log_prior_ratio(self) -> float:
        """log(p0 / p1), the prior contribution to every occupancy logit."""
        return float(np.log(self.p0) - np.log(self.p1))

    @classmethod
    def from_sparsity(cls, n_nonzero: int, size: int) -> "SmpPrior":
        return cls(n_nonzero / size)

    @classmethod
    def from_ratio(cls, sparsity_ratio: float, dims: SystemDims) -> "SmpPrior":
        """Prior matching a generated channel: the nonzero count is rounded
        the same way the channel generator rounds it."""
        return cls.from_sparsity(round_half_up(sparsity_ratio * dims.size), dims.size)


@dataclass(eq=False)
class ChannelBelief:
    """Current per-entry value estimates and their variances (flat layout)."""

    h_hat: np.ndarray
    v_h: np.ndarray

    def __post_init__(self):
        self.h_hat = np.asarray(self.h_hat)
        self.v_h = np.asarray(self.v_h, dtype=float)
        if self.h_hat.shape != self.v_h.shape or self.h_hat.ndim != 1:
            raise ValueError("h_hat and v_h must be flat vectors of equal length")
        if np.any(self.v_h < 0):
            raise ValueError("belief variances must be nonnegative")


@dataclass(eq=False)
class MessageState:
    """All edge messages, shape (n_r, t_blocks, n_t) each.

    e_s, v_s  mean/variance of the interference seen on each sum->variable edge
    p_s       occupancy probability sent from sum to variable nodes
    p_v       occupancy probability sent from variable to sum nodes
    """

    e_s: np.ndarray
    v_s: np.ndarray
    p_s: np.ndarray
    p_v: np.ndarray
    iteration: int = 0


def init_messages(dims: SystemDims, prior: SmpPrior) -> MessageState:
    """Fresh message state: variable->sum messages start at the prior, the
    sum-node statistics are placeholders until the first sweep."""
    shape = (dims.n_r, dims.t_blocks, dims.n_t)
    return MessageState(
        e_s=np.zeros(shape),
        v_s=np.zeros(shape),
        p_s=np.full(shape, 0.5),
        p_v=np.full(shape, prior.p1),
        iteration=0,
    )


def sum_node_update(state: MessageState, belief: ChannelBelief,
                    training: TrainingDesign, noise_var: float) -> MessageState:
    """Refresh the per-edge interference mean e_s and variance v_s.

    Each edge (i,tau)->(i,j) sums the contributions of all other entries m of
    antenna i, weighting value estimates by the incoming occupancy messages;
    the all-m sum is computed once per sum node and the own term subtracted,
    so a block costs O(t_blocks * n_t) rather than O(t_blocks * n_t^2).
    """
    if noise_var < 0:
        raise ValueError("noise variance must be nonnegative")
    s = training.s_block
    n_r = state.p_v.shape[0]
    h = belief.h_hat.reshape(n_r, -1)
    v_h = belief.v_h.reshape(n_r, -1)

    term_e = s[None, :, :] * h[:, None, :] * state.p_v
    state.e_s = term_e.sum(axis=2, keepdims=True) - term_e

    s2 = _abs2(s)
    w = state.p_v * (v_h[:, None, :] + _abs2(h)[:, None, :] * (1.0 - state.p_v))
    term_v = s2[None, :, :] * w
    state.v_s = np.maximum(
        term_v.sum(axis=2, keepdims=True) - term_v + noise_var, VAR_FLOOR)
    return state


def sum_to_var_prob(state: MessageState, belief: ChannelBelief,
                    observation: Observation, training: TrainingDesign) -> MessageState:
    """Convert each edge's interference statistics into an occupancy
    probability by comparing the absent/present Gaussian hypotheses for the
    observed sample (evaluated as a log-density difference)."""
    s = training.s_block
    n_r = state.p_v.shape[0]
    y2 = observation.y.reshape(n_r, s.shape[0])
    h = belief.h_hat.reshape(n_r, -1)
    v_h = belief.v_h.reshape(n_r, -1)

    r0 = y2[:, :, None] - state.e_s
    r1 = r0 - s[None, :, :] * h[:, None, :]
    v0 = state.v_s
    v1 = np.maximum(v0 + _abs2(s)[None, :, :] * v_h[:, None, :], VAR_FLOOR)
    log_lr = np.log(v1 / v0)
    log_lr *= 0.5
    log_lr -= _abs2(r0) / (2.0 * v0)
    log_lr += _abs2(r1) / (2.0 * v1)
    state.p_s = bernoulli_from_lr(log_lr)
    return state


def var_node_update(state: MessageState, prior: SmpPrior,
                    damping: float = 1.0) -> MessageState:
    """Broadcast extrinsic occupancy probabilities from the variable nodes.

    The edge to sum node tau combines the incoming messages from all other
    sum nodes with the prior; the full sum over sum nodes is computed once
    and the own term subtracted per edge. Optional damping blends the new
    messages geometrically with the previous ones.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    lp = np.log((1.0 - state.p_s) / state.p_s)
    log_ratio = (lp.sum(axis=1, keepdims=True) - lp) + prior.log_prior_ratio
    p_new = bernoulli_from_lr(log_ratio)
    if damping == 1.0:
        state.p_v = p_new
    else:
        state.p_v = damping * p_new + (1.0 - damping) * state.p_v
    state.iteration += 1
    return state


def posterior(state: MessageState, prior: SmpPrior) -> np.ndarray:
    """Per-entry occupancy posterior using the messages from *all* sum nodes
    (no extrinsic exclusion), flattened antenna-major."""
    lp = np.log((1.0 - state.p_s) / state.p_s)
    logit = lp.sum(axis=1) + prior.log_prior_ratio
    return bernoulli_from_lr(logit).reshape(-1)


def _posterior_entropy(post: np.ndarray) -> float:
    return float(np.mean(-post * np.log(post) - (1.0 - post) * np.log(1.0 - post)))


def smp_detect(observation: Observation, training: TrainingDesign,
               belief: ChannelBelief, prior: SmpPrior,
               inner_iters: int = 10, damping: float = 1.0,
               tol: float = 1e-6, diagnostics=None):
    """Run the flooding schedule and return (posterior vector, final state).

    Stops early once the variable->sum messages change by less than ``tol``
    between consecutive sweeps. ``diagnostics``, when given, receives one
    text line per sweep (sweep index, max message change, posterior entropy).
    """
    if inner_iters < 1:
        raise ValueError("inner_iters must be >= 1")
    n_r, n_t, t = layout(observation, training)
    if belief.h_hat.size != n_r * n_t:
        raise ValueError("belief length does not match the system")
    dims = SystemDims(n_r, n_t, t)
    state = init_messages(dims, prior)
    for k in range(inner_iters):
        sum_node_update(state, belief, training, observation.noise_var)
        sum_to_var_prob(state, belief, observation, training)
        p_v_prev = state.p_v
        var_node_update(state, prior, damping)
        delta = float(np.max(np.abs(state.p_v - p_v_prev)))
        if diagnostics is not None:
            diagnostics.write(
                f"sweep={k + 1} max_delta={delta:.3e} "
                f"posterior_entropy={_posterior_entropy(posterior(state, prior)):.6f}\n")
        if delta < tol:
            break
    return posterior(state, prior), state
