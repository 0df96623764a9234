"""Fisher information and estimator covariance lower bounds.

Two bounds are provided: the unstructured least-squares bound
noise_var * (S_bar^H S_bar)^-1 and the genie-aided sparse bound obtained by
restricting the lifted training matrix to the true support. The sparse
Fisher matrix is singular (zeroed columns), so the bound only holds under a
projector constraint that is checked explicitly.

Everything is computed per receive-antenna block: the lifted matrices are
block-diagonal, so an (n_r, n_t, n_t) stack represents any of the full
block-diagonal matrices without densifying.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import SystemDims, TrainingDesign


def _pinv_rcond(shape) -> float:
    return max(shape) * np.finfo(float).eps


@dataclass(eq=False)
class FimResult:
    """Per-antenna-block Fisher information of the support-restricted model.

    ``g_matrix`` is the projector pinv(Q) Q with Q the restricted Gram
    matrix; when the on-support columns are independent it equals diag(b).
    ``constraint_ok`` records whether G = G I pinv(I) holds, the validity
    condition for the singular-information bound.
    """

    fim: np.ndarray
    fim_pinv: np.ndarray
    g_matrix: np.ndarray
    crlb_trace: float
    constraint_ok: bool


def _as_block_support(support, n_t: int) -> np.ndarray:
    support = np.asarray(support, dtype=bool)
    if support.ndim != 1 or support.size % n_t:
        raise ValueError("support length must be a multiple of n_t")
    return support.reshape(-1, n_t)


def crlb_lse(training: TrainingDesign, noise_var: float, dims: SystemDims):
    """Covariance bound of the unstructured LS estimator.

    Returns (per-block bound matrix, total trace); the block is
    noise_var * (S^H S)^-1, identical for every antenna.
    """
    if training.s_block.shape != (dims.t_blocks, dims.n_t):
        raise ValueError("training block does not match the system dimensions")
    s = training.s_block
    gram = s.conj().T @ s
    sv = np.linalg.svd(gram, compute_uv=False)
    if sv[-1] <= _pinv_rcond(s.shape) * sv[0]:
        raise ValueError(
            "rank-deficient training: the shared per-antenna block S makes "
            f"all {dims.n_r} antenna blocks deficient (rank < {dims.n_t})")
    block = noise_var * np.linalg.inv(gram)
    trace = dims.n_r * float(np.real(np.trace(block)))
    return block, trace


def fim_sparse(training: TrainingDesign, support, noise_var: float) -> FimResult:
    """Fisher information of the support-restricted linear model.

    Per block: (1/noise_var) * (S U(b))^H (S U(b)) with U(b) zeroing the
    off-support columns.
    """
    if noise_var <= 0:
        raise ValueError("noise variance must be positive")
    s = training.s_block
    blocks = _as_block_support(support, s.shape[1])
    n_r, n_t = blocks.shape
    fim = np.zeros((n_r, n_t, n_t))
    fim_pinv = np.zeros_like(fim)
    g = np.zeros_like(fim)
    if np.iscomplexobj(s):
        fim = fim.astype(complex)
        fim_pinv = fim_pinv.astype(complex)
        g = g.astype(complex)
    rcond = _pinv_rcond(s.shape)
    constraint_ok = True
    crlb_trace = 0.0
    for i in range(n_r):
        sb = s * blocks[i][None, :]
        q = sb.conj().T @ sb
        fim[i] = q / noise_var
        fim_pinv[i] = np.linalg.pinv(fim[i], rcond=rcond, hermitian=True)
        g[i] = fim_pinv[i] @ fim[i]
        bound_i = g[i] @ fim_pinv[i] @ g[i].conj().T
        crlb_trace += float(np.real(np.trace(bound_i)))
        gap = np.max(np.abs(g[i] - g[i] @ fim[i] @ fim_pinv[i]))
        if gap > 1e-8:
            constraint_ok = False
    return FimResult(fim, fim_pinv, g, crlb_trace, constraint_ok)


def crlb_lse_smp(training: TrainingDesign, support, noise_var: float):
    """Covariance bound of the genie-aided support-restricted estimator.

    Returns (per-block bound stack, total trace); the block bound is
    G pinv(I) G^H = noise_var * ((S U(b))^H S U(b))^+, positive on the
    support diagonal and zero elsewhere.
    """
    res = fim_sparse(training, support, noise_var)
    if not res.constraint_ok:
        raise ValueError("CRLB invalid for this support/training pair")
    n_r = res.fim.shape[0]
    bound = np.stack([res.g_matrix[i] @ res.fim_pinv[i] @ res.g_matrix[i].conj().T
                      for i in range(n_r)])
    return bound, res.crlb_trace


def nmse_bound_db(trace_value: float, n_nonzero: int, value_var: float) -> float:
    """Express a bound trace on the NMSE scale used by the sweep harness:
    10 log10(trace / expected channel energy) with energy n_nonzero * value_var."""
    if n_nonzero < 1 or value_var <= 0:
        raise ValueError("need a nonempty support and positive value variance")
    with np.errstate(divide="ignore"):
        return float(10.0 * np.log10(trace_value / (n_nonzero * value_var)))
