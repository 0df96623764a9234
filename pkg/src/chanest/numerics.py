"""Shared numerical kernels: SVD-based least squares, Gaussian densities and
log-domain probability-ratio helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

# Probabilities are clamped to [EPS_PROB, 1 - EPS_PROB] so log-ratios stay
# finite across iterations.
EPS_PROB = 1e-12


def _abs2(x):
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return x.real ** 2 + x.imag ** 2
    return x * x


@dataclass(eq=False)
class LsSolution:
    """Minimum-norm least-squares solution with rank and covariance info.

    ``covariance_diag`` is noise_var * diag((A^H A)^+), the per-coefficient
    estimator variance under white noise of the given variance.
    """

    estimate: np.ndarray
    residual_norm: float
    rank: int
    covariance_diag: np.ndarray


def solve_ls(a: np.ndarray, y: np.ndarray, noise_var: float = 1.0) -> LsSolution:
    """Solve min ||y - A x|| with minimum-norm tie-breaking.

    Uses a rank-revealing SVD; singular values below
    max(m, n) * eps * sigma_max are treated as zero. ``y`` may be a vector or
    a matrix of stacked right-hand sides (one solution per column).
    """
    a = np.asarray(a)
    y = np.asarray(y)
    if a.ndim != 2:
        raise ValueError("A must be a 2-D matrix")
    m, n = a.shape
    if m < 1 or n < 1:
        raise ValueError("A must be nonempty")
    if y.shape[0] != m or y.ndim > 2:
        raise ValueError("right-hand side does not match A")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(y))):
        raise ValueError("inputs must be finite")

    u, s, vh = np.linalg.svd(a, full_matrices=False)
    cutoff = max(m, n) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.count_nonzero(s > cutoff))

    out_shape = (n,) if y.ndim == 1 else (n, y.shape[1])
    dtype = np.result_type(a, y)
    if rank == 0:
        estimate = np.zeros(out_shape, dtype=dtype)
        cov = np.zeros(n)
    else:
        ur, sr, vr = u[:, :rank], s[:rank], vh[:rank]
        z = ur.conj().T @ y
        z = z / (sr if y.ndim == 1 else sr[:, None])
        estimate = vr.conj().T @ z
        cov = noise_var * ((np.abs(vr) ** 2) / (sr ** 2)[:, None]).sum(axis=0)
    residual = float(np.linalg.norm(y - a @ estimate))
    return LsSolution(estimate, residual, rank, cov)


def log_gaussian_pdf(x, mean, variance):
    """Log of the Gaussian density; squared magnitude for complex residuals."""
    variance = np.asarray(variance, dtype=float)
    if np.any(variance <= 0):
        raise ValueError("variance must be positive")
    r2 = _abs2(np.asarray(x) - np.asarray(mean))
    return -0.5 * np.log(2.0 * np.pi * variance) - r2 / (2.0 * variance)


def gaussian_pdf(x, mean, variance):
    """Gaussian density (1/sqrt(2 pi v)) exp(-|x - mean|^2 / (2 v))."""
    return np.exp(log_gaussian_pdf(x, mean, variance))


def bernoulli_from_lr(log_ratio):
    """Convert a log probability-ratio into p = 1 / (1 + exp(log_ratio)).

    The result is clamped to [EPS_PROB, 1 - EPS_PROB]; infinite log-ratios
    saturate at the clamp instead of producing exact 0 or 1.
    """
    p = expit(-np.asarray(log_ratio, dtype=float))
    if p.ndim == 0:
        return float(np.clip(p, EPS_PROB, 1.0 - EPS_PROB))
    return np.clip(p, EPS_PROB, 1.0 - EPS_PROB, out=p)
