"""Shared test oracles: brute-force constructions kept independent of the
library code paths they check."""

import itertools

import numpy as np


def kron_operator_oracle(s_block: np.ndarray, n_r: int) -> np.ndarray:
    """Dense lifted training matrix built from the Kronecker identity."""
    return np.kron(np.eye(n_r), s_block)


def normal_equations_ls(a: np.ndarray, y: np.ndarray) -> np.ndarray:
    """(A^H A)^-1 A^H y for full-column-rank A."""
    gram = a.conj().T @ a
    return np.linalg.solve(gram, a.conj().T @ y)


def map_support_oracle(y: np.ndarray, s_block: np.ndarray, p1: float,
                       value_var: float, noise_var: float) -> np.ndarray:
    """Exhaustive support search for a single-antenna block.

    Scores every support by the marginal likelihood of y (values integrated
    out under their Gaussian prior) times the Bernoulli support prior.
    """
    t, n = s_block.shape
    best_score, best = -np.inf, None
    for bits in itertools.product((0, 1), repeat=n):
        b = np.array(bits, dtype=bool)
        cov = value_var * (s_block[:, b] @ s_block[:, b].T) + noise_var * np.eye(t)
        _, logdet = np.linalg.slogdet(cov)
        loglik = -0.5 * logdet - 0.5 * float(y @ np.linalg.solve(cov, y))
        logprior = b.sum() * np.log(p1) + (n - b.sum()) * np.log(1.0 - p1)
        if loglik + logprior > best_score:
            best_score, best = loglik + logprior, b
    return best
