"""Sparse beamspace MIMO channel model and blocked training observations.

Conventions used throughout the package:

* A system has ``n_r`` receive antennas, ``n_t`` transmit antennas and a
  training burst of ``t_blocks`` time blocks.
* Anything indexed by (receive antenna i, transmit beam j) is flattened
  receive-antenna-major: entry ``(i, j)`` sits at flat index ``i * n_t + j``.
* Received samples are flattened the same way: ``(i, tau)`` maps to flat
  index ``i * t_blocks + tau``.
* The lifted training matrix is block-diagonal with ``n_r`` identical
  copies of the per-antenna block ``S`` (shape ``t_blocks x n_t``), so the
  observation model separates per receive antenna.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import hadamard

TRAINING_KINDS = ("orthogonal", "random-sign", "gaussian")


def round_half_up(x: float) -> int:
    """Round to the nearest integer, halves away from zero for positive x."""
    return int(np.floor(x + 0.5))


def _abs2(x):
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return x.real ** 2 + x.imag ** 2
    return x * x


@dataclass(frozen=True)
class SystemDims:
    """Antenna counts and training length of one estimation problem."""

    n_r: int
    n_t: int
    t_blocks: int

    def __post_init__(self):
        if self.n_r < 1 or self.n_t < 1:
            raise ValueError("antenna counts must be >= 1")
        if self.t_blocks < 2:
            raise ValueError(
                "t_blocks must be >= 2 (extrinsic updates need at least two "
                "sum nodes per variable)"
            )

    @property
    def size(self) -> int:
        """Number of virtual-channel entries, n_r * n_t."""
        return self.n_r * self.n_t


@dataclass(frozen=True)
class PathParams:
    """One propagation path of the geometric channel model."""

    gain: complex
    aod: float
    aoa: float
    path_loss: float = 1.0
    wavelength: float = 1.0
    spacing: float = 0.5

    def __post_init__(self):
        two_pi = 2.0 * np.pi
        if not (0.0 <= self.aod < two_pi and 0.0 <= self.aoa < two_pi):
            raise ValueError("angles must lie in [0, 2*pi)")
        if self.path_loss <= 0:
            raise ValueError("path_loss must be positive")
        if self.wavelength <= 0 or self.spacing <= 0:
            raise ValueError("wavelength and spacing must be positive")


def array_response(angle: float, n: int, wavelength: float = 1.0,
                   spacing: float | None = None) -> np.ndarray:
    """Unit-norm uniform-linear-array steering vector for one azimuth angle.

    Element m carries phase exp(j * m * (2*pi*spacing/wavelength) * sin(angle));
    spacing defaults to half a wavelength.
    """
    n = int(n)
    if n < 1:
        raise ValueError("antenna count must be >= 1")
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    if spacing is None:
        spacing = wavelength / 2.0
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    phase = (2.0 * np.pi * spacing / wavelength) * np.sin(angle)
    return np.exp(1j * phase * np.arange(n)) / np.sqrt(n)


def beam_angle(k: int, n: int) -> float:
    """Azimuth angle (in [0, 2*pi)) of the k-th DFT beam of an n-element array.

    Steering the array at this angle reproduces column k of ``dft_basis(n)``
    exactly, which is what makes on-grid channels perfectly sparse in the
    beamspace representation.
    """
    if not 0 <= k < n:
        raise ValueError("beam index out of range")
    s = 2.0 * k / n
    if s > 1.0:
        s -= 2.0
    return float(np.arcsin(s) % (2.0 * np.pi))


def dft_basis(n: int) -> np.ndarray:
    """Unitary DFT matrix whose column k is the steering vector of beam k."""
    if n < 1:
        raise ValueError("basis size must be >= 1")
    k = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


@dataclass(frozen=True, eq=False)
class VirtualBasis:
    """Pair of unitary beamspace bases for the receive and transmit arrays."""

    w_r: np.ndarray
    w_t: np.ndarray

    def __post_init__(self):
        for name, w in (("w_r", self.w_r), ("w_t", self.w_t)):
            w = np.asarray(w)
            if w.ndim != 2 or w.shape[0] != w.shape[1]:
                raise ValueError(f"{name} must be square")
            gram = w.conj().T @ w
            if np.linalg.norm(gram - np.eye(w.shape[0])) > 1e-10:
                raise ValueError(f"{name} is not unitary")

    @classmethod
    def for_dims(cls, dims: SystemDims) -> "VirtualBasis":
        return cls(dft_basis(dims.n_r), dft_basis(dims.n_t))


def geometric_channel(dims: SystemDims, paths) -> np.ndarray:
    """Multipath channel matrix: sum of rank-one outer products of steering
    vectors, scaled by sqrt(n_r*n_t/path_loss)."""
    paths = list(paths)
    if not paths:
        raise ValueError("at least one path is required")
    ref = paths[0]
    for p in paths[1:]:
        if (p.wavelength, p.spacing, p.path_loss) != (ref.wavelength, ref.spacing, ref.path_loss):
            raise ValueError("all paths must share wavelength, spacing and path_loss")
    a_r = np.column_stack(
        [array_response(p.aoa, dims.n_r, p.wavelength, p.spacing) for p in paths])
    a_t = np.column_stack(
        [array_response(p.aod, dims.n_t, p.wavelength, p.spacing) for p in paths])
    alpha = np.sqrt(dims.n_r * dims.n_t / ref.path_loss) * np.array(
        [p.gain for p in paths])
    return (a_r * alpha) @ a_t.conj().T


def virtual_map(h: np.ndarray, basis: VirtualBasis) -> np.ndarray:
    """Map an antenna-domain channel matrix into beamspace coordinates."""
    h = np.asarray(h)
    if h.shape != (basis.w_r.shape[0], basis.w_t.shape[0]):
        raise ValueError("channel shape does not match the basis")
    return basis.w_r.conj().T @ h @ basis.w_t


def virtual_unmap(h_v: np.ndarray, basis: VirtualBasis) -> np.ndarray:
    """Inverse of :func:`virtual_map`."""
    h_v = np.asarray(h_v)
    if h_v.shape != (basis.w_r.shape[0], basis.w_t.shape[0]):
        raise ValueError("channel shape does not match the basis")
    return basis.w_r @ h_v @ basis.w_t.conj().T


@dataclass(eq=False)
class VirtualChannel:
    """Beamspace channel vector split into value coefficients and a binary
    support vector; the observable vector is their elementwise product."""

    values: np.ndarray
    support: np.ndarray
    sparsity: int = field(init=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        self.support = np.asarray(self.support, dtype=bool)
        if self.values.ndim != 1 or self.values.shape != self.support.shape:
            raise ValueError("values and support must be 1-D and equally long")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")
        self.sparsity = int(self.support.sum())

    @property
    def h_v(self) -> np.ndarray:
        """The composed sparse vector: values masked by the support."""
        return self.values * self.support

    @property
    def support_indices(self) -> np.ndarray:
        return np.flatnonzero(self.support)

    def to_dict(self) -> dict:
        idx = self.support_indices
        vals = np.asarray(self.values[idx], dtype=complex)
        return {
            "length": int(self.values.size),
            "support_indices": idx.tolist(),
            "values": [[float(v.real), float(v.imag)] for v in vals],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VirtualChannel":
        n = int(d["length"])
        idx = np.asarray(d["support_indices"], dtype=int)
        pairs = np.asarray(d["values"], dtype=float).reshape(-1, 2)
        vals = pairs[:, 0] + 1j * pairs[:, 1]
        if np.all(pairs[:, 1] == 0.0):
            vals = pairs[:, 0]
        values = np.zeros(n, dtype=vals.dtype)
        support = np.zeros(n, dtype=bool)
        values[idx] = vals
        support[idx] = True
        return cls(values, support)


@dataclass(frozen=True, eq=False)
class TrainingDesign:
    """Per-antenna training block S (t_blocks x n_t) plus how it was built."""

    s_block: np.ndarray
    kind: str = "orthogonal"
    seed: int | None = None

    def __post_init__(self):
        s = np.asarray(self.s_block)
        object.__setattr__(self, "s_block", s)
        if s.ndim != 2:
            raise ValueError("training block must be a 2-D matrix")
        if self.kind not in TRAINING_KINDS:
            raise ValueError(f"unknown training kind {self.kind!r}")
        if self.kind == "orthogonal":
            gram = s.conj().T @ s
            c = float(np.real(np.trace(gram))) / s.shape[1]
            if c <= 0:
                raise ValueError("orthogonal training must have positive column energy")
            off = gram - c * np.eye(s.shape[1])
            if np.max(np.abs(off)) > 1e-10 * max(1.0, c):
                raise ValueError("training columns are not orthogonal")

    @property
    def t_blocks(self) -> int:
        return self.s_block.shape[0]

    @property
    def n_t(self) -> int:
        return self.s_block.shape[1]

    @property
    def gram_scale(self) -> float:
        """c such that S^H S = c I (exact for the orthogonal kind)."""
        return float(np.real(np.trace(self.s_block.conj().T @ self.s_block))) / self.n_t

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": self.seed,
                "t_blocks": self.t_blocks, "n_t": self.n_t}


def make_training(dims: SystemDims, kind: str = "orthogonal", seed: int = 0) -> TrainingDesign:
    """Build a training design.

    orthogonal   S^T S = t_blocks * I with ||S||_F^2 = n_t * t_blocks
                 (Hadamard columns when t_blocks is a power of two,
                 otherwise a scaled random orthonormal basis)
    random-sign  i.i.d. +-1 entries
    gaussian     i.i.d. standard normal entries
    """
    if kind not in TRAINING_KINDS:
        raise ValueError(f"unknown training kind {kind!r}")
    t, n_t = dims.t_blocks, dims.n_t
    rng = np.random.default_rng(seed)
    if kind == "orthogonal":
        if t < n_t:
            raise ValueError("orthogonal training requires t_blocks >= n_t")
        if t & (t - 1) == 0:
            s = hadamard(t).astype(float)[:, :n_t]
        else:
            q, _ = np.linalg.qr(rng.standard_normal((t, n_t)))
            s = np.sqrt(t) * q
    elif kind == "random-sign":
        s = rng.integers(0, 2, size=(t, n_t)).astype(float) * 2.0 - 1.0
    else:
        s = rng.standard_normal((t, n_t))
    return TrainingDesign(s, kind, seed)


class BlockTrainingOperator:
    """Lifted training matrix diag(S, ..., S) applied without densifying.

    Maps a length n_r*n_t beamspace vector to the length n_r*t_blocks stack
    of per-antenna received blocks.
    """

    def __init__(self, s_block: np.ndarray, n_r: int):
        self.s_block = np.asarray(s_block)
        if self.s_block.ndim != 2:
            raise ValueError("training block must be 2-D")
        if n_r < 1:
            raise ValueError("n_r must be >= 1")
        self.n_r = int(n_r)

    @property
    def shape(self) -> tuple[int, int]:
        t, n_t = self.s_block.shape
        return (self.n_r * t, self.n_r * n_t)

    def matvec(self, h_v: np.ndarray) -> np.ndarray:
        h_v = np.asarray(h_v)
        if h_v.shape != (self.shape[1],):
            raise ValueError("vector length does not match the operator")
        h = h_v.reshape(self.n_r, self.s_block.shape[1])
        return (h @ self.s_block.T).reshape(-1)

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        if y.shape != (self.shape[0],):
            raise ValueError("vector length does not match the operator")
        y2 = y.reshape(self.n_r, self.s_block.shape[0])
        return (y2 @ np.conj(self.s_block)).reshape(-1)

    def to_dense(self) -> np.ndarray:
        return np.kron(np.eye(self.n_r), self.s_block)

    def spectral_norm(self) -> float:
        return float(np.linalg.norm(self.s_block, 2))


def build_observation_operator(training: TrainingDesign, dims: SystemDims) -> BlockTrainingOperator:
    """Lift the per-antenna training block to the full block-diagonal operator."""
    if training.s_block.shape != (dims.t_blocks, dims.n_t):
        raise ValueError("training block does not match the system dimensions")
    return BlockTrainingOperator(training.s_block, dims.n_r)


def gen_sparse_channel(dims: SystemDims, sparsity_ratio: float,
                       value_var: float = 10.0, seed=None,
                       complex_values: bool = False) -> VirtualChannel:
    """Draw a random sparse beamspace channel.

    The support is uniform without replacement; the number of nonzeros is
    sparsity_ratio * n_r * n_t rounded half-up. Nonzero values are i.i.d.
    zero-mean Gaussian with variance value_var.
    """
    if not 0.0 < sparsity_ratio <= 1.0:
        raise ValueError("sparsity ratio must lie in (0, 1]")
    if value_var <= 0:
        raise ValueError("value variance must be positive")
    size = dims.size
    n_nonzero = round_half_up(sparsity_ratio * size)
    if n_nonzero < 1:
        raise ValueError("sparsity ratio yields an empty support")
    rng = np.random.default_rng(seed)
    idx = rng.choice(size, size=n_nonzero, replace=False)
    support = np.zeros(size, dtype=bool)
    support[idx] = True
    if complex_values:
        values = np.zeros(size, dtype=complex)
        values[idx] = np.sqrt(value_var / 2.0) * (
            rng.standard_normal(n_nonzero) + 1j * rng.standard_normal(n_nonzero))
    else:
        values = np.zeros(size)
        values[idx] = np.sqrt(value_var) * rng.standard_normal(n_nonzero)
    return VirtualChannel(values, support)


def snr_to_noise_var(training: TrainingDesign, dims: SystemDims, snr_db: float) -> float:
    """Per-component noise variance for a target SNR.

    SNR is the ratio of the lifted training energy ||diag(S,...,S)||_F^2 to
    the expected noise energy n_r * t_blocks * noise_var, so the mapping is
    noise_var = ||S||_F^2 / (t_blocks * 10^(snr_db/10)).
    """
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    fro2 = float(np.sum(_abs2(training.s_block)))
    return fro2 / (dims.t_blocks * 10.0 ** (snr_db / 10.0))


@dataclass(eq=False)
class Observation:
    """Received training samples, antenna-major, with noise bookkeeping."""

    y: np.ndarray
    noise_var: float
    snr_db: float | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y)
        if self.y.ndim != 1:
            raise ValueError("y must be a flat vector")
        if self.noise_var < 0:
            raise ValueError("noise variance must be nonnegative")


def observe(channel: VirtualChannel, operator: BlockTrainingOperator,
            noise_var: float, seed=None, snr_db: float | None = None) -> Observation:
    """Apply the lifted training operator and add white Gaussian noise.

    Noise is circularly symmetric when the noiseless samples are complex.
    """
    if noise_var < 0:
        raise ValueError("noise variance must be nonnegative")
    y0 = operator.matvec(channel.h_v)
    if noise_var == 0:
        return Observation(y0.copy(), 0.0, snr_db)
    rng = np.random.default_rng(seed)
    if np.iscomplexobj(y0):
        noise = np.sqrt(noise_var / 2.0) * (
            rng.standard_normal(y0.size) + 1j * rng.standard_normal(y0.size))
    else:
        noise = np.sqrt(noise_var) * rng.standard_normal(y0.size)
    return Observation(y0 + noise, float(noise_var), snr_db)


def layout(observation: Observation, training: TrainingDesign) -> tuple[int, int, int]:
    """Infer (n_r, n_t, t_blocks) from an observation/training pair."""
    t, n_t = training.s_block.shape
    if observation.y.size % t:
        raise ValueError("observation length is not a multiple of t_blocks")
    return observation.y.size // t, n_t, t


def save_instance(file, channel: VirtualChannel, training: TrainingDesign,
                  dims: SystemDims, seed: int | None = None) -> None:
    """Serialize one (channel, training) problem instance as JSON text."""
    doc = {
        "format": "chanest-instance",
        "dims": {"n_r": dims.n_r, "n_t": dims.n_t, "t_blocks": dims.t_blocks},
        "seed": seed,
        "channel": channel.to_dict(),
        "training": training.to_dict(),
    }
    if hasattr(file, "write"):
        json.dump(doc, file, indent=1)
    else:
        with open(file, "w") as fh:
            json.dump(doc, fh, indent=1)


def load_instance(file):
    """Inverse of :func:`save_instance`.

    Returns (channel, training, dims, seed); the training matrix is rebuilt
    from its kind and seed.
    """
    if hasattr(file, "read"):
        doc = json.load(file)
    else:
        with open(file) as fh:
            doc = json.load(fh)
    if doc.get("format") != "chanest-instance":
        raise ValueError("not a chanest instance file")
    d = doc["dims"]
    dims = SystemDims(int(d["n_r"]), int(d["n_t"]), int(d["t_blocks"]))
    channel = VirtualChannel.from_dict(doc["channel"])
    if channel.values.size != dims.size:
        raise ValueError("channel length does not match dims")
    tr = doc["training"]
    training = make_training(dims, tr["kind"], tr["seed"])
    return channel, training, dims, doc.get("seed")
