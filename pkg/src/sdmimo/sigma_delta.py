"""First-order spatial Sigma-Delta ADC array.

Each antenna's quantization error is phase shifted by -psi and added to the
next antenna's quantizer input. With the output levels chosen so that the
element-wise Bussgang gain is one, the array obeys y = x + U^{-1} q, and the
quantizer input/output/noise powers follow a one-step recursion over the
antenna index which restarts at the first antenna of each snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockDiagonal
from .numerics import QuantizerLevels, lloyd_max, quantizer_correlation

BETA_MAX = 2 / math.sqrt(math.pi)

_SIGN_LEVELS = QuantizerLevels(bits=1, levels=np.array([-1.0, 1.0]),
                               edges=np.array([-np.inf, 0.0, np.inf]))


# ---------------------------------------------------------------------------
# feedback structure


@dataclass(frozen=True)
class FeedbackStructure:
    """U = I_N kron (I + V_d), V = I_N kron V_d for an M-element array.

    ``enabled=False`` gives the conventional array (U = I, V = 0).
    """

    M: int
    N: int
    psi: float = 0.0
    enabled: bool = True

    @property
    def V_d(self) -> np.ndarray:
        if not self.enabled:
            return np.zeros((self.M, self.M), dtype=complex)
        p = np.arange(self.M)
        lag = p[:, None] - p[None, :]
        return np.where(lag > 0, np.exp(-1j * lag * self.psi), 0.0)

    @property
    def U_d(self) -> np.ndarray:
        return np.eye(self.M) + self.V_d

    @property
    def shift_d(self) -> np.ndarray:
        """V_d U_d^{-1} = e^{-j psi} times the unit subdiagonal shift."""
        if not self.enabled:
            return np.zeros((self.M, self.M), dtype=complex)
        return np.exp(-1j * self.psi) * np.eye(self.M, k=-1)

    @property
    def U_inv_d(self) -> np.ndarray:
        """U_d^{-1} = I - V_d U_d^{-1}, lower bidiagonal."""
        return np.eye(self.M) - self.shift_d

    def dense(self, name: str) -> np.ndarray:
        """Full MN x MN version of ``U``, ``V``, ``U_inv`` or ``shift``."""
        local = {"U": self.U_d, "V": self.V_d, "U_inv": self.U_inv_d, "shift": self.shift_d}[name]
        return np.kron(np.eye(self.N), local)


def build_feedback(M: int, N: int, psi: float = 0.0) -> FeedbackStructure:
    if M < 1 or N < 1:
        raise ValueError("M and N must be positive")
    return FeedbackStructure(M, N, float(psi), True)


def no_feedback(M: int, N: int) -> FeedbackStructure:
    return FeedbackStructure(M, N, 0.0, False)


# ---------------------------------------------------------------------------
# quantizers


def alpha_one_bit(sigma_r2, beta: float = 1.05):
    """Output level beta * sqrt(pi sigma_r^2) / 2 of a one-bit quantizer."""
    if not 1.0 <= beta < BETA_MAX:
        raise ValueError(f"beta must lie in [1, {BETA_MAX:.4f})")
    return beta * np.sqrt(np.pi * np.asarray(sigma_r2)) / 2


def alpha_two_bit(sigma_r, levels: QuantizerLevels):
    """Output scale that makes the Bussgang gain of the two-bit quantizer one.

    The real part of a circular input with power sigma_r^2 has variance
    sigma_r^2 / 2, which gives
    alpha = sigma_r sqrt(pi) / sum_i (nu_i - nu_{i-1}) exp(-(nu_i^lo)^2 / 2).
    """
    t = levels.thresholds
    denom = np.sum(levels.steps * np.exp(-0.5 * t * t))
    return np.asarray(sigma_r) * math.sqrt(math.pi) / denom


def quantize_one_bit(r, alpha):
    """alpha (sign(Re r) + j sign(Im r)) with sign(0) = +1."""
    r = np.asarray(r)
    re = np.where(r.real >= 0, 1.0, -1.0)
    im = np.where(r.imag >= 0, 1.0, -1.0)
    return alpha * (re + 1j * im)


def quantize_two_bit(r, alpha, sigma_r, levels: QuantizerLevels):
    """Map each real component to alpha * nu_i for the bin (s nu_i^lo, s nu_i^hi],
    with s = sigma_r / sqrt(2)."""
    r = np.asarray(r)
    s = np.asarray(sigma_r) / math.sqrt(2)
    t = levels.thresholds
    re = levels.levels[_bin_index(r.real, s, t)]
    im = levels.levels[_bin_index(r.imag, s, t)]
    return alpha * (re + 1j * im)


def _bin_index(v, s, t):
    # (lo, hi] bins: count thresholds strictly below v
    v = np.asarray(v) / np.where(s > 0, s, 1.0)
    return np.sum(v[..., None] > t, axis=-1)


@dataclass(frozen=True)
class QuantizerSpec:
    """Resolution of every ADC in the array; ``bits=None`` means unquantized.

    ``beta`` scales the one-bit output level above its Gaussian value.
    """

    bits: int | None
    beta: float = 1.05
    levels: QuantizerLevels | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.bits not in (None, 1, 2):
            raise ValueError(f"unsupported resolution {self.bits!r}")
        if self.bits == 1 and not 1.0 <= self.beta < BETA_MAX:
            raise ValueError(f"beta must lie in [1, {BETA_MAX:.4f})")
        if self.bits == 2 and self.levels is None:
            object.__setattr__(self, "levels", lloyd_max(2))

    @property
    def unit_levels(self) -> QuantizerLevels | None:
        """Quantizer on standardized input with outputs in units of alpha."""
        if self.bits is None:
            return None
        return _SIGN_LEVELS if self.bits == 1 else self.levels

    def alpha(self, sigma_r2):
        if self.bits is None:
            return np.ones_like(np.asarray(sigma_r2, dtype=float))
        if self.bits == 1:
            return alpha_one_bit(sigma_r2, self.beta)
        return alpha_two_bit(np.sqrt(sigma_r2), self.levels)

    def output_power(self, sigma_r2, alpha):
        """sigma_y^2 for a circular Gaussian input of power sigma_r^2."""
        sigma_r2 = np.asarray(sigma_r2, dtype=float)
        if self.bits is None:
            return sigma_r2
        if self.bits == 1:
            return 2 * np.asarray(alpha) ** 2
        return 2 * np.asarray(alpha) ** 2 * self.levels.output_power()

    def quantize(self, r, alpha, sigma_r2):
        if self.bits is None:
            return np.asarray(r)
        if self.bits == 1:
            return quantize_one_bit(r, alpha)
        return quantize_two_bit(r, alpha, np.sqrt(sigma_r2), self.levels)

    def gaussian_gain(self, sigma_r2, alpha):
        """Bussgang gain E[r y*] / E|r|^2 for a Gaussian input of power sigma_r^2."""
        if self.bits is None:
            return np.ones_like(np.asarray(sigma_r2, dtype=float))
        s = np.sqrt(np.asarray(sigma_r2) / 2)
        return np.asarray(alpha) * self.unit_levels.input_correlation() / s


# ---------------------------------------------------------------------------
# power recursion


@dataclass(frozen=True)
class QuantizerState:
    """Per-index powers of the quantizer input r, output y and noise q."""

    quantizer: QuantizerSpec
    M: int
    sigma_r2: np.ndarray
    sigma_y2: np.ndarray
    sigma_q2: np.ndarray
    alpha: np.ndarray

    @property
    def C_q_diagonal(self) -> np.ndarray:
        return self.sigma_q2


def power_recursion(sigma_x2, M: int, quantizer: QuantizerSpec,
                    feedback: bool = True, tol: float = 1e-12) -> QuantizerState:
    """Propagate quantizer powers along the array.

    ``sigma_x2`` holds the MN diagonal entries of C_x. At the first antenna of
    every snapshot sigma_r^2 = sigma_x^2; elsewhere the previous antenna's
    quantization noise power is added. Without feedback sigma_r^2 = sigma_x^2
    everywhere.
    """
    sigma_x2 = np.asarray(sigma_x2, dtype=float)
    n = sigma_x2.size
    if n % M:
        raise ValueError("length of sigma_x2 must be a multiple of M")
    sr2 = np.empty(n)
    sy2 = np.empty(n)
    sq2 = np.empty(n)
    alpha = np.empty(n)
    for m in range(n):
        sr2[m] = sigma_x2[m]
        if feedback and m % M:
            sr2[m] += sq2[m - 1]
        alpha[m] = quantizer.alpha(sr2[m])
        sy2[m] = quantizer.output_power(sr2[m], alpha[m])
        sq2[m] = sy2[m] - sr2[m]
        if sq2[m] < -tol * max(sr2[m], 1e-300):
            raise ValueError(
                f"negative quantization noise power at index {m}: the quantizer "
                "output level is miscalibrated for this input power")
        sq2[m] = max(sq2[m], 0.0)
    return QuantizerState(quantizer, M, sr2, sy2, sq2, alpha)


# ---------------------------------------------------------------------------
# array operation


def forward(x: np.ndarray, feedback: FeedbackStructure, state: QuantizerState,
            return_input: bool = False):
    """Run the array on pilot-domain samples ``x`` of shape (..., M N).

    r_m = x_m + e^{-j psi} (r_{m-1} - y_{m-1}) except at the first antenna of a
    snapshot, and y_m = alpha_m Q_m(r_m). Returns y, or (y, r) with
    ``return_input``.
    """
    M, N = feedback.M, feedback.N
    x = np.asarray(x)
    if x.shape[-1] != M * N:
        raise ValueError(f"expected trailing dimension {M * N}, got {x.shape[-1]}")
    X = x.reshape(x.shape[:-1] + (N, M))
    R = np.empty(X.shape, dtype=complex)
    Y = np.empty(X.shape, dtype=complex)
    alpha = state.alpha.reshape(N, M)
    sr2 = state.sigma_r2.reshape(N, M)
    q = state.quantizer
    phase = np.exp(-1j * feedback.psi)
    for m in range(M):
        r = X[..., m]
        if feedback.enabled and m:
            r = r + phase * (R[..., m - 1] - Y[..., m - 1])
        R[..., m] = r
        Y[..., m] = q.quantize(r, alpha[:, m], sr2[:, m])
    y = Y.reshape(x.shape)
    if return_input:
        return y, R.reshape(x.shape)
    return y


def cov_y(C_x, sigma_q2: np.ndarray, feedback: FeedbackStructure):
    """C_y = C_x + U^{-1} diag(sigma_q^2) U^{-H}."""
    M, N = feedback.M, feedback.N
    Ui = feedback.U_inv_d
    sq = np.asarray(sigma_q2, dtype=float).reshape(N, M)
    shaped = np.einsum("ab,nb,cb->nac", Ui, sq, Ui.conj())
    if isinstance(C_x, BlockDiagonal):
        return BlockDiagonal(C_x.blocks + shaped)
    out = np.array(C_x, dtype=complex, copy=True)
    for n in range(N):
        out[n * M:(n + 1) * M, n * M:(n + 1) * M] += shaped[n]
    return out


def cov_r(C_x, sigma_q2: np.ndarray, feedback: FeedbackStructure):
    """C_r = C_x + S diag(sigma_q^2) S^H with S = V U^{-1}."""
    M, N = feedback.M, feedback.N
    S = feedback.shift_d
    sq = np.asarray(sigma_q2, dtype=float).reshape(N, M)
    shaped = np.einsum("ab,nb,cb->nac", S, sq, S.conj())
    if isinstance(C_x, BlockDiagonal):
        return BlockDiagonal(C_x.blocks + shaped)
    out = np.array(C_x, dtype=complex, copy=True)
    for n in range(N):
        out[n * M:(n + 1) * M, n * M:(n + 1) * M] += shaped[n]
    return out


def memoryless_output_covariance(C_x, quantizer: QuantizerSpec, alpha: np.ndarray):
    """Exact E[y y^H] of element-wise quantization of a circular Gaussian vector.

    Entry (i, j) is 2 alpha_i alpha_j (f(Re c_ij) + j f(Im c_ij)), where c is the
    correlation-coefficient matrix and f the quantizer's correlation map
    (the arcsine law for one bit).
    """
    if quantizer.bits is None:
        return C_x
    lv = quantizer.unit_levels
    power = lv.output_power()

    def one(C, a):
        d = np.sqrt(np.real(np.diagonal(C)))
        c = C / np.outer(d, d)
        out = 2 * np.outer(a, a) * (quantizer_correlation(c.real, lv) + 1j * quantizer_correlation(c.imag, lv))
        out[np.diag_indices_from(out)] = 2 * a**2 * power
        return out

    if isinstance(C_x, BlockDiagonal):
        b = C_x.block_size
        a = np.asarray(alpha).reshape(C_x.n_blocks, b)
        if C_x.identical() and np.all(a == a[0]):
            return BlockDiagonal.repeat(one(C_x.blocks[0], a[0]), C_x.n_blocks)
        return BlockDiagonal(np.stack([one(C, ai) for C, ai in zip(C_x.blocks, a)]))
    return one(np.asarray(C_x), np.asarray(alpha))


@dataclass(frozen=True)
class SigmaDeltaFront:
    """Array front-end: feedback wiring, quantizer and calibrated powers."""

    feedback: FeedbackStructure
    state: QuantizerState

    @classmethod
    def design(cls, sigma_x2, feedback: FeedbackStructure, quantizer: QuantizerSpec) -> "SigmaDeltaFront":
        st = power_recursion(sigma_x2, feedback.M, quantizer, feedback=feedback.enabled)
        return cls(feedback, st)

    @property
    def quantizer(self) -> QuantizerSpec:
        return self.state.quantizer

    def forward(self, x, return_input: bool = False):
        return forward(x, self.feedback, self.state, return_input)

    def cov_y(self, C_x):
        return cov_y(C_x, self.state.sigma_q2, self.feedback)

    def noise_covariance(self) -> np.ndarray:
        """U^{-1} C_q U^{-H} for a single snapshot (first M indices)."""
        Ui = self.feedback.U_inv_d
        sq = self.state.sigma_q2[: self.feedback.M]
        return (Ui * sq) @ Ui.conj().T
