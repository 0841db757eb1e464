"""Bussgang-based LMMSE channel estimation behind quantized arrays.

Five front-ends share one estimator surface:

===================  ===========================================================
tag                  front-end
===================  ===========================================================
sigma-delta-1bit     spatial Sigma-Delta array, one-bit ADCs
sigma-delta-2bit     spatial Sigma-Delta array, two-bit Lloyd-Max ADCs
conv-1bit            element-wise one-bit ADCs (Bussgang LMMSE, arcsine law)
conv-2bit            element-wise two-bit Lloyd-Max ADCs
unquantized          infinite-resolution ADCs (classical LMMSE)
===================  ===========================================================
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import BlockDiagonal, as_dense, hermitian_solve
from .channel import ChannelStatistics, PilotBlock, cov_x
from .scenario import Scenario
from .sigma_delta import (QuantizerSpec, SigmaDeltaFront, build_feedback, cov_y,
                          memoryless_output_covariance, no_feedback)

TAGS = ("sigma-delta-1bit", "sigma-delta-2bit", "conv-1bit", "conv-2bit", "unquantized")


def parse_tag(tag: str) -> tuple[int | None, bool]:
    """Return (bits, feedback) for an estimator tag."""
    if tag == "unquantized":
        return None, False
    try:
        arch, res = tag.rsplit("-", 1)
        bits = {"1bit": 1, "2bit": 2}[res]
    except (ValueError, KeyError):
        raise ValueError(f"unknown estimator tag {tag!r}") from None
    if arch not in ("sigma-delta", "conv"):
        raise ValueError(f"unknown estimator tag {tag!r}")
    return bits, arch == "sigma-delta"


# ---------------------------------------------------------------------------
# dense reference formulas


def lmmse_estimate(y, C_g, Phi, C_y, gain=None, jitter: float = 0.0):
    """g_hat = C_g Phi^H A^H C_y^{-1} y with A = diag(gain) (identity by default).

    Dense reference path; ``jitter`` (e.g. 1e-10) regularizes C_y by
    jitter * trace / n on the diagonal and must be requested explicitly.
    """
    C_g = as_dense(C_g)
    z = hermitian_solve(C_y, np.asarray(y), jitter=jitter)
    if gain is not None:
        z = np.conj(gain) * z
    return z @ (C_g @ Phi.conj().T).T


def estimate_covariance(C_g, Phi, C_y, gain=None, jitter: float = 0.0):
    """(C_ghat, C_eps) = (C_g Phi^H A^H C_y^{-1} A Phi C_g, C_g - C_ghat), dense."""
    C_g = as_dense(C_g)
    P = Phi @ C_g
    if gain is not None:
        P = gain[:, None] * P
    Z = hermitian_solve(C_y, P.T, jitter=jitter).T
    C_ghat = P.conj().T @ Z
    C_ghat = 0.5 * (C_ghat + C_ghat.conj().T)
    return C_ghat, C_g - C_ghat


def theoretical_ne(C_g, C_ghat) -> float:
    """Tr(C_g - C_ghat) / Tr(C_g); valid for LMMSE estimates."""
    tg = _trace(C_g)
    return (tg - _trace(C_ghat)) / tg


def empirical_ne(g: np.ndarray, g_hat: np.ndarray) -> float:
    """min over complex zeta of E||g - zeta g_hat||^2 / E||g||^2 over the leading axis.

    Equals 1 - |E[g_hat^H g]|^2 / (E||g_hat||^2 E||g||^2), which lies in [0, 1]
    and is invariant to any nonzero rescaling of ``g_hat``.
    """
    g = np.asarray(g)
    g_hat = np.asarray(g_hat)
    cross = np.abs(np.mean(np.sum(g_hat.conj() * g, axis=-1))) ** 2
    p_hat = np.mean(np.sum(np.abs(g_hat) ** 2, axis=-1))
    p_g = np.mean(np.sum(np.abs(g) ** 2, axis=-1))
    return float(1.0 - cross / (p_hat * p_g))


def _trace(C) -> float:
    if isinstance(C, BlockDiagonal):
        return C.trace()
    return float(np.real(np.trace(C)))


def to_db(v) -> float:
    return float(10 * np.log10(v))


# ---------------------------------------------------------------------------
# structured estimator


@dataclass(frozen=True)
class LinearEstimator:
    """LMMSE estimator for one front-end, with all second-order statistics
    precomputed. Estimation itself is a pure function of the array output."""

    tag: str
    stats: ChannelStatistics
    pilots: PilotBlock
    front: SigmaDeltaFront
    C_x: object
    C_y: object
    gain: np.ndarray  # Bussgang gain per pilot-domain index

    @property
    def M(self) -> int:
        return self.stats.M

    def quantize(self, x: np.ndarray) -> np.ndarray:
        return self.front.forward(x)

    def estimate(self, y: np.ndarray) -> np.ndarray:
        z = hermitian_solve(self.C_y, np.asarray(y))
        z = np.conj(self.gain) * z
        v = self.pilots.apply_adjoint(z, self.M)
        K, M = self.stats.K, self.M
        V = v.reshape(v.shape[:-1] + (K, M))
        g_hat = np.einsum("kab,...kb->...ka", self.stats.covs, V)
        return g_hat.reshape(v.shape)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.estimate(self.quantize(x))

    def dense_estimate(self, y: np.ndarray) -> np.ndarray:
        """Same estimate through full MN x MN matrices (validation path)."""
        Phi = self.pilots.dense(self.M)
        return lmmse_estimate(y, self.stats.C_g(), Phi, as_dense(self.C_y), self.gain)

    def covariance(self):
        """(C_ghat, C_eps); block diagonal over users when pilots decouple them."""
        K, M = self.stats.K, self.M
        if self._decoupled():
            B = self.C_y.blocks[0]
            a = self.gain[:M]
            C_G = self.stats.C_G
            AC = a[:, None] * C_G
            core = AC.conj().T @ hermitian_solve(B, AC.T).T
            power = np.real(np.sum(np.abs(self.pilots.phi_t) ** 2, axis=1))
            blocks = self.pilots.rho * power[:, None, None] * core
            blocks = 0.5 * (blocks + np.conj(np.swapaxes(blocks, 1, 2)))
            C_ghat = BlockDiagonal(blocks)
            return C_ghat, self.stats.C_g() - C_ghat
        Phi = self.pilots.dense(M)
        C_ghat, C_eps = estimate_covariance(self.stats.C_g(), Phi, self.C_y, self.gain)
        blocks = C_ghat.reshape(K, M, K, M)
        off = blocks.copy()
        for k in range(K):
            off[k, :, k, :] = 0
        if np.max(np.abs(off)) <= 1e-12 * np.max(np.abs(C_ghat)):
            diag = BlockDiagonal(np.stack([blocks[k, :, k, :] for k in range(K)]))
            return diag, self.stats.C_g() - diag
        return C_ghat, C_eps

    def _decoupled(self) -> bool:
        if not (isinstance(self.C_y, BlockDiagonal) and self.C_y.identical() and self.stats.shared):
            return False
        N, M = self.pilots.N, self.M
        if not np.all(self.gain.reshape(N, M) == self.gain[:M]):
            return False
        P = self.pilots.phi_t @ self.pilots.phi_t.conj().T
        off = P - np.diag(np.diag(P))
        return bool(np.max(np.abs(off), initial=0.0) <= 1e-12 * np.max(np.abs(P)))

    def theoretical_ne(self) -> float:
        C_ghat, _ = self.covariance()
        return theoretical_ne(self.stats.C_g(), C_ghat)


def build_estimator(tag: str, stats: ChannelStatistics, pilots: PilotBlock, C_N: np.ndarray,
                    beta: float = 1.05, psi: float = 0.0,
                    exact_conventional: bool = True) -> LinearEstimator:
    """Run the power recursion, form C_y and return the estimator for ``tag``.

    The conventional front-ends use the exact output covariance of element-wise
    quantized Gaussian data by default; ``exact_conventional=False`` instead
    applies the Sigma-Delta pipeline with U = I, V = 0 (diagonal C_q).
    """
    bits, sd = parse_tag(tag)
    M, N = stats.M, pilots.N
    C_x = cov_x(pilots, stats, C_N)
    diag_x = np.real(C_x.diagonal() if isinstance(C_x, BlockDiagonal) else np.diag(C_x))
    quantizer = QuantizerSpec(bits, beta if sd else 1.0)
    feedback = build_feedback(M, N, psi) if sd else no_feedback(M, N)
    front = SigmaDeltaFront.design(diag_x, feedback, quantizer)
    st = front.state
    if bits is not None and not sd and exact_conventional:
        C_y = memoryless_output_covariance(C_x, quantizer, st.alpha)
        gain = quantizer.gaussian_gain(st.sigma_r2, st.alpha)
    else:
        C_y = cov_y(C_x, st.sigma_q2, feedback)
        gain = np.ones(M * N)
    return LinearEstimator(tag, stats, pilots, front, C_x, C_y, np.asarray(gain, dtype=float))


def scenario_estimator(scenario: Scenario, tag: str, beta: float = 1.05, **kw) -> LinearEstimator:
    return build_estimator(tag, scenario.stats, scenario.pilots, scenario.C_N, beta,
                           scenario.geometry.psi, **kw)


def conventional_lmmse(x: np.ndarray, bits: int | None, stats: ChannelStatistics,
                       pilots: PilotBlock, C_N: np.ndarray) -> np.ndarray:
    """Quantize ``x`` element-wise with ``bits`` (None: not at all) and estimate."""
    tag = "unquantized" if bits is None else f"conv-{bits}bit"
    est = build_estimator(tag, stats, pilots, C_N)
    return est(x)


@dataclass(frozen=True)
class EstimationReport:
    tag: str
    g: np.ndarray
    g_hat: np.ndarray
    C_ghat: object
    C_eps: object
    ne_theory: float
    ne_empirical: float

    @property
    def ne_theory_db(self) -> float:
        return to_db(self.ne_theory)

    @property
    def ne_empirical_db(self) -> float:
        return to_db(self.ne_empirical)


def run_algorithm_1(scenario: Scenario, tag: str, rng=None, trials: int = 500,
                    beta: float = 1.05, seed: int | None = None) -> EstimationReport:
    """Channel estimation experiment for one front-end.

    1. power recursion and output levels; 2. C_y; 3. array forward pass on the
    received pilots; 4. LMMSE estimate. Channels come from ``rng`` when given,
    otherwise from per-trial streams keyed by ``seed``.
    """
    est = scenario_estimator(scenario, tag, beta)
    if rng is not None:
        g, x = scenario.draw(rng, trials)
    else:
        g, x = scenario.draw_trials(0 if seed is None else seed, trials)
    g_hat = est(x)
    C_ghat, C_eps = est.covariance()
    return EstimationReport(tag, g, g_hat, C_ghat, C_eps,
                            theoretical_ne(scenario.stats.C_g(), C_ghat), empirical_ne(g, g_hat))
