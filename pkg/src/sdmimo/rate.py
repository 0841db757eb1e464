"""Uplink achievable rates with LMMSE channel estimates behind quantized arrays.

All rate expressions share one SINR structure: the desired term
rho_d |E[w_k^H g_k]|^2 over the sum of receiver uncertainty, multi-user
interference, additive noise and quantization noise. Two evaluators fill the
terms in:

* :func:`model_rate_terms` treats the estimate as Gaussian with the covariance
  predicted by the estimator and the quantization noise through its linear
  model, averaging analytically over everything except the estimate draws.
* :func:`empirical_rate_terms` runs the whole chain (pilot phase, estimator,
  data phase through the actual array) and measures every term.

:func:`mrc_rate` is the closed form for maximum-ratio combining.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockDiagonal, hermitian_solve
from .channel import ChannelStatistics, draw_noise
from .estimator import LinearEstimator, parse_tag, scenario_estimator
from .scenario import Scenario
from .sigma_delta import (QuantizerSpec, QuantizerState, SigmaDeltaFront, build_feedback,
                          memoryless_output_covariance, no_feedback, power_recursion)

RECEIVERS = ("mrc", "zf", "mmse")
TERMS = ("desired", "uncertainty", "interference", "noise", "quantization")


# ---------------------------------------------------------------------------
# data phase


def data_noise_recursion(sigma_xd2, quantizer: QuantizerSpec, feedback: bool = True) -> QuantizerState:
    """Quantizer powers for a single data snapshot (reset only at the first antenna)."""
    sigma_xd2 = np.asarray(sigma_xd2, dtype=float)
    return power_recursion(sigma_xd2, sigma_xd2.size, quantizer, feedback=feedback)


@dataclass(frozen=True)
class DataPhaseModel:
    """Second-order model of one received data snapshot.

    ``C_qn`` is the covariance of the quantization noise as it appears at the
    array output (U_d^{-1} C_qd U_d^{-H} for the Sigma-Delta array) and
    ``C_tn = C_N + C_qn``.
    """

    tag: str
    rho_d: float
    C_xd: np.ndarray
    C_N: np.ndarray
    C_qn: np.ndarray
    front: SigmaDeltaFront

    @property
    def C_tn(self) -> np.ndarray:
        return self.C_N + self.C_qn

    @property
    def sigma_q2(self) -> np.ndarray:
        return self.front.state.sigma_q2


def data_phase_model(tag: str, stats: ChannelStatistics, C_N: np.ndarray, rho_d: float,
                     beta: float = 1.05, psi: float = 0.0,
                     exact_conventional: bool = True) -> DataPhaseModel:
    """C_xd = K rho_d C_G + C_N and the matching quantization-noise covariance."""
    bits, sd = parse_tag(tag)
    M, K = stats.M, stats.K
    C_xd = K * rho_d * stats.C_G + C_N
    quantizer = QuantizerSpec(bits, beta if sd else 1.0)
    feedback = build_feedback(M, 1, psi) if sd else no_feedback(M, 1)
    front = SigmaDeltaFront.design(np.real(np.diag(C_xd)), feedback, quantizer)
    if bits is not None and not sd and exact_conventional:
        # the conventional arrays have unit Bussgang gain, so C_q = C_y - C_x
        C_qn = memoryless_output_covariance(C_xd, quantizer, front.state.alpha) - C_xd
        C_qn = 0.5 * (C_qn + C_qn.conj().T)
    else:
        C_qn = front.noise_covariance()
    return DataPhaseModel(tag, float(rho_d), C_xd, C_N, C_qn, front)


# ---------------------------------------------------------------------------
# receivers


def mrc_receiver(G_hat: np.ndarray, **_) -> np.ndarray:
    return G_hat


def zf_receiver(G_hat: np.ndarray, C_tn: np.ndarray, **_) -> np.ndarray:
    """W = C^{-1} G_hat (G_hat^H C^{-1} G_hat)^{-1}; G_hat has shape (..., M, K)."""
    A = _solve_batched(C_tn, G_hat)
    gram = np.swapaxes(G_hat.conj(), -1, -2) @ A
    return np.swapaxes(np.linalg.solve(gram, np.swapaxes(A.conj(), -1, -2)), -1, -2).conj()


def mmse_receiver(G_hat: np.ndarray, C_tn: np.ndarray, C_eps: np.ndarray, rho_d: float, **_) -> np.ndarray:
    """W = (rho_d G_hat G_hat^H + rho_d C_eps + C_tn)^{-1} G_hat with one error block C_eps."""
    S = rho_d * G_hat @ np.swapaxes(G_hat.conj(), -1, -2) + rho_d * C_eps + C_tn
    return np.linalg.solve(S, G_hat)


_RECEIVERS = {"mrc": mrc_receiver, "zf": zf_receiver, "mmse": mmse_receiver}


def receiver_weights(name: str, G_hat: np.ndarray, model: DataPhaseModel, C_eps: np.ndarray) -> np.ndarray:
    try:
        fn = _RECEIVERS[name]
    except KeyError:
        raise ValueError(f"unknown receiver {name!r}; expected one of {RECEIVERS}") from None
    return fn(G_hat, C_tn=model.C_tn, C_eps=C_eps, rho_d=model.rho_d)


def _solve_batched(C: np.ndarray, B: np.ndarray) -> np.ndarray:
    # C^{-1} B for B of shape (..., M, K)
    X = hermitian_solve(C, np.swapaxes(B, -1, -2))
    return np.swapaxes(X, -1, -2)


def _quad(W: np.ndarray, C: np.ndarray) -> np.ndarray:
    """w_k^H C w_k for every column, shape (..., K)."""
    return np.real(np.einsum("...mk,mn,...nk->...k", W.conj(), C, W))


# ---------------------------------------------------------------------------
# rate bookkeeping


@dataclass(frozen=True)
class RateReport:
    """Per-user rates and the mean SINR terms they came from (each shape (K,))."""

    receiver: str
    tag: str
    terms: dict = field(repr=False)

    @property
    def sinr(self) -> np.ndarray:
        t = self.terms
        return t["desired"] / (t["uncertainty"] + t["interference"] + t["noise"] + t["quantization"])

    @property
    def rates(self) -> np.ndarray:
        return np.log2(1 + self.sinr)

    def sum_se(self, T: int, N: int) -> float:
        return sum_se(self.rates, T, N)


def sum_se(rates, T: int, N: int) -> float:
    """(T - N) / T times the sum rate."""
    if not 0 <= N <= T:
        raise ValueError("need 0 <= N <= T")
    return float((T - N) / T * np.sum(rates))


def mrc_rate(C_ghat, C_G: np.ndarray, C_N: np.ndarray, C_qn: np.ndarray, rho_d: float, K: int) -> np.ndarray:
    """Closed-form MRC rate per user.

    log2(1 + rho_d Tr(C_ghat)/K / (rho_d K Tr(C_G) + Tr(C_N) + Tr(C_qn))), with
    C_qn the quantization-noise covariance at the array output. Returns the
    common rate repeated for the K users.
    """
    tr_hat = C_ghat.trace() if isinstance(C_ghat, BlockDiagonal) else float(np.real(np.trace(C_ghat)))
    den = rho_d * K * np.real(np.trace(C_G)) + np.real(np.trace(C_N)) + np.real(np.trace(C_qn))
    return np.full(K, np.log2(1 + rho_d * tr_hat / K / den))


def mrc_terms(C_ghat_k: np.ndarray, C_G: np.ndarray, C_N: np.ndarray, C_qn: np.ndarray,
              rho_d: float, K: int) -> dict:
    """Exact Gaussian MRC terms, with traces of products where the closed form uses
    products of traces."""
    t = float(np.real(np.trace(C_ghat_k)))
    e = lambda C: float(np.real(np.sum(C_ghat_k.T * C)))  # Tr(C_ghat_k C)
    terms = {
        "desired": rho_d * t * t,
        "uncertainty": rho_d * e(C_G),
        "interference": rho_d * (K - 1) * (e(C_G)),
        "noise": e(C_N),
        "quantization": e(C_qn),
    }
    return {k: np.full(K, v) for k, v in terms.items()}


def model_rate_terms(receiver: str, G_hat: np.ndarray, model: DataPhaseModel,
                     C_eps_blocks: np.ndarray) -> dict:
    """Mean SINR terms with estimate draws ``G_hat`` (D, M, K) and the estimation
    error, noise and quantization noise averaged analytically."""
    K = G_hat.shape[-1]
    C_eps = C_eps_blocks[0]
    W = receiver_weights(receiver, G_hat, model, C_eps)
    B = np.swapaxes(W.conj(), -1, -2) @ G_hat  # B[d, k, i] = w_k^H g_hat_i
    err = np.stack([_quad(W, C_eps_blocks[i]) for i in range(K)], axis=-1)  # [d, k, i]
    second = np.abs(B) ** 2 + err
    diag = np.diagonal(B, axis1=-2, axis2=-1)
    mean = diag.mean(axis=0)
    rho = model.rho_d
    eye = np.eye(K, dtype=bool)
    return {
        "desired": rho * np.abs(mean) ** 2,
        "uncertainty": rho * (np.diagonal(second, axis1=-2, axis2=-1).mean(axis=0) - np.abs(mean) ** 2),
        "interference": rho * np.where(eye, 0.0, second).sum(axis=-1).mean(axis=0),
        "noise": _quad(W, model.C_N).mean(axis=0),
        "quantization": _quad(W, model.C_qn).mean(axis=0),
    }


def zf_rate(G_hat: np.ndarray, model: DataPhaseModel, C_eps_blocks: np.ndarray) -> np.ndarray:
    """Semi-analytic ZF rate per user from estimate draws ``G_hat`` (D, M, K), D >= 200.

    SINR_k = rho_d / (rho_d sum_i E[w_k^H C_eps_i w_k] + E[(G_hat^H C^{-1} G_hat)^{-1}_kk])
    with C the composite noise covariance.
    """
    if G_hat.shape[0] < 200:
        raise ValueError("the empirical expectation needs at least 200 estimate draws")
    return RateReport("zf", model.tag, model_rate_terms("zf", G_hat, model, C_eps_blocks)).rates


def draw_estimates(C_ghat_blocks: np.ndarray, rng: np.random.Generator, n: int) -> np.ndarray:
    """Gaussian estimate draws with per-user covariances, shape (n, M, K)."""
    K, M, _ = C_ghat_blocks.shape
    out = np.empty((n, M, K), dtype=complex)
    for k in range(K):
        out[:, :, k] = draw_noise(C_ghat_blocks[k], rng, n)
    return out


def _blocks(C, K: int, M: int) -> np.ndarray:
    if isinstance(C, BlockDiagonal):
        return C.blocks
    C = np.asarray(C).reshape(K, M, K, M)
    return np.stack([C[k, :, k, :] for k in range(K)])


# ---------------------------------------------------------------------------
# full-chain simulation


def empirical_rate_terms(receiver: str, scenario: Scenario, tag: str, seed: int,
                         n_draws: int = 200, n_symbols: int = 20, rho_d: float | None = None,
                         beta: float = 1.05, first: int = 0,
                         estimator: LinearEstimator | None = None,
                         model: DataPhaseModel | None = None) -> dict:
    """Measure the five SINR terms over ``n_draws`` channel realizations.

    Each draw runs the pilot phase through the array and the estimator, forms
    the receiver, then passes ``n_symbols`` unit-power Gaussian symbol vectors
    through the data-phase array. The quantization term uses y_d - x_d.
    Draw d uses its own stream keyed by (seed, d). Returns per-draw sums as
    well as the means so that runs can be split and recombined.
    """
    sums = _empirical_sums(receiver, scenario, tag, seed, n_draws, n_symbols, rho_d, beta,
                           first, estimator, model)
    return finish_empirical(sums, scenario.K, rho_d if rho_d is not None else scenario.rho)


def _empirical_sums(receiver, scenario, tag, seed, n_draws, n_symbols, rho_d, beta, first,
                    estimator, model):
    rho_d = scenario.rho if rho_d is None else rho_d
    K, M = scenario.K, scenario.M
    est = estimator or scenario_estimator(scenario, tag, beta)
    model = model or data_phase_model(tag, scenario.stats, scenario.C_N, rho_d, beta, scenario.geometry.psi)
    _, C_eps = est.covariance()
    C_eps_k = _blocks(C_eps, K, M)[0]
    acc = {"b": np.zeros(K, complex), "b2": np.zeros(K), "mui": np.zeros(K),
           "noise": np.zeros(K), "quant": np.zeros(K), "count": 0}
    for d in range(first, first + n_draws):
        rng = np.random.default_rng([seed, d])
        g, x = scenario.draw(rng)
        g_hat = est(x)
        G = g.reshape(K, M).T
        G_hat = g_hat.reshape(K, M).T
        W = receiver_weights(receiver, G_hat, model, C_eps_k)
        B = W.conj().T @ G
        s = (rng.standard_normal((n_symbols, K)) + 1j * rng.standard_normal((n_symbols, K))) / np.sqrt(2)
        n = draw_noise(scenario.C_N, rng, n_symbols)
        xd = np.sqrt(rho_d) * s @ G.T + n
        yd = model.front.forward(xd)
        bd = np.diagonal(B)
        acc["b"] += bd
        acc["b2"] += np.abs(bd) ** 2
        acc["mui"] += np.sum(np.abs(B) ** 2, axis=1) - np.abs(bd) ** 2
        acc["noise"] += np.mean(np.abs(n @ W.conj()) ** 2, axis=0)
        acc["quant"] += np.mean(np.abs((yd - xd) @ W.conj()) ** 2, axis=0)
        acc["count"] += 1
    return acc


def combine_sums(parts: list[dict]) -> dict:
    """Add per-chunk accumulators in the given order."""
    out = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in parts[0].items()}
    for p in parts[1:]:
        for k, v in p.items():
            out[k] = out[k] + v
    return out


def finish_empirical(acc: dict, K: int, rho_d: float) -> dict:
    n = acc["count"]
    mean = acc["b"] / n
    return {
        "desired": rho_d * np.abs(mean) ** 2,
        "uncertainty": rho_d * np.maximum(acc["b2"] / n - np.abs(mean) ** 2, 0.0),
        "interference": rho_d * acc["mui"] / n,
        "noise": acc["noise"] / n,
        "quantization": acc["quant"] / n,
    }


def model_report(receiver: str, scenario: Scenario, tag: str, seed: int, n_draws: int = 200,
                 rho_d: float | None = None, beta: float = 1.05,
                 estimator: LinearEstimator | None = None,
                 model: DataPhaseModel | None = None) -> RateReport:
    """Rate from the Gaussian estimate model; MRC uses its closed form."""
    rho_d = scenario.rho if rho_d is None else rho_d
    K, M = scenario.K, scenario.M
    est = estimator or scenario_estimator(scenario, tag, beta)
    model = model or data_phase_model(tag, scenario.stats, scenario.C_N, rho_d, beta, scenario.geometry.psi)
    C_ghat, C_eps = est.covariance()
    if receiver == "mrc":
        rate = mrc_rate(C_ghat, scenario.stats.C_G, scenario.C_N, model.C_qn, rho_d, K)
        # express the closed form through equivalent terms: desired / (everything else)
        sinr = 2.0 ** rate - 1
        terms = {"desired": sinr, "uncertainty": np.zeros(K), "interference": np.zeros(K),
                 "noise": np.ones(K), "quantization": np.zeros(K)}
        return RateReport("mrc", tag, terms)
    G_hat = draw_estimates(_blocks(C_ghat, K, M), np.random.default_rng([seed, 2**31]), n_draws)
    return RateReport(receiver, tag, model_rate_terms(receiver, G_hat, model, _blocks(C_eps, K, M)))
