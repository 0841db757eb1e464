import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from conftest import crandn
from sdmimo.blocks import BlockDiagonal, as_dense
from sdmimo.numerics import lloyd_max
from sdmimo.sigma_delta import (BETA_MAX, QuantizerSpec, SigmaDeltaFront, alpha_one_bit, alpha_two_bit,
                                build_feedback, cov_r, cov_y, forward, memoryless_output_covariance,
                                no_feedback, power_recursion, quantize_one_bit, quantize_two_bit)

LEVELS = lloyd_max(2)


# --- feedback wiring ---------------------------------------------------------

def test_feedback_example():
    fb = build_feedback(3, 1, 0.0)
    assert np.array_equal(fb.V_d, [[0, 0, 0], [1, 0, 0], [1, 1, 0]])


@pytest.mark.parametrize("M", [1, 2, 5, 16])
@pytest.mark.parametrize("psi", [0.0, 0.3, -1.2])
def test_feedback_structure(M, psi):
    fb = build_feedback(M, 2, psi)
    S = fb.V_d @ np.linalg.inv(fb.U_d)
    assert np.max(np.abs(S - np.exp(-1j * psi) * np.eye(M, k=-1))) <= 1e-13
    assert np.max(np.abs(fb.U_inv_d @ fb.U_d - np.eye(M))) <= 1e-13
    assert np.allclose(np.linalg.matrix_power(fb.shift_d, M), 0)
    for p in range(M):
        for q in range(p):
            assert fb.V_d[p, q] == pytest.approx(np.exp(-1j * (p - q) * psi))
    assert fb.dense("U").shape == (2 * M, 2 * M)
    assert np.allclose(fb.dense("U_inv") @ fb.dense("U"), np.eye(2 * M))


def test_no_feedback():
    fb = no_feedback(4, 3)
    assert np.array_equal(fb.dense("U"), np.eye(12))
    assert not np.any(fb.dense("V"))
    with pytest.raises(ValueError):
        build_feedback(0, 1)


# --- quantizers --------------------------------------------------------------

def test_alpha_one_bit():
    # 1.05 * 0.8862269 = 0.9305383
    assert alpha_one_bit(1.0, 1.05) == pytest.approx(0.9305383, abs=1e-7)
    assert np.allclose(alpha_one_bit(np.array([1.0, 4.0]), 1.0), [math.sqrt(math.pi) / 2, math.sqrt(math.pi)])
    for bad in (0.99, BETA_MAX, 1.2):
        with pytest.raises(ValueError):
            alpha_one_bit(1.0, bad)


def test_one_bit_noise_power_at_beta_bound():
    q = QuantizerSpec(1, 1.0)
    a = BETA_MAX * math.sqrt(math.pi * 2.5) / 2
    assert q.output_power(2.5, a) - 2.5 == pytest.approx(2.5, rel=1e-14)


def _two_bit_gain_oracle(alpha, sigma_r):
    # Bussgang gain of one real component, by quadrature
    s = sigma_r / math.sqrt(2)
    num = integrate.quad(lambda u: u * alpha * LEVELS.apply(u / s) * stats.norm.pdf(u, scale=s),
                         -12 * s, 12 * s, points=list(s * LEVELS.thresholds), limit=200)[0]
    return num / s**2


def test_alpha_two_bit_unit_gain():
    a = alpha_two_bit(1.0, LEVELS)
    assert a == pytest.approx(0.8012, abs=1e-4)
    assert _two_bit_gain_oracle(a, 1.0) == pytest.approx(1.0, abs=1e-9)
    assert alpha_two_bit(3.0, LEVELS) == pytest.approx(3 * a, rel=1e-14)


def test_alpha_two_bit_printed_constant_gain():
    # the sqrt(pi / 2) variant of the constant gives 0.5666 and a gain of 1/sqrt(2)
    printed = math.sqrt(math.pi / 2) / np.sum(LEVELS.steps * np.exp(-0.5 * LEVELS.thresholds**2))
    assert printed == pytest.approx(0.5666, abs=1e-4)
    assert _two_bit_gain_oracle(printed, 1.0) == pytest.approx(1 / math.sqrt(2), abs=1e-9)


def test_two_bit_memoryless_gain_monte_carlo():
    rng = np.random.default_rng(11)
    sigma_r = 1.7
    r = sigma_r * crandn(rng, 10**6)
    a = alpha_two_bit(sigma_r, LEVELS)
    y = quantize_two_bit(r, a, sigma_r, LEVELS)
    gamma = np.real(np.mean(r * y.conj())) / np.mean(np.abs(r) ** 2)
    assert 0.98 <= gamma <= 1.02


def test_quantize_one_bit():
    assert quantize_one_bit(1 + 2j, 1.0) == 1 + 1j
    assert quantize_one_bit(-0.1 - 0.1j, 2.0) == -2 - 2j
    assert quantize_one_bit(0.0 - 3j, 1.0) == 1 - 1j
    assert quantize_one_bit(0j, 1.0) == 1 + 1j


def test_quantize_two_bit_examples():
    a, s = 0.7, 2.0
    assert quantize_two_bit(1e-12 + 0j, a, s, LEVELS).real == pytest.approx(a * LEVELS.levels[2])
    assert quantize_two_bit(1e9 - 1e9j, a, s, LEVELS) == pytest.approx(a * (LEVELS.levels[3] + 1j * LEVELS.levels[0]))
    # bins are (lo, hi]: the threshold itself belongs to the lower bin
    edge = LEVELS.thresholds[2] * s / math.sqrt(2)
    assert quantize_two_bit(edge, a, s, LEVELS).real == pytest.approx(a * LEVELS.levels[2])


@settings(max_examples=80, deadline=None)
@given(st.floats(-10, 10), st.floats(0, 5), st.floats(0.1, 5))
def test_quantize_two_bit_monotone(u, h, s):
    lo = quantize_two_bit(complex(u, 0), 1.0, s, LEVELS).real
    hi = quantize_two_bit(complex(u + h, 0), 1.0, s, LEVELS).real
    assert hi >= lo


def test_quantizer_spec_validation():
    with pytest.raises(ValueError):
        QuantizerSpec(3)
    with pytest.raises(ValueError):
        QuantizerSpec(1, beta=1.2)


# --- power recursion ---------------------------------------------------------

def test_recursion_one_bit():
    q = QuantizerSpec(1, 1.05)
    st_ = power_recursion(np.full(400, 2.0), 200, q)
    ratio = math.pi / 2 * 1.05**2 - 1
    assert ratio == pytest.approx(0.7318, abs=1e-4)
    assert np.allclose(st_.sigma_q2, ratio * st_.sigma_r2, rtol=1e-13)
    assert st_.sigma_r2[0] == 2.0 and st_.sigma_r2[200] == 2.0
    assert np.allclose(st_.sigma_r2[1:200], 2.0 + st_.sigma_q2[:199])
    assert st_.sigma_r2[199] / 2.0 == pytest.approx(1 / (1 - ratio), rel=1e-10)
    assert 1 / (1 - ratio) == pytest.approx(3.729, abs=1e-3)


def test_recursion_two_bit_and_conventional():
    q = QuantizerSpec(2)
    sx = np.linspace(0.5, 2.0, 6)
    st_ = power_recursion(sx, 3, q)
    assert np.all(st_.sigma_q2 >= 0)
    assert np.allclose(st_.sigma_y2 - st_.sigma_r2, st_.sigma_q2)
    a = alpha_two_bit(np.sqrt(st_.sigma_r2), LEVELS)
    assert np.allclose(st_.sigma_y2, 2 * a**2 * LEVELS.output_power())
    flat = power_recursion(sx, 3, q, feedback=False)
    assert np.array_equal(flat.sigma_r2, sx)


def test_recursion_rejects_negative_noise():
    class Shrinking:
        def alpha(self, s):
            return 1.0

        def output_power(self, s, a):
            return 0.5 * s

    with pytest.raises(ValueError, match="negative quantization noise"):
        power_recursion(np.ones(4), 4, Shrinking())
    with pytest.raises(ValueError):
        power_recursion(np.ones(5), 4, QuantizerSpec(1))


# --- array operation ---------------------------------------------------------

def _front(M, N, bits, psi=0.0, sx2=1.0):
    fb = build_feedback(M, N, psi)
    return SigmaDeltaFront.design(np.full(M * N, sx2), fb, QuantizerSpec(bits))


def test_forward_unquantized_is_identity():
    front = _front(5, 2, None)
    x = crandn(np.random.default_rng(0), 7, 10)
    assert np.allclose(front.forward(x), x, atol=1e-15)


def test_forward_hand_trace():
    fb = build_feedback(2, 1, 0.0)
    st_ = power_recursion(np.ones(2), 2, QuantizerSpec(1))
    st_ = type(st_)(st_.quantizer, 2, st_.sigma_r2, st_.sigma_y2, st_.sigma_q2, np.ones(2))
    y, r = forward(np.array([0.5 + 0.5j, 0.5 + 0.5j]), fb, st_, return_input=True)
    assert np.allclose(r, [0.5 + 0.5j, 0.0])
    assert np.allclose(y, [1 + 1j, 1 + 1j])


def test_forward_single_antenna_is_memoryless():
    front = _front(1, 3, 2, sx2=2.0)
    x = crandn(np.random.default_rng(1), 50, 3) * math.sqrt(2)
    a = front.state.alpha[0]
    assert np.array_equal(front.forward(x), quantize_two_bit(x, a, math.sqrt(2.0), LEVELS))


def test_forward_resets_each_snapshot():
    front = _front(4, 2, 1, psi=0.4)
    x = crandn(np.random.default_rng(2), 20, 8)
    y = front.forward(x)
    # the second snapshot depends only on its own inputs
    x_alt = x.copy()
    x_alt[:, :4] = crandn(np.random.default_rng(3), 20, 4)
    assert np.array_equal(front.forward(x_alt)[:, 4:], y[:, 4:])


@pytest.mark.parametrize("bits", [1, 2])
@pytest.mark.parametrize("psi", [0.0, 0.7])
def test_loop_identity(bits, psi):
    front = _front(6, 2, bits, psi)
    x = crandn(np.random.default_rng(4), 30, 12)
    y, r = front.forward(x, return_input=True)
    U = front.feedback.dense("U")
    assert np.max(np.abs((y - x) @ U.T - (y - r))) <= 1e-12


def test_forward_shape_error():
    with pytest.raises(ValueError):
        _front(4, 2, 1).forward(np.zeros(7, complex))


# --- covariances -------------------------------------------------------------

def test_cov_y_structure():
    fb = build_feedback(5, 2, 0.3)
    rng = np.random.default_rng(5)
    A = crandn(rng, 5, 5)
    Cx = BlockDiagonal(np.stack([A @ A.conj().T, A @ A.conj().T + np.eye(5)]))
    assert np.allclose(as_dense(cov_y(Cx, np.zeros(10), fb)), as_dense(Cx))
    sq = rng.uniform(0.1, 1.0, 10)
    Cy = as_dense(cov_y(Cx, sq, fb))
    Ui = fb.dense("U_inv")
    assert np.allclose(Cy, as_dense(Cx) + Ui @ np.diag(sq) @ Ui.conj().T, atol=1e-13)
    assert np.max(np.abs(Cy - Cy.conj().T)) <= 1e-13
    corr = Cy - as_dense(Cx)
    band = np.abs(np.subtract.outer(np.arange(10), np.arange(10))) > 1
    assert not np.any(np.abs(corr[band]) > 1e-15)
    dense = cov_y(as_dense(Cx), sq, fb)
    assert np.allclose(dense, Cy)
    S = fb.dense("shift")
    assert np.allclose(as_dense(cov_r(Cx, sq, fb)), as_dense(Cx) + S @ np.diag(sq) @ S.conj().T)


@pytest.mark.parametrize("bits", [1, 2])
def test_memoryless_output_covariance_monte_carlo(bits):
    rng = np.random.default_rng(6)
    B = crandn(rng, 3, 3) + 2 * np.eye(3)
    C = B @ B.conj().T
    q = QuantizerSpec(bits, 1.0)
    d = np.real(np.diag(C))
    alpha = q.alpha(d)
    Cy = memoryless_output_covariance(C, q, alpha)
    L = np.linalg.cholesky(C)
    x = crandn(rng, 10**6, 3) @ L.T
    y = q.quantize(x, alpha, d)
    emp = y.T @ y.conj() / y.shape[0]
    assert np.max(np.abs(emp - Cy)) <= 0.01 * np.max(np.abs(Cy))


# --- loop statistics on an M = 8 array ---------------------------------------

def _loop_stats(bits, trials=10**5, seed=21):
    M = 8
    front = _front(M, 1, bits)
    x = crandn(np.random.default_rng(seed), trials, M)
    y, r = front.forward(x, return_input=True)
    q = y - r
    return front, x, y, r, q


@pytest.mark.parametrize("bits", [1, 2])
def test_loop_output_power_matches_recursion(bits):
    front, x, y, r, q = _loop_stats(bits)
    emp = np.mean(np.abs(y) ** 2, axis=0)
    assert np.allclose(emp, front.state.sigma_y2, rtol=0.03)


@pytest.mark.parametrize("bits", [1, 2])
def test_loop_input_uncorrelated_with_noise(bits):
    front, x, y, r, q = _loop_stats(bits)
    sx = np.mean(np.abs(x) ** 2, axis=0)
    sq = front.state.sigma_q2
    xq = np.abs(x.T @ q.conj() / x.shape[0]) / np.sqrt(np.outer(sx, sq))
    assert xq.max() <= 0.02


@pytest.mark.parametrize("bits", [1, 2])
def test_loop_bussgang_property(bits):
    front, x, y, r, q = _loop_stats(bits)
    sr = front.state.sigma_r2
    sq = front.state.sigma_q2
    rq = np.abs(np.mean(r * q.conj(), axis=0)) / np.sqrt(sr * sq)
    assert rq.max() <= 0.02


@pytest.mark.parametrize("bits", [1, 2])
def test_loop_noise_nearly_white(bits):
    front, x, y, r, q = _loop_stats(bits)
    sq = front.state.sigma_q2
    lag = np.abs(np.mean(q[:, 1:] * q[:, :-1].conj(), axis=0)) / np.sqrt(sq[1:] * sq[:-1])
    assert lag.max() <= 0.05
