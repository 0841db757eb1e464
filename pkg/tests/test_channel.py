import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import crandn
from sdmimo.blocks import BlockDiagonal, as_dense
from sdmimo.channel import (PilotBlock, ScenarioGeometry, channel_statistics, cov_x, covariance_factor,
                            dft_pilots, draw_channels, draw_noise, received_pilot_block, rho_to_snr, snr_to_rho,
                            steering_vector)
from sdmimo.coupling import build_coupling
from sdmimo.scenario import Scenario


def test_steering_vector():
    assert np.allclose(steering_vector(0.0, 4, 0.5), np.ones(4))
    a = steering_vector(math.pi / 6, 3, 0.5)
    # sin(30 deg) = 1/2, so the phase steps by -pi/2
    assert np.allclose(a, [1, -1j, -1])
    A = steering_vector(np.array([0.1, -0.4]), 5, 0.25)
    assert A.shape == (5, 2)
    assert np.allclose(np.abs(A), 1)
    assert np.allclose(A[:, 1], steering_vector(-0.4, 5, 0.25))


def test_geometry_validation():
    with pytest.raises(ValueError):
        ScenarioGeometry(K=4, N=3)
    with pytest.raises(ValueError):
        ScenarioGeometry(theta_deg=0)
    with pytest.raises(ValueError):
        ScenarioGeometry(delta=0)
    grid = ScenarioGeometry(theta_deg=60, L=5).aoa_grid()
    assert np.allclose(np.rad2deg(grid), [-30, -15, 0, 15, 30])


def test_decoupled_trace():
    M = 12
    model = build_coupling(M, 1 / 6, enabled=False)
    stats = channel_statistics(model.T, ScenarioGeometry(M=M, K=3, N=3))
    assert np.allclose(np.trace(stats.covs, axis1=1, axis2=2).real, 0.25 * M)
    assert stats.shared
    assert stats.C_G.shape == (M, M)


def test_covariance_factor():
    T = build_coupling(6, 0.25).T
    F, C = covariance_factor(T, np.linspace(-0.5, 0.5, 9), 0.25)
    assert np.allclose(C, C.conj().T)
    assert np.linalg.eigvalsh(C).min() > -1e-12
    assert np.linalg.matrix_rank(F) <= 6


def test_channel_monte_carlo_covariance():
    sc = Scenario.build(ScenarioGeometry(M=6, K=2, N=2), snr_db=0)
    g = draw_channels(sc.stats, np.random.default_rng(4), 200_000)
    emp = g.T @ g.conj() / g.shape[0]
    ref = as_dense(sc.stats.C_g())
    assert np.linalg.norm(emp - ref) / np.linalg.norm(ref) < 0.02
    # users are independent
    assert np.max(np.abs(emp[:6, 6:])) < 0.02 * np.max(np.abs(ref))


def test_dft_pilots():
    P = dft_pilots(2, 2)
    assert np.allclose(P, [[1, 1], [1, -1]])
    P = dft_pilots(8, 5)
    assert np.allclose(P @ P.conj().T, 8 * np.eye(5))
    with pytest.raises(ValueError):
        dft_pilots(3, 4)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 3), st.integers(1, 5), st.floats(0.01, 10.0))
def test_pilot_operator_matches_dense(K, extra, M, rho):
    N = K + extra
    pb = PilotBlock(dft_pilots(N, K), rho)
    rng = np.random.default_rng(K * 100 + N * 10 + M)
    g = crandn(rng, 3, K * M)
    z = crandn(rng, 3, N * M)
    Phi = pb.dense(M)
    assert np.allclose(pb.apply(g, M), g @ Phi.T)
    assert np.allclose(pb.apply_adjoint(z, M), z @ Phi.conj())


def test_cov_x_kronecker():
    for N, blocky in ((2, True), (3, False)):
        sc = Scenario.build(ScenarioGeometry(M=4, K=2, N=N), snr_db=3)
        Phi = sc.pilots.dense(4)
        brute = Phi @ as_dense(sc.stats.C_g()) @ Phi.conj().T + np.kron(np.eye(N), sc.C_N)
        C = sc.cov_x()
        # truncated DFT rows are orthogonal but their columns are not unless N = K
        assert isinstance(C, BlockDiagonal) == blocky
        assert np.max(np.abs(as_dense(C) - brute)) <= 1e-12 * np.max(np.abs(brute))


def test_cov_x_nonorthogonal_pilots_dense():
    model = build_coupling(3, 0.5)
    stats = channel_statistics(model.T, ScenarioGeometry(M=3, K=2, N=2))
    phi = np.array([[1, 1], [1, 1j * 0.5]])
    pb = PilotBlock(phi, 2.0)
    C = cov_x(pb, stats, model.C_N)
    assert not isinstance(C, BlockDiagonal)
    Phi = pb.dense(3)
    brute = Phi @ as_dense(stats.C_g()) @ Phi.conj().T + np.kron(np.eye(2), model.C_N)
    assert np.allclose(C, brute, rtol=0, atol=1e-12 * np.max(np.abs(brute)))


def test_zero_pilot_power():
    sc = Scenario.build(ScenarioGeometry(M=3, K=1, N=1), snr_db=0)
    pb = PilotBlock(sc.pilots.phi_t, 0.0)
    C = as_dense(cov_x(pb, sc.stats, sc.C_N))
    assert np.allclose(C, sc.C_N)


def test_received_block_statistics():
    sc = Scenario.build(ScenarioGeometry(M=3, K=2, N=2), snr_db=5)
    g, x = sc.draw(np.random.default_rng(9), 200_000)
    emp = x.T @ x.conj() / x.shape[0]
    ref = as_dense(sc.cov_x())
    assert np.linalg.norm(emp - ref) / np.linalg.norm(ref) < 0.02
    n = draw_noise(sc.C_N, np.random.default_rng(1), 100_000)
    assert np.linalg.norm(n.T @ n.conj() / n.shape[0] - sc.C_N) / np.linalg.norm(sc.C_N) < 0.02


def test_received_block_noiseless_part():
    sc = Scenario.build(ScenarioGeometry(M=2, K=2, N=2), snr_db=5)
    g = np.ones(4, complex)
    zero = np.zeros((2, 2))
    x = received_pilot_block(g, sc.pilots, zero, np.random.default_rng(0))
    s = math.sqrt(sc.rho)
    # pilot columns [1, 1] and [1, -1]: snapshot 1 sees 2 s, snapshot 2 sees 0
    assert np.allclose(x, [2 * s, 2 * s, 0, 0])


@settings(max_examples=30, deadline=None)
@given(st.floats(-20, 40))
def test_snr_round_trip(snr_db):
    sc = Scenario.build(ScenarioGeometry(M=4, K=2, N=3), snr_db=0)
    lin = 10 ** (snr_db / 10)
    rho = snr_to_rho(lin, sc.stats, sc.C_N, sc.pilots.phi_t)
    assert rho_to_snr(rho, sc.stats, sc.C_N, sc.pilots.phi_t) == pytest.approx(lin, rel=1e-12)


def test_snr_definition():
    sc = Scenario.build(ScenarioGeometry(M=4, K=2, N=2), snr_db=10)
    g, x = sc.draw(np.random.default_rng(5), 100_000)
    signal = sc.pilots.apply(g, 4)
    noise = x - signal
    # SNR is per user: the received signal power is shared by K users
    snr = np.mean(np.abs(signal) ** 2) / np.mean(np.abs(noise) ** 2) / sc.K
    assert 10 * np.log10(snr) == pytest.approx(10.0, abs=0.1)
    with pytest.raises(ValueError):
        snr_to_rho(-1.0, sc.stats, sc.C_N)
