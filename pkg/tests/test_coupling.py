import math

import numpy as np
import pytest

from sdmimo.coupling import (BOLTZMANN, CouplingParams, build_coupling, coupling_matrix, impedance_matrix,
                             noise_covariance, self_impedance)
from sdmimo.numerics import EULER_GAMMA, cos_integral, sin_integral


def test_self_impedance():
    z = self_impedance()
    expect = 30 * (EULER_GAMMA + math.log(2 * math.pi) - cos_integral(2 * math.pi) + 1j * sin_integral(2 * math.pi))
    assert z == pytest.approx(expect, abs=1e-12)
    assert z.real == pytest.approx(73.13, abs=0.01)
    assert z.imag == pytest.approx(42.54, abs=0.01)


def _mutual_oracle(d):
    # direct transcription of the mutual-impedance formula for two half-wave dipoles
    xi = math.pi * math.sqrt(1 + 4 * d * d)
    re = 30 * (2 * cos_integral(2 * math.pi * d) - cos_integral(xi + math.pi) - cos_integral(xi - math.pi))
    im = -30 * (2 * sin_integral(2 * math.pi * d) - sin_integral(xi + math.pi) - sin_integral(xi - math.pi))
    return re + 1j * im


@pytest.mark.parametrize("M,delta", [(1, 0.5), (4, 0.5), (7, 1 / 6), (16, 0.25)])
def test_impedance_matrix(M, delta):
    Z = impedance_matrix(M, delta)
    assert Z.shape == (M, M)
    assert np.array_equal(Z, Z.T)
    assert np.allclose(np.diag(Z), self_impedance())
    for i in range(M):
        for j in range(i + 1, M):
            assert Z[i, j] == pytest.approx(_mutual_oracle((j - i) * delta), abs=1e-10)


def test_xi_at_half_wavelength():
    assert math.pi * math.sqrt(1 + 4 * 0.5**2) == pytest.approx(math.pi * math.sqrt(2))


def test_mutual_impedance_envelope_decays():
    Z = impedance_matrix(64, 1 / 6)
    mag = np.abs(Z[0, 1:])
    # upper envelope over windows of one wavelength is non-increasing
    env = [mag[i:i + 6].max() for i in range(0, 54, 6)]
    assert all(a >= b for a, b in zip(env, env[1:]))


def test_impedance_errors():
    with pytest.raises(ValueError):
        impedance_matrix(4, 0.0)
    with pytest.raises(ValueError):
        impedance_matrix(4, -0.1)
    with pytest.raises(ValueError):
        impedance_matrix(0, 0.5)


def test_coupling_matrix():
    R = 50.0
    T = coupling_matrix(R * np.eye(3), R)
    assert np.allclose(T, 0.5 * np.eye(3), atol=0)
    Z = impedance_matrix(8, 1 / 6)
    T = coupling_matrix(Z, R)
    assert np.max(np.abs(T @ (np.eye(8) + Z / R) - np.eye(8))) < 1e-12
    z11 = self_impedance()
    assert coupling_matrix(np.array([[z11]]), R)[0, 0] == pytest.approx(R / (R + z11))


def test_coupling_matrix_singular():
    with pytest.raises(np.linalg.LinAlgError):
        coupling_matrix(-50.0 * np.eye(2), 50.0)


def test_noise_covariance_substitution():
    p = CouplingParams()
    Z = impedance_matrix(5, 0.25)
    T = coupling_matrix(Z, p.R)
    C = noise_covariance(Z, T, p)
    ups = p.sigma_i2 * (Z @ Z.conj().T - 2 * p.R_N * np.real(np.conj(p.rho_n) * Z) + p.R_N**2 * np.eye(5)) + 4 * BOLTZMANN * p.T_A * p.B * Z.real
    ref = T @ ups @ T.conj().T
    assert np.max(np.abs(C - ref)) <= 1e-12 * np.max(np.abs(ref))
    assert np.array_equal(C, C.conj().T)
    w = np.linalg.eigvalsh(C)
    assert w.min() >= -1e-12 * np.trace(C).real


def test_decoupled_mode():
    p = CouplingParams()
    m = build_coupling(6, 1 / 6, p, enabled=False)
    assert np.array_equal(m.Z, p.R * np.eye(6))
    assert np.array_equal(m.T, 0.5 * np.eye(6))
    expect = 2 * BOLTZMANN * p.T_A * p.B * p.R
    assert np.allclose(m.C_N, expect * np.eye(6), rtol=1e-14, atol=0)


def test_params_validation():
    with pytest.raises(ValueError):
        CouplingParams(R=-1.0)
    with pytest.raises(ValueError):
        CouplingParams(rho_n=1.5)
    p = CouplingParams(R=75.0)
    assert p.R_N == 75.0
    assert p.sigma_i2 * p.R**2 == pytest.approx(p.sigma_v2)


@pytest.mark.parametrize("delta", [0.5, 0.25, 1 / 6])
def test_matched_noise_stays_white(delta):
    # with R_N = R, rho_n = 0 and sigma_i^2 = 2 k T B / R, Upsilon = sigma_i^2 (Z + R)(Z + R)^H
    p = CouplingParams()
    m = build_coupling(12, delta, p)
    white = 2 * BOLTZMANN * p.T_A * p.B * p.R
    assert np.max(np.abs(m.C_N - white * np.eye(12))) <= 1e-10 * white
    hot = build_coupling(12, delta, CouplingParams(R_N=150.0, rho_n=0.3))
    off = hot.C_N - np.diag(np.diag(hot.C_N))
    assert np.max(np.abs(off)) > 1e-3 * np.max(np.abs(hot.C_N))
