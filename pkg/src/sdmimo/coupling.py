"""Mutual coupling between closely spaced dipoles and the resulting
spatially correlated receiver noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .numerics import EULER_GAMMA, cos_integral, sin_integral

BOLTZMANN = 1.380649e-23


@dataclass(frozen=True)
class CouplingParams:
    """Circuit constants of the LNA front-end.

    Defaults follow the usual room-temperature setup: R = R_N = 50 ohm,
    290 K, 20 MHz, uncorrelated current/voltage noise, and
    sigma_i^2 = 2 k_B T_A B / R, sigma_v^2 = 2 k_B T_A B R.
    """

    R: float = 50.0
    R_N: float | None = None
    sigma_i2: float | None = None
    sigma_v2: float | None = None
    rho_n: complex = 0.0
    k_B: float = BOLTZMANN
    T_A: float = 290.0
    B: float = 20e6

    def __post_init__(self):
        if self.R_N is None:
            object.__setattr__(self, "R_N", self.R)
        if self.sigma_i2 is None:
            object.__setattr__(self, "sigma_i2", 2 * self.k_B * self.T_A * self.B / self.R)
        if self.sigma_v2 is None:
            object.__setattr__(self, "sigma_v2", 2 * self.k_B * self.T_A * self.B * self.R)
        for name in ("R", "R_N", "sigma_i2", "sigma_v2", "k_B", "T_A", "B"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if abs(self.rho_n) > 1:
            raise ValueError("noise correlation coefficient must satisfy |rho_n| <= 1")


@dataclass(frozen=True)
class CouplingModel:
    Z: np.ndarray
    T: np.ndarray
    C_N: np.ndarray
    params: CouplingParams

    @property
    def M(self) -> int:
        return self.Z.shape[0]


def element_distances(M: int, delta: float) -> np.ndarray:
    idx = np.arange(M)
    return np.abs(idx[:, None] - idx[None, :]) * float(delta)


def self_impedance() -> complex:
    two_pi = 2 * np.pi
    return 30.0 * (EULER_GAMMA + np.log(two_pi) - cos_integral(two_pi) + 1j * sin_integral(two_pi))


def impedance_matrix(M: int, delta: float) -> np.ndarray:
    """Impedance matrix of an M-element half-wave dipole ULA, spacing in wavelengths."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if not delta > 0:
        raise ValueError("element spacing must be positive")
    # Z is symmetric Toeplitz, so evaluate each lag once
    lags = np.arange(1, M) * float(delta)
    xi = np.pi * np.sqrt(1.0 + 4.0 * lags**2)
    mutual = 30.0 * (
        2 * cos_integral(2 * np.pi * lags)
        - cos_integral(xi + np.pi)
        - cos_integral(xi - np.pi)
        - 1j * (2 * sin_integral(2 * np.pi * lags) - sin_integral(xi + np.pi) - sin_integral(xi - np.pi))
    )
    column = np.concatenate(([self_impedance()], np.atleast_1d(mutual)))
    # explicit first row: the one-argument form would conjugate it
    return scipy.linalg.toeplitz(column, column)


def coupling_matrix(Z: np.ndarray, R: float) -> np.ndarray:
    """T = (I + Z / R)^{-1}."""
    M = Z.shape[0]
    system = np.eye(M) + Z / R
    if np.linalg.cond(system) > 1e12:
        raise np.linalg.LinAlgError("I + Z/R is numerically singular")
    return np.linalg.solve(system, np.eye(M))


def noise_covariance(Z: np.ndarray, T: np.ndarray, params: CouplingParams) -> np.ndarray:
    """C_N = T Upsilon T^H for the intrinsic plus extrinsic noise model."""
    M = Z.shape[0]
    p = params
    upsilon = p.sigma_i2 * (
        Z @ Z.conj().T - 2 * p.R_N * np.real(np.conj(p.rho_n) * Z) + p.R_N**2 * np.eye(M)
    ) + 4 * p.k_B * p.T_A * p.B * np.real(Z)
    C_N = T @ upsilon @ T.conj().T
    C_N = 0.5 * (C_N + C_N.conj().T)
    w = np.linalg.eigvalsh(C_N)
    if w.min() < -1e-12 * abs(np.trace(C_N)):
        raise ValueError("noise covariance is not positive semidefinite; check coupling parameters")
    return C_N


def build_coupling(M: int, delta: float, params: CouplingParams | None = None,
                   enabled: bool = True) -> CouplingModel:
    """Coupling model for a ULA.

    With ``enabled=False`` the elements are treated as isolated and matched:
    Z = R I and T = I/2.
    """
    params = params or CouplingParams()
    if enabled:
        Z = impedance_matrix(M, delta)
        T = coupling_matrix(Z, params.R)
    else:
        Z = params.R * np.eye(M, dtype=complex)
        T = 0.5 * np.eye(M, dtype=complex)
    return CouplingModel(Z=Z, T=T, C_N=noise_covariance(Z, T, params), params=params)
