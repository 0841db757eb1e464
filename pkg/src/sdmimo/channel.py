"""Spatially correlated uplink channels, pilots and received pilot blocks.

Vector layout follows column stacking: the MK channel vector ``g`` holds
user 1's M coefficients first, and the MN pilot-phase vector ``x`` holds the
array snapshot for pilot symbol 1 first. Batched arrays carry any number of
leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockDiagonal


@dataclass(frozen=True)
class ScenarioGeometry:
    M: int = 128
    K: int = 10
    N: int = 10
    delta: float = 1 / 6
    theta_deg: float = 60.0
    psi: float = 0.0
    L: int = 50

    def __post_init__(self):
        if self.M < 1 or self.K < 1:
            raise ValueError("M and K must be positive")
        if self.N < self.K:
            raise ValueError(f"pilot length N={self.N} must be at least K={self.K}")
        if self.L < 1:
            raise ValueError("need at least one ray per user")
        if not 0 < self.theta_deg < 180:
            raise ValueError("angular sector width must lie in (0, 180) degrees")
        if not self.delta > 0:
            raise ValueError("element spacing must be positive")

    def aoa_grid(self) -> np.ndarray:
        """L uniformly spaced arrival angles (radians) over the sector."""
        half = np.deg2rad(self.theta_deg) / 2
        if self.L == 1:
            return np.zeros(1)
        return np.linspace(-half, half, self.L)


def steering_vector(theta, M: int, delta: float) -> np.ndarray:
    """ULA response exp(-j 2 pi (m-1) delta sin(theta)); shape (M,) or (M, L)."""
    theta = np.asarray(theta, dtype=float)
    m = np.arange(M).reshape((M,) + (1,) * theta.ndim)
    return np.exp(-2j * np.pi * delta * m * np.sin(theta))


def covariance_factor(T: np.ndarray, thetas, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Return (F, C) with F = T A / sqrt(L) and C = F F^H."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    A = steering_vector(thetas, T.shape[0], delta)
    F = T @ A / np.sqrt(thetas.size)
    return F, F @ F.conj().T


@dataclass(frozen=True)
class ChannelStatistics:
    factors: np.ndarray  # (K, M, L)
    covs: np.ndarray  # (K, M, M)
    shared: bool

    @property
    def K(self) -> int:
        return self.covs.shape[0]

    @property
    def M(self) -> int:
        return self.covs.shape[1]

    @property
    def C_G(self) -> np.ndarray:
        """Common per-user covariance; only meaningful when ``shared``."""
        if not self.shared:
            raise ValueError("users do not share a covariance matrix")
        return self.covs[0]

    def C_g(self) -> BlockDiagonal:
        return BlockDiagonal(self.covs)

    def trace(self) -> float:
        return float(np.real(np.trace(self.covs, axis1=1, axis2=2).sum()))


def channel_statistics(T: np.ndarray, geometry: ScenarioGeometry,
                       aoa_grids: list | None = None) -> ChannelStatistics:
    """Per-user covariance factors.

    By default all users share the geometry's AoA grid. ``aoa_grids`` may give
    a separate grid (radians) per user; those must have equal length.
    """
    K = geometry.K
    if aoa_grids is None:
        F, C = covariance_factor(T, geometry.aoa_grid(), geometry.delta)
        return ChannelStatistics(np.broadcast_to(F, (K,) + F.shape).copy(),
                                 np.broadcast_to(C, (K,) + C.shape).copy(), shared=True)
    if len(aoa_grids) != K:
        raise ValueError("need one AoA grid per user")
    pairs = [covariance_factor(T, g, geometry.delta) for g in aoa_grids]
    F = np.stack([p[0] for p in pairs])
    C = np.stack([p[1] for p in pairs])
    return ChannelStatistics(F, C, shared=bool(np.all(C == C[0])))


def draw_channel(F: np.ndarray, rng: np.random.Generator, size=()) -> np.ndarray:
    """g = F h with h ~ CN(0, I_L); returns shape size + (M,)."""
    size = tuple(np.atleast_1d(size)) if size != () else ()
    L = F.shape[1]
    h = (rng.standard_normal(size + (L,)) + 1j * rng.standard_normal(size + (L,))) / np.sqrt(2)
    return h @ F.T


def draw_channels(stats: ChannelStatistics, rng: np.random.Generator, size=()) -> np.ndarray:
    """Stacked channel vector g = vec(G) of shape size + (M K,)."""
    size = tuple(np.atleast_1d(size)) if size != () else ()
    K, M, L = stats.factors.shape
    h = (rng.standard_normal(size + (K, L)) + 1j * rng.standard_normal(size + (K, L))) / np.sqrt(2)
    g = np.einsum("kml,...kl->...km", stats.factors, h)
    return g.reshape(size + (K * M,))


def dft_pilots(N: int, K: int) -> np.ndarray:
    """First K rows of the N x N DFT matrix (unnormalized)."""
    if K > N:
        raise ValueError("cannot take more pilot rows than the DFT size")
    k = np.arange(K)[:, None]
    n = np.arange(N)[None, :]
    return np.exp(-2j * np.pi * k * n / N)


@dataclass(frozen=True)
class PilotBlock:
    phi_t: np.ndarray  # (K, N)
    rho: float

    @property
    def K(self) -> int:
        return self.phi_t.shape[0]

    @property
    def N(self) -> int:
        return self.phi_t.shape[1]

    def dense(self, M: int) -> np.ndarray:
        """Phi = sqrt(rho) (Phi_t^T kron I_M), shape (MN, MK)."""
        return np.sqrt(self.rho) * np.kron(self.phi_t.T, np.eye(M))

    def apply(self, g: np.ndarray, M: int) -> np.ndarray:
        """Phi g without forming Phi."""
        G = g.reshape(g.shape[:-1] + (self.K, M))
        X = np.sqrt(self.rho) * np.einsum("kn,...km->...nm", self.phi_t, G)
        return X.reshape(g.shape[:-1] + (self.N * M,))

    def apply_adjoint(self, z: np.ndarray, M: int) -> np.ndarray:
        """Phi^H z without forming Phi."""
        Z = z.reshape(z.shape[:-1] + (self.N, M))
        out = np.sqrt(self.rho) * np.einsum("kn,...nm->...km", self.phi_t.conj(), Z)
        return out.reshape(z.shape[:-1] + (self.K * M,))


def draw_noise(C_N: np.ndarray, rng: np.random.Generator, size=()) -> np.ndarray:
    """Samples of CN(0, C_N) with shape size + (M,)."""
    size = tuple(np.atleast_1d(size)) if size != () else ()
    M = C_N.shape[0]
    w, V = np.linalg.eigh(0.5 * (C_N + C_N.conj().T))
    root = V * np.sqrt(np.clip(w, 0, None))
    z = (rng.standard_normal(size + (M,)) + 1j * rng.standard_normal(size + (M,))) / np.sqrt(2)
    return z @ root.T


def received_pilot_block(g: np.ndarray, pilots: PilotBlock, C_N: np.ndarray,
                         rng: np.random.Generator) -> np.ndarray:
    """x = vec(sqrt(rho) G Phi_t + N) with noise columns i.i.d. CN(0, C_N)."""
    M = C_N.shape[0]
    noise = draw_noise(C_N, rng, g.shape[:-1] + (pilots.N,))
    return pilots.apply(g, M) + noise.reshape(g.shape[:-1] + (pilots.N * M,))


def snr_to_rho(snr_linear: float, stats: ChannelStatistics, C_N: np.ndarray,
               phi_t: np.ndarray | None = None) -> float:
    """Pilot power factor giving the requested average per-antenna SNR.

    Uses SNR = rho / (N K) * Tr(E[G Phi_t Phi_t^H G^H]) / Tr(C_N), which for
    unit-modulus pilots reduces to (rho / K) Tr(C_g) / Tr(C_N).
    """
    if snr_linear < 0:
        raise ValueError("SNR must be nonnegative")
    tr_n = float(np.real(np.trace(C_N)))
    K = stats.K
    if phi_t is None:
        signal = stats.trace() / K
    else:
        N = phi_t.shape[1]
        power = np.real(np.einsum("kn,kn->k", phi_t, phi_t.conj()))
        tr_k = np.real(np.trace(stats.covs, axis1=1, axis2=2))
        signal = float(np.sum(power * tr_k)) / (N * K)
    return snr_linear * tr_n / signal


def rho_to_snr(rho: float, stats: ChannelStatistics, C_N: np.ndarray,
               phi_t: np.ndarray | None = None) -> float:
    return rho / snr_to_rho(1.0, stats, C_N, phi_t)


def cov_x(pilots: PilotBlock, stats: ChannelStatistics, C_N: np.ndarray):
    """C_x = Phi C_g Phi^H + I_N kron C_N.

    Returned as a :class:`BlockDiagonal` with N blocks of size M whenever the
    cross-snapshot blocks vanish (orthogonal pilot columns with a shared user
    covariance); otherwise as a dense MN x MN array.
    """
    rho, phi = pilots.rho, pilots.phi_t
    N, M = pilots.N, stats.M
    if stats.shared:
        P = phi.T @ phi.conj()  # P[n, n'] = sum_k phi_kn conj(phi_kn')
        off = P - np.diag(np.diag(P))
        if np.max(np.abs(off), initial=0.0) <= 1e-12 * np.max(np.abs(P)):
            blocks = rho * np.real(np.diag(P))[:, None, None] * stats.C_G + C_N
            return BlockDiagonal(blocks)
    W = rho * np.einsum("kn,kp,kab->napb", phi, phi.conj(), stats.covs)
    W = W + np.einsum("np,ab->napb", np.eye(N), C_N)
    return W.reshape(N * M, N * M)
