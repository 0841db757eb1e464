"""A fully specified uplink training setup: array, coupling, users, pilots, SNR."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import (ChannelStatistics, PilotBlock, ScenarioGeometry, channel_statistics,
                      cov_x, dft_pilots, draw_channels, received_pilot_block, snr_to_rho)
from .coupling import CouplingModel, CouplingParams, build_coupling


@dataclass(frozen=True)
class Scenario:
    geometry: ScenarioGeometry
    coupling: CouplingModel
    stats: ChannelStatistics
    pilots: PilotBlock
    snr_db: float

    @classmethod
    def build(cls, geometry: ScenarioGeometry | None = None, snr_db: float = 10.0,
              coupling: bool = True, params: CouplingParams | None = None,
              coupling_model: CouplingModel | None = None) -> "Scenario":
        geometry = geometry or ScenarioGeometry()
        model = coupling_model or build_coupling(geometry.M, geometry.delta, params, enabled=coupling)
        stats = channel_statistics(model.T, geometry)
        phi_t = dft_pilots(geometry.N, geometry.K)
        rho = snr_to_rho(10 ** (snr_db / 10), stats, model.C_N, phi_t)
        return cls(geometry, model, stats, PilotBlock(phi_t, rho), float(snr_db))

    def with_snr(self, snr_db: float) -> "Scenario":
        rho = snr_to_rho(10 ** (snr_db / 10), self.stats, self.C_N, self.pilots.phi_t)
        return Scenario(self.geometry, self.coupling, self.stats,
                        PilotBlock(self.pilots.phi_t, rho), float(snr_db))

    @property
    def M(self) -> int:
        return self.geometry.M

    @property
    def K(self) -> int:
        return self.geometry.K

    @property
    def N(self) -> int:
        return self.geometry.N

    @property
    def rho(self) -> float:
        return self.pilots.rho

    @property
    def C_N(self) -> np.ndarray:
        return self.coupling.C_N

    def cov_x(self):
        return cov_x(self.pilots, self.stats, self.C_N)

    def draw(self, rng: np.random.Generator, size=()):
        """One (or a batch of) channel vector(s) and the received pilot block."""
        g = draw_channels(self.stats, rng, size)
        x = received_pilot_block(g, self.pilots, self.C_N, rng)
        return g, x

    def draw_trials(self, seed: int, trials: int, first: int = 0):
        """Stacked draws where trial t uses its own stream keyed by (seed, t)."""
        gs, xs = [], []
        for t in range(first, first + trials):
            g, x = self.draw(np.random.default_rng([seed, t]))
            gs.append(g)
            xs.append(x)
        return np.stack(gs), np.stack(xs)
