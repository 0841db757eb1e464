"""
Mutual coupling of a dense dipole array
=======================================

Half-wave dipoles packed closer than half a wavelength interact. The
impedance matrix Z couples the open-circuit voltages, the load R turns them
into a coupling matrix T = (I + Z/R)^-1, and the amplifier noise picks up the
same structure. Here we look at how all three change with the spacing.
"""

import numpy as np

from sdmimo.coupling import CouplingParams, build_coupling, self_impedance

# The self impedance of a thin half-wave dipole is the textbook 73 + 42.5j ohm.
print("Z11 =", np.round(self_impedance(), 3))

# Mutual impedance between neighbours grows quickly as the spacing shrinks.
for delta in (1 / 2, 1 / 4, 1 / 6):
    m = build_coupling(16, delta)
    print(f"spacing {delta:.3f} wavelengths: |Z12| = {abs(m.Z[0, 1]):6.2f} ohm, "
          f"|T12/T11| = {abs(m.T[0, 1] / m.T[0, 0]):.3f}")

# %%
# Receiver noise
# --------------
# With the default circuit constants (R_N = R, uncorrelated current and voltage
# noise, sigma_i^2 = 2 k_B T_A B / R) the noise is matched to the load:
# Upsilon collapses to sigma_i^2 (Z + R I)(Z + R I)^H, which T cancels, so the
# coupled noise covariance is the same scaled identity as without coupling.

iso = build_coupling(16, 1 / 6, enabled=False)
dense = build_coupling(16, 1 / 6)
print("largest deviation from the isolated noise covariance:",
      f"{np.max(np.abs(dense.C_N - iso.C_N)) / iso.C_N[0, 0].real:.1e} (relative)")

# A noisier amplifier breaks the match, and the noise becomes spatially correlated.
hot = build_coupling(16, 1 / 6, CouplingParams(R_N=150.0, rho_n=0.3))
d = np.sqrt(np.real(np.diag(hot.C_N)))
corr = np.abs(hot.C_N) / np.outer(d, d)
print("R_N = 3R, rho_n = 0.3: noise correlation with element 8:", np.round(corr[7, 4:12], 2))
