"""
Uplink rates with imperfect CSI
===============================

The estimates from the pilot phase feed an MRC, ZF or MMSE receiver in the data
phase. ``model_report`` evaluates the rate from the Gaussian estimate model,
``empirical_rate_terms`` runs the full chain through the quantized array.
"""

import numpy as np

from sdmimo.channel import ScenarioGeometry
from sdmimo.rate import RateReport, empirical_rate_terms, model_report, sum_se
from sdmimo.scenario import Scenario

sc = Scenario.build(ScenarioGeometry(M=64, K=4, N=4), snr_db=10)

for rx in ("mrc", "zf", "mmse"):
    for tag in ("sigma-delta-1bit", "conv-1bit", "unquantized"):
        model = model_report(rx, sc, tag, seed=0)
        sim = RateReport(rx, tag, empirical_rate_terms(rx, sc, tag, seed=0, n_draws=100))
        print(f"{rx:4s} {tag:17s} sum SE  model {model.sum_se(200, 4):6.2f}   "
              f"simulated {sim.sum_se(200, 4):6.2f} bit/s/Hz")

# %%
# Where does the simulated ZF SINR lose power? The five terms tell.

terms = empirical_rate_terms("zf", sc, "sigma-delta-1bit", seed=0, n_draws=100)
for name, value in terms.items():
    print(f"{name:13s} {np.mean(value):10.3e}")
print("pilot overhead factor:", sum_se([1.0], 200, 4))
