"""
Seeded sweeps from a config file
================================

Every experiment is a function of an ExperimentConfig. Trials draw from
streams keyed by (seed, trial) and are reduced in a fixed order, so the table
is the same for any number of worker processes.
"""

import tempfile
from pathlib import Path

from sdmimo.harness import build_config, run_ne_vs_antennas

text = """
M: 32
trials: 50
sweep_values: [8, 16, 32]
tags: [sigma-delta-1bit, conv-1bit]
seed: 11
"""
path = Path(tempfile.mkdtemp()) / "antennas.yaml"
path.write_text(text)

cfg = build_config("ne-antennas", path)
serial = run_ne_vs_antennas(cfg)
parallel = run_ne_vs_antennas(cfg.replace(workers=2))
print(serial.to_csv())
print("identical with two workers:", serial.to_csv() == parallel.to_csv())

# %%
# The same run from the shell:
#
#     sdmimo ne-antennas --config antennas.yaml --format json --out antennas.json
