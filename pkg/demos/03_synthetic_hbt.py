# %% [markdown]
# # Measuring the burst with two detectors
#
# Quantum-jump trajectories give photon emission times, a 50/50
# beamsplitter and lossy detectors turn them into time tags, and the HBT
# estimator recovers g2 from coincidences.

# %%
import numpy as np

from superburst import DetectorModel, DickeSource, generate_dataset
from superburst.compare import binned_model_g2, summarize, zscores
from superburst.dicke import DickeState, LadderBasis, build_operators
from superburst.hbt import BinningSpec, accumulate, diagonal_g2

data = generate_dataset(DickeSource(6), 300_000, DetectorModel(efficiency=0.1), seed=1)
c1, c2 = data.counts_per_channel()
print(f"{data.n_repetitions} shots, {c1 / data.n_repetitions:.3f} and "
      f"{c2 / data.n_repetitions:.3f} clicks per shot per channel")

# %%
spec = BinningSpec(t_start_ns=0.0, t_end_ns=30.0, bin_ns=1.0, integration_bins=2)
diag = diagonal_g2(accumulate(data, spec), spec)

basis = LadderBasis(6)
model = np.diag(binned_model_g2(DickeState.fully_inverted(basis), build_operators(basis),
                                np.arange(0.0, 31.0, 2.0)))

# %%
for t, g, s, m in zip(diag.t_ns, diag.g2, diag.sigma, model):
    print(f"t={t:5.1f} ns  data {g:6.3f} +- {s:5.3f}   model {m:6.3f}")

# %%
print(summarize(zscores(diag.g2, diag.sigma, model)).format())
