# %% [markdown]
# # Bunching has to be paid for
#
# With exactly N photons per shot the count-weighted g2 over the whole
# map equals (N - 1) / N, whatever the detection efficiency. Extra
# coincidences on the diagonal must be balanced by missing ones
# elsewhere. Shot-to-shot photon-number noise breaks the identity.

# %%
import warnings

from superburst import DetectorModel, DickeSource, IndependentSource, generate_dataset
from superburst.hbt import BinningSpec, accumulate, sum_rule_check, weighted_g2_averages

spec = BinningSpec(0.0, 200.0, 2.0, 1)
burst = generate_dataset(DickeSource(6), 200_000, DetectorModel(0.2), seed=4)
cmap = accumulate(burst, spec)
diag, off, total = weighted_g2_averages(cmap)
print(f"weighted g2: diagonal {diag:.3f}, off-diagonal {off:.3f}, all {total:.3f}"
      f" (5/6 = {5 / 6:.3f})")
print(sum_rule_check(cmap, burst.fixed_nph).format())

# %% [markdown]
# Independent emitters with a Poisson photon number: no anticorrelation
# is forced, and the check has nothing to hold it to.

# %%
steady = generate_dataset(IndependentSource(6, 1.0, poisson=True), 200_000,
                          DetectorModel(0.2), seed=5)
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    report = sum_rule_check(accumulate(steady, spec))
print(caught[0].message)
print(report.format())
print("against N=6:", sum_rule_check(accumulate(steady, spec), 6).holds)
