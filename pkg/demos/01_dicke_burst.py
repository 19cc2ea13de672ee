# %% [markdown]
# # A superradiant burst on the Dicke ladder
#
# Six fully inverted emitters sharing one radiation mode. We follow the
# emission rate and the equal-time g2 as the ladder empties.

# %%
import numpy as np

from superburst import DickeState, LadderBasis, build_operators, evolve
from superburst.dicke import emission_rates, g2_curve
from superburst.units import ns_per_lifetime

n_eff = 6
basis = LadderBasis(n_eff)
ops = build_operators(basis)
ns = ns_per_lifetime()
print(f"1/Gamma = {ns:.2f} ns, ladder rates k(N+1-k) = {ops.rates}")

# %% [markdown]
# Time runs in units of 1/Gamma. The state starts on the top rung and
# stays diagonal, so only the population band ever moves.

# %%
t = np.linspace(0.0, 1.5, 301)
states = evolve(DickeState.fully_inverted(basis), ops, t)
rate = emission_rates(states, ops)
g2 = g2_curve(states, ops)

print(f"g2(0,0) = {g2[0]:.4f}   (2 - 2/N = {2 - 2 / n_eff:.4f})")
print(f"peak rate {rate.max():.3f} Gamma at t = {t[rate.argmax()] * ns:.2f} ns")

# %%
for i in range(0, 301, 30):
    bar = "#" * int(round(8 * rate[i]))
    print(f"{t[i] * ns:6.1f} ns  gamma={rate[i]:6.3f}  g2={g2[i]:6.3f}  {bar}")

# %% [markdown]
# Every photon is accounted for: the time integral of the rate equals N.

# %%
total = np.sum((rate[1:] + rate[:-1]) / 2 * np.diff(t))
print(f"photons emitted by {t[-1] * ns:.0f} ns: {total:.4f} of {n_eff}")
