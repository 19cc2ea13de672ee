# %% [markdown]
# # Exciting a single atom with a finite pulse
#
# A 12 ns flat-top pulse at 6.5 Gamma with 1 ns ramps. Rabi cycling plus
# decay leaves the atom partly inverted when the light goes off.

# %%
import numpy as np

from superburst import PulseProfile, solve_obe
from superburst.obe import excited_population

pulse = PulseProfile.experimental()
t_ns = np.linspace(0.0, 40.0, 401)
ee = excited_population(solve_obe(pulse, t_ns))

# %%
for t, w, p in zip(t_ns[::20], pulse.omega(t_ns[::20]), ee[::20]):
    print(f"{t:5.1f} ns  Omega={w:4.2f}  rho_ee={p:.3f}")

# %%
end = solve_obe(pulse, [0.0, pulse.end_ns])[-1]
print(f"inversion at pulse end ({pulse.end_ns:g} ns): {end.rho_ee:.3f}")

# %% [markdown]
# Constant drive settles to s / (2 (1 + s)) with s = 2 Omega^2.

# %%
for omega in (0.5, 1.0, 2.0, 5.0):
    s = 2 * omega**2
    last = solve_obe(PulseProfile.constant(omega), np.linspace(0, 800, 41))[-1]
    print(f"Omega={omega}: rho_ee={last.rho_ee:.5f}  closed form={s / (2 * (1 + s)):.5f}")
