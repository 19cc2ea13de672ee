"""Optical Bloch equations for a single resonantly driven two-level atom.

This is the uncorrelated-emitter reference: N independent atoms radiate at
``N * Gamma * rho_ee(t)``. Pulse shapes are specified in ns; the equations are
integrated in units of 1/Gamma.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .integrate import IntegrationError, rk4_integrate, validate_grid
from .units import DEFAULT_GAMMA_RAD_S, ns_per_lifetime


@dataclass(frozen=True)
class PulseProfile:
    """Trapezoidal pulse: flat top ``omega_peak`` on ``[t_on_ns, t_off_ns]``
    with linear ramps of ``edge_ns`` outside it.

    Rabi frequency and detuning are in units of Gamma.
    """

    omega_peak: float
    t_on_ns: float
    t_off_ns: float
    edge_ns: float = 1.0
    detuning: float = 0.0

    def __post_init__(self):
        if self.omega_peak < 0:
            raise ValueError("omega_peak must be >= 0")
        if self.t_off_ns < self.t_on_ns:
            raise ValueError("t_off_ns must not precede t_on_ns")
        if self.edge_ns < 0:
            raise ValueError("edge_ns must be >= 0")

    @classmethod
    def constant(cls, omega: float, detuning: float = 0.0) -> PulseProfile:
        return cls(omega, -np.inf, np.inf, 0.0, detuning)

    @classmethod
    def experimental(cls) -> PulseProfile:
        """12 ns flat top at 6.5 Gamma with 1 ns edges, ending at 14 ns."""
        return cls(6.5, 1.0, 13.0, 1.0)

    @property
    def end_ns(self) -> float:
        return self.t_off_ns + self.edge_ns

    @property
    def breakpoints_ns(self) -> np.ndarray:
        pts = np.array([self.t_on_ns - self.edge_ns, self.t_on_ns,
                        self.t_off_ns, self.t_off_ns + self.edge_ns])
        return pts[np.isfinite(pts)]

    def omega(self, t_ns):
        t = np.asarray(t_ns, dtype=float)
        if self.edge_ns == 0:
            inside = (t >= self.t_on_ns) & (t <= self.t_off_ns)
            return np.where(inside, self.omega_peak, 0.0)
        rise = (t - (self.t_on_ns - self.edge_ns)) / self.edge_ns
        fall = ((self.t_off_ns + self.edge_ns) - t) / self.edge_ns
        return self.omega_peak * np.clip(np.minimum(rise, fall), 0.0, 1.0)


@dataclass(frozen=True)
class TabulatedPulse:
    """Measured pulse shape, linearly interpolated and zero outside the table."""

    times_ns: np.ndarray
    omegas: np.ndarray
    detuning: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.times_ns, dtype=float)
        w = np.asarray(self.omegas, dtype=float)
        if t.ndim != 1 or t.shape != w.shape or t.size < 2:
            raise ValueError("need matching 1-D time and omega columns (>= 2 rows)")
        if np.any(np.diff(t) <= 0):
            raise ValueError("tabulated times must be strictly increasing")
        if np.any(w < 0):
            raise ValueError("tabulated Rabi frequencies must be >= 0")
        object.__setattr__(self, "times_ns", t)
        object.__setattr__(self, "omegas", w)

    @classmethod
    def from_file(cls, path, detuning: float = 0.0) -> TabulatedPulse:
        """Read two whitespace- or comma-separated columns
        ``time_ns omega_over_gamma``; ``#`` starts a comment."""
        text = Path(path).read_text().replace(",", " ")
        data = np.loadtxt(text.splitlines(), ndmin=2)
        if data.shape[1] != 2:
            raise ValueError(f"{path}: expected 2 columns, found {data.shape[1]}")
        return cls(data[:, 0], data[:, 1], detuning)

    @property
    def end_ns(self) -> float:
        return float(self.times_ns[-1])

    @property
    def breakpoints_ns(self) -> np.ndarray:
        return self.times_ns

    def omega(self, t_ns):
        return np.interp(t_ns, self.times_ns, self.omegas, left=0.0, right=0.0)


@dataclass(frozen=True)
class BlochState:
    rho_ee: float
    coherence: complex  # rho_ge
    time_ns: float

    def validate(self, tol: float = 1e-9) -> None:
        if not -tol <= self.rho_ee <= 1 + tol:
            raise ValueError(f"rho_ee = {self.rho_ee} outside [0, 1]")
        if abs(self.coherence) ** 2 > self.rho_ee * (1 - self.rho_ee) + tol:
            raise ValueError("coherence violates the positivity bound")


def _rhs(omega_of_t, detuning):
    # y = (rho_ee, Re rho_ge, Im rho_ge); H = -detuning |e><e| + omega/2 sigma_x
    def f(t, y):
        w = omega_of_t(t)
        ee, u, v = y
        return np.array([w * v - ee,
                         detuning * v - u / 2,
                         -w * (ee - 0.5) - detuning * u - v / 2])
    return f


def _omega_in_lifetimes(pulse, scale):
    if isinstance(pulse, PulseProfile):
        # scalar version of PulseProfile.omega; this sits in the inner RK4 loop
        a, b, e, w0 = pulse.t_on_ns, pulse.t_off_ns, pulse.edge_ns, pulse.omega_peak
        if e == 0:
            return lambda s: w0 if a <= s * scale <= b else 0.0
        return lambda s: w0 * min(1.0, max(0.0, min(s * scale - (a - e), (b + e) - s * scale) / e))
    return lambda s: float(pulse.omega(s * scale))


def solve_obe(pulse, t_grid_ns, *, gamma_rad_s: float = DEFAULT_GAMMA_RAD_S,
              rho_ee0: float = 0.0, max_step: float = 1e-3,
              check_convergence: bool = True, tol: float = 1e-9) -> list[BlochState]:
    """Integrate the two-level OBEs under ``pulse``.

    Parameters
    ----------
    pulse : PulseProfile or TabulatedPulse
    t_grid_ns : increasing times in ns; the atom starts at ``t_grid_ns[0]``
        with excited population ``rho_ee0`` and no coherence.
    max_step : RK4 step in units of 1/Gamma.
    """
    t_ns = validate_grid(t_grid_ns)
    if not 0 <= rho_ee0 <= 1:
        raise ValueError("rho_ee0 must be in [0, 1]")
    scale = ns_per_lifetime(gamma_rad_s)
    # steps must not straddle the kinks of a piecewise-linear pulse
    kinks = pulse.breakpoints_ns
    kinks = kinks[(kinks > t_ns[0]) & (kinks < t_ns[-1])]
    grid, where = np.unique(np.concatenate([t_ns, kinks]), return_inverse=True)
    f = _rhs(_omega_in_lifetimes(pulse, scale), pulse.detuning)
    traj = rk4_integrate(f, np.array([rho_ee0, 0.0, 0.0]), grid / scale, max_step,
                         check_convergence=check_convergence, conv_tol=tol)
    traj = traj[where[: t_ns.size]]
    states = []
    for (ee, u, v), tn in zip(traj, t_ns):
        s = BlochState(float(ee), complex(u, v), float(tn))
        try:
            s.validate(tol)
        except ValueError as exc:
            raise IntegrationError(str(exc), tn / scale) from exc
        states.append(s)
    return states


def excited_population(states) -> np.ndarray:
    return np.array([s.rho_ee for s in states])


def uncorrelated_rate(states, n_atoms: int, scale: float = 1.0) -> np.ndarray:
    """Emission rate of ``n_atoms`` independent atoms, ``scale * N * rho_ee``
    in units of Gamma. ``scale`` stands in for the detection efficiency."""
    if n_atoms < 0:
        raise ValueError("n_atoms must be >= 0")
    return scale * n_atoms * excited_population(states)
