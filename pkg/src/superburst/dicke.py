"""Collective-spin (Dicke) model of superradiant decay.

The ensemble of ``n_atoms`` identical two-level emitters is restricted to the
symmetric ladder ``|S, m>`` with ``S = n_atoms / 2``. Index ``k = m + S`` runs
from 0 (all atoms in the ground state) to ``n_atoms`` (fully inverted).

Dissipative dynamics, in units where Gamma = 1::

    drho/dt = (1/2) (2 S- rho S+ - S+S- rho - rho S+S-)

Written out per matrix element this only couples ``rho[i, j]`` to
``rho[i+1, j+1]``, so every diagonal band of ``rho`` evolves on its own. The
integrator uses that: a diagonal initial state never touches the off-diagonal
bands.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .integrate import IntegrationError, propagate_linear, rk4_step_matrix, validate_grid
from .units import DEFAULT_GAMMA_RAD_S

#: Denominator below which g2 is reported as NaN (no emission left).
RATE_THRESHOLD = 1e-12


@dataclass(frozen=True)
class LadderBasis:
    """Symmetric subspace of ``n_atoms`` two-level atoms."""

    n_atoms: int

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ValueError(f"n_atoms must be a positive integer, got {self.n_atoms!r}")
        object.__setattr__(self, "n_atoms", int(self.n_atoms))

    @property
    def spin(self) -> float:
        return self.n_atoms / 2

    @property
    def dim(self) -> int:
        return self.n_atoms + 1

    def m_of(self, k: int) -> float:
        if not 0 <= k < self.dim:
            raise IndexError(f"ladder index {k} outside 0..{self.n_atoms}")
        return k - self.spin

    def index_of(self, m: float) -> int:
        k = m + self.spin
        if abs(k - round(k)) > 1e-12 or not 0 <= round(k) < self.dim:
            raise ValueError(f"m = {m} is not on the S = {self.spin} ladder")
        return int(round(k))


@dataclass(frozen=True)
class CollectiveOperators:
    basis: LadderBasis
    s_minus: np.ndarray
    s_plus: np.ndarray
    s_plus_s_minus: np.ndarray

    @property
    def rates(self) -> np.ndarray:
        """Diagonal of S+S-, i.e. the decay rate ``k (N + 1 - k)`` of each rung."""
        return np.diag(self.s_plus_s_minus).copy()

    @property
    def dim(self) -> int:
        return self.basis.dim


def build_operators(basis: LadderBasis) -> CollectiveOperators:
    """Closed-form S-, S+ and S+S- on the ladder."""
    if basis.n_atoms < 1:
        raise ValueError("need at least one atom")
    k = np.arange(basis.dim)
    # <S, m-1| S- |S, m> = sqrt((S+m)(S-m+1)) with S+m = k, S-m+1 = N+1-k
    rates = (k * (basis.n_atoms + 1 - k)).astype(float)
    s_minus = np.zeros((basis.dim, basis.dim))
    s_minus[k[:-1], k[1:]] = np.sqrt(rates[1:])
    s_plus = s_minus.T.copy()
    return CollectiveOperators(basis, s_minus, s_plus, np.diag(rates))


def effective_atom_number(config_or_n, mu: float | None = None) -> int:
    """``round(mu * N)``, floored at one atom.

    Accepts either a :class:`SimConfig` or ``(n_physical, mu)``.
    """
    if mu is None:
        n, mu = config_or_n.n_physical, config_or_n.mu
    else:
        n = config_or_n
    if n is None or n < 1:
        raise ValueError(f"physical atom number must be >= 1, got {n!r}")
    if mu is None or not mu > 0:
        raise ValueError(f"coupling mu must be positive, got {mu!r}")
    return max(1, math.floor(mu * n + 0.5))


@dataclass
class SimConfig:
    """Physical and numerical parameters of a Dicke-model run.

    ``t_grid`` is in units of 1/Gamma. ``max_step`` defaults to ``1e-3 / n_eff``
    because the fastest collective rate grows like ``n_eff**2 / 4``.
    """

    n_physical: int
    mu: float = 1.0
    gamma_rad_s: float = DEFAULT_GAMMA_RAD_S
    t_grid: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 5.0, 501))
    max_step: float | None = None
    check_convergence: bool = True
    trace_tol: float = 1e-9
    positivity_tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        effective_atom_number(self)
        self.t_grid = validate_grid(self.t_grid)
        if self.t_grid[0] != 0:
            raise ValueError("t_grid must start at 0")
        if self.gamma_rad_s <= 0:
            raise ValueError("gamma_rad_s must be positive")
        if self.max_step is not None and self.max_step <= 0:
            raise ValueError("max_step must be positive")
        if self.trace_tol <= 0 or self.positivity_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @classmethod
    def for_effective(cls, n_eff: int, **kwargs) -> SimConfig:
        return cls(n_physical=n_eff, mu=1.0, **kwargs)

    @property
    def n_eff(self) -> int:
        return effective_atom_number(self)

    @property
    def step(self) -> float:
        return self.max_step if self.max_step is not None else 1e-3 / self.n_eff

    def basis(self) -> LadderBasis:
        return LadderBasis(self.n_eff)


@dataclass
class DickeState:
    basis: LadderBasis
    rho: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.shape != (self.basis.dim, self.basis.dim):
            raise ValueError(
                f"rho has shape {self.rho.shape}, expected {(self.basis.dim,) * 2}")

    @classmethod
    def fully_inverted(cls, basis: LadderBasis) -> DickeState:
        return cls.rung(basis, basis.n_atoms)

    @classmethod
    def rung(cls, basis: LadderBasis, k: int) -> DickeState:
        if not 0 <= k < basis.dim:
            raise ValueError(f"rung {k} outside 0..{basis.n_atoms}")
        rho = np.zeros((basis.dim, basis.dim), dtype=complex)
        rho[k, k] = 1.0
        return cls(basis, rho)

    @classmethod
    def from_populations(cls, basis: LadderBasis, populations) -> DickeState:
        p = np.asarray(populations, dtype=float)
        if p.shape != (basis.dim,):
            raise ValueError(f"need {basis.dim} populations, got shape {p.shape}")
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
            raise ValueError("populations must be non-negative and sum to 1")
        return cls(basis, np.diag(p).astype(complex))

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.rho)).copy()

    def is_diagonal(self, tol: float = 0.0) -> bool:
        off = self.rho - np.diag(np.diag(self.rho))
        return bool(np.all(np.abs(off) <= tol))

    def validate(self, trace_tol: float = 1e-9, positivity_tol: float = 1e-9) -> None:
        """Raise ``ValueError`` unless rho is Hermitian, unit-trace and has a
        non-negative real diagonal."""
        rho = self.rho
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > trace_tol:
            raise ValueError(f"rho is not Hermitian (max deviation {herm:.3g})")
        tr = np.trace(rho)
        if abs(tr - 1) > trace_tol:
            raise ValueError(f"trace of rho is {tr:.12g}, not 1")
        d = np.diag(rho)
        if np.any(np.abs(d.imag) > trace_tol) or np.any(d.real < -positivity_tol):
            raise ValueError("diagonal of rho must be real and non-negative")


def _check_dims(rho: np.ndarray, ops: CollectiveOperators) -> None:
    if rho.shape[-2:] != (ops.dim, ops.dim):
        raise ValueError(
            f"state dimension {rho.shape[-1]} does not match operators ({ops.dim})")


def lindblad_rhs(state: DickeState, ops: CollectiveOperators) -> np.ndarray:
    """Right-hand side of the collective-decay master equation (Gamma = 1)."""
    rho = state.rho
    _check_dims(rho, ops)
    sm, sp, spsm = ops.s_minus, ops.s_plus, ops.s_plus_s_minus
    return 0.5 * (2 * sm @ rho @ sp - spsm @ rho - rho @ spsm)


def band_generator(ops: CollectiveOperators, offset: int) -> np.ndarray:
    """Generator for the elements of ``np.diagonal(rho, offset)``.

    Element ``j`` of the band is ``rho[i, i + offset]`` (or the mirrored index
    for negative offsets); it feeds from element ``j + 1``.
    """
    dim = ops.dim
    length = dim - abs(offset)
    if length <= 0:
        raise ValueError(f"offset {offset} outside the matrix")
    r = ops.rates
    c = np.sqrt(r)
    rows = np.arange(length) + max(0, -offset)
    cols = rows + offset
    A = np.diag(-(r[rows] + r[cols]) / 2)
    if length > 1:
        A[np.arange(length - 1), np.arange(1, length)] = c[rows[1:]] * c[cols[1:]]
    return A


def _propagate_matrix(rho0, ops, t, max_step, check_convergence, conv_tol):
    """Propagate a (not necessarily Hermitian) matrix band by band."""
    dim = ops.dim
    out = np.zeros((t.size, dim, dim), dtype=complex)
    idx = np.arange(dim)
    for d in range(-(dim - 1), dim):
        band = np.diagonal(rho0, d)
        if not np.any(band):
            continue
        A = band_generator(ops, d)
        traj = propagate_linear(A, band, t, max_step,
                                check_convergence=check_convergence, conv_tol=conv_tol)
        rows = idx[: dim - abs(d)] + max(0, -d)
        out[:, rows, rows + d] = traj
    return out


def evolve(state: DickeState, ops: CollectiveOperators, t_grid, *,
           max_step: float | None = None, check_convergence: bool = True,
           trace_tol: float = 1e-9) -> list[DickeState]:
    """Integrate the master equation and sample ``rho`` on ``t_grid``.

    ``t_grid`` is elapsed time (units of 1/Gamma) measured from ``state``;
    the returned states carry absolute times ``state.time + t``.

    Raises
    ------
    IntegrationError
        If the state becomes non-finite, the step-halving check fails, or
        trace/Hermiticity drift beyond ``10 * trace_tol``.
    """
    _check_dims(state.rho, ops)
    t = validate_grid(t_grid)
    if t[0] < 0:
        raise ValueError("t_grid must be non-negative")
    prepend = t[0] > 0
    if prepend:
        t = np.concatenate([[0.0], t])
    h = max_step if max_step is not None else 1e-3 / ops.basis.n_atoms
    rhos = _propagate_matrix(state.rho, ops, t, h, check_convergence, trace_tol)
    if prepend:
        rhos, t = rhos[1:], t[1:]

    tr0 = np.trace(state.rho)
    tol = 10 * trace_tol * max(1.0, abs(tr0))
    drift = np.abs(np.trace(rhos, axis1=1, axis2=2) - tr0)
    herm = np.abs(rhos - rhos.conj().transpose(0, 2, 1)).max(axis=(1, 2))
    herm0 = np.abs(state.rho - state.rho.conj().T).max()
    bad = np.nonzero((drift > tol) | (herm > max(tol, 10 * herm0)))[0]
    if bad.size:
        raise IntegrationError("trace or Hermiticity not preserved", state.time + t[bad[0]])
    return [DickeState(state.basis, r, state.time + ti) for r, ti in zip(rhos, t)]


def evolve_populations(populations, ops: CollectiveOperators, t_grid, *,
                       max_step: float | None = None,
                       check_convergence: bool = False) -> np.ndarray:
    """Diagonal fast path: ``(len(t_grid), dim)`` array of rung populations."""
    p0 = np.asarray(populations, dtype=float)
    if p0.shape[0] != ops.dim:
        raise ValueError("population vector does not match operators")
    t = validate_grid(t_grid)
    h = max_step if max_step is not None else 1e-3 / ops.basis.n_atoms
    return propagate_linear(band_generator(ops, 0), p0, t, h,
                            check_convergence=check_convergence)


def emission_rate(state: DickeState, ops: CollectiveOperators) -> float:
    """Photon emission rate ``Tr[S+S- rho]`` in units of Gamma."""
    _check_dims(state.rho, ops)
    return float(np.real(np.diag(state.rho)) @ ops.rates)


def _pair_weights(ops: CollectiveOperators) -> np.ndarray:
    # <k| S+S+S-S- |k> = r_k r_{k-1}
    r = ops.rates
    return r * np.concatenate([[0.0], r[:-1]])


def g2_equal_time(state: DickeState, ops: CollectiveOperators, *,
                  threshold: float = RATE_THRESHOLD) -> float:
    """``<S+S+S-S-> / <S+S->**2``; NaN when the emission rate is below
    ``threshold``."""
    _check_dims(state.rho, ops)
    p = np.real(np.diag(state.rho))
    rate = p @ ops.rates
    if rate < threshold:
        return math.nan
    return float(p @ _pair_weights(ops) / rate**2)


def emission_rates(states, ops: CollectiveOperators) -> np.ndarray:
    p = np.array([np.real(np.diag(s.rho)) for s in states])
    return p @ ops.rates


def g2_curve(states, ops: CollectiveOperators, *,
             threshold: float = RATE_THRESHOLD) -> np.ndarray:
    p = np.array([np.real(np.diag(s.rho)) for s in states])
    rate = p @ ops.rates
    pairs = p @ _pair_weights(ops)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(rate >= threshold, pairs / rate**2, np.nan)


def g2_two_time(state_at_t1: DickeState, ops: CollectiveOperators, tau_grid, *,
                max_step: float | None = None, check_convergence: bool = True,
                threshold: float = RATE_THRESHOLD) -> np.ndarray:
    """Normalized ``g2(t1, t1 + tau)`` by the quantum regression theorem.

    The conditional matrix ``S- rho(t1) S+`` is propagated with the same
    generator as rho itself; ``G2(tau) = Tr[S+S- sigma(tau)]``. The rate at
    ``t2`` is taken from rho evolved separately over the same ``tau_grid``.
    """
    _check_dims(state_at_t1.rho, ops)
    tau = validate_grid(tau_grid)
    if tau[0] < 0:
        raise ValueError("tau_grid must be non-negative")
    rate1 = emission_rate(state_at_t1, ops)
    if rate1 < threshold:
        raise ValueError("no emission at t1; g2(t1, t2) is undefined")
    sigma = DickeState(state_at_t1.basis,
                       ops.s_minus @ state_at_t1.rho @ ops.s_plus, state_at_t1.time)
    kw = dict(max_step=max_step, check_convergence=check_convergence)
    G2 = emission_rates(evolve(sigma, ops, tau, **kw), ops)
    rate2 = emission_rates(evolve(state_at_t1, ops, tau, **kw), ops)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(rate2 >= threshold, G2 / (rate1 * rate2), np.nan)


def two_time_correlation_map(state: DickeState, ops: CollectiveOperators, t_grid, *,
                             max_step: float | None = None):
    """Unnormalized ``G2(t1, t2)`` and ``gamma(t)`` on a uniform grid.

    Two-time intensity correlations only depend on the rung populations, so
    this works on the diagonal band. All conditional states are propagated
    together, one lag at a time.

    Returns
    -------
    G2 : (n, n) symmetric array, units of Gamma**2
    gamma : (n,) array, units of Gamma
    """
    _check_dims(state.rho, ops)
    t = validate_grid(t_grid)
    if t[0] < 0:
        raise ValueError("t_grid must be non-negative")
    if t.size > 2 and not np.allclose(np.diff(t), t[1] - t[0], rtol=1e-9, atol=0):
        raise ValueError("t_grid must be uniform")
    h = max_step if max_step is not None else 1e-3 / ops.basis.n_atoms
    grid = t if t[0] == 0 else np.concatenate([[0.0], t])
    P = evolve_populations(state.populations, ops, grid, max_step=h)
    P = P[-t.size:]
    r = ops.rates
    gamma = P @ r
    n = t.size
    G2 = np.zeros((n, n))
    if n == 1:
        G2[0, 0] = P[0] @ _pair_weights(ops)
        return G2, gamma
    dt = t[1] - t[0]
    steps = max(1, math.ceil(dt / h - 1e-12))
    M = np.linalg.matrix_power(rk4_step_matrix(band_generator(ops, 0), dt / steps), steps)
    # population of the conditional state S- rho S+: rung k-1 receives r_k p_k
    Y = np.zeros((ops.dim, n))
    Y[:-1] = (P * r).T[1:]
    cols = np.arange(n)
    for lag in range(n):
        G2[cols[: n - lag], cols[lag:]] = r @ Y[:, : n - lag]
        Y = M @ Y
    i, j = np.triu_indices(n, 1)
    G2[j, i] = G2[i, j]
    return G2, gamma
