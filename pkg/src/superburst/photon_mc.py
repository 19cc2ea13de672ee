"""Synthetic time-tagged photon records from quantum-jump trajectories.

Starting from a diagonal state on the Dicke ladder the master equation is a
pure cascade: from rung ``k`` the system jumps to ``k - 1`` after an
exponential waiting time with rate ``k (N + 1 - k)`` (units of Gamma). No
coherent no-jump evolution is needed, so a trajectory is just a cumulative sum
of exponential variates.

Detections then pass through a beamsplitter/APD model (efficiency, split
ratio, Gaussian jitter, non-paralyzable dead time).

Randomness: repetitions are generated in fixed-size blocks, and block ``b``
draws from ``SeedSequence(seed, spawn_key=(b,))``. Output therefore does not
depend on the number of worker threads or on which blocks run first.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dicke import CollectiveOperators, DickeState, LadderBasis, build_operators
from .timetags import TimeTagData
from .units import DEFAULT_GAMMA_RAD_S, ns_per_lifetime

BLOCK_SIZE = 1 << 16


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 0.1
    split_ratio: float = 0.5
    time_jitter_ns: float = 0.0
    dead_time_ns: float = 0.0

    def __post_init__(self):
        if not 0 < self.efficiency <= 1:
            raise ValueError(f"efficiency must be in (0, 1], got {self.efficiency}")
        if not 0 <= self.split_ratio <= 1:
            raise ValueError(f"split_ratio must be in [0, 1], got {self.split_ratio}")
        if self.time_jitter_ns < 0 or self.dead_time_ns < 0:
            raise ValueError("jitter and dead time must be >= 0")


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def sample_trajectory(basis: LadderBasis, ops: CollectiveOperators, initial_m: int,
                      t_max: float, rng: np.random.Generator) -> np.ndarray:
    """Emission times (units of 1/Gamma) of one jump trajectory.

    ``initial_m`` is the ladder index ``k`` of the starting rung; the cascade
    emits ``k`` photons unless cut off at ``t_max``.
    """
    if not 0 <= initial_m < basis.dim:
        raise ValueError(f"rung {initial_m} outside 0..{basis.n_atoms}")
    rates = ops.rates[initial_m:0:-1]
    times = np.cumsum(rng.standard_exponential(rates.size) / rates)
    return times[times <= t_max]


def sample_cascades(ops: CollectiveOperators, start_rungs, t_max: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`sample_trajectory` for many repetitions.

    Returns an ``(n, max(start_rungs))`` array of emission times with ``inf``
    marking photons that were never emitted or fall after ``t_max``.
    """
    k0 = np.asarray(start_rungs, dtype=np.int64)
    width = int(k0.max()) if k0.size else 0
    if width == 0:
        return np.full((k0.size, 0), np.inf)
    rung = k0[:, None] - np.arange(width)[None, :]
    valid = rung >= 1
    rates = np.where(valid, ops.rates[np.clip(rung, 0, None)], 1.0)
    waits = rng.standard_exponential(rung.shape) / rates
    times = np.cumsum(np.where(valid, waits, 0.0), axis=1)
    times[~valid | (times > t_max)] = np.inf
    return times


def _detect(rep, t_ns, model: DetectorModel, rng):
    keep = rng.random(t_ns.size) < model.efficiency
    channel = np.where(rng.random(t_ns.size) < model.split_ratio, 1, 2).astype(np.int8)
    if model.time_jitter_ns > 0:
        t_ns = t_ns + rng.normal(0.0, model.time_jitter_ns, t_ns.size)
    keep &= t_ns >= 0
    rep, channel, t_ns = rep[keep], channel[keep], t_ns[keep]
    order = np.lexsort((t_ns, channel, rep))
    rep, channel, t_ns = rep[order], channel[order], t_ns[order]
    if model.dead_time_ns > 0 and t_ns.size:
        alive = _dead_time_mask(rep, channel, t_ns, model.dead_time_ns)
        rep, channel, t_ns = rep[alive], channel[alive], t_ns[alive]
    order = np.lexsort((t_ns, rep))
    return rep[order], channel[order], t_ns[order]


def _dead_time_mask(rep, channel, t_ns, dead_time):
    # input sorted by (rep, channel, time); non-paralyzable detector
    alive = np.ones(t_ns.size, dtype=bool)
    last_key, last_t = None, -math.inf
    for i, key in enumerate(zip(rep.tolist(), channel.tolist())):
        t = t_ns[i]
        if key == last_key and t - last_t < dead_time:
            alive[i] = False
            continue
        last_key, last_t = key, t
    return alive


def detect(emissions_ns, model: DetectorModel, repetition: int,
           rng: np.random.Generator) -> TimeTagData:
    """Turn one repetition's emission times (ns, sorted) into detector clicks."""
    t = np.asarray(emissions_ns, dtype=float)
    rep, ch, tt = _detect(np.full(t.size, repetition, dtype=np.int64), t, model, rng)
    return TimeTagData(rep, ch, tt, repetition + 1)


@dataclass(frozen=True)
class DickeSource:
    """Collective emission from a diagonal Dicke state, starting at ``start_ns``."""

    n_eff: int
    populations: tuple[float, ...] | None = None  # default: fully inverted
    start_ns: float = 0.0

    @classmethod
    def from_state(cls, state: DickeState, start_ns: float = 0.0) -> DickeSource:
        if not state.is_diagonal(1e-12):
            raise ValueError("jump sampling needs a diagonal initial state")
        return cls(state.basis.n_atoms, tuple(state.populations), start_ns)

    def _pops(self):
        if self.populations is None:
            p = np.zeros(self.n_eff + 1)
            p[-1] = 1.0
            return p
        p = np.asarray(self.populations, dtype=float)
        if p.shape != (self.n_eff + 1,) or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
            raise ValueError("populations must be a distribution over n_eff + 1 rungs")
        return p / p.sum()

    @property
    def fixed_nph(self) -> int | None:
        nz = np.nonzero(self._pops())[0]
        return int(nz[0]) if nz.size == 1 else None

    def emissions(self, n: int, t_max: float, rng) -> np.ndarray:
        ops = build_operators(LadderBasis(self.n_eff))
        p = self._pops()
        k0 = rng.choice(p.size, size=n, p=p) if self.fixed_nph is None \
            else np.full(n, self.fixed_nph)
        return sample_cascades(ops, k0, t_max, rng)


@dataclass(frozen=True)
class IndependentSource:
    """``n_atoms`` uncorrelated atoms, each excited with ``excitation_probability``
    at ``start_ns`` and decaying at rate Gamma.

    With ``poisson=True`` the number of excited atoms is Poisson distributed
    with mean ``n_atoms * excitation_probability`` instead of binomial.
    """

    n_atoms: int
    excitation_probability: float = 1.0
    poisson: bool = False
    start_ns: float = 0.0

    def __post_init__(self):
        if self.n_atoms < 0 or not 0 <= self.excitation_probability <= 1:
            raise ValueError("need n_atoms >= 0 and excitation_probability in [0, 1]")

    @classmethod
    def from_pulse(cls, pulse, n_atoms: int, *, gamma_rad_s: float = DEFAULT_GAMMA_RAD_S,
                   poisson: bool = False) -> IndependentSource:
        """Excite with the OBE population left at the end of ``pulse``; emission
        during the pulse itself is not recorded."""
        from .obe import solve_obe

        end = pulse.end_ns
        p = solve_obe(pulse, np.linspace(0.0, end, 2), gamma_rad_s=gamma_rad_s)[-1].rho_ee
        return cls(n_atoms, float(np.clip(p, 0.0, 1.0)), poisson, end)

    @property
    def fixed_nph(self) -> int | None:
        if not self.poisson and self.excitation_probability in (0.0, 1.0):
            return int(self.n_atoms * self.excitation_probability)
        return None

    def emissions(self, n: int, t_max: float, rng) -> np.ndarray:
        mean = self.n_atoms * self.excitation_probability
        if self.poisson:
            k = rng.poisson(mean, size=n)
        else:
            k = rng.binomial(self.n_atoms, self.excitation_probability, size=n)
        width = int(k.max()) if n else 0
        times = rng.standard_exponential((n, width))
        times[(np.arange(width)[None, :] >= k[:, None]) | (times > t_max)] = np.inf
        return times


def _block(source, lo, hi, model, seed, block, ns, t_max):
    rng = block_rng(seed, block)
    times = source.emissions(hi - lo, t_max, rng)
    rep = np.broadcast_to(np.arange(lo, hi)[:, None], times.shape)
    emitted = np.isfinite(times)
    return _detect(rep[emitted].astype(np.int64),
                   source.start_ns + times[emitted] * ns, model, rng)


def generate_dataset(source, n_repetitions: int, model: DetectorModel, *, seed: int,
                     gamma_rad_s: float = DEFAULT_GAMMA_RAD_S, t_max_ns: float = math.inf,
                     threads: int = 1, block_size: int = BLOCK_SIZE) -> TimeTagData:
    """Simulate ``n_repetitions`` triggered shots of ``source``.

    ``t_max_ns`` bounds the emission window measured from ``source.start_ns``.
    The result is sorted by (repetition, time) and is identical for any
    ``threads``.
    """
    if n_repetitions < 1:
        raise ValueError("n_repetitions must be >= 1")
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    ns = ns_per_lifetime(gamma_rad_s)
    t_max = t_max_ns / ns
    bounds = [(b, lo, min(lo + block_size, n_repetitions))
              for b, lo in enumerate(range(0, n_repetitions, block_size))]

    def run(args):
        b, lo, hi = args
        return _block(source, lo, hi, model, seed, b, ns, t_max)

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    rep = np.concatenate([p[0] for p in parts])
    ch = np.concatenate([p[1] for p in parts])
    t = np.concatenate([p[2] for p in parts])
    fixed = source.fixed_nph if math.isinf(t_max_ns) else None
    return TimeTagData(rep, ch, t, n_repetitions, source.start_ns, fixed)
