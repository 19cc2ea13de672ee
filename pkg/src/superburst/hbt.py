"""Hanbury-Brown-Twiss analysis of triggered time-tag data.

Counts are accumulated per repetition window: ``n1[b]`` and ``n2[b]`` are
click totals per bin, ``nc[b1, b2]`` the number of (channel-1 click in ``b1``,
channel-2 click in ``b2``) pairs from the same repetition, every pair counted.
Same-channel pairs are never used.

The estimator is normalized per repetition,

    g2[b1, b2] = R * nc[b1, b2] / (n1[b1] * n2[b2]),

so that statistically independent channels give 1. Bins whose denominator is
zero are NaN.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .timetags import TimeTagData


@dataclass(frozen=True)
class BinningSpec:
    """Analysis window ``[t_start_ns, t_end_ns)`` relative to the data's
    ``bin_origin_ns``, cut into bins of ``bin_ns``."""

    t_start_ns: float = 0.0
    t_end_ns: float = 100.0
    bin_ns: float = 1.0
    integration_bins: int = 2

    def __post_init__(self):
        if not self.bin_ns > 0:
            raise ValueError("bin_ns must be positive")
        span = self.t_end_ns - self.t_start_ns
        if not span > 0:
            raise ValueError("t_end_ns must exceed t_start_ns")
        n = span / self.bin_ns
        if abs(n - round(n)) > 1e-6 * max(1.0, n):
            raise ValueError(f"window length {span} ns is not a multiple of bin_ns={self.bin_ns}")
        if int(self.integration_bins) != self.integration_bins or self.integration_bins < 1:
            raise ValueError("integration_bins must be a positive integer")
        if self.integration_bins > round(n):
            raise ValueError("integration block is longer than the window")

    @property
    def n_bins(self) -> int:
        return int(round((self.t_end_ns - self.t_start_ns) / self.bin_ns))

    @property
    def edges(self) -> np.ndarray:
        return self.t_start_ns + self.bin_ns * np.arange(self.n_bins + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.t_start_ns + self.bin_ns * (np.arange(self.n_bins) + 0.5)

    def bin_index(self, t_ns) -> np.ndarray:
        """Bin of each time, -1 outside the window."""
        b = np.floor((np.asarray(t_ns, dtype=float) - self.t_start_ns) / self.bin_ns)
        b = b.astype(np.int64)
        b[(b < 0) | (b >= self.n_bins)] = -1
        return b


@dataclass
class CorrelationMap:
    n1: np.ndarray
    n2: np.ndarray
    nc: np.ndarray
    n_repetitions: int
    spec: BinningSpec

    def __add__(self, other: CorrelationMap) -> CorrelationMap:
        if other.spec != self.spec:
            raise ValueError("cannot merge maps with different binning")
        return CorrelationMap(self.n1 + other.n1, self.n2 + other.n2, self.nc + other.nc,
                              self.n_repetitions + other.n_repetitions, self.spec)

    def transposed(self) -> CorrelationMap:
        """Map of the same data with channel labels swapped."""
        return CorrelationMap(self.n2.copy(), self.n1.copy(), self.nc.T.copy(),
                              self.n_repetitions, self.spec)


@dataclass
class G2Estimate:
    g2: np.ndarray
    sigma: np.ndarray
    t_ns: np.ndarray  # bin centers


@dataclass
class DiagonalG2:
    t_ns: np.ndarray
    g2: np.ndarray
    sigma: np.ndarray
    halfwidth_ns: float
    nc: np.ndarray
    n1: np.ndarray
    n2: np.ndarray


@dataclass
class SumRuleReport:
    lhs: float
    rhs: float
    rel_dev: float
    fixed_nph: int | None
    expected_rel_dev: float | None = None
    sigma_rel: float | None = None
    holds: bool | None = None

    def format(self) -> str:
        def fmt(v):
            if v is None:
                return "none"
            if isinstance(v, bool):
                return str(v).lower()
            return repr(v) if isinstance(v, int) else f"{v:.10g}"
        keys = ["lhs", "rhs", "rel_dev", "fixed_nph", "expected_rel_dev", "sigma_rel", "holds"]
        return "".join(f"{k}={fmt(getattr(self, k))}\n" for k in keys)


def _relative_bins(data: TimeTagData, spec: BinningSpec):
    return spec.bin_index(data.time_ns - data.bin_origin_ns)


def _cross_pairs(rep1, rep2):
    """Index arrays (i, j) over all pairs with rep1[i] == rep2[j]; rep2 sorted."""
    lo = np.searchsorted(rep2, rep1, side="left")
    hi = np.searchsorted(rep2, rep1, side="right")
    counts = hi - lo
    total = int(counts.sum())
    i = np.repeat(np.arange(rep1.size), counts)
    starts = np.cumsum(counts) - counts
    j = np.arange(total) - np.repeat(starts, counts) + np.repeat(lo, counts)
    return i, j


def _clicks(data, spec):
    b = _relative_bins(data, spec)
    inside = b >= 0
    out = []
    for ch in (1, 2):
        m = inside & (data.channel == ch)
        rep, bins = data.repetition[m], b[m]
        order = np.argsort(rep, kind="stable")
        out.append((rep[order], bins[order]))
    return out


def _accumulate_counts(data: TimeTagData, spec: BinningSpec, n_repetitions: int):
    nb = spec.n_bins
    (rep1, b1), (rep2, b2) = _clicks(data, spec)
    n1 = np.bincount(b1, minlength=nb)
    n2 = np.bincount(b2, minlength=nb)
    i, j = _cross_pairs(rep1, rep2)
    nc = np.bincount(b1[i] * nb + b2[j], minlength=nb * nb).reshape(nb, nb)
    return CorrelationMap(n1, n2, nc, n_repetitions, spec)


def accumulate(data: TimeTagData, spec: BinningSpec, *, threads: int = 1,
               shard_repetitions: int = 1 << 18) -> CorrelationMap:
    """Bin clicks and count cross-channel coincidences.

    With ``threads > 1`` the repetitions are split into contiguous shards
    whose maps are summed; the result is identical to the serial one.
    """
    R = data.n_repetitions
    if threads <= 1 or R <= shard_repetitions:
        return _accumulate_counts(data, spec, R)
    edges = list(range(0, R, shard_repetitions)) + [R]
    shards = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = (data.repetition >= lo) & (data.repetition < hi)
        shards.append((data.select(m), hi - lo))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        maps = list(pool.map(lambda s: _accumulate_counts(s[0], spec, s[1]), shards))
    total = maps[0]
    for m in maps[1:]:
        total = total + m
    return total


def _ratio(nc, n1, n2, R):
    """g2 and its Poisson-propagated error for broadcastable count arrays."""
    nc = np.asarray(nc, dtype=float)
    denom = np.asarray(n1, dtype=float) * np.asarray(n2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        g2 = np.where(denom > 0, R * nc / denom, np.nan)
        # g2 * sqrt(1/nc + 1/n1 + 1/n2), rewritten so nc = 0 gets a one-count error
        rel = np.sqrt(np.maximum(nc, 1.0) * (1.0 + nc / n1 + nc / n2))
        sigma = np.where(denom > 0, R * rel / denom, np.nan)
    return g2, sigma


def estimate_g2(cmap: CorrelationMap) -> G2Estimate:
    if cmap.n_repetitions < 1:
        raise ValueError("map has no repetitions")
    g2, sigma = _ratio(cmap.nc, cmap.n1[:, None], cmap.n2[None, :], cmap.n_repetitions)
    return G2Estimate(g2, sigma, cmap.spec.centers)


def _block_sums(cmap: CorrelationMap, width: int):
    nblk = cmap.spec.n_bins // width
    n = nblk * width
    n1 = cmap.n1[:n].reshape(nblk, width).sum(axis=1)
    n2 = cmap.n2[:n].reshape(nblk, width).sum(axis=1)
    nc = cmap.nc[:n, :n].reshape(nblk, width, nblk, width).sum(axis=(1, 3))
    return n1, n2, nc


def coarsen(cmap: CorrelationMap, width: int) -> CorrelationMap:
    """Merge ``width`` consecutive bins on both axes (trailing partial block
    dropped)."""
    n1, n2, nc = _block_sums(cmap, width)
    s = cmap.spec
    spec = BinningSpec(s.t_start_ns, s.t_start_ns + n1.size * width * s.bin_ns,
                       s.bin_ns * width, 1)
    return CorrelationMap(n1, n2, nc, cmap.n_repetitions, spec)


def diagonal_g2(cmap: CorrelationMap, spec: BinningSpec | None = None) -> DiagonalG2:
    """Equal-time g2 summed over ``integration_bins``-wide diagonal blocks.

    Counts inside each block (``nc`` over the whole square block) are summed
    before the ratio is formed.
    """
    spec = spec or cmap.spec
    width = spec.integration_bins
    n1, n2, ncb = _block_sums(cmap, width)
    nc = np.diag(ncb).copy()
    g2, sigma = _ratio(nc, n1, n2, cmap.n_repetitions)
    block = width * cmap.spec.bin_ns
    t = cmap.spec.t_start_ns + block * (np.arange(n1.size) + 0.5)
    return DiagonalG2(t, g2, sigma, block / 2, nc, n1, n2)


def weighted_g2_averages(cmap: CorrelationMap) -> tuple[float, float, float]:
    """Count-weighted mean of g2 (weights ``n1 n2``) over the diagonal,
    the off-diagonal bins, and the whole map."""
    w = cmap.n1[:, None].astype(float) * cmap.n2[None, :]
    lhs = cmap.n_repetitions * cmap.nc.astype(float)   # = w * g2 where defined
    on = np.eye(cmap.spec.n_bins, dtype=bool)

    def avg(mask):
        ws = w[mask].sum()
        return float(lhs[mask].sum() / ws) if ws > 0 else math.nan
    return avg(on), avg(~on), avg(np.ones_like(on))


def sum_rule_check(cmap: CorrelationMap, fixed_nph: int | None = None) -> SumRuleReport:
    """Compare ``sum n1 n2 g2`` with ``sum n1 n2`` over the window.

    For repetitions that all emit exactly ``fixed_nph`` photons (and the whole
    emission inside the window) the ratio is ``(N - 1) / N`` in expectation,
    whatever the detection efficiency. Without ``fixed_nph`` the identity has
    no prediction and a warning is issued.
    """
    est = estimate_g2(cmap)
    w = cmap.n1[:, None].astype(float) * cmap.n2[None, :]
    lhs = float(np.nansum(w * est.g2))
    rhs = float(w.sum())
    rel_dev = lhs / rhs - 1 if rhs > 0 else math.nan
    report = SumRuleReport(lhs, rhs, rel_dev, fixed_nph)
    if fixed_nph is None:
        warnings.warn("sum rule only holds for a fixed photon number per repetition; "
                      "no fixed_nph given", UserWarning, stacklevel=2)
        return report
    if fixed_nph < 1:
        raise ValueError("fixed_nph must be >= 1")
    report.expected_rel_dev = -1.0 / fixed_nph
    total_nc, s1, s2 = cmap.nc.sum(), cmap.n1.sum(), cmap.n2.sum()
    if total_nc > 0:
        report.sigma_rel = float(math.sqrt(1 / total_nc + 1 / s1 + 1 / s2))
        tol = 3 * report.sigma_rel + 1e-12
        report.holds = bool(abs(rel_dev - report.expected_rel_dev) <= tol)
    elif fixed_nph == 1:
        report.holds = True
    return report


def bootstrap_g2(data: TimeTagData, spec: BinningSpec, n_boot: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Standard deviation of ``estimate_g2`` over repetition resamples.

    Slow verification mode for the Poisson error bars; NaN where a bin is
    undefined in more than half of the resamples.
    """
    R = data.n_repetitions
    nb = spec.n_bins
    (rep1, b1), (rep2, b2) = _clicks(data, spec)
    i, j = _cross_pairs(rep1, rep2)
    pair_rep, pair_bin = rep1[i], b1[i] * nb + b2[j]
    samples = np.empty((n_boot, nb, nb))
    for s in range(n_boot):
        weight = np.bincount(rng.integers(0, R, R), minlength=R).astype(float)
        n1 = np.bincount(b1, weights=weight[rep1], minlength=nb)
        n2 = np.bincount(b2, weights=weight[rep2], minlength=nb)
        nc = np.bincount(pair_bin, weights=weight[pair_rep], minlength=nb * nb)
        samples[s] = _ratio(nc.reshape(nb, nb), n1[:, None], n2[None, :], R)[0]
    defined = np.isfinite(samples).sum(axis=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sd = np.nanstd(samples, axis=0, ddof=1)
    return np.where(defined > n_boot / 2, sd, np.nan)
