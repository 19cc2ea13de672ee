"""Model-versus-data comparison of g2 curves."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dicke import CollectiveOperators, DickeState, two_time_correlation_map
from .units import DEFAULT_GAMMA_RAD_S, ns_per_lifetime

#: Minimum fraction of bins within 2 sigma for a comparison to pass.
PASS_FRACTION = 0.9


def binned_model_g2(state: DickeState, ops: CollectiveOperators, edges_ns, *,
                    gamma_rad_s: float = DEFAULT_GAMMA_RAD_S, subdivisions: int = 20):
    """Model g2 on the same bins as the estimator.

    Expected coincidences and singles are integrals of ``G2(t1, t2)`` and
    ``gamma(t)`` over the bins, and efficiency and split ratio cancel in the
    ratio, so the binned prediction is ``iint G2 / (int gamma int gamma)``.
    ``edges_ns`` must be uniform and measured from ``state``.

    Returns
    -------
    g2 : (n, n) array over bin pairs, NaN where the model emits nothing.
    """
    edges = np.asarray(edges_ns, dtype=float)
    width = np.diff(edges)
    if edges[0] < 0 or not np.allclose(width, width[0]):
        raise ValueError("edges must be uniform and non-negative")
    n = width.size
    step = width[0] / subdivisions
    t_ns = edges[0] + step * (np.arange(n * subdivisions) + 0.5)
    G2, gamma = two_time_correlation_map(state, ops, t_ns / ns_per_lifetime(gamma_rad_s))
    Gb = G2.reshape(n, subdivisions, n, subdivisions).sum(axis=(1, 3))
    gb = gamma.reshape(n, subdivisions).sum(axis=1)
    denom = gb[:, None] * gb[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(denom > 1e-300, Gb / denom, np.nan)


@dataclass
class ComparisonReport:
    n_bins: int
    frac_within_2sigma: float
    chi2_per_dof: float
    max_abs_z: float
    mean_z: float

    @property
    def passed(self) -> bool:
        return self.n_bins > 0 and self.frac_within_2sigma >= PASS_FRACTION

    def format(self) -> str:
        return (f"n_bins={self.n_bins}\nfrac_within_2sigma={self.frac_within_2sigma:.6g}\n"
                f"chi2_per_dof={self.chi2_per_dof:.6g}\nmax_abs_z={self.max_abs_z:.6g}\n"
                f"mean_z={self.mean_z:.6g}\npass={str(self.passed).lower()}\n")


def zscores(g2_data, sigma, g2_model) -> np.ndarray:
    """Per-bin ``(data - model) / sigma``; NaN where any input is undefined."""
    d, s, m = (np.asarray(a, dtype=float) for a in (g2_data, sigma, g2_model))
    ok = np.isfinite(d) & np.isfinite(s) & np.isfinite(m) & (s > 0)
    z = np.full(np.broadcast(d, s, m).shape, np.nan)
    z[ok] = ((d - m) / s)[ok] if z.ndim else (d - m) / s
    return z


def summarize(z) -> ComparisonReport:
    z = np.asarray(z, dtype=float).ravel()
    z = z[np.isfinite(z)]
    if z.size == 0:
        return ComparisonReport(0, math.nan, math.nan, math.nan, math.nan)
    return ComparisonReport(int(z.size), float(np.mean(np.abs(z) <= 2)),
                            float(np.mean(z**2)), float(np.max(np.abs(z))), float(np.mean(z)))
