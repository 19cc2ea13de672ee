import math
import warnings

import numpy as np
import pytest

from oracles import pair_count
from superburst.hbt import (
    BinningSpec, CorrelationMap, accumulate, bootstrap_g2, coarsen, diagonal_g2,
    estimate_g2, sum_rule_check, weighted_g2_averages,
)
from superburst.photon_mc import DetectorModel, DickeSource, IndependentSource, generate_dataset
from superburst.timetags import TimeTagData


def tags(rows, n_rep=None, origin=0.0):
    rows = list(rows)
    rep = [r for r, _, _ in rows]
    n_rep = n_rep if n_rep is not None else (max(rep) + 1 if rep else 0)
    return TimeTagData(rep, [c for _, c, _ in rows], [t for _, _, t in rows], n_rep, origin)


def poisson_fixture(n_rep, rate_per_ns, window_ns, rng):
    """Independent Poisson clicks, uniform in time, on both channels."""
    rows_r, rows_c, rows_t = [], [], []
    for ch in (1, 2):
        k = rng.poisson(rate_per_ns * window_ns, n_rep)
        rows_r.append(np.repeat(np.arange(n_rep), k))
        rows_c.append(np.full(k.sum(), ch))
        rows_t.append(rng.uniform(0, window_ns, k.sum()))
    data = TimeTagData(np.concatenate(rows_r), np.concatenate(rows_c),
                       np.concatenate(rows_t), n_rep)
    return data.sorted()


SPEC = BinningSpec(0.0, 10.0, 1.0, 2)


# binning spec

def test_binning_spec_geometry():
    s = BinningSpec(2.0, 12.0, 0.5, 4)
    assert s.n_bins == 20
    assert np.allclose(s.edges[[0, -1]], [2.0, 12.0])
    assert s.centers[0] == 2.25
    assert s.bin_index([1.9, 2.0, 2.49, 11.99, 12.0]).tolist() == [-1, 0, 0, 19, -1]


@pytest.mark.parametrize("kw", [
    {"bin_ns": 0}, {"t_end_ns": 0.0}, {"bin_ns": 3.0}, {"integration_bins": 0},
    {"integration_bins": 11}, {"integration_bins": 1.5},
])
def test_binning_spec_validation(kw):
    base = dict(t_start_ns=0.0, t_end_ns=10.0, bin_ns=1.0, integration_bins=2)
    base.update(kw)
    with pytest.raises(ValueError):
        BinningSpec(**base)


# accumulate

def test_one_click_each_channel_same_bin():
    m = accumulate(tags([(0, 1, 3.2), (0, 2, 3.7)]), SPEC)
    assert m.n1[3] == m.n2[3] == 1 and m.nc[3, 3] == 1
    assert m.nc.sum() == 1 and m.n_repetitions == 1


def test_all_pairs_counted():
    m = accumulate(tags([(0, 1, 2.1), (0, 1, 2.9), (0, 2, 5.5)]), SPEC)
    assert m.nc[2, 5] == 2 and m.nc.sum() == 2


def test_pairs_only_within_repetition_and_cross_channel():
    m = accumulate(tags([(0, 1, 1.0), (0, 1, 2.0), (1, 2, 1.0), (1, 2, 3.0)]), SPEC)
    assert m.nc.sum() == 0
    assert m.n1.sum() == 2 and m.n2.sum() == 2


def test_windowing_excludes_outside_clicks():
    data = tags([(0, 1, 0.5), (0, 2, 10.0), (0, 2, 25.0), (0, 1, 9.99)], origin=0.0)
    m = accumulate(data, SPEC)
    assert m.n1.sum() == 2 and m.n2.sum() == 0 and m.nc.sum() == 0


def test_bin_origin_shifts_window():
    data = tags([(0, 1, 14.5), (0, 2, 15.5)], origin=14.0)
    m = accumulate(data, SPEC)
    assert m.nc[0, 1] == 1


def test_matches_brute_force_oracle():
    data = generate_dataset(DickeSource(6), 3000, DetectorModel(0.5, time_jitter_ns=0.5),
                            seed=2)
    spec = BinningSpec(0.0, 30.0, 1.0, 2)
    m = accumulate(data, spec)
    assert np.array_equal(m.nc, pair_count(data, spec))
    inside = spec.bin_index(data.time_ns) >= 0
    assert m.n1.sum() == np.sum(inside & (data.channel == 1))
    assert m.n2.sum() == np.sum(inside & (data.channel == 2))


def test_shuffled_records_give_identical_counts():
    data = generate_dataset(DickeSource(6), 2000, DetectorModel(0.5), seed=3)
    perm = np.random.default_rng(0).permutation(len(data))
    spec = BinningSpec(0.0, 30.0, 1.0, 2)
    a, b = accumulate(data, spec), accumulate(data.select(perm), spec)
    assert np.array_equal(a.nc, b.nc) and np.array_equal(a.n1, b.n1)


def test_sharded_accumulation_equals_serial():
    data = generate_dataset(DickeSource(6), 10_000, DetectorModel(0.4), seed=4)
    spec = BinningSpec(0.0, 30.0, 1.0, 2)
    serial = accumulate(data, spec)
    sharded = accumulate(data, spec, threads=4, shard_repetitions=1500)
    assert np.array_equal(serial.nc, sharded.nc)
    assert np.array_equal(serial.n1, sharded.n1)
    assert sharded.n_repetitions == serial.n_repetitions


def test_map_addition_and_spec_mismatch():
    a = accumulate(tags([(0, 1, 1.0), (0, 2, 1.0)]), SPEC)
    s = a + a
    assert s.n_repetitions == 2 and s.nc[1, 1] == 2
    other = accumulate(tags([(0, 1, 1.0)]), BinningSpec(0, 10, 0.5, 2))
    with pytest.raises(ValueError):
        a + other


# estimator

def test_estimator_formula_and_nan():
    m = CorrelationMap(np.array([4, 0]), np.array([2, 5]), np.array([[1, 3], [0, 0]]), 10,
                       BinningSpec(0, 2, 1, 1))
    est = estimate_g2(m)
    assert est.g2[0, 0] == pytest.approx(10 * 1 / 8)
    assert est.g2[0, 1] == pytest.approx(10 * 3 / 20)
    assert np.all(np.isnan(est.g2[1])) and np.all(np.isnan(est.sigma[1]))
    assert est.sigma[0, 1] == pytest.approx(est.g2[0, 1] * math.sqrt(1 / 3 + 1 / 4 + 1 / 5))


def test_zero_coincidence_bin_has_finite_error():
    m = CorrelationMap(np.array([5]), np.array([5]), np.array([[0]]), 100, BinningSpec(0, 1, 1, 1))
    est = estimate_g2(m)
    assert est.g2[0, 0] == 0.0
    assert est.sigma[0, 0] == pytest.approx(100 / 25)


def test_poisson_fixture_is_unbiased():
    rng = np.random.default_rng(2024)
    data = poisson_fixture(100_000, 0.02, 100.0, rng)
    m = accumulate(data, BinningSpec(0.0, 100.0, 1.0, 2))
    est = estimate_g2(m)
    g = est.g2[np.isfinite(est.g2)]
    assert g.size >= 10_000
    assert abs(g.mean() - 1.0) < 0.01
    z = (est.g2 - 1) / est.sigma
    assert np.mean(np.abs(z[np.isfinite(z)]) <= 2) > 0.95


def test_single_photon_source_is_antibunched():
    data = generate_dataset(DickeSource(1), 50_000, DetectorModel(1.0), seed=6)
    spec = BinningSpec(0.0, 60.0, 1.0, 2)
    m = accumulate(data, spec)
    assert m.nc.sum() == 0
    diag = diagonal_g2(m, spec)
    defined = np.isfinite(diag.g2)
    assert defined.sum() > 10
    assert np.all(diag.g2[defined] == 0.0)


def test_diagonal_identity_coarsening():
    data = generate_dataset(DickeSource(6), 20_000, DetectorModel(0.2), seed=7)
    spec = BinningSpec(0.0, 30.0, 1.0, 1)
    m = accumulate(data, spec)
    diag = diagonal_g2(m, spec)
    np.testing.assert_array_equal(diag.g2, np.diag(estimate_g2(m).g2))
    np.testing.assert_allclose(diag.t_ns, spec.centers)
    assert diag.halfwidth_ns == 0.5


def test_diagonal_sums_before_dividing():
    m = CorrelationMap(np.array([1, 3]), np.array([2, 2]), np.array([[1, 2], [0, 4]]), 10,
                       BinningSpec(0, 2, 1, 2))
    d = diagonal_g2(m)
    assert d.g2[0] == pytest.approx(10 * 7 / (4 * 4))
    assert d.nc[0] == 7 and d.t_ns[0] == 1.0 and d.halfwidth_ns == 1.0
    ratios = np.diag(estimate_g2(m).g2)
    assert d.g2[0] != pytest.approx(ratios.mean())


def test_coarsen_matches_direct_binning():
    data = generate_dataset(DickeSource(6), 5000, DetectorModel(0.5), seed=8)
    fine = accumulate(data, BinningSpec(0.0, 30.0, 1.0, 1))
    coarse = accumulate(data, BinningSpec(0.0, 30.0, 3.0, 1))
    c = coarsen(fine, 3)
    assert np.array_equal(c.nc, coarse.nc) and c.spec == coarse.spec


def test_channel_swap_transposes():
    data = generate_dataset(DickeSource(6), 20_000, DetectorModel(0.3), seed=9)
    spec = BinningSpec(0.0, 30.0, 1.0, 2)
    a = accumulate(data, spec)
    b = accumulate(data.swap_channels(), spec)
    assert np.array_equal(b.nc, a.nc.T)
    assert np.array_equal(a.transposed().nc, b.nc)
    da, db = diagonal_g2(a, spec), diagonal_g2(b, spec)
    np.testing.assert_allclose(da.g2, db.g2, equal_nan=True)


def test_burst_starts_bunched():
    data = generate_dataset(DickeSource(6), 400_000, DetectorModel(0.1), seed=10)
    spec = BinningSpec(0.0, 40.0, 1.0, 2)
    d = diagonal_g2(accumulate(data, spec), spec)
    assert abs(d.g2[0] - 5 / 3) < 3 * d.sigma[0] + 0.02


def test_efficiency_invariance():
    spec = BinningSpec(0.0, 40.0, 1.0, 4)
    src = DickeSource(6)
    runs = {}
    for eta, reps in [(1.0, 20_000), (0.3, 100_000), (0.05, 1_000_000)]:
        data = generate_dataset(src, reps, DetectorModel(eta), seed=int(eta * 100))
        runs[eta] = diagonal_g2(accumulate(data, spec), spec)
    ref = runs[1.0]
    for eta in (0.3, 0.05):
        d = runs[eta]
        ok = np.isfinite(d.g2) & np.isfinite(ref.g2) & (d.nc > 10) & (ref.nc > 10)
        combined = np.hypot(d.sigma, ref.sigma)
        assert ok.sum() >= 5
        frac = np.mean(np.abs(d.g2 - ref.g2)[ok] <= 2 * combined[ok])
        assert frac >= 0.8


def test_thinning_changes_little():
    data = generate_dataset(DickeSource(6), 300_000, DetectorModel(0.2), seed=11)
    spec = BinningSpec(0.0, 40.0, 1.0, 2)
    a = estimate_g2(accumulate(data, spec))
    b = estimate_g2(accumulate(data.thin(0.5, np.random.default_rng(0)), spec))
    ok = np.isfinite(a.g2) & np.isfinite(b.g2)
    # error bars of the two estimates overlap
    frac = np.mean(np.abs(a.g2 - b.g2)[ok] <= (a.sigma + b.sigma)[ok])
    assert frac >= 0.9


# sum rule

def test_sum_rule_against_pair_count_oracle():
    data = generate_dataset(DickeSource(6), 4000, DetectorModel(1.0), seed=12)
    spec = BinningSpec(0.0, 400.0, 1.0, 2)
    m = accumulate(data, spec)
    rep = sum_rule_check(m, fixed_nph=data.fixed_nph)
    R = data.n_repetitions
    n1 = np.sum(data.channel == 1)
    n2 = np.sum(data.channel == 2)
    assert rep.lhs == pytest.approx(R * pair_count(data, spec).sum(), rel=1e-12)
    # every repetition splits 6 photons: pairs per shot = k1 (6 - k1)
    k1 = np.bincount(data.repetition[data.channel == 1], minlength=R)
    assert rep.lhs == pytest.approx(R * np.sum(k1 * (6 - k1)), rel=1e-12)
    assert rep.rhs == pytest.approx(float(n1) * n2, rel=1e-12)
    assert rep.expected_rel_dev == pytest.approx(-1 / 6)
    assert rep.holds


def test_sum_rule_efficiency_independent():
    data = generate_dataset(DickeSource(6), 200_000, DetectorModel(0.1), seed=13)
    rep = sum_rule_check(accumulate(data, BinningSpec(0.0, 400.0, 2.0, 1)), data.fixed_nph)
    assert rep.holds
    assert abs(rep.rel_dev + 1 / 6) <= 3 * rep.sigma_rel


def test_sum_rule_flags_poisson_photon_number():
    data = generate_dataset(IndependentSource(6, 1.0, poisson=True), 100_000,
                            DetectorModel(0.5), seed=14)
    m = accumulate(data, BinningSpec(0.0, 400.0, 2.0, 1))
    with pytest.warns(UserWarning, match="fixed"):
        rep = sum_rule_check(m)
    assert rep.holds is None and data.fixed_nph is None
    # checking against the nominal photon number fails: shots are not fixed
    assert sum_rule_check(m, fixed_nph=6).holds is False
    assert abs(rep.rel_dev) < 3 * math.sqrt(1 / m.nc.sum() + 1 / m.n1.sum() + 1 / m.n2.sum())


def test_sum_rule_single_pair():
    m = accumulate(tags([(0, 1, 1.0), (0, 2, 4.0)]), SPEC)
    rep = sum_rule_check(m, fixed_nph=2)
    assert rep.lhs == rep.rhs == 1.0


def test_sum_rule_report_format():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        text = sum_rule_check(accumulate(tags([(0, 1, 1.0), (0, 2, 4.0)]), SPEC)).format()
    keys = [line.split("=")[0] for line in text.splitlines()]
    assert keys[:4] == ["lhs", "rhs", "rel_dev", "fixed_nph"]
    assert "fixed_nph=none" in text


def test_bunching_implies_anticorrelation():
    data = generate_dataset(DickeSource(6), 300_000, DetectorModel(0.2), seed=15)
    m = accumulate(data, BinningSpec(0.0, 100.0, 1.0, 1))
    diag, off, total = weighted_g2_averages(m)
    assert diag > 1 and off < 1
    assert total == pytest.approx(5 / 6, abs=0.02)


# bootstrap

@pytest.mark.slow
def test_bootstrap_agrees_with_poisson_errors():
    data = generate_dataset(DickeSource(6), 200_000, DetectorModel(0.1), seed=16)
    spec = BinningSpec(0.0, 20.0, 2.0, 1)
    boot = bootstrap_g2(data, spec, 100, np.random.default_rng(0))
    est = estimate_g2(accumulate(data, spec))
    ok = np.isfinite(boot) & (accumulate(data, spec).nc > 50)
    ratio = np.median(boot[ok] / est.sigma[ok])
    assert 0.8 < ratio < 1.2
