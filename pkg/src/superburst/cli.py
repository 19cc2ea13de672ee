"""``superburst`` command-line entry point.

Subcommands: ``simulate-dicke``, ``simulate-obe``, ``generate``, ``analyze``,
``compare``. Each reads a flat config file (``--config``) plus ``--set
key=value`` overrides, computes everything in memory and only then writes its
output files.

Exit codes: 0 success, 2 config error, 3 input-data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .compare import summarize, zscores
from .config import ConfigError, RunConfig, load_config
from .dicke import (DickeState, SimConfig, build_operators, effective_atom_number,
                    emission_rates, evolve_populations, g2_curve, g2_two_time)
from .hbt import BinningSpec, accumulate, bootstrap_g2, diagonal_g2, estimate_g2, sum_rule_check
from .integrate import IntegrationError
from .obe import PulseProfile, TabulatedPulse, excited_population, solve_obe
from .photon_mc import DetectorModel, DickeSource, IndependentSource, generate_dataset
from .timetags import TimeTagFormatError, atomic_write_text, format_timetags, read_timetags
from .units import from_ns

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class InputDataError(RuntimeError):
    pass


def _num(x: float) -> str:
    return "nan" if not math.isfinite(x) else f"{x:.10g}"


def _csv(header: str, columns, rows) -> str:
    lines = [header, ",".join(columns)]
    lines.extend(",".join(_num(float(v)) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _require(cfg: RunConfig, key: str):
    value = cfg[key]
    if value is None:
        raise ConfigError(f"{key} is required for this subcommand")
    return value


def _grid_ns(t_max: float, dt: float) -> np.ndarray:
    n = int(math.floor(t_max / dt + 1e-9))
    return dt * np.arange(n + 1)


# --------------------------------------------------------------------- dicke

def _n_eff(cfg: RunConfig) -> int:
    if cfg["dicke.n_eff"] is not None:
        return cfg["dicke.n_eff"]
    if cfg["dicke.n_physical"] is not None or cfg["dicke.mu"] is not None:
        if cfg["dicke.n_physical"] is None or cfg["dicke.mu"] is None:
            raise ConfigError("dicke.n_physical and dicke.mu must be given together")
        return effective_atom_number(cfg["dicke.n_physical"], cfg["dicke.mu"])
    return 6


def _initial_populations(cfg: RunConfig, n_eff: int) -> np.ndarray:
    p = np.zeros(n_eff + 1)
    kind = cfg["dicke.initial"]
    if kind == "inverted":
        p[-1] = 1.0
    elif kind == "rung":
        k = _require(cfg, "dicke.rung")
        if k > n_eff:
            raise ConfigError(f"dicke.rung: {k} exceeds n_eff={n_eff}")
        p[k] = 1.0
    else:
        pops = np.array(_require(cfg, "dicke.populations"))
        if pops.size != n_eff + 1 or abs(pops.sum() - 1) > 1e-9:
            raise ConfigError(
                f"dicke.populations: need {n_eff + 1} entries summing to 1")
        p = pops
    return p


def _sim_config(cfg: RunConfig, n_eff: int, t_grid) -> SimConfig:
    try:
        return SimConfig.for_effective(
            n_eff, gamma_rad_s=cfg["gamma_rad_s"], t_grid=t_grid,
            max_step=cfg["dicke.max_step"], trace_tol=cfg["dicke.trace_tol"],
            positivity_tol=cfg["dicke.positivity_tol"], seed=cfg.seed)
    except ValueError as exc:
        raise ConfigError(f"dicke: {exc}") from None


def cmd_simulate_dicke(cfg: RunConfig) -> dict[Path, str]:
    out = Path(_require(cfg, "io.output"))
    n_eff = _n_eff(cfg)
    p0 = _initial_populations(cfg, n_eff)
    gamma = cfg["gamma_rad_s"]
    t_ns = _grid_ns(cfg["dicke.t_max_ns"], cfg["dicke.dt_ns"])
    sim = _sim_config(cfg, n_eff, from_ns(t_ns, gamma))
    ops = build_operators(sim.basis())

    P = evolve_populations(p0, ops, sim.t_grid, max_step=sim.step, check_convergence=True)
    states = [DickeState(sim.basis(), np.diag(p)) for p in P]
    rate, g2 = emission_rates(states, ops), g2_curve(states, ops)
    files = {out / "dicke_curve.csv": _csv(
        f"#dicke-curve-v1 n_eff={n_eff} gamma_rad_s={gamma!r}",
        ["time_ns", "gamma_in_units_of_Gamma", "g2"], zip(t_ns, rate, g2))}

    t1_list = cfg["dicke.two_time_t1_ns"]
    if t1_list:
        rows = []
        for t1 in t1_list:
            s1 = from_ns(t1, gamma)
            pt1 = evolve_populations(p0, ops, [0.0, s1] if s1 > 0 else [0.0],
                                     max_step=sim.step)[-1]
            state = DickeState(sim.basis(), np.diag(pt1), s1)
            later = t_ns[t_ns >= t1]
            try:
                g = g2_two_time(state, ops, from_ns(later - t1, gamma), max_step=sim.step)
            except ValueError as exc:
                raise ConfigError(f"dicke.two_time_t1_ns: t1={t1}: {exc}") from None
            rows.extend((t1, t2, v) for t2, v in zip(later, g))
        files[out / "dicke_two_time.csv"] = _csv(
            f"#dicke-two-time-v1 n_eff={n_eff} gamma_rad_s={gamma!r}",
            ["t1_ns", "t2_ns", "g2"], rows)
    return files


# ----------------------------------------------------------------------- obe

def _pulse(cfg: RunConfig):
    if cfg["obe.pulse_file"] is not None:
        try:
            return TabulatedPulse.from_file(cfg["obe.pulse_file"], cfg["obe.detuning"])
        except (OSError, ValueError) as exc:
            raise InputDataError(f"obe.pulse_file: {exc}") from None
    try:
        return PulseProfile(cfg["obe.omega_peak"], cfg["obe.t_on_ns"], cfg["obe.t_off_ns"],
                            cfg["obe.edge_ns"], cfg["obe.detuning"])
    except ValueError as exc:
        raise ConfigError(f"obe: {exc}") from None


def cmd_simulate_obe(cfg: RunConfig) -> dict[Path, str]:
    out = Path(_require(cfg, "io.output"))
    pulse = _pulse(cfg)
    gamma = cfg["gamma_rad_s"]
    t_ns = _grid_ns(cfg["obe.t_max_ns"], cfg["obe.dt_ns"])
    kw = dict(gamma_rad_s=gamma, rho_ee0=cfg["obe.rho_ee0"], max_step=cfg["obe.max_step"])
    states = solve_obe(pulse, t_ns, **kw)
    ee = excited_population(states)
    n = cfg["obe.n_atoms"]
    end = pulse.end_ns
    at_end = (solve_obe(pulse, [t_ns[0], end], **kw)[-1].rho_ee
              if end > t_ns[0] else ee[0])
    curve = _csv(f"#obe-curve-v1 n_atoms={n} gamma_rad_s={gamma!r}",
                 ["time_ns", "omega_over_gamma", "rho_ee", "rate_in_units_of_Gamma"],
                 zip(t_ns, pulse.omega(t_ns), ee, n * ee))
    summary = (f"pulse_end_ns={_num(end)}\nrho_ee_at_pulse_end={_num(at_end)}\n"
               f"rho_ee_max={_num(float(ee.max()))}\n")
    return {out / "obe_curve.csv": curve, out / "obe_summary.txt": summary}


# ------------------------------------------------------------------ generate

def _source(cfg: RunConfig):
    if cfg["generate.source"] == "dicke":
        n_eff = _n_eff(cfg)
        p = _initial_populations(cfg, n_eff)
        return DickeSource(n_eff, tuple(p.tolist()))
    n_atoms = _require(cfg, "generate.n_atoms")
    prob = cfg["generate.excitation_probability"]
    if prob is None:
        pulse = _pulse(cfg)
        return IndependentSource.from_pulse(pulse, n_atoms, gamma_rad_s=cfg["gamma_rad_s"],
                                            poisson=cfg["generate.poisson"])
    return IndependentSource(n_atoms, prob, cfg["generate.poisson"])


def _detector(cfg: RunConfig) -> DetectorModel:
    return DetectorModel(cfg["detector.efficiency"], cfg["detector.split_ratio"],
                         cfg["detector.jitter_ns"], cfg["detector.dead_time_ns"])


def cmd_generate(cfg: RunConfig) -> dict[Path, str]:
    out = Path(_require(cfg, "io.output"))
    data = generate_dataset(_source(cfg), cfg["generate.n_repetitions"], _detector(cfg),
                            seed=cfg.seed, gamma_rad_s=cfg["gamma_rad_s"],
                            t_max_ns=cfg["generate.t_max_ns"], threads=cfg["threads"])
    c1, c2 = data.counts_per_channel()
    R = data.n_repetitions
    print(f"repetitions={R} clicks_ch1={c1} clicks_ch2={c2} "
          f"per_shot_ch1={c1 / R:.4g} per_shot_ch2={c2 / R:.4g} "
          f"fixed_nph={data.fixed_nph if data.fixed_nph is not None else 'none'}")
    return {out: format_timetags(data.sorted())}


# ------------------------------------------------------------------- analyze

def _binning(cfg: RunConfig) -> BinningSpec:
    try:
        return BinningSpec(cfg["analyze.t_start_ns"], cfg["analyze.t_end_ns"],
                           cfg["analyze.bin_ns"], cfg["analyze.integration_bins"])
    except ValueError as exc:
        raise ConfigError(f"analyze: {exc}") from None


def cmd_analyze(cfg: RunConfig) -> dict[Path, str]:
    path = _require(cfg, "io.input")
    out = Path(_require(cfg, "io.output"))
    spec = _binning(cfg)
    try:
        data = read_timetags(path, cfg["analyze.n_repetitions"])
    except OSError as exc:
        raise InputDataError(f"cannot read {path}: {exc.strerror}") from None
    except TimeTagFormatError as exc:
        raise InputDataError(f"{path}: {exc}") from None
    if data.n_repetitions < 1:
        raise InputDataError(f"{path}: no repetitions in dataset")
    cmap = accumulate(data, spec, threads=cfg["threads"])
    est = estimate_g2(cmap)
    diag = diagonal_g2(cmap)
    c = spec.centers
    ii, jj = np.meshgrid(np.arange(c.size), np.arange(c.size), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    rows = zip(c[ii], c[jj], est.g2[ii, jj], est.sigma[ii, jj], cmap.nc[ii, jj],
               cmap.n1[ii], cmap.n2[jj])
    files = {
        out / "g2map.csv": _csv(
            f"#g2map-v1 n_repetitions={cmap.n_repetitions} bin_ns={spec.bin_ns!r}",
            ["t1_ns", "t2_ns", "g2", "sigma", "nc", "n1", "n2"], rows),
        out / "g2diag.csv": _csv(
            f"#g2diag-v1 halfwidth_ns={diag.halfwidth_ns!r}", ["t_ns", "g2", "sigma"],
            zip(diag.t_ns, diag.g2, diag.sigma)),
    }
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = sum_rule_check(cmap, cfg["analyze.fixed_nph"])
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    files[out / "sumrule.txt"] = report.format()
    if cfg["analyze.bootstrap"] > 0:
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0xB007,)))
        sd = bootstrap_g2(data, spec, cfg["analyze.bootstrap"], rng)
        files[out / "g2map_bootstrap.csv"] = _csv(
            "#g2map-bootstrap-v1", ["t1_ns", "t2_ns", "sigma_bootstrap"],
            zip(c[ii], c[jj], sd[ii, jj]))
    return files


# ------------------------------------------------------------------- compare

def _read_table(path):
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InputDataError(f"cannot read {path}: {exc.strerror}") from None
    if len(lines) < 2 or not lines[0].startswith("#"):
        raise InputDataError(f"{path}: missing format header")
    kind = lines[0].split()[0][1:]
    columns = lines[1].split(",")
    try:
        body = [[float(x) for x in line.split(",")] for line in lines[2:] if line.strip()]
    except ValueError as exc:
        raise InputDataError(f"{path}: {exc}") from None
    arr = np.array(body, dtype=float).reshape(-1, len(columns))
    return kind, {name: arr[:, i] for i, name in enumerate(columns)}


def _interp(x, xs, ys):
    ok = np.isfinite(ys)
    if ok.sum() < 2:
        return np.full(np.shape(x), np.nan)
    y = np.interp(x, xs[ok], ys[ok], left=np.nan, right=np.nan)
    return np.where((x >= xs[ok][0]) & (x <= xs[ok][-1]), y, np.nan)


def cmd_compare(cfg: RunConfig, model_files, analysis_files) -> dict[Path, str]:
    out = Path(_require(cfg, "io.output"))
    if not model_files or not analysis_files:
        raise ConfigError("compare needs at least one --model and one --analysis file")
    models = [_read_table(p) for p in model_files]
    analyses = [_read_table(p) for p in analysis_files]
    rows, zs = [], []
    for kind, a in analyses:
        if kind == "g2diag-v1":
            for mkind, m in models:
                if mkind == "dicke-curve-v1":
                    model = _interp(a["t_ns"], m["time_ns"], m["g2"])
                    z = zscores(a["g2"], a["sigma"], model)
                    rows.extend(zip(np.full(z.size, np.nan), a["t_ns"], a["g2"],
                                    a["sigma"], model, z))
                    zs.append(z)
        elif kind == "g2map-v1":
            for mkind, m in models:
                if mkind != "dicke-two-time-v1":
                    continue
                for t1 in np.unique(m["t1_ns"]):
                    centers = np.unique(a["t1_ns"])
                    width = centers[1] - centers[0] if centers.size > 1 else np.inf
                    inside = np.abs(centers - t1) <= width / 2
                    if not inside.any():
                        continue
                    row_t1 = centers[inside][0]
                    sel = (a["t1_ns"] == row_t1) & (a["t2_ns"] >= t1)
                    ms = m["t1_ns"] == t1
                    model = _interp(a["t2_ns"][sel], m["t2_ns"][ms], m["g2"][ms])
                    z = zscores(a["g2"][sel], a["sigma"][sel], model)
                    rows.extend(zip(np.full(z.size, t1), a["t2_ns"][sel], a["g2"][sel],
                                    a["sigma"][sel], model, z))
                    zs.append(z)
        else:
            raise InputDataError(f"unsupported analysis file kind {kind!r}")
    if not zs:
        raise InputDataError("no comparable model/analysis pairs found")
    report = summarize(np.concatenate(zs))
    return {
        out / "comparison.csv": _csv("#comparison-v1",
                                     ["t1_ns", "t_ns", "g2_data", "sigma", "g2_model", "z"],
                                     rows),
        out / "comparison.txt": report.format(),
    }


# ---------------------------------------------------------------------- main

def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="superburst", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate-dicke", "simulate-obe", "generate", "analyze", "compare"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable; wins over --config)")
        p.add_argument("--seed", help="random seed (fallback: $SUPERBURST_SEED)")
        p.add_argument("--threads", help="worker threads (default 1)")
        p.add_argument("--output", "-o", help="output directory (file for generate)")
        if name == "analyze":
            p.add_argument("--input", "-i", help="#timetag-v1 file")
        if name == "compare":
            p.add_argument("--model", action="append", default=[],
                           help="dicke_curve.csv or dicke_two_time.csv (repeatable)")
            p.add_argument("--analysis", action="append", default=[],
                           help="g2diag.csv or g2map.csv (repeatable)")
    return parser


COMMANDS = {
    "simulate-dicke": cmd_simulate_dicke,
    "simulate-obe": cmd_simulate_obe,
    "generate": cmd_generate,
    "analyze": cmd_analyze,
}


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    overrides = list(args.set)
    for flag, key in (("seed", "seed"), ("threads", "threads"), ("output", "io.output"),
                      ("input", "io.input")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides.append(f"{key}={value}")
    try:
        cfg = load_config(args.config, overrides)
        cfg.seed  # validate the environment fallback up front
        if args.command == "compare":
            files = cmd_compare(cfg, args.model, args.analysis)
        else:
            files = COMMANDS[args.command](cfg)
        for path in files:
            path.parent.mkdir(parents=True, exist_ok=True)
        for path, text in files.items():
            atomic_write_text(path, text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputDataError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except IntegrationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))
