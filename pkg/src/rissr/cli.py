"""Experiment driver and command line interface.

Subcommands (all take --config <json>, --seed <int>, --out <csv>,
--threads <n>):

    sweep        rate-vs-SNR sweep over schemes, M values, and trials
    pso-trace    per-iteration best-rate trace of one swarm run
    sdp-bound    per-trial upper bound / feasible rate / iterations / rank gap
    oracle       exhaustive-search phases and rate for one tiny instance
    convergence  swarm convergence curves for several mu values

`rissr --print-defaults` prints the built-in configuration as JSON.
Every random quantity derives from the master seed through per-task
sub-streams, so output bytes depend only on (config, seed), not on
execution order or thread count.  All surface-assisted schemes within one
(M, SNR, trial) tuple see the identical channel realization; the
no-surface baseline redraws its channels with the inter-relay link
switched to Rayleigh.
"""

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from itertools import product

import numpy as np

from .baselines import OracleConfig, brute_force_search, rate_ris_only, rate_sr_no_ris
from .pso import PsoParams, run_pso
from .rng import spawn_rng, spawn_seed
from .scenario import ConfigError, Scenario, sample_realization
from .sdp import SdpSettings, SolverError, run_algorithm1, solve_sdp
from .sinr import build_quadratics

SCHEMES = ("sdp_upper", "pso", "sr_no_ris", "ris_only", "oracle")
_SCHEME_IDX = {s: i for i, s in enumerate(SCHEMES)}

# Sub-stream tags; scheme-private streams start at 10 + scheme index.
_ST_CHANNEL = 0
_ST_CHANNEL_NORIS = 1
_ST_CONV_CHANNEL = 4
_ST_CONV_PSO = 5


class AggregationError(ValueError):
    """Sweep rows do not cover the full (scheme, M, snr, trial) grid."""


@dataclass
class ConvergenceSettings:
    snr_db: float = 50.0
    N: int = 50
    mu_list: tuple = (np.pi / 8.0, np.pi)

    def __post_init__(self):
        if self.N < 3:
            raise ValueError("N: must be >= 3")
        if len(self.mu_list) == 0:
            raise ValueError("mu_list: must not be empty")
        if any(not (0.0 < m <= np.pi) for m in self.mu_list):
            raise ValueError("mu_list: entries must be in (0, pi]")
        self.mu_list = tuple(float(m) for m in self.mu_list)


@dataclass
class SweepConfig:
    scenario: Scenario = field(default_factory=Scenario)
    snr_grid_db: tuple = tuple(float(s) for s in range(0, 65, 5))
    m_list: tuple = (16, 32)
    trials: int = 200
    schemes: tuple = ("sdp_upper", "pso", "sr_no_ris", "ris_only")
    pso: PsoParams = field(default_factory=PsoParams)
    sdp: SdpSettings = field(default_factory=SdpSettings)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    convergence: ConvergenceSettings = field(default_factory=ConvergenceSettings)
    seed: int = 42

    def __post_init__(self):
        if len(self.snr_grid_db) == 0 or any(not math.isfinite(s) for s in self.snr_grid_db):
            raise ConfigError("snr_grid_db: must be a non-empty list of finite values")
        self.snr_grid_db = tuple(float(s) for s in self.snr_grid_db)
        if len(self.m_list) == 0 or any(int(m) != m or m < 1 for m in self.m_list):
            raise ConfigError("m_list: must be a non-empty list of integers >= 1")
        self.m_list = tuple(int(m) for m in self.m_list)
        if self.trials < 1:
            raise ConfigError("trials: must be >= 1")
        if len(self.schemes) == 0:
            raise ConfigError("schemes: must not be empty")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"schemes: unknown scheme(s) {bad}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ConfigError("schemes: duplicates not allowed")
        self.schemes = tuple(self.schemes)
        if self.seed < 0:
            raise ConfigError("seed: must be >= 0")
        if "oracle" in self.schemes:
            worst = 2 * max(self.m_list)
            if worst > self.oracle.max_elements:
                raise ConfigError(
                    f"schemes: oracle infeasible, 2M = {worst} exceeds "
                    f"oracle.max_elements = {self.oracle.max_elements}")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kwargs = {}
        sections = {
            "scenario": (Scenario.from_dict, None),
            "pso": (None, PsoParams),
            "sdp": (None, SdpSettings),
            "oracle": (None, OracleConfig),
            "convergence": (None, ConvergenceSettings),
        }
        for name, (builder, klass) in sections.items():
            if name not in d:
                continue
            sub = d.pop(name)
            try:
                if builder is not None:
                    kwargs[name] = builder(sub)
                else:
                    fields = set(klass.__dataclass_fields__)
                    unknown = set(sub) - fields
                    if unknown:
                        raise ConfigError(f"unknown field(s) {sorted(unknown)}")
                    kwargs[name] = klass(**sub)
            except (ConfigError, ValueError) as e:
                raise ConfigError(f"{name}.{e}") from None
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown field(s) {sorted(unknown)}")
        kwargs.update(d)
        return cls(**kwargs)

    def to_dict(self):
        return {
            "scenario": self.scenario.to_dict(),
            "snr_grid_db": list(self.snr_grid_db),
            "m_list": list(self.m_list),
            "trials": self.trials,
            "schemes": list(self.schemes),
            "pso": {"N": self.pso.N, "T": self.pso.T, "mu": self.pso.mu,
                    "w1": self.pso.w1, "w2": self.pso.w2, "seed": self.pso.seed},
            "sdp": {"epsilon": self.sdp.epsilon, "max_outer": self.sdp.max_outer,
                    "newton_tol": self.sdp.newton_tol, "gap_tol": self.sdp.gap_tol,
                    "num_randomizations": self.sdp.num_randomizations},
            "oracle": {"levels": self.oracle.levels,
                       "max_elements": self.oracle.max_elements},
            "convergence": {"snr_db": self.convergence.snr_db,
                            "N": self.convergence.N,
                            "mu_list": list(self.convergence.mu_list)},
            "seed": self.seed,
        }


@dataclass
class SweepRow:
    scheme: str
    M: int
    snr_db: float
    trial_index: int
    rate_bits: float
    aux: object       # scheme-dependent extra (iterations / best fitness), '' if none
    seed_used: int


def load_config(path=None):
    if path is None:
        return SweepConfig()
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return SweepConfig.from_dict(raw)


def _point_scenario(cfg, m, snr_db):
    return replace(cfg.scenario, M=m).with_snr_db(snr_db)


def _run_point(cfg, key):
    """All schemes for one (m_index, snr_index, trial) tuple."""
    mi, si, trial = key
    m = cfg.m_list[mi]
    snr_db = cfg.snr_grid_db[si]
    scn = _point_scenario(cfg, m, snr_db)
    real = None
    if any(s != "sr_no_ris" for s in cfg.schemes):
        real = sample_realization(scn, spawn_rng(cfg.seed, _ST_CHANNEL, mi, si, trial))
    rows = []
    for scheme in cfg.schemes:
        sub = spawn_seed(cfg.seed, 10 + _SCHEME_IDX[scheme], mi, si, trial)
        if scheme == "pso":
            params = replace(cfg.pso, seed=sub)
            run = run_pso(real, scn.p_s, scn.p_r2, scn.sigma2, params)
            rate, aux = run.best_rate, run.best_fitness
        elif scheme == "sdp_upper":
            res = run_algorithm1(build_quadratics(real), scn.p_s, scn.p_r2,
                                 scn.sigma2, np.random.default_rng(sub),
                                 settings=cfg.sdp)
            rate, aux = res.upper_bound_rate, float(res.iterations)
        elif scheme == "sr_no_ris":
            scn_ray = replace(scn, iri_fading="rayleigh")
            real_ray = sample_realization(
                scn_ray, spawn_rng(cfg.seed, _ST_CHANNEL_NORIS, mi, si, trial))
            rate, aux = rate_sr_no_ris(real_ray, scn.p_s, scn.p_r2, scn.sigma2), ""
        elif scheme == "ris_only":
            rate, aux = rate_ris_only(real, scn.p, scn.sigma2), ""
        elif scheme == "oracle":
            _, rate = brute_force_search(real, scn.p_s, scn.p_r2, scn.sigma2,
                                         config=cfg.oracle)
            aux = ""
        rows.append(SweepRow(scheme, m, snr_db, trial, rate, aux, sub))
    return rows


def run_sweep(cfg, threads=1):
    """All rows of the configured sweep, in canonical order."""
    keys = list(product(range(len(cfg.m_list)), range(len(cfg.snr_grid_db)),
                        range(cfg.trials)))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            groups = list(ex.map(partial(_run_point, cfg), keys, chunksize=4))
    else:
        groups = [_run_point(cfg, k) for k in keys]
    return [row for group in groups for row in group]


def run_convergence(cfg, m_list=None, mu_list=None):
    """Mean best-so-far rate per iteration, per (M, mu).

    Fixed SNR and swarm size from cfg.convergence; each trial reuses one
    channel realization across all mu values so curves are comparable.
    Returns rows (M, mu, t, mean_best_rate).
    """
    m_list = list(m_list if m_list is not None else cfg.m_list)
    mu_list = list(mu_list if mu_list is not None else cfg.convergence.mu_list)
    rows = []
    for mi, m in enumerate(m_list):
        scn = _point_scenario(cfg, m, cfg.convergence.snr_db)
        reals = [sample_realization(scn, spawn_rng(cfg.seed, _ST_CONV_CHANNEL, mi, tr))
                 for tr in range(cfg.trials)]
        for ui, mu in enumerate(mu_list):
            traces = []
            for tr in range(cfg.trials):
                params = replace(cfg.pso, N=cfg.convergence.N, mu=mu,
                                 seed=spawn_seed(cfg.seed, _ST_CONV_PSO, mi, ui, tr))
                traces.append(run_pso(reals[tr], scn.p_s, scn.p_r2, scn.sigma2,
                                      params).trace_rate)
            mean = np.mean(np.stack(traces), axis=0)
            rows.extend((m, mu, t, float(r)) for t, r in enumerate(mean))
    return rows


def emit_plotdata(rows):
    """Aggregate sweep rows to (scheme, M, snr_db, mean_rate, stderr).

    Every (scheme, M, snr) cell must hold the same full set of trial
    indices; anything missing raises AggregationError naming the gaps.
    """
    trials = max(r.trial_index for r in rows) + 1
    cells = {}
    for r in rows:
        cells.setdefault((r.scheme, r.M, r.snr_db), {})[r.trial_index] = r.rate_bits
    schemes = sorted({r.scheme for r in rows}, key=lambda s: _SCHEME_IDX[s])
    ms = sorted({r.M for r in rows})
    snrs = sorted({r.snr_db for r in rows})
    missing = []
    for s, m, snr in product(schemes, ms, snrs):
        got = cells.get((s, m, snr), {})
        missing.extend((s, m, snr, t) for t in range(trials) if t not in got)
    if missing:
        shown = ", ".join(map(str, missing[:8]))
        more = "" if len(missing) <= 8 else f" and {len(missing) - 8} more"
        raise AggregationError(f"missing tuples: {shown}{more}")
    agg = []
    for m in ms:
        for snr in snrs:
            for s in schemes:
                vals = np.array([cells[(s, m, snr)][t] for t in range(trials)])
                stderr = float(np.std(vals, ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
                agg.append((s, m, snr, float(np.mean(vals)), stderr))
    return agg


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".6g")


def _write_csv(fh, header, rows):
    fh.write(",".join(header) + "\n")
    for row in rows:
        fh.write(",".join(_fmt(c) for c in row) + "\n")


def write_rows(rows, fh):
    _write_csv(fh, ("scheme", "M", "snr_db", "trial_index", "rate_bits", "aux", "seed_used"),
               [(r.scheme, r.M, r.snr_db, r.trial_index, r.rate_bits, r.aux, r.seed_used)
                for r in rows])


def write_aggregate(agg, fh):
    _write_csv(fh, ("scheme", "M", "snr_db", "mean_rate", "stderr"), agg)


def _cmd_sweep(cfg, args, out):
    rows = run_sweep(cfg, threads=args.threads)
    write_rows(rows, out)
    if args.agg_out:
        with open(args.agg_out, "w", newline="") as fh:
            write_aggregate(emit_plotdata(rows), fh)


def _cmd_pso_trace(cfg, args, out):
    scn = _point_scenario(cfg, cfg.m_list[0], cfg.snr_grid_db[0])
    real = sample_realization(scn, spawn_rng(cfg.seed, _ST_CHANNEL, 0, 0, 0))
    params = replace(cfg.pso, seed=spawn_seed(cfg.seed, 10 + _SCHEME_IDX["pso"], 0, 0, 0))
    run = run_pso(real, scn.p_s, scn.p_r2, scn.sigma2, params)
    _write_csv(out, ("t", "best_fitness", "best_rate"),
               [(t, run.trace_fitness[t], run.trace_rate[t])
                for t in range(len(run.trace_rate))])


def _cmd_sdp_bound(cfg, args, out):
    scn = _point_scenario(cfg, cfg.m_list[0], cfg.snr_grid_db[0])
    rows = []
    for trial in range(cfg.trials):
        real = sample_realization(scn, spawn_rng(cfg.seed, _ST_CHANNEL, 0, 0, trial))
        sub = spawn_seed(cfg.seed, 10 + _SCHEME_IDX["sdp_upper"], 0, 0, trial)
        res = solve_sdp(real, scn.p_s, scn.p_r2, scn.sigma2,
                        np.random.default_rng(sub), settings=cfg.sdp)
        rows.append((trial, res.upper_bound_rate, res.feasible_rate,
                     res.iterations, res.rank_gap))
    _write_csv(out, ("trial_index", "upper_bound_rate", "feasible_rate",
                     "iterations", "rank_gap"), rows)


def _cmd_oracle(cfg, args, out):
    m = cfg.m_list[0]
    if 2 * m > cfg.oracle.max_elements:
        raise ConfigError(f"m_list: oracle needs 2M <= {cfg.oracle.max_elements}, got 2M = {2 * m}")
    scn = _point_scenario(cfg, m, cfg.snr_grid_db[0])
    real = sample_realization(scn, spawn_rng(cfg.seed, _ST_CHANNEL, 0, 0, 0))
    theta, rate = brute_force_search(real, scn.p_s, scn.p_r2, scn.sigma2,
                                     config=cfg.oracle)
    header = ("rate_best",) + tuple(f"theta_{i}" for i in range(len(theta)))
    _write_csv(out, header, [(rate, *theta)])


def _cmd_convergence(cfg, args, out):
    rows = run_convergence(cfg)
    _write_csv(out, ("M", "mu", "t", "mean_best_rate"), rows)


_COMMANDS = {
    "sweep": _cmd_sweep,
    "pso-trace": _cmd_pso_trace,
    "sdp-bound": _cmd_sdp_bound,
    "oracle": _cmd_oracle,
    "convergence": _cmd_convergence,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="rissr",
        description="Rate experiments for surface-assisted successive relaying.")
    parser.add_argument("--print-defaults", action="store_true",
                        help="print the default configuration as JSON and exit")
    sub = parser.add_subparsers(dest="command")
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", help="output CSV path (default stdout)")
        p.add_argument("--threads", type=int, default=1)
        if name == "sweep":
            p.add_argument("--agg-out", help="also write aggregated means/stderr here")
    args = parser.parse_args(argv)
    if args.print_defaults:
        json.dump(SweepConfig().to_dict(), sys.stdout, indent=2)
        sys.stdout.write("\n")
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.out:
            with open(args.out, "w", newline="") as fh:
                _COMMANDS[args.command](cfg, args, fh)
        else:
            _COMMANDS[args.command](cfg, args, sys.stdout)
    except (ConfigError, AggregationError, SolverError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
