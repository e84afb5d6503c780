"""End-to-end acceptance runs for the whole pipeline.

One test per criterion, in order; each prints a single summary line with
the measured numbers behind the verdict.  Instances derive from fixed
master seeds, so every run checks the same 1,500-odd problem instances.
Heavy intermediate results are memoized at module scope because several
criteria share them; expect a few minutes of total runtime on one core.
"""

import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from rissr.baselines import OracleConfig, brute_force_search
from rissr.cli import SweepConfig, emit_plotdata, main, run_sweep
from rissr.pso import PsoParams, run_pso
from rissr.rng import spawn_rng, spawn_seed
from rissr.scenario import Scenario, sample_realization
from rissr.sdp import SdpSettings, extract_rank_one, run_algorithm1
from rissr.sinr import (
    build_quadratics,
    rate_for_phases,
    sinr_d,
    sinr_r1,
    sinr_trace_form,
    wrap_phase,
)

# tighter outer stop than the production default: at 2M = 2 the relaxation
# is essentially exact, so bound-vs-oracle comparisons need the outer loop
# driven to its fixed point, not just to the 1e-3 working tolerance
TIGHT = SdpSettings(epsilon=1e-7, max_outer=100)

_cache = {}

# every directly driven swarm run routes through _guarded_pso, which
# verifies the position/velocity bounds at every single iteration
_guard = {"runs": 0, "iters": 0, "violations": 0,
          "max_phase": 0.0, "max_speed_ratio": 0.0}


def _memo(key, compute):
    if key not in _cache:
        _cache[key] = compute()
    return _cache[key]


def _lifted(theta):
    v = np.append(np.exp(1j * np.asarray(theta)), 1.0)
    return np.outer(v.conj(), v)


def _guarded_pso(real, p_s, p_r2, sigma2, params):
    mu = params.mu

    def hook(t, state):
        _guard["iters"] += 1
        phase = float(np.max(np.abs(state.F)))
        speed = float(np.max(np.abs(state.X))) / mu
        _guard["max_phase"] = max(_guard["max_phase"], phase)
        _guard["max_speed_ratio"] = max(_guard["max_speed_ratio"], speed)
        if phase > np.pi or speed > 1.0:
            _guard["violations"] += 1

    run = run_pso(real, p_s, p_r2, sigma2, params, iter_hook=hook)
    _guard["runs"] += 1
    return run


def test_c1_direct_and_lifted_sinr_forms_agree():
    t0 = time.perf_counter()
    worst = 0.0
    pairs = 0
    for m in (1, 4, 16):
        for k in range(350):
            rng = spawn_rng(1001, m, k)
            scn = Scenario(M=m).with_snr_db(float(rng.uniform(0.0, 60.0)))
            real = sample_realization(scn, rng)
            theta = rng.uniform(-np.pi, np.pi, 2 * m)
            qf = build_quadratics(real)
            V = _lifted(theta)
            for which, direct in (
                    ("r1", sinr_r1(real, theta, scn.p_s, scn.p_r2, scn.sigma2)),
                    ("d", sinr_d(real, theta, scn.p_s, scn.p_r2, scn.sigma2))):
                lift = sinr_trace_form(qf, V, which, scn.p_s, scn.p_r2, scn.sigma2)
                worst = max(worst, abs(lift - direct) / direct)
            pairs += 1
    elapsed = time.perf_counter() - t0
    assert pairs == 1050
    assert worst <= 1e-9
    assert elapsed < 10.0
    print(f"criterion 1: PASS - {pairs} pairs at M in (1, 4, 16), worst relative "
          f"deviation {worst:.2e} (tol 1e-9), {elapsed:.1f} s")


def _c2_results():
    def compute():
        cfg = OracleConfig(levels=64, max_elements=2)
        step = 2.0 * np.pi / cfg.levels
        scn = Scenario(M=1).with_snr_db(30.0)
        out = []
        for k in range(100):
            real = sample_realization(scn, spawn_rng(2002, k))
            theta_o, rate_o = brute_force_search(real, scn.p_s, scn.p_r2,
                                                 scn.sigma2, config=cfg)
            # the worst rate one single-coordinate grid step away from the
            # optimum; the swarm must not land below it
            floor = rate_o
            for i in range(2):
                for sgn in (step, -step):
                    t = theta_o.copy()
                    t[i] = float(wrap_phase(t[i] + sgn))
                    floor = min(floor, rate_for_phases(real, t, scn.p_s,
                                                       scn.p_r2, scn.sigma2))
            pso = _guarded_pso(real, scn.p_s, scn.p_r2, scn.sigma2,
                               PsoParams(N=50, T=200, mu=np.pi / 8.0,
                                         seed=spawn_seed(2002, k, 1)))
            sdp = run_algorithm1(build_quadratics(real), scn.p_s, scn.p_r2,
                                 scn.sigma2, spawn_rng(2002, k, 2), settings=TIGHT)
            out.append((rate_o, floor, pso.best_rate, sdp.upper_bound_rate))
        return out

    return _memo("c2", compute)


def test_c2_tiny_instances_match_exhaustive_search():
    t0 = time.perf_counter()
    res = _c2_results()
    elapsed = time.perf_counter() - t0
    within = sum(pso >= floor - 1e-9 for _, floor, pso, _ in res)
    bound_ok = sum(ub >= rate_o - 1e-9 for rate_o, _, _, ub in res)
    assert len(res) == 100
    assert within >= 95
    assert bound_ok == 100
    assert elapsed < 120.0
    print(f"criterion 2: PASS - swarm within one grid step on {within}/100 "
          f"(need 95), bound >= oracle on {bound_ok}/100, {elapsed:.1f} s")


def _c3_results():
    def compute():
        scn = Scenario(M=8).with_snr_db(30.0)
        out = []
        for k in range(100):
            real = sample_realization(scn, spawn_rng(3003, k))
            qf = build_quadratics(real)
            sdp = run_algorithm1(qf, scn.p_s, scn.p_r2, scn.sigma2,
                                 spawn_rng(3003, k, 1))
            _, feas = extract_rank_one(sdp.V_star, qf, scn.p_s, scn.p_r2,
                                       scn.sigma2, rng=spawn_rng(3003, k, 2))
            pso = _guarded_pso(real, scn.p_s, scn.p_r2, scn.sigma2,
                               PsoParams(seed=spawn_seed(3003, k, 3)))
            out.append((sdp.upper_bound_rate, pso.best_rate, feas))
        return out

    return _memo("c3", compute)


def test_c3_relaxation_bound_dominates():
    res = _c3_results()
    pso_viol = sum(pso > ub + 1e-6 for ub, pso, _ in res)
    feas_viol = sum(feas > ub + 1e-6 for ub, _, feas in res)
    assert len(res) == 100
    assert pso_viol == 0
    assert feas_viol == 0
    margin = min(ub - max(pso, feas) for ub, pso, feas in res)
    print(f"criterion 3: PASS - 100 instances at M = 8, zero violations of "
          f"either bound (slack 1e-6, worst margin {margin:+.2e})")


def _c4_means():
    def compute():
        cfg = SweepConfig(snr_grid_db=(40.0,), m_list=(16, 32), trials=200,
                          schemes=("sdp_upper", "pso"), seed=4004)
        agg = emit_plotdata(run_sweep(cfg))
        return {(s, m): mean for s, m, _, mean, _ in agg}

    return _memo("c4", compute)


def test_c4_swarm_tracks_bound_closely():
    t0 = time.perf_counter()
    means = _c4_means()
    elapsed = time.perf_counter() - t0
    ratios = {m: means[("pso", m)] / means[("sdp_upper", m)] for m in (16, 32)}
    assert all(r >= 0.93 for r in ratios.values())
    print(f"criterion 4: PASS - mean swarm/bound ratio at 40 dB: "
          f"M=16 {ratios[16]:.3f}, M=32 {ratios[32]:.3f} (need 0.93), "
          f"200 trials, {elapsed / 60.0:.1f} min")


def _c5_means():
    def compute():
        cfg = SweepConfig(snr_grid_db=tuple(float(s) for s in range(20, 75, 5)),
                          m_list=(32,), trials=200,
                          schemes=("pso", "sr_no_ris", "ris_only"), seed=5005)
        agg = emit_plotdata(run_sweep(cfg))
        out = {}
        for s, _, snr, mean, _ in agg:
            out.setdefault(s, {})[snr] = mean
        return out

    return _memo("c5", compute)


def _crossing(curve, level):
    """SNR in dB at which a mean-rate curve first reaches the level."""
    snrs = sorted(curve)
    for a, b in zip(snrs, snrs[1:]):
        if curve[a] <= level <= curve[b]:
            return a + (b - a) * (level - curve[a]) / (curve[b] - curve[a])
    raise AssertionError(f"level {level} not bracketed by the SNR grid")


def test_c5_scheme_ordering_and_snr_gain():
    t0 = time.perf_counter()
    means = _c5_means()
    elapsed = time.perf_counter() - t0
    snrs = sorted(means["pso"])
    for snr in snrs:
        assert means["pso"][snr] > means["ris_only"][snr] > means["sr_no_ris"][snr], \
            f"ordering broken at {snr} dB"
    gap = _crossing(means["ris_only"], 4.0) - _crossing(means["pso"], 4.0)
    assert abs(gap - 15.0) <= 3.0
    print(f"criterion 5: PASS - ordering holds on 20..70 dB at M = 32; "
          f"horizontal gain at 4 bits/s/Hz = {gap:.2f} dB (need 15 +- 3), "
          f"200 trials, {elapsed / 60.0:.1f} min")


def _c6_finals():
    def compute():
        scn = Scenario(M=32).with_snr_db(50.0)
        mus = (np.pi / 8.0, np.pi)
        traces = {mu: [] for mu in mus}
        for tr in range(50):
            real = sample_realization(scn, spawn_rng(6006, tr))
            for ui, mu in enumerate(mus):
                params = PsoParams(N=50, T=200, mu=mu,
                                   seed=spawn_seed(6006, tr, ui))
                traces[mu].append(_guarded_pso(real, scn.p_s, scn.p_r2,
                                               scn.sigma2, params).trace_rate)
        return {mu: np.mean(np.stack(t), axis=0) for mu, t in traces.items()}

    return _memo("c6", compute)


def test_c6_small_velocity_cap_converges_better():
    curves = _c6_finals()
    small, large = curves[np.pi / 8.0], curves[np.pi]
    for curve in (small, large):
        assert np.all(np.diff(curve) >= -1e-12)
    assert small[-1] > large[-1]
    print(f"criterion 6: PASS - final mean rate over 50 trials at M = 32, "
          f"50 dB: mu=pi/8 {small[-1]:.3f} > mu=pi {large[-1]:.3f} bits/s/Hz")


def test_c7_swarm_bound_invariants():
    # instrumented runs come from criteria 2, 3 and 6; regenerate them if
    # this test is invoked on its own
    if _guard["runs"] == 0:
        _c2_results()
        _c3_results()
        _c6_finals()
    assert _guard["runs"] >= 300
    assert _guard["violations"] == 0
    assert _guard["max_phase"] <= np.pi
    assert _guard["max_speed_ratio"] <= 1.0
    print(f"criterion 7: PASS - {_guard['iters']} iterations across "
          f"{_guard['runs']} instrumented runs, zero bound violations "
          f"(max |phase| {_guard['max_phase']:.6f} <= pi, max |velocity|/mu "
          f"{_guard['max_speed_ratio']:.6f} <= 1); sweep-driven runs are "
          f"covered by the always-on in-loop checks")


def test_c8_outer_loop_converges():
    converged = 0
    iters = []
    worst_drop = 0.0
    damped = 0
    for k in range(100):
        scn = Scenario(M=16).with_snr_db((10.0, 30.0, 50.0)[k % 3])
        real = sample_realization(scn, spawn_rng(8008, k))
        res = run_algorithm1(build_quadratics(real), scn.p_s, scn.p_r2,
                             scn.sigma2, spawn_rng(8008, k, 1))
        converged += res.converged
        iters.append(res.iterations)
        damped += res.damping_count > 0
        if len(res.objective_trace) > 1:
            worst_drop = max(worst_drop, -float(np.min(np.diff(res.objective_trace))))
    assert converged >= 95
    assert worst_drop <= 1e-6
    print(f"criterion 8: PASS - {converged}/100 converged below 1e-3 within 30 "
          f"outer iterations at M = 16 (mean {np.mean(iters):.1f}), worst "
          f"objective drop {worst_drop:.1e} (tol 1e-6), damping engaged on "
          f"{damped} instances")


def test_c9_sweep_output_is_byte_identical(tmp_path):
    cfg = {
        "scenario": {"M": 1, "k_r_db": 5.0},
        "snr_grid_db": [0.0, 30.0],
        "m_list": [1],
        "trials": 2,
        "schemes": ["sdp_upper", "pso", "sr_no_ris", "ris_only", "oracle"],
        "pso": {"N": 8, "T": 25},
        "seed": 9009,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    outs = [tmp_path / name for name in ("a.csv", "b.csv", "c.csv")]
    assert main(["sweep", "--config", str(path), "--out", str(outs[0])]) == 0
    assert main(["sweep", "--config", str(path), "--out", str(outs[1])]) == 0
    assert main(["sweep", "--config", str(path), "--out", str(outs[2]),
                 "--threads", "2"]) == 0
    blobs = [p.read_bytes() for p in outs]
    assert blobs[0] == blobs[1] == blobs[2]
    rows = blobs[0].decode().splitlines()
    assert len(rows) == 1 + 2 * 2 * 5
    print(f"criterion 9: PASS - repeated sweeps byte-identical "
          f"({len(blobs[0])} bytes, {len(rows) - 1} rows), including a "
          f"2-process run")
