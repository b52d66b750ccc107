"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Under pytest the lines are collected in ``LINES`` and printed in the
terminal summary (see conftest.py); ``python tests/test_acceptance.py``
prints them directly.
"""
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
from scipy import integrate

sys.path.insert(0, str(Path(__file__).resolve().parent))
from conftest import make_env  # noqa: E402

from feemech.bargaining import BargainingProblem, solve_bargaining
from feemech.cli import main as cli_main
from feemech.config import ModelConfig
from feemech.eip1559 import (
    DemandProcess,
    Eip1559Params,
    next_base_fee,
    simulate_trajectory,
    trajectory_stats,
    transaction_payment,
)
from feemech.experiments import Verdict, default_sweeps, run_sweep, spec_from_config
from feemech.mechanisms import Family, PriceFloor, QuantityCap
from feemech.models import IsoelasticDemand, TokenPriceModel
from feemech.weitzman import (
    Scenarios,
    comparative_advantage_closed_form,
    comparative_advantage_mc,
    efficient_quantity,
    optimal_instrument,
    welfare,
)

Q, P, F = Family.QUANTITY_CAP, Family.PRICE_FLOOR, Family.FIXED_PRICE
LINES = []


def report(number, title, ok, detail, elapsed, limit=None):
    timing = f"{elapsed:.2f}s" + (f" / limit {limit:g}s" if limit else "")
    passed = ok and (limit is None or elapsed < limit)
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} ({detail}; {timing})"
    LINES.append(line)
    if __name__ == "__main__":
        print(line, flush=True)
    return passed


# ---------------------------------------------------------------------------

def criterion_1():
    t0 = time.perf_counter()
    rs = np.random.default_rng(101)
    bad = 0
    for _ in range(100):
        p = float(np.exp(rs.uniform(-10, 10)))
        params = Eip1559Params(d=float(rs.uniform(0, 0.99)))
        bad += next_base_fee(p, params.q_target, params) != p
        full = Eip1559Params(d=0.125)
        bad += next_base_fee(p, full.q_max, full) != 1.125 * p
    ok = bad == 0
    return report(1, "base-fee fixed point and 1.125 full-block step", ok, f"{bad} mismatches in 100 pairs",
                  time.perf_counter() - t0, 1.0)


def criterion_2():
    t0 = time.perf_counter()
    params = Eip1559Params(d=0.125, p_init=1.0)
    p, t = params.p_init, 0
    while p < 2.0 * params.p_init:
        p = next_base_fee(p, params.q_max, params)
        t += 1
    ok = t == 6 and t != 8
    return report(2, "doubling under full blocks", ok, f"first t with p_t >= 2 p_0 is {t}, not 8",
                  time.perf_counter() - t0, 1.0)


def criterion_3():
    t0 = time.perf_counter()
    worst, sign_bad, significant, points = 0.0, 0, 0, 0
    seed = 3
    for b in (-2.0, -1.0, -0.5):
        for c in (0.5, 1.0, 2.0):
            for vd in (0.25, 1.0, 4.0):
                points += 1
                env = make_env(b, c, vd, 0.0)
                sc = Scenarios.monte_carlo(env, seed, 1_000_000)
                for fam in (Q, P):
                    x, closed = optimal_instrument(env, fam)
                    mc = welfare(env, QuantityCap(x) if fam is Q else PriceFloor(x), scenarios=sc)
                    worst = max(worst, abs(mc.social_benefit - closed.social_benefit) / mc.std_error)
                est = comparative_advantage_mc(env, seed, 1_000_000)
                if est.significant():
                    significant += 1
                    sign_bad += np.sign(est.delta) != np.sign(comparative_advantage_closed_form(env))
    ok = worst < 3.0 and sign_bad == 0
    detail = f"{points} points, max |MC - closed| = {worst:.2f} SE, {significant} significant, {sign_bad} sign mismatches"
    return report(3, "closed-form vs Monte Carlo welfare", ok, detail, time.perf_counter() - t0, 120.0)


def criterion_4():
    t0 = time.perf_counter()
    env = make_env(-1.0, 1.0, var_d=1.0, var_c=1.0)
    est = comparative_advantage_mc(env, 4, 1_000_000)
    ok = abs(est.delta) < 3 * est.std_error
    detail = f"delta = {est.delta:.5f} +- {est.std_error:.5f}"
    return report(4, "knife edge B'' + C'' = 0", ok, detail, time.perf_counter() - t0, 30.0)


def criterion_5():
    t0 = time.perf_counter()
    env = make_env(-1.5, 0.5, 0.0, 0.0, b0=24.0, c0=18.0)
    fb = welfare(env, QuantityCap(efficient_quantity(env, (0.0, 0.0)))).first_best
    gaps = []
    for fam in (Q, P, F):
        _, out = optimal_instrument(env, fam)
        gaps.append(abs(out.social_benefit - fb) / abs(fb))
    d_closed = comparative_advantage_closed_form(env)
    d_mc = comparative_advantage_mc(env, 5, 10_000).delta
    ok = max(gaps) <= 1e-9 and d_closed == 0.0 and d_mc == 0.0
    detail = f"max relative gap {max(gaps):.1e}, delta closed {d_closed}, delta MC {d_mc}"
    return report(5, "zero-variance collapse", ok, detail, time.perf_counter() - t0)


def criterion_6():
    t0 = time.perf_counter()
    env = make_env(-2.0, 1.0, var_d=1.0, kind="two_point")
    d, c, prob = env.shocks.two_point_states()
    lo_state, hi_state = int(np.argmin(d)), int(np.argmax(d))
    cap = efficient_quantity(env, (d[lo_state], c[lo_state]))
    out = welfare(env, QuantityCap(cap))
    q_hi = efficient_quantity(env, (d[hi_state], c[hi_state]))
    gap = lambda q: float(env.benefit_marginal.value_at(q, d[hi_state]) - env.cost_marginal.value_at(q, c[hi_state]))
    area, _ = integrate.quad(gap, cap, q_hi, epsabs=1e-14, epsrel=1e-14)
    expected = 0.5 * area
    rel = abs(out.deadweight_loss - expected) / expected
    # which optimal instrument leaves less expected DWL, vs the MC advantage sign
    dwl = {fam: optimal_instrument(env, fam)[1].deadweight_loss for fam in (Q, P)}
    est = comparative_advantage_mc(env, 6, 200_000)
    lower = P if dwl[P] < dwl[Q] else Q
    ok = rel <= 1e-9 and est.significant() and lower is (P if est.delta > 0 else Q)
    detail = (f"DWL {out.deadweight_loss:.12g} vs triangle {expected:.12g} (rel {rel:.1e}); "
              f"E[DWL] cap {dwl[Q]:.4f}, floor {dwl[P]:.4f}; MC delta {est.delta:.4f}")
    return report(6, "deadweight-loss geometry", ok, detail, time.perf_counter() - t0)


def criterion_7():
    t0 = time.perf_counter()
    worst, fam_bad = 0.0, 0
    for b, c in ((-2.0, 1.0), (-1.0, 2.0), (-0.5, 1.0), (-3.0, 0.5)):
        env = make_env(b, c, var_d=1.0)
        sol = solve_bargaining(BargainingProblem(env, 0.0))
        best = max((optimal_instrument(env, f) for f in (Q, P)), key=lambda r: r[1].social_benefit)
        target_fam = P if comparative_advantage_closed_form(env) > 0 else Q
        fam_bad += sol.family is not target_fam
        worst = max(worst, abs(sol.parameter - best[0]) / abs(best[0]))
    q_only = 0
    configs = [make_env(b, c, vd, vc) for b, c, vd, vc in
               ((-1.0, 1.0, 1.0, 1.0), (-2.0, 1.0, 4.0, 0.0), (-0.5, 2.0, 0.25, 0.5))]
    for env in configs:
        sol = solve_bargaining(BargainingProblem(env, 1.0, candidates=(Q, P, F), tip_per_gas=0.0))
        q_profit = next(o for o in sol.per_family if o.family is Q).objective
        q_only += (q_profit > 0) and sol.family is Q
    ok = worst <= 1e-6 and fam_bad == 0 and q_only == len(configs)
    detail = f"beta=0 max param rel err {worst:.1e}, {fam_bad} family mismatches; beta=1 cap chosen {q_only}/{len(configs)}"
    return report(7, "bargaining limits", ok, detail, time.perf_counter() - t0, 60.0)


def criterion_8():
    t0 = time.perf_counter()
    verdicts = {}
    for row in default_sweeps():
        spec = spec_from_config(row, ModelConfig(), 100_000, 0)
        verdicts[row.factor] = run_sweep(spec).verdict
    ok = all(v is Verdict.MATCHES for v in verdicts.values())
    detail = ", ".join(f"{k}={v.value}" for k, v in verdicts.items())
    return report(8, "factor-table directional suite", ok, detail, time.perf_counter() - t0, 600.0)


def criterion_9(tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "seed": 987654321, "replications": 70_000,
        "model": {"token": {"initial_usd": 2000.0, "log_vol": 0.02},
                  "dynamics": {"demand_log_sd": 0.1, "blocks": 500}},
    }))
    static = tmp_path / "static.json"
    static.write_text(json.dumps({"seed": 987654321, "replications": 20_000}))
    runs = [("weitzman", cfg), ("eip1559", cfg), ("bargain", static), ("sweep", static)]
    mismatched = []
    for cmd, path in runs:
        outs = []
        for k, threads in enumerate(("1", "4", "1")):
            out = tmp_path / f"{cmd}_{k}"
            extra = ["--all-factors"] if cmd == "sweep" else []
            code = cli_main([cmd, "--config", str(path), "--threads", threads, "--output", str(out), *extra])
            if code != 0:
                mismatched.append(f"{cmd} exit {code}")
            outs.append(_data_files(out))
        if not outs[0] == outs[1] == outs[2]:
            mismatched.append(cmd)
    ok = not mismatched
    detail = "4 commands x (1, 4, 1 threads) identical" if ok else f"mismatch: {mismatched}"
    return report(9, "CLI determinism", ok, detail, time.perf_counter() - t0, 60.0)


def _data_files(folder):
    files = {}
    for f in sorted(folder.iterdir()):
        if f.suffix == ".json":
            doc = json.loads(f.read_text())
            doc["metadata"].pop("created")
            files[f.name] = json.dumps(doc, sort_keys=True).encode()
        else:
            files[f.name] = f.read_bytes()
    return files


def criterion_10():
    t0 = time.perf_counter()
    rs = np.random.default_rng(10)
    bad = excluded = 0
    for _ in range(10_000):
        gas = int(rs.integers(21_000, 30_000_000))
        base = int(rs.integers(1, 10**12))
        tip = int(rs.integers(0, 10**10))
        cap = int(rs.integers(base // 2, 2 * base + tip))
        pay = transaction_payment(gas, base, tip, cap)
        if pay is None:
            excluded += 1
            bad += cap >= base
            continue
        bad += pay.paid != pay.burned + pay.to_validator
    proc = DemandProcess(IsoelasticDemand(15e6 * 20.0**2, 2.0), log_sd=0.3, rho=0.5)
    traj = simulate_trajectory(Eip1559Params(p_init=20.0), proc, TokenPriceModel(2000.0, 0.02), 0.7, 2000, 10)
    s = trajectory_stats(traj)
    totals_ok = (s.total_burned == math.fsum(b.burned for b in traj.blocks)
                 and s.total_tips == math.fsum(b.tips for b in traj.blocks)
                 and all(b.burned == b.base_fee * b.block_size for b in traj.blocks))
    ok = bad == 0 and totals_ok
    detail = f"{bad} violations in 10^4 transactions ({excluded} excluded), trajectory totals {'ok' if totals_ok else 'off'}"
    return report(10, "payment and trajectory conservation", ok, detail, time.perf_counter() - t0)


# ---------------------------------------------------------------------------

def test_criterion_1():
    assert criterion_1()


def test_criterion_2():
    assert criterion_2()


def test_criterion_3():
    assert criterion_3()


def test_criterion_4():
    assert criterion_4()


def test_criterion_5():
    assert criterion_5()


def test_criterion_6():
    assert criterion_6()


def test_criterion_7():
    assert criterion_7()


def test_criterion_8():
    assert criterion_8()


def test_criterion_9(tmp_path):
    assert criterion_9(tmp_path)


def test_criterion_10():
    assert criterion_10()


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        results = [criterion_1(), criterion_2(), criterion_3(), criterion_4(), criterion_5(), criterion_6(),
                   criterion_7(), criterion_8(), criterion_9(Path(tmp)), criterion_10()]
    sys.exit(0 if all(results) else 1)
