"""Acceptance suite: one test per criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines; the
tolerances below are fixed and match the shipped configuration presets.
"""

import json
import math

import numpy as np
import pytest

from mvmilstein import _rng
from mvmilstein.brownian import (_sample_batched_integrals, chen_aggregate,
                                 sample_step_noise)
from mvmilstein.cli import execute_command
from mvmilstein.config import load_config
from mvmilstein.engine import SchemeConfig, run_simulation
from mvmilstein.experiments import (fit_order, linear_oracle_errors,
                                    moment_monitor, pool_records_rms,
                                    run_convergence_study)
from mvmilstein.models import check_derivatives_fd, model_from_preset
from mvmilstein.taming import TamingSlot, verify_taming_assumptions

DT_GRID = [2.0 ** -k for k in range(6, 11)]
REF_DT = 2.0 ** -12
SEEDS = (1, 2, 3)
SCHEME_LABELS = ("tanh", "sine", "tamed", "mixed")


def _report(name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'}: {name} ({detail})", flush=True)
    assert ok, f"{name}: {detail}"


def test_criterion_order_one_convergence():
    model = model_from_preset("double_well.case2")
    schemes = {
        label: SchemeConfig(kind="taming_milstein", taming=label,
                            dt=DT_GRID[0], T=1.0)
        for label in SCHEME_LABELS
    }
    records = []
    for seed in SEEDS:
        records += run_convergence_study(model, schemes, DT_GRID, REF_DT,
                                         N=100, seed=seed)
    pooled = pool_records_rms(records)
    details = []
    ok = True
    for label in SCHEME_LABELS:
        fit = fit_order([r for r in pooled if r.scheme == label])
        details.append(f"{label}: slope={fit.slope:.3f} "
                       f"resid={fit.residual_norm:.3f}")
        ok &= 0.8 <= fit.slope <= 1.2 and fit.residual_norm < 0.3
    _report("order-one convergence (double well, N=100)", ok,
            "; ".join(details))


def test_criterion_linear_benchmark_oracle():
    model = model_from_preset("linear_benchmark.default")
    cfg = SchemeConfig(kind="classical_milstein", dt=DT_GRID[0], T=1.0)
    pairs = linear_oracle_errors(model, cfg, DT_GRID, N=10_000, seed=1)
    fit = fit_order(pairs)
    ok = abs(fit.slope - 1.0) <= 0.15
    _report("linear benchmark against the closed-form solution", ok,
            f"slope={fit.slope:.3f}")


def test_criterion_divergence_demo():
    model = model_from_preset("double_well.case1")
    classical = SchemeConfig(kind="classical_milstein", dt=2.0 ** -6, T=1.0)
    rec = run_simulation(model, classical, N=1000, seed=1)
    classical_frac = rec.blown_fraction
    ok = classical_frac > 0.5
    details = [f"classical blown={classical_frac:.3f}"]
    for label in SCHEME_LABELS:
        cfg = SchemeConfig(kind="taming_milstein", taming=label,
                           dt=2.0 ** -6, T=1.0)
        r = run_simulation(model, cfg, N=1000, seed=1)
        st = r.final.states[:, 0]
        near = float(np.mean((np.abs(st - 1.0) < 0.5)
                             | (np.abs(st + 1.0) < 0.5)))
        details.append(f"{label}: blown={r.blown_fraction:.3f} "
                       f"near={near:.3f}")
        ok &= r.blown_fraction == 0.0 and near >= 0.95
    _report("divergence demo (classical blows up, tamed schemes settle)",
            ok, "; ".join(details))


def test_criterion_operator_assumptions():
    grid = [2.0 ** -k for k in range(4, 11)]
    ok = True
    details = []
    for kind in ("tanh", "sine", "tamed"):
        rep = verify_taming_assumptions(TamingSlot(kind), 100_000, grid,
                                        1e6, rng_seed=5)
        ok &= rep.passed
        details.append(
            f"{kind}: bound={rep.max_bound_ratio:.3f} "
            f"diff={rep.max_consistency_ratio:.3f}")
    identity = verify_taming_assumptions(TamingSlot("identity"), 1000, grid,
                                         1e6, rng_seed=5)
    ok &= identity.passed and not identity.bound_checked
    details.append("identity: unbounded diagnostic")
    _report("taming operator inequality suite (1e5 samples per kind)", ok,
            "; ".join(details))


def test_criterion_iterated_integral_suite():
    h = 2.0 ** -6
    # pairing identity on 1e4 particle blocks
    max_pair = 0.0
    for k in range(100):
        b = sample_step_noise(_rng.step_stream(31, k), 100, 2, h)
        lhs = b.own_I + np.transpose(b.own_I, (0, 2, 1))
        rhs = (np.einsum("ia,ib->iab", b.dW, b.dW)
               - h * np.eye(2)[None, :, :])
        max_pair = max(max_pair, float(np.abs(lhs - rhs).max()))
    ok = max_pair <= 1e-12

    # Monte Carlo moments of the off-diagonal integral over 1e6 samples
    n = 1_000_000
    dW, I = _sample_batched_integrals(_rng.substream(32, 7), n, 2, h, K=20)
    i12 = I[:, 0, 1]
    se = i12.std() / math.sqrt(n)
    mean_ok = abs(i12.mean()) <= 3 * se
    var = float(i12.var())
    var_ok = abs(var - h * h / 2) <= 0.02 * h * h / 2
    cov_ok = True
    for col in range(2):
        prod = i12 * dW[:, col]
        cov_ok &= abs(prod.mean()) <= 3 * prod.std() / math.sqrt(n)
    ok &= mean_ok and var_ok and cov_ok

    # exact composition of blocks over adjacent subintervals
    blocks = [sample_step_noise(_rng.step_stream(33, k), 40, 3, 2.0 ** -8)
              for k in range(3)]
    left = chen_aggregate([chen_aggregate(blocks[:2]), blocks[2]])
    right = chen_aggregate([blocks[0], chen_aggregate(blocks[1:])])
    assoc = float(np.abs(left.own_I - right.own_I).max())
    ok &= assoc <= 1e-12

    _report("iterated-integral suite", ok,
            f"pairing={max_pair:.2e}; var rel err="
            f"{abs(var - h * h / 2) / (h * h / 2):.4f}; "
            f"mean within {abs(i12.mean()) / se:.2f} SE; assoc={assoc:.2e}")


def test_criterion_derivative_cross_check():
    ok = True
    details = []
    for preset in ("double_well.case2", "cucker_smale.case2",
                   "fitzhugh_nagumo.default"):
        model = model_from_preset(preset)
        rep = check_derivatives_fd(model, 100, rng_seed=17, tol=1e-5)
        ok &= rep.passed
        details.append(f"{model.name}: jac={rep.max_rel_state_jac:.2e} "
                       f"lions={rep.max_rel_lions:.2e}")
    _report("derivative cross-check (100 interior points, tol 1e-5)", ok,
            "; ".join(details))


def test_criterion_moment_boundedness():
    model = model_from_preset("double_well.case2")
    suprema = {}
    for dt in DT_GRID:
        cfg = SchemeConfig(kind="taming_milstein", taming="tanh", dt=dt,
                           T=1.0)
        series = moment_monitor(model, cfg, N=200, seed=11, p=4)
        suprema[dt] = series.supremum
    ratio = max(suprema.values()) / min(suprema.values())
    ok = ratio <= 2.0
    _report("moment boundedness (p=4 suprema uniform across the dt grid)",
            ok, f"sup ratio={ratio:.3f}; suprema="
                f"{[f'{v:.3f}' for v in suprema.values()]}")


def _converge_outputs(tmp_path, name, threads):
    out = tmp_path / name
    data = {
        "model": {"preset": "double_well.case2"},
        "scheme": {"kind": "taming_milstein", "taming": "tanh",
                   "dt_list": ["2^-5", "2^-6"], "ref_dt": "2^-8", "N": 32},
        "experiment": {"schemes": ["tanh", "sine"], "seeds": [1, 2]},
        "seed": 1,
    }
    cfg = load_config(data, out_override=str(out))
    assert execute_command("converge", cfg, threads=threads) == 0
    csv_rows = (out / "convergence.csv").read_text().splitlines()
    header = csv_rows[0].split(",")
    wall_idx = header.index("wallclock_s")
    masked = [",".join(v for i, v in enumerate(r.split(","))
                       if i != wall_idx) for r in csv_rows]
    echo = json.loads((out / "config_echo.json").read_text())
    echo["io"].pop("output_dir")  # necessarily differs between run dirs
    return ("\n".join(masked),
            (out / "convergence_summary.json").read_text(),
            json.dumps(echo, sort_keys=True))


def test_criterion_determinism(tmp_path):
    # simulate: byte-identical reruns
    sim_out = []
    for name in ("s1", "s2"):
        out = tmp_path / name
        data = {
            "model": {"preset": "double_well.case2"},
            "scheme": {"kind": "taming_milstein", "taming": "tanh",
                       "dt": "2^-6", "N": 64},
            "seed": 7,
        }
        cfg = load_config(data, out_override=str(out))
        assert execute_command("simulate", cfg) == 0
        sim_out.append((out / "snapshots.csv").read_bytes())
    sim_ok = sim_out[0] == sim_out[1]

    # converge: identical results regardless of thread count (wallclock
    # column masked: timing is reported, never part of the results)
    a = _converge_outputs(tmp_path, "t1", threads=1)
    b = _converge_outputs(tmp_path, "t2", threads=4)
    thread_ok = a == b
    ok = sim_ok and thread_ok
    _report("determinism (rerun and thread-count independence)", ok,
            f"simulate identical={sim_ok}; converge identical={thread_ok}")


@pytest.mark.parametrize("d_N", [(3, 100), (4, 100), (6, 64)])
def test_eta_rate_values(d_N):
    # declared not reproducible quantitatively at desk scale; the rate
    # helper itself is pinned here and the N-sweep is covered in
    # test_experiments
    from mvmilstein.experiments import eta_d
    d, N = d_N
    expected = {(3, 100): 0.1, (4, 100): math.log(100) / 10.0,
                (6, 64): 0.25}[d_N]
    assert eta_d(d, N) == pytest.approx(expected, rel=1e-12)
