import csv
import json

import numpy as np
import pytest

from mvmilstein import _rng
from mvmilstein.brownian import NoiseBlock, sample_step_noise
from mvmilstein.engine import (ParticleEnsemble, SchemeConfig,
                               interaction_functionals, run_simulation,
                               step_particles, write_snapshot_csv)
from mvmilstein.errors import ConfigError, ShapeError
from mvmilstein.models import Model, PointMass, model_from_preset
from mvmilstein.taming import gamma_apply


class ZeroModel(Model):
    """f = g = 0; nothing moves."""

    name = "zero"
    d = 2
    m = 2

    def drift(self, states, view):
        return np.zeros_like(states)

    def diffusion(self, states, view):
        return np.zeros((states.shape[0], 2, 2))

    def diffusion_state_jac(self, states, view):
        return np.zeros((states.shape[0], 2, 2, 2))


class MeanDriftModel(Model):
    """f = ensemble mean (pure interaction), g = 0."""

    name = "mean_drift"
    d = 1
    m = 1

    def drift(self, states, view):
        return np.full_like(states, view.coord_mean(0))

    def diffusion(self, states, view):
        return np.zeros((states.shape[0], 1, 1))

    def diffusion_state_jac(self, states, view):
        return np.zeros((states.shape[0], 1, 1, 1))


def _zero_model():
    return ZeroModel({}, PointMass((0.0, 0.0)))


def _cfg(kind="taming_milstein", taming="tanh", dt=2.0 ** -6, **kw):
    return SchemeConfig(kind=kind, taming=taming, dt=dt, T=1.0, **kw)


def test_zero_model_unchanged_all_kinds():
    model = _zero_model()
    states = np.random.default_rng(0).normal(size=(6, 2))
    noise = sample_step_noise(_rng.step_stream(1, 0), 6, 2, 2.0 ** -6)
    for kind, taming in (("classical_milstein", "identity"),
                         ("taming_milstein", "tanh"),
                         ("taming_milstein", "tamed"),
                         ("tamed_euler", "sine")):
        ens = ParticleEnsemble.initial(states)
        out = step_particles(ens, noise, model, _cfg(kind=kind, taming=taming))
        np.testing.assert_array_equal(out.states, states)
        assert out.t == 2.0 ** -6


def test_linear_one_step_hand_formula():
    model = model_from_preset("linear_benchmark.default")
    a, b = model.params["a"], model.params["b"]
    h = 2.0 ** -5
    y0 = np.array([[1.3]])
    dW = np.array([[0.21]])
    noise = NoiseBlock.from_increments(dW, h)
    ens = ParticleEnsemble.initial(y0)
    out = step_particles(ens, noise, model,
                         SchemeConfig(kind="classical_milstein", dt=h, T=1.0))
    expected = 1.3 * (1 + a * h + b * 0.21 + 0.5 * b * b * (0.21 ** 2 - h))
    np.testing.assert_allclose(out.states[0, 0], expected, rtol=1e-14)


def test_scheme_difference_is_correction_sum():
    # taming Milstein minus tamed Euler equals the tamed correction term
    model = model_from_preset("double_well.case2")
    rng = np.random.default_rng(3)
    states = rng.normal(size=(12, 1))
    h = 2.0 ** -6
    noise = sample_step_noise(_rng.step_stream(5, 0), 12, 1, h)
    ens = ParticleEnsemble.initial(states)

    mil = step_particles(ens, noise, model, _cfg(taming="tanh", dt=h))
    eul = step_particles(ens, noise, model,
                         _cfg(kind="tamed_euler", taming="tanh", dt=h))

    from mvmilstein.models import MeasureView, l_y_eval
    view = MeasureView(states)
    expected = np.zeros((12, 1))
    for i in range(12):
        ly = l_y_eval(model, 0, 0, states[i], view)
        expected[i] = gamma_apply("tanh", ly, h) * noise.own_I[i, 0, 0]
    np.testing.assert_allclose(mil.states - eul.states, expected,
                               rtol=1e-12, atol=1e-15)


def test_exchangeability_exact():
    model = model_from_preset("double_well.case1")
    rng = np.random.default_rng(4)
    states = rng.normal(size=(17, 1))
    h = 2.0 ** -6
    noise = sample_step_noise(_rng.step_stream(6, 0), 17, 1, h)
    perm = rng.permutation(17)

    out = step_particles(ParticleEnsemble.initial(states), noise, model,
                         _cfg(dt=h))
    noise_p = NoiseBlock(h=noise.h, dW=noise.dW[perm],
                         own_I=noise.own_I[perm])
    out_p = step_particles(ParticleEnsemble.initial(states[perm]), noise_p,
                           model, _cfg(dt=h))
    np.testing.assert_array_equal(out.states[perm], out_p.states)


def test_measure_free_factorisation_bitwise():
    # an N-particle run of a measure-free model equals N single runs driven
    # by the sliced noise, bit for bit
    model = model_from_preset("linear_benchmark.default")
    rng = np.random.default_rng(5)
    states = rng.normal(size=(9, 1)) + 2.0
    h = 2.0 ** -6
    cfg = _cfg(dt=h)
    noise = sample_step_noise(_rng.step_stream(7, 0), 9, 1, h)
    full = step_particles(ParticleEnsemble.initial(states), noise, model, cfg)
    for i in range(9):
        single_noise = NoiseBlock(h=h, dW=noise.dW[i:i + 1],
                                  own_I=noise.own_I[i:i + 1])
        single = step_particles(ParticleEnsemble.initial(states[i:i + 1]),
                                single_noise, model, cfg)
        assert single.states[0, 0] == full.states[i, 0]


def test_input_ensemble_not_mutated():
    model = model_from_preset("double_well.case2")
    states = np.random.default_rng(8).normal(size=(5, 1))
    ens = ParticleEnsemble.initial(states)
    before = ens.states.copy()
    noise = sample_step_noise(_rng.step_stream(8, 0), 5, 1, 2.0 ** -6)
    step_particles(ens, noise, model, _cfg())
    np.testing.assert_array_equal(ens.states, before)
    assert not ens.states.flags.writeable


def test_measure_snapshot_frozen_within_step():
    # all updates read the pre-step measure: with f = mean and states
    # (0, 2), both particles move by exactly mean * h = h
    model = MeanDriftModel({}, PointMass((0.0,)))
    states = np.array([[0.0], [2.0]])
    h = 0.25
    noise = NoiseBlock.from_increments(np.zeros((2, 1)), h)
    out = step_particles(ParticleEnsemble.initial(states), noise, model,
                         SchemeConfig(kind="classical_milstein", dt=h, T=1.0))
    np.testing.assert_array_equal(out.states, [[0.25], [2.25]])


def test_one_step_increment_bound():
    model = model_from_preset("fitzhugh_nagumo.default")
    rng = np.random.default_rng(9)
    states = rng.normal(size=(20, 3)) * 3.0
    states[:, 2] = rng.uniform(0.05, 0.95, 20)
    h = 2.0 ** -6
    noise = sample_step_noise(_rng.step_stream(9, 0), 20, 3, h)
    for taming in ("tanh", "sine", "tamed", "mixed"):
        out = step_particles(ParticleEnsemble.initial(states), noise, model,
                             _cfg(taming=taming, dt=h))
        inc = np.linalg.norm(out.states - states, axis=1)
        m = model.m
        cap = (np.sqrt(model.d) / h) * (
            h + m * np.abs(noise.dW).max()
            + 2 * m * m * np.abs(noise.own_I).max())
        assert np.all(inc <= cap)


class NonCommutative(Model):
    """Pure diffusion with two noises whose correction terms differ.

    g1 = 0.4 x, g2 = 0.3 x^2, so dg1*g2 != dg2*g1 and the off-diagonal
    double integrals do not cancel: the one-step residual is sensitive to
    the inner/outer index convention.
    """

    name = "noncommutative"
    d = 1
    m = 2

    def drift(self, states, view):
        return np.zeros_like(states)

    def diffusion(self, states, view):
        x = states[:, 0]
        g = np.empty((states.shape[0], 2, 1))
        g[:, 0, 0] = 0.4 * x
        g[:, 1, 0] = 0.3 * x * x
        return g

    def diffusion_state_jac(self, states, view):
        x = states[:, 0]
        jac = np.empty((states.shape[0], 2, 1, 1))
        jac[:, 0, 0, 0] = 0.4
        jac[:, 1, 0, 0] = 0.6 * x
        return jac


def test_iterated_integral_convention_oracle():
    # simulate the true one-step increment by fine subdivision, together
    # with the path's own double integrals; the engine step driven by that
    # block must be second-order accurate (residual O(h^{3/2})), and must
    # degrade visibly if the integral matrix is transposed
    model = NonCommutative({}, PointMass((1.0,)))
    rng = np.random.default_rng(42)
    N, x0, nsub = 2000, 1.0, 2048

    def residuals(h):
        dtf = h / nsub
        x = np.full(N, x0)
        W = np.zeros((N, 2))
        I = np.zeros((N, 2, 2))
        for _ in range(nsub):
            dw = rng.standard_normal((N, 2)) * np.sqrt(dtf)
            I += W[:, :, None] * dw[:, None, :]  # [j2, j1] += W_j2 dw_j1
            x = x + 0.4 * x * dw[:, 0] + 0.3 * x * x * dw[:, 1]
            W += dw
        cfg = SchemeConfig(kind="classical_milstein", dt=h, T=1.0)
        ens = ParticleEnsemble.initial(np.full((N, 1), x0))
        out = {}
        for label, mat in (("engine", I),
                           ("transposed", np.transpose(I, (0, 2, 1)))):
            blk = NoiseBlock(h=h, dW=W, own_I=np.ascontiguousarray(mat))
            stepped = step_particles(ens, blk, model, cfg)
            out[label] = float(np.sqrt(np.mean(
                (stepped.states[:, 0] - x) ** 2)))
        return out

    hs = [2.0 ** -4, 2.0 ** -6, 2.0 ** -8]
    res = {h: residuals(h) for h in hs}
    r_ok = [res[h]["engine"] for h in hs]
    slope = np.polyfit([np.log2(h) for h in hs], np.log2(r_ok), 1)[0]
    assert slope >= 1.3, f"one-step residual order {slope:.2f}"
    smallest = res[hs[-1]]
    assert smallest["engine"] * 5 < smallest["transposed"], smallest


def test_blowup_freeze_and_flag():
    model = model_from_preset("double_well.case1")
    cfg = SchemeConfig(kind="classical_milstein", dt=2.0 ** -6, T=1.0,
                       blow_up_threshold=1e4)
    states = np.array([[50.0], [0.1]])  # first particle explodes immediately
    noise = NoiseBlock.from_increments(np.zeros((2, 1)), cfg.dt)
    out = step_particles(ParticleEnsemble.initial(states), noise, model, cfg)
    assert out.blown_up[0] and not out.blown_up[1]
    np.testing.assert_allclose(np.linalg.norm(out.states[0]), 1e4)
    assert out.first_blowup_time[0] == cfg.dt
    # frozen thereafter
    out2 = step_particles(out, noise, model, cfg)
    np.testing.assert_array_equal(out2.states[0], out.states[0])
    assert out2.first_blowup_time[0] == cfg.dt


def test_run_simulation_deterministic():
    model = model_from_preset("double_well.case2")
    cfg = _cfg(dt=2.0 ** -4)
    r1 = run_simulation(model, cfg, N=50, seed=123)
    r2 = run_simulation(model, cfg, N=50, seed=123)
    np.testing.assert_array_equal(r1.final.states, r2.final.states)
    for (t1, s1, b1), (t2, s2, b2) in zip(r1.snapshots, r2.snapshots):
        assert t1 == t2
        np.testing.assert_array_equal(s1, s2)
        np.testing.assert_array_equal(b1, b2)


def test_run_simulation_early_stop_when_all_blow_up():
    model = model_from_preset("double_well.case1")
    cfg = SchemeConfig(kind="classical_milstein", dt=2.0 ** -6, T=1.0,
                       blow_up_threshold=1e4)
    record = run_simulation(model, cfg, N=20, seed=3)
    assert record.all_blown_up
    assert record.early_stop_step is not None
    assert len(record.first_blowup_times) == 20


def test_interaction_functionals_values():
    ens = ParticleEnsemble.initial(np.array([[3.0, 4.0]]))
    out = interaction_functionals(ens)
    assert out["w2_to_origin"] == 5.0
    ens_c = ParticleEnsemble.initial(np.full((11, 2), 1.5))
    np.testing.assert_array_equal(interaction_functionals(ens_c)["mean"],
                                  [1.5, 1.5])


def test_measure_term_requires_cross_noise():
    model = model_from_preset("double_well.case2")
    cfg = _cfg(include_measure_term=True)
    noise = sample_step_noise(_rng.step_stream(1, 0), 4, 1, cfg.dt,
                              with_cross=False)
    ens = ParticleEnsemble.initial(np.zeros((4, 1)))
    with pytest.raises(ShapeError, match="cross"):
        step_particles(ens, noise, model, cfg)


def test_measure_term_cross_path_runs():
    model = model_from_preset("double_well.case2")
    cfg = _cfg(include_measure_term=True, dt=2.0 ** -5)
    record = run_simulation(model, cfg, N=8, seed=5)
    assert record.blown_fraction == 0.0
    # the correction is a small perturbation of the plain scheme
    cfg0 = _cfg(include_measure_term=False, dt=2.0 ** -5)
    record0 = run_simulation(model, cfg0, N=8, seed=5)
    delta = np.abs(record.final.states - record0.final.states).max()
    assert 0 < delta < 0.1


def test_cross_ceiling_enforced():
    model = model_from_preset("double_well.case2")
    cfg = _cfg(include_measure_term=True, cross_N_ceiling=16)
    with pytest.raises(ConfigError, match="cap"):
        run_simulation(model, cfg, N=32, seed=1)


def test_scheme_config_validation():
    with pytest.raises(ConfigError, match="divide"):
        SchemeConfig(kind="taming_milstein", dt=0.3, T=1.0)
    with pytest.raises(ConfigError, match="identity"):
        SchemeConfig(kind="taming_milstein", taming="identity", dt=0.25,
                     T=1.0)
    with pytest.raises(ConfigError, match="identity"):
        SchemeConfig(kind="tamed_euler", taming="identity", dt=0.25, T=1.0)
    cfg = SchemeConfig(kind="classical_milstein", taming="tanh", dt=0.25,
                       T=1.0)
    assert cfg.taming.kinds == ("identity",) * 4


def test_noise_step_mismatch_rejected():
    model = model_from_preset("double_well.case2")
    noise = sample_step_noise(_rng.step_stream(1, 0), 4, 1, 0.25)
    ens = ParticleEnsemble.initial(np.zeros((4, 1)))
    with pytest.raises(ShapeError, match="does not match dt"):
        step_particles(ens, noise, model, _cfg(dt=0.125))


def test_snapshot_csv_schema(tmp_path):
    model = model_from_preset("cucker_smale.case2")
    cfg = _cfg(dt=2.0 ** -3)
    record = run_simulation(model, cfg, N=5, seed=9,
                            snapshot_times=[0.0, 0.5, 1.0])
    csv_path = tmp_path / "snap.csv"
    meta_path = write_snapshot_csv(record, csv_path)
    with open(csv_path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["time", "particle", "coord_0", "coord_1", "blown_up"]
    assert len(rows) == 1 + 3 * 5
    meta = json.load(open(meta_path))
    assert meta["schema_version"] == 1
    assert meta["seed"] == 9
    assert meta["config"]["dt"] == 2.0 ** -3
    assert "library_version" in meta and "kernel" in meta


def test_time_advances_by_dt():
    model = _zero_model()
    cfg = _cfg(dt=0.25)
    noise = sample_step_noise(_rng.step_stream(0, 0), 3, 2, 0.25)
    ens = ParticleEnsemble.initial(np.zeros((3, 2)))
    for k in range(4):
        assert ens.t == 0.25 * k
        ens = step_particles(ens, noise, model, cfg)
    assert ens.t == 1.0
