"""Numerical studies: convergence order, divergence probing, moment bounds.

The convergence study couples every run to a common fine-step reference
path: noise is generated once on the reference grid and aggregated to each
coarser grid with the exact composition identity, so the i-th particle of
the fine and coarse runs is driven by the same underlying Brownian path.
The error at the terminal time,

    MSE(dt) = sqrt( (1/N) sum_i |Y_T^{i,ref} - Y_T^{i,dt}|^2 ),

then measures strong (pathwise) error, and its log-log slope against dt the
strong convergence order.
"""

import csv
import json
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from . import _rng
from .brownian import chen_aggregate, sample_step_noise
from .engine import ParticleEnsemble, run_simulation, step_particles
from .errors import ConfigError, Error

RECORD_FIELDS = ("model", "scheme", "taming", "dt", "ref_dt", "N", "seed",
                 "mse", "diverged", "wallclock_s")


@dataclass(frozen=True)
class ConvergenceRecord:
    model: str
    scheme: str
    taming: str
    dt: float
    ref_dt: float
    N: int
    seed: int
    mse: float  # NaN when diverged
    diverged: bool
    wallclock_s: float

    def __post_init__(self):
        if not self.ref_dt < self.dt:
            if self.ref_dt != self.dt:
                raise ConfigError(
                    f"reference step {self.ref_dt} must not exceed {self.dt}")
        ratio = self.dt / self.ref_dt
        if abs(ratio - round(ratio)) > 1e-12 * ratio:
            raise ConfigError(
                f"ref_dt={self.ref_dt} must divide dt={self.dt} exactly")

    def key(self):
        return (self.scheme, self.taming, self.dt, self.seed)


def _mse_terminal(ref_states, coarse_states):
    sq = np.sum((ref_states - coarse_states) ** 2, axis=1)
    return math.sqrt(math.fsum(sq.tolist()) / len(sq))


def run_convergence_study(model, schemes, dt_list, ref_dt, N, seed,
                          skip_keys=(), on_record=None,
                          mse_mode="terminal"):
    """Coupled fine/coarse convergence measurements for several schemes.

    ``schemes`` maps a label to a SchemeConfig template whose ``dt`` field
    is replaced per cell (``T`` and the rest are shared).  All schemes and
    all step sizes see identical Brownian paths and identical initial
    states.  Cells whose ``(scheme, taming, dt, seed)`` key is listed in
    ``skip_keys`` are not run (resume support).  Divergence of a run is
    recorded as a marker, not an exception.

    ``mse_mode`` selects where the error is measured: ``"terminal"``
    (default) compares at the final time only; ``"max_over_steps"`` takes
    the supremum of the error over every time the coarse grid visits.
    """
    if mse_mode not in ("terminal", "max_over_steps"):
        raise ConfigError(f"unknown mse_mode {mse_mode!r}")
    if not schemes:
        raise ConfigError("need at least one scheme")
    dt_list = sorted(set(float(dt) for dt in dt_list), reverse=True)
    ref_dt = float(ref_dt)
    templates = {label: cfg for label, cfg in schemes.items()}
    T = next(iter(templates.values())).T
    for label, cfg in templates.items():
        if cfg.T != T:
            raise ConfigError("all schemes in a study must share T")
    for dt in dt_list:
        ratio = dt / ref_dt
        if abs(ratio - round(ratio)) > 1e-12 * ratio:
            raise ConfigError(f"ref_dt={ref_dt} must divide dt={dt}")

    n_ref = round(T / ref_dt)
    ref_cfgs = {lb: cfg.with_dt(ref_dt) for lb, cfg in templates.items()}
    with_cross = any(cfg.include_measure_term for cfg in templates.values())
    K = max(cfg.wiktorsson_K for cfg in templates.values())

    init_rng = _rng.substream(seed, _rng.PURPOSE_INITIAL)
    init_states = model.sample_initial(init_rng, N)

    skip = set(skip_keys)

    def _cell_key(label, dt):
        cfg = templates[label]
        return (label, cfg.taming.label(), dt, seed)

    ref_ens = {lb: ParticleEnsemble.initial(init_states)
               for lb in templates}
    coarse = {}
    for lb in templates:
        for dt in dt_list:
            if _cell_key(lb, dt) not in skip:
                coarse[(lb, dt)] = ParticleEnsemble.initial(init_states)
    acc = {dt: {"block": None, "count": 0, "ratio": round(dt / ref_dt)}
           for dt in dt_list}
    wall = {cell: 0.0 for cell in coarse}
    running_max = {cell: 0.0 for cell in coarse}

    for k in range(n_ref):
        block = sample_step_noise(_rng.step_stream(seed, k), N, model.m,
                                  ref_dt, K=K, with_cross=with_cross)
        for lb in templates:
            ref_ens[lb] = step_particles(ref_ens[lb], block, model,
                                         ref_cfgs[lb])
        for dt, st in acc.items():
            st["block"] = (block if st["block"] is None
                           else chen_aggregate([st["block"], block]))
            st["count"] += 1
            if st["count"] == st["ratio"]:
                for lb in templates:
                    cell = (lb, dt)
                    if cell not in coarse:
                        continue
                    t0 = time.perf_counter()
                    coarse[cell] = step_particles(
                        coarse[cell], st["block"], model,
                        templates[lb].with_dt(dt))
                    wall[cell] += time.perf_counter() - t0
                    if mse_mode == "max_over_steps":
                        # fine and coarse runs are aligned in time here
                        running_max[cell] = max(
                            running_max[cell],
                            _mse_terminal(ref_ens[lb].states,
                                          coarse[cell].states))
                st["block"] = None
                st["count"] = 0

    records = []
    for lb in templates:
        for dt in dt_list:
            cell = (lb, dt)
            if cell not in coarse:
                continue
            ref = ref_ens[lb]
            co = coarse[cell]
            diverged = bool(np.any(ref.blown_up) or np.any(co.blown_up))
            if diverged:
                mse = float("nan")
            elif mse_mode == "max_over_steps":
                mse = running_max[cell]
            else:
                mse = _mse_terminal(ref.states, co.states)
            rec = ConvergenceRecord(
                model=model.name, scheme=lb,
                taming=templates[lb].taming.label(), dt=dt, ref_dt=ref_dt,
                N=N, seed=seed, mse=mse, diverged=diverged,
                wallclock_s=wall[cell])
            records.append(rec)
            if on_record is not None:
                on_record(rec)
    return records


@dataclass(frozen=True)
class OrderFit:
    slope: float
    intercept: float
    residual_norm: float
    n_used: int
    n_excluded: int


def fit_order(records):
    """Least-squares slope of log2(MSE) against log2(dt).

    Accepts ConvergenceRecords or bare ``(dt, mse)`` pairs.  Diverged
    records (and degenerate zero-error ones) are excluded and counted; at
    least two usable records are required.
    """
    pts = []
    excluded = 0
    for r in records:
        if isinstance(r, tuple):
            dt, mse, diverged = r[0], r[1], False
        else:
            dt, mse, diverged = r.dt, r.mse, r.diverged
        if diverged or not np.isfinite(mse) or mse <= 0:
            excluded += 1
            continue
        pts.append((math.log2(dt), math.log2(mse)))
    if len(pts) < 2:
        raise Error(f"need at least 2 finite records to fit an order, "
                    f"got {len(pts)}")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return OrderFit(slope=float(coef[0]), intercept=float(coef[1]),
                    residual_norm=float(np.linalg.norm(resid)),
                    n_used=len(pts), n_excluded=excluded)


def pool_records_rms(records):
    """Pool records over seeds: per (scheme, taming, dt), the RMS of MSEs.

    Equivalent to pooling all particles of all seeds into one error sample.
    Diverged cells keep their marker (any diverged seed marks the pool).
    """
    groups = {}
    for r in records:
        groups.setdefault((r.scheme, r.taming, r.dt), []).append(r)
    pooled = []
    for (scheme, taming, dt), rs in sorted(groups.items()):
        diverged = any(r.diverged for r in rs)
        if diverged:
            mse = float("nan")
        else:
            mse = math.sqrt(sum(r.mse ** 2 for r in rs) / len(rs))
        base = rs[0]
        pooled.append(ConvergenceRecord(
            model=base.model, scheme=scheme, taming=taming, dt=dt,
            ref_dt=base.ref_dt, N=base.N, seed=-1, mse=mse,
            diverged=diverged,
            wallclock_s=sum(r.wallclock_s for r in rs)))
    return pooled


def linear_oracle_errors(model, config_template, dt_list, N, seed):
    """Strong error against the closed-form solution of the linear model.

    Runs the scheme at each step size with fresh noise and compares the
    terminal states against the exact solution driven by the same Brownian
    paths (their total increments are accumulated along the run).  Returns
    (dt, rms_error) pairs suitable for :func:`fit_order`.
    """
    if not hasattr(model, "exact_terminal"):
        raise ConfigError(f"model {model.name!r} has no closed-form solution")
    out = []
    for dt in sorted(set(float(v) for v in dt_list), reverse=True):
        cfg = config_template.with_dt(dt)
        init_rng = _rng.substream(seed, _rng.PURPOSE_INITIAL)
        init = model.sample_initial(init_rng, N)
        ens = ParticleEnsemble.initial(init)
        w_total = np.zeros(N)
        for k in range(cfg.n_steps):
            block = sample_step_noise(_rng.step_stream(seed, k), N, model.m,
                                      dt, K=cfg.wiktorsson_K)
            ens = step_particles(ens, block, model, cfg)
            w_total += block.dW[:, 0]
        exact = model.exact_terminal(init[:, 0], w_total, cfg.T)
        err = math.sqrt(float(np.mean((ens.states[:, 0] - exact) ** 2)))
        out.append((dt, err))
    return out


# ---------------------------------------------------------------------------
# divergence probe and moment monitor


@dataclass
class DivergenceReport:
    model: str
    scheme: str
    N: int
    seed: int
    dt: float
    T: float
    blown_fraction: float
    first_blowup_times: np.ndarray
    early_stop_step: int | None

    def time_quantiles(self, qs=(0.1, 0.5, 0.9)):
        if len(self.first_blowup_times) == 0:
            return {q: None for q in qs}
        return {q: float(np.quantile(self.first_blowup_times, q))
                for q in qs}

    def as_dict(self):
        return {
            "model": self.model, "scheme": self.scheme, "N": self.N,
            "seed": self.seed, "dt": self.dt, "T": self.T,
            "blown_fraction": self.blown_fraction,
            "n_blown": int(len(self.first_blowup_times)),
            "first_blowup_time_quantiles":
                {str(q): v for q, v in self.time_quantiles().items()},
            "early_stop_step": self.early_stop_step,
        }


def divergence_probe(model, config, N, seed):
    """Run one simulation and summarise its particle-corruption statistics."""
    record = run_simulation(model, config, N, seed)
    return DivergenceReport(
        model=model.name, scheme=config.kind, N=N, seed=seed,
        dt=config.dt, T=config.T,
        blown_fraction=record.blown_fraction,
        first_blowup_times=record.first_blowup_times,
        early_stop_step=record.early_stop_step)


@dataclass
class MomentSeries:
    p: float
    dt: float
    times: np.ndarray
    values: np.ndarray          # (1/N_active) sum |Y_i|^p per step
    excluded: np.ndarray        # blown-up count per step
    supremum: float

    @property
    def max_excluded(self):
        return int(self.excluded.max(initial=0))


def moment_monitor(model, config, N, seed, p):
    """Track the empirical p-th moment along a run.

    Blown-up particles are excluded from the moment with a per-step
    exclusion count; the supremum over all steps operationalises the
    step-size-uniform moment bound of the schemes.
    """
    if p < 2:
        raise ConfigError(f"moment order must be >= 2, got {p}")
    times, values, excluded = [], [], []

    def observe(_k, ens):
        active = ~ens.blown_up
        n_act = int(active.sum())
        times.append(ens.t)
        excluded.append(ens.n - n_act)
        if n_act == 0:
            values.append(float("nan"))
            return
        norms = np.linalg.norm(ens.states[active], axis=1)
        values.append(math.fsum((norms ** p).tolist()) / n_act)

    run_simulation(model, config, N, seed, on_step=observe)
    # include the initial moment
    init_rng = _rng.substream(seed, _rng.PURPOSE_INITIAL)
    init = model.sample_initial(init_rng, N)
    norms0 = np.linalg.norm(init, axis=1)
    times.insert(0, 0.0)
    values.insert(0, math.fsum((norms0 ** p).tolist()) / N)
    excluded.insert(0, 0)

    vals = np.array(values)
    finite = vals[np.isfinite(vals)]
    sup = float(finite.max()) if len(finite) else float("nan")
    return MomentSeries(p=p, dt=config.dt, times=np.array(times),
                        values=vals, excluded=np.array(excluded),
                        supremum=sup)


# ---------------------------------------------------------------------------
# particle-count helpers


def eta_d(d, N):
    """Mean-field approximation rate of the particle system in N.

    Piecewise in the state dimension: N**-0.5 below dimension four,
    N**-0.5 log N at four, N**(-2/d) above (natural logarithm).
    """
    if d < 1:
        raise ConfigError(f"dimension must be >= 1, got {d}")
    if N < 2:
        raise ConfigError(f"need N >= 2, got {N}")
    if d < 4:
        return N ** -0.5
    if d == 4:
        return N ** -0.5 * math.log(N)
    return N ** (-2.0 / d)


def n_sweep(model, config, N_list, seed, statistic="mean"):
    """Qualitative particle-count sweep of a terminal-ensemble statistic.

    Returns one row per N with the statistic and eta_d(N) for annotation;
    the expectation is stabilisation (successive differences shrinking on
    the order of eta_d), not a quantitative rate.
    """
    rows = []
    for N in sorted(set(int(n) for n in N_list)):
        record = run_simulation(model, config, N, seed)
        view_stats = {
            "mean": float(np.linalg.norm(
                np.mean(record.final.states, axis=0))),
            "mean_sq_norm": float(np.mean(
                np.sum(record.final.states ** 2, axis=1))),
        }
        rows.append({"N": N, "eta_d": eta_d(model.d, N),
                     "statistic": statistic,
                     "value": view_stats[statistic]})
    return rows


# ---------------------------------------------------------------------------
# record persistence (append-only, resumable)


def _bool_str(b):
    return "1" if b else "0"


def write_records_csv(records, path, append=True):
    """Append records to a CSV study file, writing the header when new."""
    new_file = not (append and os.path.exists(path)
                    and os.path.getsize(path) > 0)
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        writer = csv.writer(fh)
        if new_file or not append:
            writer.writerow(RECORD_FIELDS)
        for r in records:
            writer.writerow([r.model, r.scheme, r.taming, repr(r.dt),
                             repr(r.ref_dt), r.N, r.seed, repr(r.mse),
                             _bool_str(r.diverged), repr(r.wallclock_s)])


def read_records_csv(path):
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != RECORD_FIELDS:
            raise ConfigError(
                f"unexpected study CSV header in {path}: {reader.fieldnames}")
        for row in reader:
            records.append(ConvergenceRecord(
                model=row["model"], scheme=row["scheme"],
                taming=row["taming"], dt=float(row["dt"]),
                ref_dt=float(row["ref_dt"]), N=int(row["N"]),
                seed=int(row["seed"]), mse=float(row["mse"]),
                diverged=row["diverged"] == "1",
                wallclock_s=float(row["wallclock_s"])))
    return records


def completed_keys(path):
    if not os.path.exists(path) or os.path.getsize(path) == 0:
        return set()
    return {r.key() for r in read_records_csv(path)}


def write_study_metadata(path, meta):
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
