"""Time stepping of the interacting particle system.

One step evaluates all coefficients at the frozen pre-step ensemble
(snapshot semantics: every particle's update reads the same empirical
measure), applies the taming slots, and contracts with the step's noise
block:

    Y+ = Y + G1(f) h + sum_j1 G2(g_j1) dW_j1
           + sum_{j1,j2} G3((dg_j1/dy) g_j2) I[j2, j1]
           + (1/N) sum_{j1,j2,k1} G4((d_rho g_j1)(Y, rho, Y_k1) g_j2(Y_k1))
                                  I_cross[(k1,j2), (i,j1)]

Scheme variants: ``classical_milstein`` uses identity slots,
``taming_milstein`` uses the configured slots, ``tamed_euler`` keeps only
the first two terms.  Particles whose norm crosses the blow-up threshold
are frozen at a sentinel (clamped to the threshold norm) and flagged with
their first blow-up time, so divergence produces measurable statistics
instead of NaN-poisoned reductions.
"""

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__, _rng
from ._kernels import KERNEL, milstein_step
from .brownian import DEFAULT_K, sample_step_noise
from .errors import ConfigError, ShapeError
from .models import MeasureView
from .taming import KIND_CODES, TamingSpec, resolve_taming

SCHEME_KINDS = ("classical_milstein", "taming_milstein", "tamed_euler")

SNAPSHOT_SCHEMA_VERSION = 1


@dataclass
class SchemeConfig:
    kind: str
    taming: TamingSpec | str | tuple = "tanh"
    dt: float = 2.0 ** -6
    T: float = 1.0
    include_measure_term: bool = False
    blow_up_threshold: float = 1e10
    cross_N_ceiling: int = 64
    wiktorsson_K: int = DEFAULT_K

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ConfigError(f"unknown scheme kind {self.kind!r}; "
                              f"expected one of {SCHEME_KINDS}")
        if self.dt <= 0 or self.T <= 0:
            raise ConfigError(f"dt and T must be positive "
                              f"(dt={self.dt}, T={self.T})")
        ratio = self.T / self.dt
        if abs(ratio - round(ratio)) > 1e-12 * max(1.0, ratio):
            raise ConfigError(f"dt={self.dt} does not divide T={self.T}")
        if self.blow_up_threshold <= 0:
            raise ConfigError("blow_up_threshold must be positive")
        if self.wiktorsson_K < 1:
            raise ConfigError("wiktorsson_K must be >= 1")
        if self.kind == "classical_milstein":
            self.taming = TamingSpec.from_kinds("identity")
        else:
            self.taming = resolve_taming(self.taming)
            if self.taming.has_identity:
                raise ConfigError(
                    "identity taming slots are unbounded and only legal for "
                    "the classical_milstein scheme")

    @property
    def n_steps(self):
        return round(self.T / self.dt)

    @property
    def slot_codes(self):
        return tuple(KIND_CODES[k] for k in self.taming.kinds)

    @property
    def uses_correction(self):
        return self.kind != "tamed_euler"

    def with_dt(self, dt):
        return replace(self, taming=self.taming, dt=dt)

    def as_dict(self):
        return {
            "kind": self.kind,
            "taming": list(self.taming.kinds),
            "dt": self.dt,
            "T": self.T,
            "include_measure_term": self.include_measure_term,
            "blow_up_threshold": self.blow_up_threshold,
            "cross_N_ceiling": self.cross_N_ceiling,
            "wiktorsson_K": self.wiktorsson_K,
        }


@dataclass
class ParticleEnsemble:
    """N particle states at a common time, with blow-up bookkeeping."""

    t: float
    states: np.ndarray
    blown_up: np.ndarray
    first_blowup_time: np.ndarray

    @classmethod
    def initial(cls, states):
        states = np.ascontiguousarray(states, dtype=np.float64)
        states.setflags(write=False)
        N = states.shape[0]
        return cls(t=0.0, states=states,
                   blown_up=np.zeros(N, dtype=bool),
                   first_blowup_time=np.full(N, np.nan))

    @property
    def n(self):
        return self.states.shape[0]

    @property
    def d(self):
        return self.states.shape[1]

    @property
    def blown_fraction(self):
        return float(np.mean(self.blown_up))


def interaction_functionals(ensemble):
    """Standard empirical-measure functionals of the current ensemble."""
    view = MeasureView(ensemble.states)
    return {
        "mean": view.mean(),
        "mean_sq_norm": view.mean_sq_norm(),
        "w2_to_origin": view.w2_to_origin(),
    }


def step_particles(ensemble, noise, model, config):
    """Advance the ensemble by one step of length config.dt.

    The input ensemble is never mutated; frozen (blown-up) particles keep
    their sentinel states.  Newly exploding particles (norm above the
    threshold, or a non-finite update) are flagged with first blow-up time
    t + dt and clamped to the threshold norm.
    """
    states = ensemble.states
    N, d = states.shape
    m = model.m
    if noise.dW.shape != (N, m):
        raise ShapeError(f"noise shape {noise.dW.shape} does not match "
                         f"(N={N}, m={m})")
    if abs(noise.h - config.dt) > 1e-12 * config.dt:
        raise ShapeError(f"noise step {noise.h} does not match dt={config.dt}")
    if config.include_measure_term and not noise.has_cross:
        raise ShapeError("measure term requested but the noise block has no "
                         "cross-particle integrals")

    view = MeasureView(states)
    F = model.drift(states, view)
    G = model.diffusion(states, view)
    LY = None
    LR = None
    if config.uses_correction:
        jac = model.diffusion_state_jac(states, view)  # (N, m, d, d)
        # LY[i, j2, j1, c] = sum_u jac[i, j1, c, u] G[i, j2, u]
        LY = np.ascontiguousarray(np.einsum("ibcu,iau->iabc", jac, G))
        if config.include_measure_term:
            lions = model.lions_diffusion(states, view, states)
            # LR[i, k, j2, j1, c] = sum_u lions[i, k, j1, c, u] G[k, j2, u]
            LR = np.ascontiguousarray(
                np.einsum("ikbcu,kau->ikabc", lions, G))

    new_states = milstein_step(
        states, F, G, LY, LR, noise.dW, noise.own_I, noise.cross_I,
        config.dt, config.slot_codes, config.uses_correction,
        config.include_measure_term)

    # freeze-and-flag blow-up handling
    frozen = ensemble.blown_up
    new_states[frozen] = states[frozen]
    norms = np.linalg.norm(new_states, axis=1)
    finite = np.all(np.isfinite(new_states), axis=1)
    newly = ~frozen & (~finite | (norms > config.blow_up_threshold))
    if np.any(newly):
        t_blow = ensemble.t + config.dt
        for i in np.where(newly)[0]:
            if finite[i] and norms[i] > 0:
                new_states[i] *= config.blow_up_threshold / norms[i]
            else:
                # direction of the overflow is meaningless; keep the last
                # finite state scaled out to the sentinel norm
                prev = states[i]
                prev_norm = np.linalg.norm(prev)
                if prev_norm > 0:
                    new_states[i] = prev * (config.blow_up_threshold
                                            / prev_norm)
                else:
                    new_states[i] = np.full(d, config.blow_up_threshold
                                            / math.sqrt(d))

    new_states = np.ascontiguousarray(new_states)
    new_states.setflags(write=False)
    first = ensemble.first_blowup_time.copy()
    first[newly] = ensemble.t + config.dt
    return ParticleEnsemble(t=ensemble.t + config.dt, states=new_states,
                            blown_up=frozen | newly, first_blowup_time=first)


@dataclass
class SimulationRecord:
    """Trajectory record of one run: snapshots plus the blow-up report."""

    model: str
    N: int
    seed: int
    config: SchemeConfig
    snapshots: list = field(default_factory=list)  # (t, states, blown_up)
    final: ParticleEnsemble | None = None
    early_stop_step: int | None = None
    kernel: str = KERNEL

    @property
    def blown_fraction(self):
        return self.final.blown_fraction

    @property
    def first_blowup_times(self):
        t = self.final.first_blowup_time
        return t[np.isfinite(t)]

    @property
    def all_blown_up(self):
        return bool(np.all(self.final.blown_up))


def run_simulation(model, config, N, seed, snapshot_times=None,
                   noise_source=None, on_step=None):
    """Run the configured scheme from freshly sampled initial states.

    Fully deterministic in (model, config, N, seed): initial states come
    from the (seed, initial) stream and each step's noise from the
    (seed, step index) stream.  ``noise_source(k)`` overrides noise
    generation (used for coupled fine/coarse studies).  If every particle
    blows up the run stops early and the record says so.
    """
    if N < 1:
        raise ConfigError(f"need at least one particle, got N={N}")
    if config.include_measure_term and N > config.cross_N_ceiling:
        raise ConfigError(
            f"the measure correction term scales as (N*m)^2 and is capped "
            f"at N <= {config.cross_N_ceiling}; got N={N}")

    init_rng = _rng.substream(seed, _rng.PURPOSE_INITIAL)
    ensemble = ParticleEnsemble.initial(model.sample_initial(init_rng, N))

    n = config.n_steps
    if snapshot_times is None:
        snapshot_times = [0.0, config.T]
    snap_steps = set()
    for ts in snapshot_times:
        k = round(ts / config.dt)
        if not 0 <= k <= n:
            raise ConfigError(f"snapshot time {ts} outside [0, T]")
        snap_steps.add(k)

    record = SimulationRecord(model=model.name, N=N, seed=seed, config=config)
    if 0 in snap_steps:
        record.snapshots.append((0.0, ensemble.states,
                                 ensemble.blown_up.copy()))

    for k in range(n):
        if noise_source is not None:
            noise = noise_source(k)
        else:
            noise = sample_step_noise(
                _rng.step_stream(seed, k), N, model.m, config.dt,
                K=config.wiktorsson_K,
                with_cross=config.include_measure_term)
        ensemble = step_particles(ensemble, noise, model, config)
        if on_step is not None:
            on_step(k, ensemble)
        if (k + 1) in snap_steps:
            record.snapshots.append((ensemble.t, ensemble.states,
                                     ensemble.blown_up.copy()))
        if np.all(ensemble.blown_up):
            record.early_stop_step = k + 1
            break

    record.final = ensemble
    return record


def _fmt(x):
    return repr(float(x))


def write_snapshot_csv(record, csv_path, meta_path=None, extra_meta=None):
    """Write snapshots as CSV plus a sidecar metadata record.

    Schema: ``time,particle,coord_0..coord_{d-1},blown_up`` with one row
    per (snapshot time, particle).
    """
    d = record.final.d
    header = (["time", "particle"]
              + [f"coord_{c}" for c in range(d)] + ["blown_up"])
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, states, blown in record.snapshots:
            for i in range(states.shape[0]):
                writer.writerow([_fmt(t), i]
                                + [_fmt(x) for x in states[i]]
                                + [int(blown[i])])
    meta = {
        "schema_version": SNAPSHOT_SCHEMA_VERSION,
        "kind": "particle_snapshots",
        "model": record.model,
        "N": record.N,
        "seed": record.seed,
        "config": record.config.as_dict(),
        "library_version": __version__,
        "kernel": record.kernel,
        "early_stop_step": record.early_stop_step,
    }
    if extra_meta:
        meta.update(extra_meta)
    if meta_path is None:
        meta_path = str(csv_path) + ".meta.json"
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta_path
