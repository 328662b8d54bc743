"""Model coefficients for mean-field particle systems.

Each model supplies the drift ``f(y, rho)``, the diffusion columns
``g_j(y, rho)``, the state Jacobians ``d g_j / d y`` and the Lions
derivatives ``d_rho g_j(y, rho, z)`` in closed form.  The measure argument
is always the empirical measure of the current ensemble, wrapped in a
:class:`MeasureView` that computes interaction functionals once per step
and caches them.

Shipped models:

* ``double_well``       -- scalar double-well dynamics with a mean drift pull
                           and a sine interaction kernel in the diffusion;
* ``cucker_smale``      -- two-dimensional flocking model (velocity,
                           position) with cubic velocity relaxation;
* ``fitzhugh_nagumo``   -- three-dimensional neuron model with a channel
                           noise term that switches off outside (0, 1);
* ``linear_benchmark``  -- geometric Brownian motion, whose closed-form
                           solution provides an independent strong-error
                           oracle.

``check_derivatives_fd`` validates every hand-derived Jacobian and Lions
derivative against central finite differences (for the Lions derivative:
perturbing one support point of the empirical measure and scaling by N/h).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .errors import ConfigError, ShapeError


def _fsum_mean(column):
    return math.fsum(column.tolist()) / len(column)


class MeasureView:
    """Read access to the empirical measure of an ensemble.

    Wraps the ``(N, d)`` state matrix with uniform weights ``1/N``.  All
    reductions use exact (fsum) summation, so every functional is invariant
    under permutations of the particles, bit for bit.
    """

    def __init__(self, states):
        states = np.asarray(states, dtype=np.float64)
        if states.ndim != 2 or states.shape[0] < 1:
            raise ShapeError(
                f"measure needs a nonempty (N, d) state matrix, "
                f"got shape {states.shape}")
        self._states = states
        self._cache = {}

    @property
    def states(self):
        return self._states

    @property
    def n(self):
        return self._states.shape[0]

    @property
    def d(self):
        return self._states.shape[1]

    def cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn(self._states)
        return self._cache[key]

    def coord_mean(self, k):
        """Mean of the k-th coordinate over the ensemble."""
        return self.cached(("coord_mean", k),
                           lambda s: _fsum_mean(s[:, k]))

    def mean(self):
        return np.array([self.coord_mean(k) for k in range(self.d)])

    def mean_sq_norm(self):
        return self.cached(
            "mean_sq_norm",
            lambda s: math.fsum((s * s).sum(axis=1).tolist()) / len(s))

    def w2_to_origin(self):
        """Wasserstein-2 distance to the point mass at the origin.

        For a point-mass target the optimal coupling is forced, so the
        distance is exactly the root mean squared particle norm.
        """
        return math.sqrt(self.mean_sq_norm())

    # interaction kernels used by the shipped models; each is a pair of
    # cached sums so that per-query evaluation is O(1)
    def mean_sin_diff(self, y, k=0):
        """mean over particles z of sin(y - z_k), vectorised in y."""
        mc = self.cached(("cos_mean", k), lambda s: _fsum_mean(np.cos(s[:, k])))
        ms = self.cached(("sin_mean", k), lambda s: _fsum_mean(np.sin(s[:, k])))
        return np.sin(y) * mc - np.cos(y) * ms

    def mean_cos_diff(self, y, k=0):
        """mean over particles z of cos(y - z_k), vectorised in y."""
        mc = self.cached(("cos_mean", k), lambda s: _fsum_mean(np.cos(s[:, k])))
        ms = self.cached(("sin_mean", k), lambda s: _fsum_mean(np.sin(s[:, k])))
        return np.cos(y) * mc + np.sin(y) * ms


# ---------------------------------------------------------------------------
# initial laws


@dataclass(frozen=True)
class PointMass:
    value: tuple

    def sample(self, rng, N):
        return np.tile(np.asarray(self.value, dtype=np.float64), (N, 1))

    @property
    def dim(self):
        return len(self.value)

    def as_dict(self):
        return {"kind": "point", "value": list(self.value)}


@dataclass(frozen=True)
class NormalProduct:
    means: tuple
    stds: tuple

    def __post_init__(self):
        if len(self.means) != len(self.stds):
            raise ConfigError("means and stds must have equal length")
        if any(s < 0 for s in self.stds):
            raise ConfigError("standard deviations must be nonnegative")

    def sample(self, rng, N):
        d = len(self.means)
        z = rng.standard_normal((N, d))
        return np.asarray(self.means) + z * np.asarray(self.stds)

    @property
    def dim(self):
        return len(self.means)

    def as_dict(self):
        return {"kind": "normal_product", "means": list(self.means),
                "stds": list(self.stds)}


@dataclass(frozen=True)
class MultivariateNormal:
    mean: tuple
    cov: tuple  # tuple of row tuples

    def __post_init__(self):
        c = np.asarray(self.cov, dtype=np.float64)
        if c.shape != (len(self.mean), len(self.mean)):
            raise ConfigError(f"covariance shape {c.shape} does not match "
                              f"mean of length {len(self.mean)}")
        if not np.allclose(c, c.T, atol=1e-12):
            raise ConfigError("covariance matrix must be symmetric")
        eigs = np.linalg.eigvalsh(c)
        if eigs.min() < -1e-10 * max(1.0, eigs.max()):
            raise ConfigError("covariance matrix must be positive "
                              f"semi-definite (min eigenvalue {eigs.min():g})")

    def sample(self, rng, N):
        return rng.multivariate_normal(np.asarray(self.mean),
                                       np.asarray(self.cov), size=N,
                                       method="eigh")

    @property
    def dim(self):
        return len(self.mean)

    def as_dict(self):
        return {"kind": "multivariate_normal", "mean": list(self.mean),
                "cov": [list(r) for r in self.cov]}


def initial_law_from_dict(spec):
    kind = spec.get("kind")
    if kind == "point":
        return PointMass(tuple(spec["value"]))
    if kind == "normal_product":
        return NormalProduct(tuple(spec["means"]), tuple(spec["stds"]))
    if kind == "multivariate_normal":
        return MultivariateNormal(tuple(spec["mean"]),
                                  tuple(tuple(r) for r in spec["cov"]))
    raise ConfigError(f"unknown initial law kind {kind!r}")


# ---------------------------------------------------------------------------
# models


class Model:
    """Coefficient evaluators of one mean-field SDE.

    Subclasses implement the vectorised evaluators over a whole ensemble;
    ``states`` always has shape ``(N, d)`` and the measure argument is a
    :class:`MeasureView`.  Conventions:

    * ``drift``                -> (N, d)
    * ``diffusion``            -> (N, m, d), ``[i, j]`` is column g_j
    * ``diffusion_state_jac``  -> (N, m, d, d), ``[i, j, c, u]`` is
      the derivative of component c of g_j with respect to state
      coordinate u
    * ``lions_diffusion``      -> (Ny, Nz, m, d, d), ``[i, k, j, c, u]`` is
      the Lions derivative of component c of g_j at (y_i, rho), evaluated
      at measure point z_k, in direction u
    """

    name = "model"
    d = 1
    m = 1

    def __init__(self, params, initial_law):
        self.params = dict(params)
        self.initial_law = initial_law
        if initial_law.dim != self.d:
            raise ConfigError(
                f"initial law dimension {initial_law.dim} does not match "
                f"state dimension {self.d} of model {self.name!r}")

    def check_states(self, states):
        if states.ndim != 2 or states.shape[1] != self.d:
            raise ShapeError(
                f"states of shape {states.shape} do not match model "
                f"{self.name!r} with d={self.d}")

    def drift(self, states, view):
        raise NotImplementedError

    def diffusion(self, states, view):
        raise NotImplementedError

    def diffusion_state_jac(self, states, view):
        raise NotImplementedError

    def lions_diffusion(self, states, view, z_states):
        """Zero by default: diffusion without measure dependence."""
        Ny, Nz = states.shape[0], z_states.shape[0]
        return np.zeros((Ny, Nz, self.m, self.d, self.d))

    @property
    def has_measure_diffusion(self):
        return False

    def sample_initial(self, rng, N):
        return self.initial_law.sample(rng, N)

    def describe(self):
        return {"name": self.name, "d": self.d, "m": self.m,
                "params": dict(self.params),
                "initial_law": self.initial_law.as_dict()}


class DoubleWell(Model):
    """Scalar double-well dynamics with sine interaction in the noise.

    drift      f(y, rho) = lambda1 * y * (1 - y^2) + lambda2 * E[Y]
    diffusion  g(y, rho) = mu1 * (1 - y^2) + mu2 * mean_z sin(y - z)
    """

    name = "double_well"
    d = 1
    m = 1

    def drift(self, states, view):
        self.check_states(states)
        y = states[:, 0]
        p = self.params
        f = p["lambda1"] * y * (1.0 - y * y) + p["lambda2"] * view.coord_mean(0)
        return f[:, None]

    def diffusion(self, states, view):
        self.check_states(states)
        y = states[:, 0]
        p = self.params
        g = p["mu1"] * (1.0 - y * y) + p["mu2"] * view.mean_sin_diff(y)
        return g[:, None, None]

    def diffusion_state_jac(self, states, view):
        self.check_states(states)
        y = states[:, 0]
        p = self.params
        dg = -2.0 * p["mu1"] * y + p["mu2"] * view.mean_cos_diff(y)
        return dg[:, None, None, None]

    def lions_diffusion(self, states, view, z_states):
        y = states[:, 0]
        z = z_states[:, 0]
        d = -self.params["mu2"] * np.cos(y[:, None] - z[None, :])
        return d[:, :, None, None, None]

    @property
    def has_measure_diffusion(self):
        return True


class CuckerSmale(Model):
    """Two-dimensional flocking model; state is (velocity, position).

    drift      ( -lambda1 v^3 + 1 + lambda2 (v - E[V]),  v )
    diffusion  single column ( sigma1 v^2 + sigma2 (v - E[V]),  0 )
    """

    name = "cucker_smale"
    d = 2
    m = 1

    def drift(self, states, view):
        self.check_states(states)
        v = states[:, 0]
        p = self.params
        vbar = view.coord_mean(0)
        f = np.empty_like(states)
        f[:, 0] = -p["lambda1"] * v ** 3 + 1.0 + p["lambda2"] * (v - vbar)
        f[:, 1] = v
        return f

    def diffusion(self, states, view):
        self.check_states(states)
        v = states[:, 0]
        p = self.params
        vbar = view.coord_mean(0)
        g = np.zeros((states.shape[0], 1, 2))
        g[:, 0, 0] = p["sigma1"] * v * v + p["sigma2"] * (v - vbar)
        return g

    def diffusion_state_jac(self, states, view):
        self.check_states(states)
        v = states[:, 0]
        p = self.params
        jac = np.zeros((states.shape[0], 1, 2, 2))
        jac[:, 0, 0, 0] = 2.0 * p["sigma1"] * v + p["sigma2"]
        return jac

    def lions_diffusion(self, states, view, z_states):
        Ny, Nz = states.shape[0], z_states.shape[0]
        d = np.zeros((Ny, Nz, 1, 2, 2))
        d[:, :, 0, 0, 0] = -self.params["sigma2"]
        return d

    @property
    def has_measure_diffusion(self):
        return True


def _fhn_channel_noise(x1, x3, p):
    """Channel noise amplitude and its partials in x1 and x3.

    The amplitude is sqrt(opening rate) times a bump mollifier supported on
    x3 in (0, 1); value and derivatives are identically zero outside, and
    the mollifier's boundary limits vanish, so no jump is introduced.
    """
    inside = (x3 > 0.0) & (x3 < 1.0)
    x3s = np.where(inside, x3, 0.5)  # safe placeholder outside the support
    E = 1.0 + np.exp(-p["lambda"] * (x1 - p["V_T"]))
    S = p["a_r"] * p["T_max"] * (1.0 - x3s) / E + p["a_d"] * x3s
    u = 2.0 * x3s - 1.0
    q = 1.0 - u * u
    moll = p["Gamma"] * np.exp(-p["Lambda"] / q)
    rootS = np.sqrt(S)
    val = rootS * moll

    dS_dx1 = (p["a_r"] * p["T_max"] * (1.0 - x3s)
              * p["lambda"] * np.exp(-p["lambda"] * (x1 - p["V_T"])) / (E * E))
    dS_dx3 = -p["a_r"] * p["T_max"] / E + p["a_d"]
    d_dx1 = dS_dx1 / (2.0 * rootS) * moll
    d_dx3 = (dS_dx3 / (2.0 * rootS) * moll
             + rootS * moll * (-4.0 * p["Lambda"] * u / (q * q)))

    zero = np.zeros_like(val)
    return (np.where(inside, val, zero), np.where(inside, d_dx1, zero),
            np.where(inside, d_dx3, zero))


class FitzHughNagumo(Model):
    """Mean-field neuron model; state is (voltage, recovery, gating).

    The third diffusion column couples the voltage to the ensemble mean of
    the gating variable; the second column carries the channel noise, which
    is active only while the gating variable is strictly inside (0, 1).
    """

    name = "fitzhugh_nagumo"
    d = 3
    m = 3

    def drift(self, states, view):
        self.check_states(states)
        x1, x2, x3 = states[:, 0], states[:, 1], states[:, 2]
        p = self.params
        e3 = view.coord_mean(2)
        E = 1.0 + np.exp(-p["lambda"] * (x1 - p["V_T"]))
        f = np.empty_like(states)
        f[:, 0] = (x1 - 35.0 * x1 ** 3 - x2 + p["I"]
                   - p["J"] * (x1 - p["V_rev"]) * e3)
        f[:, 1] = p["c"] * (x1 + p["a"] - p["b"] * x2)
        f[:, 2] = p["a_r"] * p["T_max"] * (1.0 - x3) / E - p["a_d"] * x3
        return f

    def diffusion(self, states, view):
        self.check_states(states)
        x1, x3 = states[:, 0], states[:, 2]
        p = self.params
        e3 = view.coord_mean(2)
        sigma32, _, _ = _fhn_channel_noise(x1, x3, p)
        g = np.zeros((states.shape[0], 3, 3))
        g[:, 0, 0] = p["sigma_ext"]
        g[:, 1, 2] = sigma32
        g[:, 2, 0] = -p["sigma_J"] * (x1 - p["V_rev"]) * e3
        return g

    def diffusion_state_jac(self, states, view):
        self.check_states(states)
        x1, x3 = states[:, 0], states[:, 2]
        p = self.params
        e3 = view.coord_mean(2)
        _, d31_dx1, d31_dx3 = _fhn_channel_noise(x1, x3, p)
        jac = np.zeros((states.shape[0], 3, 3, 3))
        jac[:, 1, 2, 0] = d31_dx1
        jac[:, 1, 2, 2] = d31_dx3
        jac[:, 2, 0, 0] = -p["sigma_J"] * e3
        return jac

    def lions_diffusion(self, states, view, z_states):
        x1 = states[:, 0]
        p = self.params
        Ny, Nz = states.shape[0], z_states.shape[0]
        d = np.zeros((Ny, Nz, 3, 3, 3))
        d[:, :, 2, 0, 2] = (-p["sigma_J"] * (x1 - p["V_rev"]))[:, None]
        return d

    @property
    def has_measure_diffusion(self):
        return True


class LinearBenchmark(Model):
    """Geometric Brownian motion dX = a X dt + b X dW (no interaction).

    The exact solution X_T = X_0 exp((a - b^2/2) T + b W_T) serves as an
    independent oracle for strong-error measurements.
    """

    name = "linear_benchmark"
    d = 1
    m = 1

    def drift(self, states, view):
        self.check_states(states)
        return self.params["a"] * states

    def diffusion(self, states, view):
        self.check_states(states)
        return (self.params["b"] * states)[:, None, :]

    def diffusion_state_jac(self, states, view):
        self.check_states(states)
        jac = np.full((states.shape[0], 1, 1, 1), self.params["b"])
        return jac

    def exact_terminal(self, initial_states, w_total, T):
        """Closed-form solution at time T given the total increment W_T."""
        a, b = self.params["a"], self.params["b"]
        return initial_states * np.exp((a - 0.5 * b * b) * T + b * w_total)


MODEL_CLASSES = {
    cls.name: cls
    for cls in (DoubleWell, CuckerSmale, FitzHughNagumo, LinearBenchmark)
}

_FHN_PARAMS = {
    "a": 0.7, "b": 0.8, "c": 0.08, "I": 0.5, "sigma_ext": 0.5,
    "V_rev": 1.0, "a_r": 1.0, "a_d": 1.0, "T_max": 1.0, "lambda": 0.2,
    "J": 1.0, "sigma_J": 0.2, "V_T": 2.0, "Gamma": 0.1, "Lambda": 0.5,
}

# named parameter cases; T is the default horizon for each preset
MODEL_PRESETS = {
    "double_well.case1": {
        "name": "double_well",
        "params": {"lambda1": 40.0, "lambda2": 4.0, "mu1": 0.3, "mu2": 2.0},
        "initial_law": {"kind": "normal_product", "means": [0.0],
                        "stds": [1.0]},
        "T": 1.0,
    },
    "double_well.case2": {
        "name": "double_well",
        "params": {"lambda1": 5.0, "lambda2": 1.0, "mu1": 0.1, "mu2": 0.1},
        "initial_law": {"kind": "point", "value": [0.0]},
        "T": 1.0,
    },
    "cucker_smale.case1": {
        "name": "cucker_smale",
        "params": {"lambda1": 139.5, "lambda2": -30.0, "sigma1": 0.8,
                   "sigma2": 100.0},
        "initial_law": {"kind": "multivariate_normal",
                        "mean": [20.0, 30.0],
                        "cov": [[4.0, 3.5], [3.5, 4.0]]},
        "T": 1.0,
    },
    "cucker_smale.case2": {
        "name": "cucker_smale",
        "params": {"lambda1": 1.0, "lambda2": -0.5, "sigma1": 0.01,
                   "sigma2": 0.01},
        "initial_law": {"kind": "normal_product", "means": [0.0, 0.0],
                        "stds": [1.0, 1.0]},
        "T": 1.0,
    },
    "fitzhugh_nagumo.default": {
        "name": "fitzhugh_nagumo",
        "params": dict(_FHN_PARAMS),
        "initial_law": {"kind": "point", "value": [0.0, 1.0, 0.5]},
        "T": 2.0,
    },
    "linear_benchmark.default": {
        "name": "linear_benchmark",
        "params": {"a": 1.0, "b": 0.8},
        "initial_law": {"kind": "point", "value": [1.0]},
        "T": 1.0,
    },
}


def make_model(name, params, initial_law):
    if name not in MODEL_CLASSES:
        raise ConfigError(f"unknown model {name!r}; "
                          f"expected one of {sorted(MODEL_CLASSES)}")
    if isinstance(initial_law, dict):
        initial_law = initial_law_from_dict(initial_law)
    return MODEL_CLASSES[name](params, initial_law)


def model_from_preset(preset, param_overrides=None, initial_law=None):
    if preset not in MODEL_PRESETS:
        raise ConfigError(f"unknown model preset {preset!r}; "
                          f"expected one of {sorted(MODEL_PRESETS)}")
    entry = MODEL_PRESETS[preset]
    params = dict(entry["params"])
    if param_overrides:
        unknown = set(param_overrides) - set(params)
        if unknown:
            raise ConfigError(
                f"unknown parameters {sorted(unknown)} for preset {preset!r}")
        params.update(param_overrides)
    law = initial_law if initial_law is not None else entry["initial_law"]
    return make_model(entry["name"], params, law)


# ---------------------------------------------------------------------------
# pointwise evaluators


def _as_point(model, y):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != model.d:
        raise ShapeError(f"state of length {y.shape[0]} does not match "
                         f"model {model.name!r} with d={model.d}")
    return y


def drift_eval(model, y, measure):
    """Drift vector f(y, rho) at a single state."""
    y = _as_point(model, y)
    return model.drift(y[None, :], measure)[0]


def diffusion_eval(model, j, y, measure):
    """Diffusion column g_j(y, rho) at a single state (j is 0-based)."""
    y = _as_point(model, y)
    if not 0 <= j < model.m:
        raise ShapeError(f"column index {j} out of range for m={model.m}")
    return model.diffusion(y[None, :], measure)[0, j]


def l_y_eval(model, j1, j2, y, measure):
    """State correction (d g_j1 / d y) g_j2 at a single state."""
    y = _as_point(model, y)
    for j in (j1, j2):
        if not 0 <= j < model.m:
            raise ShapeError(f"column index {j} out of range for m={model.m}")
    jac = model.diffusion_state_jac(y[None, :], measure)[0, j1]
    g2 = model.diffusion(y[None, :], measure)[0, j2]
    return jac @ g2


def l_rho_eval(model, j1, j2, y, measure, z):
    """Measure correction (d_rho g_j1)(y, rho, z) g_j2(z, rho)."""
    y = _as_point(model, y)
    z = _as_point(model, z)
    for j in (j1, j2):
        if not 0 <= j < model.m:
            raise ShapeError(f"column index {j} out of range for m={model.m}")
    lions = model.lions_diffusion(y[None, :], measure, z[None, :])[0, 0, j1]
    g2_at_z = model.diffusion(z[None, :], measure)[0, j2]
    return lions @ g2_at_z


# ---------------------------------------------------------------------------
# finite-difference validation


@dataclass
class DerivativeCheckReport:
    model: str
    trials: int
    max_rel_state_jac: float = 0.0
    max_rel_lions: float = 0.0
    skipped_boundary: int = 0
    tol: float = 1e-5
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return bool(self.max_rel_state_jac <= self.tol
                    and self.max_rel_lions <= self.tol)

    def summary(self):
        status = "pass" if self.passed else "FAIL"
        return (f"{self.model}: {status}  "
                f"state_jac={self.max_rel_state_jac:.3g} "
                f"lions={self.max_rel_lions:.3g} "
                f"(tol {self.tol:g}, skipped {self.skipped_boundary})")


def _sample_domain_point(model, rng):
    y = rng.standard_normal(model.d)
    if model.name == "fitzhugh_nagumo":
        y[2] = rng.uniform(0.1, 0.9)  # interior of the channel support
    return y


def _near_fhn_boundary(model, y):
    return (model.name == "fitzhugh_nagumo"
            and (y[2] < 0.05 or y[2] > 0.95))


def _rel_err(approx, ref):
    return (np.linalg.norm(approx - ref)
            / max(1.0, np.linalg.norm(ref)))


def check_derivatives_fd(model, trial_count, rng_seed, tol=1e-5,
                         ensemble_size=16, fd_step=1e-6):
    """Compare closed-form derivatives with finite differences.

    The state Jacobian of every diffusion column is checked against central
    differences in the state.  The Lions derivative is checked against its
    defining limit on empirical measures: move one support point z_k by
    h e_u and scale the change of the coefficient by N / (2h) (central).
    Failures are reported, never raised.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rng = _rng.substream(rng_seed, _rng.PURPOSE_FDCHECK)
    report = DerivativeCheckReport(model=model.name, trials=trial_count,
                                   tol=tol)

    for _ in range(trial_count):
        Z = np.stack([_sample_domain_point(model, rng)
                      for _ in range(ensemble_size)])
        y = _sample_domain_point(model, rng)
        if _near_fhn_boundary(model, y):
            report.skipped_boundary += 1
            continue
        view = MeasureView(Z)

        # state Jacobians, with the measure held fixed
        jac = model.diffusion_state_jac(y[None, :], view)[0]  # (m, d, d)
        fd = np.empty_like(jac)
        for u in range(model.d):
            h = fd_step * max(1.0, abs(y[u]))
            yp, ym = y.copy(), y.copy()
            yp[u] += h
            ym[u] -= h
            gp = model.diffusion(yp[None, :], view)[0]
            gm = model.diffusion(ym[None, :], view)[0]
            fd[:, :, u] = (gp - gm) / (2.0 * h)
        report.max_rel_state_jac = max(report.max_rel_state_jac,
                                       _rel_err(fd, jac))

        # Lions derivatives via support-point perturbation
        k_indices = rng.choice(ensemble_size, size=min(3, ensemble_size),
                               replace=False)
        for k in k_indices:
            if _near_fhn_boundary(model, Z[k]):
                report.skipped_boundary += 1
                continue
            lions = model.lions_diffusion(y[None, :], view,
                                          Z[k][None, :])[0, 0]  # (m, d, d)
            fd_l = np.empty_like(lions)
            for u in range(model.d):
                h = fd_step * max(1.0, abs(Z[k, u]))
                Zp, Zm = Z.copy(), Z.copy()
                Zp[k, u] += h
                Zm[k, u] -= h
                gp = model.diffusion(y[None, :], MeasureView(Zp))[0]
                gm = model.diffusion(y[None, :], MeasureView(Zm))[0]
                fd_l[:, :, u] = ensemble_size * (gp - gm) / (2.0 * h)
            report.max_rel_lions = max(report.max_rel_lions,
                                       _rel_err(fd_l, lions))

    if report.skipped_boundary:
        report.notes.append(
            f"{report.skipped_boundary} boundary points skipped (channel "
            "noise is not differentiable at the support edges)")
    return report


@dataclass
class DissipativityReport:
    """Sampled check of the coercivity inequality behind moment bounds."""

    model: str
    p_bar: float
    max_ratio: float
    samples: int

    @property
    def passed(self):
        # no constant is certified; the spot-check catches blow-ups and
        # reports the sampled constant for inspection
        return bool(np.isfinite(self.max_ratio))

    def summary(self):
        status = "pass" if self.passed else "FAIL"
        return (f"{self.model}: {status}  "
                f"sampled coercivity constant <= {self.max_ratio:.3g} "
                f"over {self.samples} points (p_bar={self.p_bar:g})")


def check_dissipativity(model, sample_count=2000, rng_seed=0, p_bar=426.0,
                        scale_max=50.0):
    """Spot-check 2<y, f> + (p_bar - 1) |g|^2 <= C (1 + |y|^2 + W2^2).

    No finite C is certified (for some parameter cases the admissible
    constant is astronomically large); the check evaluates the ratio on
    sampled states and ensembles up to ``scale_max`` in magnitude and
    reports the maximum, which must be finite.
    """
    rng = _rng.substream(rng_seed, _rng.PURPOSE_VALIDATE, index=1)
    max_ratio = -np.inf
    for _ in range(sample_count):
        scale = 10.0 ** rng.uniform(-1, np.log10(scale_max))
        Z = scale * np.stack([_sample_domain_point(model, rng)
                              for _ in range(8)])
        if model.name == "fitzhugh_nagumo":
            Z[:, 2] = rng.uniform(0.1, 0.9, size=8)
        view = MeasureView(Z)
        y = Z[0]
        f = drift_eval(model, y, view)
        g = model.diffusion(y[None, :], view)[0]  # (m, d)
        lhs = 2.0 * float(y @ f) + (p_bar - 1.0) * float(np.sum(g * g))
        rhs = 1.0 + float(y @ y) + view.w2_to_origin() ** 2
        max_ratio = max(max_ratio, lhs / rhs)
    return DissipativityReport(model=model.name, p_bar=p_bar,
                               max_ratio=float(max_ratio),
                               samples=sample_count)
