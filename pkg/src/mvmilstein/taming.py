"""Taming operators for explicit schemes with superlinear coefficients.

A taming operator maps a coefficient vector ``v`` and a step size ``dt`` to
a bounded modification whose magnitude never exceeds a negative power of
``dt``.  Four kinds are supported:

* ``identity`` -- no modification (unbounded; classical scheme only),
* ``tanh``     -- componentwise ``dt**-1 * tanh(dt * v)``,
* ``sine``     -- componentwise ``dt**-1 * sin(dt * v)``,
* ``tamed``    -- ``v / (1 + dt * |v|)`` with the Euclidean norm of ``v``.

Each scheme carries four operator slots (drift, diffusion, state correction,
measure correction); the slots may mix kinds.  ``verify_taming_assumptions``
samples the boundedness and small-``dt`` consistency inequalities the
convergence theory needs and reports worst-case ratios.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .errors import ConfigError

KINDS = ("identity", "tanh", "sine", "tamed")
KIND_CODES = {"identity": 0, "tanh": 1, "sine": 2, "tamed": 3}

# slots 1 and 2 multiply dt and dW and need first-order consistency;
# slots 3 and 4 multiply second-order integrals and may be weaker
_MIN_DELTA = (1.0, 1.0, 0.5, 0.5)


@dataclass(frozen=True)
class TamingSlot:
    """One operator slot with its declared exponents.

    ``zeta`` bounds the operator by ``C * dt**-zeta``; ``delta`` and
    ``gamma_exp`` bound the modification error by ``C * dt**delta *
    |v|**gamma_exp``.  All four named families have (1, 1, 2); identity has
    no finite bound and carries ``zeta=None``.
    """

    kind: str
    zeta: float | None = 1.0
    delta: float = 1.0
    gamma_exp: float = 2.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(
                f"unknown taming kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "identity":
            object.__setattr__(self, "zeta", None)
        elif self.zeta is None or self.zeta <= 0:
            raise ConfigError(f"zeta must be positive, got {self.zeta}")
        if self.gamma_exp < 1:
            raise ConfigError(f"gamma_exp must be >= 1, got {self.gamma_exp}")

    @property
    def unbounded(self):
        return self.kind == "identity"


@dataclass(frozen=True)
class TamingSpec:
    """The four operator slots of one scheme."""

    slots: tuple = field(default_factory=lambda: (
        TamingSlot("tanh"),) * 4)

    def __post_init__(self):
        if len(self.slots) != 4:
            raise ConfigError(f"expected 4 taming slots, got {len(self.slots)}")
        for i, slot in enumerate(self.slots):
            if slot.delta < _MIN_DELTA[i]:
                raise ConfigError(
                    f"slot {i + 1} requires delta >= {_MIN_DELTA[i]}, "
                    f"got {slot.delta}")

    @classmethod
    def from_kinds(cls, kinds):
        """Build a spec from four kind names (or one name for all slots)."""
        if isinstance(kinds, str):
            kinds = (kinds,) * 4
        if len(kinds) != 4:
            raise ConfigError(f"expected 4 slot kinds, got {len(kinds)}")
        return cls(tuple(TamingSlot(k) for k in kinds))

    @property
    def kinds(self):
        return tuple(s.kind for s in self.slots)

    @property
    def has_identity(self):
        return any(s.unbounded for s in self.slots)

    def label(self):
        return "+".join(self.kinds)


# named slot layouts; "mixed" tames the drift and measure correction with
# tanh, the diffusion with sine and the state correction with the norm ratio
TAMING_PRESETS = {
    "tanh": ("tanh",) * 4,
    "sine": ("sine",) * 4,
    "tamed": ("tamed",) * 4,
    "mixed": ("tanh", "sine", "tamed", "tanh"),
    "identity": ("identity",) * 4,
}


def resolve_taming(spec):
    """Accept a TamingSpec, preset name, kind name, or 4-sequence of kinds."""
    if isinstance(spec, TamingSpec):
        return spec
    if isinstance(spec, str):
        return TamingSpec.from_kinds(TAMING_PRESETS.get(spec, spec))
    return TamingSpec.from_kinds(tuple(spec))


def gamma_apply(slot, value, dt):
    """Apply one taming slot to a coefficient vector.

    ``value`` may have any length; tanh and sine act componentwise while
    tamed rescales by the Euclidean norm of the whole vector.  Non-finite
    input is rejected rather than silently propagated.
    """
    kind = slot.kind if isinstance(slot, TamingSlot) else slot
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    v = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError(
            f"non-finite input to taming operator {kind!r}: {value!r}")
    if kind == "identity":
        return v.copy()
    if kind == "tanh":
        return np.tanh(dt * v) / dt
    if kind == "sine":
        return np.sin(dt * v) / dt
    if kind == "tamed":
        return v / (1.0 + dt * np.linalg.norm(v))
    raise ConfigError(f"unknown taming kind {kind!r}")


def apply_batched(arr, dt, kind_code):
    """Apply a taming kind over the last axis of an array.

    This is the reference semantics the step kernels must reproduce: the
    last axis is the state dimension, i.e. the "vector" each operator sees.
    """
    if kind_code == 0:
        return arr
    if kind_code == 1:
        return np.tanh(dt * arr) / dt
    if kind_code == 2:
        return np.sin(dt * arr) / dt
    if kind_code == 3:
        norms = np.sqrt(np.sum(arr * arr, axis=-1, keepdims=True))
        return arr / (1.0 + dt * norms)
    raise ConfigError(f"unknown taming kind code {kind_code}")


@dataclass
class TamingCheckReport:
    """Outcome of sampling the operator inequalities for one slot kind."""

    kind: str
    sample_count: int
    dt_grid: tuple
    # (a) |G(v)| <= C * dt**-zeta  and  |G(v)| <= |v|
    bound_checked: bool = True
    max_bound_ratio: float = 0.0
    max_contraction_ratio: float = 0.0
    # (b) |G(v) - v| <= C * dt**delta * |v|**gamma on the consistency regime
    max_consistency_ratio: float = 0.0
    # large components: |G(v)_i - v_i| <= 2 |v_i|, and <= dt v_i^2 once
    # |v_i| >= 2 / dt
    max_large_ratio: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        slack = 1.0 + 1e-12
        ok = (self.max_contraction_ratio <= slack
              and self.max_consistency_ratio <= slack
              and self.max_large_ratio <= slack)
        if self.bound_checked:
            ok = ok and self.max_bound_ratio <= slack
        return bool(ok)

    def summary(self):
        status = "pass" if self.passed else "FAIL"
        extra = "" if self.bound_checked else " (dt-bound unverifiable)"
        return (f"{self.kind}: {status}{extra}  "
                f"bound={self.max_bound_ratio:.3g} "
                f"contraction={self.max_contraction_ratio:.3g} "
                f"consistency={self.max_consistency_ratio:.3g} "
                f"large={self.max_large_ratio:.3g}")


def _ratio_max(num, den):
    mask = den > 0
    if not np.any(mask):
        return 0.0
    return float(np.max(num[mask] / den[mask]))


def verify_taming_assumptions(slot, sample_count, dt_grid, magnitude_range,
                              rng_seed):
    """Sample the boundedness and consistency inequalities for one slot.

    Vectors are drawn with lengths cycling through 1..4, random signs, and
    component magnitudes log-uniform in ``[1e-6, magnitude_range]``.  For
    componentwise kinds the dimension constant ``sqrt(length)`` absorbs the
    l2-vs-componentwise gap; the tamed kind uses constant 1.  Components
    with ``dt * |v_i| > 1`` are outside the cubic consistency regime and are
    checked against the boundedness route, plus the coarse two-sided bound.
    """
    slot = slot if isinstance(slot, TamingSlot) else TamingSlot(slot)
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    dt_grid = tuple(float(dt) for dt in dt_grid)
    if not dt_grid:
        raise ValueError("dt_grid must be nonempty")

    report = TamingCheckReport(kind=slot.kind, sample_count=sample_count,
                               dt_grid=dt_grid)
    if slot.unbounded:
        report.bound_checked = False
        report.notes.append(
            "identity operator is unbounded: no dt**-zeta bound exists, "
            "bound (a) is unverifiable")

    rng = _rng.substream(rng_seed, _rng.PURPOSE_VALIDATE)
    lengths = [1 + (i % 4) for i in range(4)]
    per_len = max(1, sample_count // len(lengths))

    for dim in lengths:
        log_lo, log_hi = np.log10(1e-6), np.log10(magnitude_range)
        mags = 10.0 ** rng.uniform(log_lo, log_hi, size=(per_len, dim))
        signs = rng.choice([-1.0, 1.0], size=(per_len, dim))
        v = mags * signs
        vnorm = np.linalg.norm(v, axis=1)
        c_dim = 1.0 if slot.kind == "tamed" else np.sqrt(dim)

        for dt in dt_grid:
            # rows are independent sample vectors
            g = apply_batched(v, dt, KIND_CODES[slot.kind])
            gnorm = np.linalg.norm(g, axis=1)

            if not slot.unbounded:
                cap = c_dim * dt ** (-slot.zeta)
                report.max_bound_ratio = max(report.max_bound_ratio,
                                             float(np.max(gnorm / cap)))
            report.max_contraction_ratio = max(
                report.max_contraction_ratio, _ratio_max(gnorm, vnorm))

            # the measured difference carries absolute rounding noise of a
            # few ulps of |v|; allow for it so the check tests the operator
            # inequality, not float cancellation
            fp_allow = 8.0 * np.finfo(np.float64).eps
            diff = g - v
            if slot.kind == "tamed":
                den = (dt ** slot.delta * vnorm ** slot.gamma_exp
                       + fp_allow * vnorm)
                ratio = _ratio_max(np.linalg.norm(diff, axis=1), den)
                report.max_consistency_ratio = max(
                    report.max_consistency_ratio, ratio)
            elif slot.kind == "identity":
                pass  # diff is identically zero
            else:
                in_regime = np.abs(dt * v) <= 1.0
                small = np.where(in_regime, diff, 0.0)
                num = np.linalg.norm(small, axis=1)
                den = (c_dim * dt ** slot.delta * vnorm ** slot.gamma_exp
                       + fp_allow * vnorm)
                report.max_consistency_ratio = max(
                    report.max_consistency_ratio, _ratio_max(num, den))
                # coarse route for saturated components
                big = ~in_regime
                if np.any(big):
                    r1 = _ratio_max(np.abs(diff[big]), 2.0 * np.abs(v[big]))
                    report.max_large_ratio = max(report.max_large_ratio, r1)
                    far = big & (np.abs(v) >= 2.0 / dt)
                    if np.any(far):
                        r2 = _ratio_max(np.abs(diff[far]),
                                        dt * v[far] ** 2)
                        report.max_large_ratio = max(report.max_large_ratio,
                                                     r2)
    return report
