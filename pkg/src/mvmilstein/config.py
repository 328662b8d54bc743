"""JSON run configuration: parsing, validation, defaults, echo.

A run is described by four blocks plus a seed::

    {
      "model":  {"preset": "double_well.case2"},          # or name/params
      "scheme": {"kind": "taming_milstein", "taming": "tanh",
                 "dt": "2^-6", "T": 1.0, "N": 100},
      "experiment": { ... subcommand specific ... },
      "io":     {"output_dir": "out"},
      "seed":   1
    }

Unknown keys are rejected everywhere.  Step sizes may be written as plain
numbers or as power-of-two strings like ``"2^-10"``.  The fully resolved
configuration (all defaults materialised) is echoed next to the outputs and
is itself a valid configuration.
"""

import json
import os
from dataclasses import dataclass

from .brownian import DEFAULT_K
from .engine import SCHEME_KINDS, SchemeConfig
from .errors import ConfigError
from .models import MODEL_PRESETS, Model, make_model, model_from_preset
from .taming import TAMING_PRESETS, resolve_taming

ENV_OUTPUT_DIR = "MVMILSTEIN_OUTPUT_DIR"

_TOP_KEYS = {"model", "scheme", "experiment", "io", "seed"}
_MODEL_KEYS = {"preset", "name", "params", "initial_law"}
_SCHEME_KEYS = {"kind", "taming", "dt", "dt_list", "ref_dt", "T", "N",
                "include_measure_term", "wiktorsson_K", "blow_up_threshold",
                "cross_N_ceiling"}
_IO_KEYS = {"output_dir", "snapshot_times"}

_EXPERIMENT_KEYS = {
    "simulate": set(),
    "converge": {"schemes", "seeds", "mse_mode"},
    "validate": {"kinds", "sample_count", "dt_grid", "magnitude_range",
                 "fd_trials", "fd_tol", "dissipativity_samples"},
    "moments": {"p", "dt_list"},
    "probe": set(),
}

SUBCOMMANDS = tuple(sorted(_EXPERIMENT_KEYS))


def parse_step(value, what="dt"):
    """Accept a number or a power string like '2^-6' / '2**-6'."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        out = float(value)
    elif isinstance(value, str):
        s = value.replace("**", "^").strip()
        if s.startswith("2^"):
            try:
                out = 2.0 ** float(s[2:])
            except ValueError:
                raise ConfigError(f"cannot parse {what} value {value!r}")
        else:
            try:
                out = float(s)
            except ValueError:
                raise ConfigError(f"cannot parse {what} value {value!r}")
    else:
        raise ConfigError(f"cannot parse {what} value {value!r}")
    if out <= 0:
        raise ConfigError(f"{what} must be positive, got {out}")
    return out


def _reject_unknown(block, allowed, where):
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(
            f"unknown key(s) {sorted(unknown)} in {where} block; "
            f"allowed: {sorted(allowed)}")


def _require(block, key, where):
    if key not in block:
        raise ConfigError(f"missing required key {key!r} in {where} block")
    return block[key]


@dataclass
class RunConfig:
    model: Model
    model_block: dict
    scheme: dict
    experiment: dict
    io: dict
    seed: int

    @property
    def N(self):
        return self.scheme["N"]

    def resolved(self):
        """Full configuration with all defaults materialised."""
        return {
            "model": dict(self.model_block),
            "scheme": dict(self.scheme),
            "experiment": dict(self.experiment),
            "io": dict(self.io),
            "seed": self.seed,
        }

    def scheme_config(self, dt=None, kind=None, taming=None):
        s = self.scheme
        if dt is None:
            if "dt" not in s:
                raise ConfigError("scheme block needs a 'dt' entry")
            dt = s["dt"]
        return SchemeConfig(
            kind=kind if kind is not None else s["kind"],
            taming=taming if taming is not None else tuple(s["taming"]),
            dt=dt,
            T=s["T"],
            include_measure_term=s["include_measure_term"],
            blow_up_threshold=s["blow_up_threshold"],
            cross_N_ceiling=s["cross_N_ceiling"],
            wiktorsson_K=s["wiktorsson_K"],
        )


def _resolve_model_block(block):
    _reject_unknown(block, _MODEL_KEYS, "model")
    if "preset" in block:
        preset = block["preset"]
        if preset not in MODEL_PRESETS:
            raise ConfigError(f"unknown model preset {preset!r}; expected "
                              f"one of {sorted(MODEL_PRESETS)}")
        model = model_from_preset(preset, block.get("params"),
                                  block.get("initial_law"))
        default_T = MODEL_PRESETS[preset]["T"]
    else:
        name = _require(block, "name", "model")
        params = _require(block, "params", "model")
        law = _require(block, "initial_law", "model")
        model = make_model(name, params, law)
        default_T = None
    described = model.describe()
    # the echo must itself be a valid configuration: only config keys
    resolved = {"name": described["name"], "params": described["params"],
                "initial_law": described["initial_law"]}
    return model, resolved, default_T


def _resolve_scheme_block(block, default_T):
    _reject_unknown(block, _SCHEME_KEYS, "scheme")
    kind = block.get("kind", "taming_milstein")
    if kind not in SCHEME_KINDS:
        raise ConfigError(f"unknown scheme kind {kind!r}; "
                          f"expected one of {SCHEME_KINDS}")
    taming_in = block.get("taming", "tanh")
    if (isinstance(taming_in, str) and taming_in not in TAMING_PRESETS):
        raise ConfigError(
            f"unknown taming kind {taming_in!r}; expected a preset or kind "
            f"from {sorted(TAMING_PRESETS)}")
    taming = resolve_taming(taming_in)

    out = {
        "kind": kind,
        "taming": list(taming.kinds),
        "T": float(block.get("T", default_T if default_T else 1.0)),
        "N": int(block.get("N", 100)),
        "include_measure_term": bool(block.get("include_measure_term",
                                               False)),
        "wiktorsson_K": int(block.get("wiktorsson_K", DEFAULT_K)),
        "blow_up_threshold": float(block.get("blow_up_threshold", 1e10)),
        "cross_N_ceiling": int(block.get("cross_N_ceiling", 64)),
    }
    if out["N"] < 1:
        raise ConfigError(f"N must be >= 1, got {out['N']}")
    if "dt" in block:
        out["dt"] = parse_step(block["dt"], "dt")
    if "dt_list" in block:
        out["dt_list"] = [parse_step(v, "dt_list entry")
                          for v in block["dt_list"]]
    if "ref_dt" in block:
        out["ref_dt"] = parse_step(block["ref_dt"], "ref_dt")
    if out["include_measure_term"] and out["N"] > out["cross_N_ceiling"]:
        raise ConfigError(
            f"include_measure_term requires N <= cross_N_ceiling "
            f"({out['cross_N_ceiling']}), got N={out['N']}")
    return out


def load_config(data, seed_override=None, out_override=None):
    """Validate a configuration dict and materialise all defaults."""
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a JSON object")
    _reject_unknown(data, _TOP_KEYS, "top-level")
    model, model_resolved, default_T = _resolve_model_block(
        _require(data, "model", "top-level"))
    scheme = _resolve_scheme_block(data.get("scheme", {}), default_T)

    io_block = dict(data.get("io", {}))
    _reject_unknown(io_block, _IO_KEYS, "io")
    io = {"output_dir": io_block.get("output_dir", "out")}
    if "snapshot_times" in io_block:
        io["snapshot_times"] = [float(t) for t in io_block["snapshot_times"]]
    env_dir = os.environ.get(ENV_OUTPUT_DIR)
    if env_dir:
        io["output_dir"] = env_dir
    if out_override:
        io["output_dir"] = out_override

    seed = data.get("seed", 0)
    if seed_override is not None:
        seed = seed_override
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")

    experiment = dict(data.get("experiment", {}))
    return RunConfig(model=model, model_block=model_resolved, scheme=scheme,
                     experiment=experiment, io=io, seed=seed)


def parse_config(path, seed_override=None, out_override=None):
    """Read and validate a JSON configuration file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}")
    return load_config(data, seed_override, out_override)


def validate_experiment_block(cfg, subcommand):
    if subcommand not in _EXPERIMENT_KEYS:
        raise ConfigError(f"unknown subcommand {subcommand!r}; expected one "
                          f"of {SUBCOMMANDS}")
    _reject_unknown(cfg.experiment, _EXPERIMENT_KEYS[subcommand],
                    f"experiment ({subcommand})")


def write_config_echo(cfg, out_dir):
    path = os.path.join(out_dir, "config_echo.json")
    with open(path, "w") as fh:
        json.dump(cfg.resolved(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def scheme_entries(cfg):
    """Expand the converge experiment's scheme list into labelled configs.

    Each entry is a taming preset name ("tanh", "sine", "tamed", "mixed"),
    one of the scheme kinds ("classical_milstein", "tamed_euler"), or a
    dict {"label", "kind", "taming"}.
    """
    entries = cfg.experiment.get("schemes",
                                 ["tanh", "sine", "tamed", "mixed"])
    # template step size; the study overrides it per cell
    template_dt = cfg.scheme.get("dt")
    if template_dt is None:
        dts = cfg.scheme.get("dt_list")
        template_dt = dts[0] if dts else cfg.scheme["T"]
    out = {}
    for entry in entries:
        if isinstance(entry, str):
            if entry == "classical_milstein":
                label, kind, taming = entry, entry, "identity"
            elif entry == "tamed_euler":
                label, kind, taming = entry, entry, tuple(
                    cfg.scheme["taming"])
            elif entry in TAMING_PRESETS and entry != "identity":
                label, kind, taming = entry, "taming_milstein", entry
            else:
                raise ConfigError(f"unknown scheme entry {entry!r}")
        elif isinstance(entry, dict):
            _reject_unknown(entry, {"label", "kind", "taming"},
                            "scheme entry")
            kind = entry.get("kind", "taming_milstein")
            taming = entry.get("taming", "tanh")
            label = entry.get("label",
                              kind if kind != "taming_milstein" else
                              (taming if isinstance(taming, str)
                               else "+".join(taming)))
        else:
            raise ConfigError(f"invalid scheme entry {entry!r}")
        if label in out:
            raise ConfigError(f"duplicate scheme label {label!r}")
        out[label] = cfg.scheme_config(dt=template_dt, kind=kind,
                                       taming=taming)
    return out
