"""Command-line entry point.

Subcommands over one JSON configuration:

* ``simulate`` -- run the configured scheme, write particle snapshots;
* ``converge`` -- coupled fine/coarse convergence study with slope fits;
* ``validate`` -- taming-operator inequalities, finite-difference checks of
  the hand-derived coefficient derivatives, coercivity spot-check;
* ``moments``  -- empirical p-th moment series over a step-size grid;
* ``probe``    -- blow-up statistics of the configured scheme.

Flags beyond ``--config`` are ``--seed``, ``--out`` and ``--threads``;
``--threads`` affects wallclock only, never the results.  Every output
directory receives the fully resolved configuration echo; rerunning with it
reproduces the outputs.
"""

import argparse
import csv
import json
import os
import sys
import threading
from concurrent.futures import ThreadPoolExecutor

from . import __version__, experiments
from ._kernels import KERNEL
from .config import (SUBCOMMANDS, parse_config, parse_step, scheme_entries,
                     validate_experiment_block, write_config_echo)
from .engine import run_simulation, write_snapshot_csv
from .errors import ConfigError, Error
from .models import check_derivatives_fd, check_dissipativity
from .taming import TamingSlot, verify_taming_assumptions


def _out_dir(cfg):
    path = cfg.io["output_dir"]
    os.makedirs(path, exist_ok=True)
    return path


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_simulate(cfg, threads):
    out = _out_dir(cfg)
    scheme_cfg = cfg.scheme_config()
    snapshot_times = cfg.io.get("snapshot_times")
    record = run_simulation(cfg.model, scheme_cfg, cfg.N, cfg.seed,
                            snapshot_times=snapshot_times)
    write_snapshot_csv(record, os.path.join(out, "snapshots.csv"))
    write_config_echo(cfg, out)
    print(f"simulate: {cfg.model.name} N={cfg.N} dt={scheme_cfg.dt} "
          f"blown={record.blown_fraction:.3f} -> {out}")
    return 0


def _cmd_converge(cfg, threads):
    out = _out_dir(cfg)
    if "dt_list" not in cfg.scheme or "ref_dt" not in cfg.scheme:
        raise ConfigError("converge needs scheme.dt_list and scheme.ref_dt")
    dt_list = cfg.scheme["dt_list"]
    ref_dt = cfg.scheme["ref_dt"]
    seeds = cfg.experiment.get("seeds", [cfg.seed])
    mse_mode = cfg.experiment.get("mse_mode", "terminal")
    schemes = scheme_entries(cfg)

    csv_path = os.path.join(out, "convergence.csv")
    done = experiments.completed_keys(csv_path)
    lock = threading.Lock()

    def persist(record):
        with lock:
            experiments.write_records_csv([record], csv_path, append=True)

    def run_seed(seed):
        return experiments.run_convergence_study(
            cfg.model, schemes, dt_list, ref_dt, cfg.N, seed,
            skip_keys=done, on_record=persist, mse_mode=mse_mode)

    if threads > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_seed, seeds))
    else:
        for seed in seeds:
            run_seed(seed)

    # canonical order: resumable appends above, deterministic file here
    records = experiments.read_records_csv(csv_path)
    records.sort(key=lambda r: (r.model, r.scheme, r.taming, -r.dt, r.seed))
    experiments.write_records_csv(records, csv_path, append=False)

    summary = {"model": cfg.model.name, "N": cfg.N, "ref_dt": ref_dt,
               "seeds": list(seeds), "schemes": {}}
    pooled = experiments.pool_records_rms(records)
    for label in schemes:
        subset = [r for r in pooled if r.scheme == label]
        try:
            fit = experiments.fit_order(subset)
            summary["schemes"][label] = {
                "slope": fit.slope, "intercept": fit.intercept,
                "residual_norm": fit.residual_norm, "n_used": fit.n_used,
                "n_excluded": fit.n_excluded,
            }
        except Error as exc:
            summary["schemes"][label] = {"error": str(exc)}
    _dump_json(summary, os.path.join(out, "convergence_summary.json"))
    write_config_echo(cfg, out)
    for label, fit in sorted(summary["schemes"].items()):
        if "slope" in fit:
            print(f"converge: {label} slope={fit['slope']:.3f} "
                  f"residual={fit['residual_norm']:.3f}")
        else:
            print(f"converge: {label} {fit['error']}")
    return 0


def _cmd_validate(cfg, threads):
    out = _out_dir(cfg)
    exp = cfg.experiment
    kinds = exp.get("kinds", ["identity", "tanh", "sine", "tamed"])
    sample_count = int(exp.get("sample_count", 100000))
    dt_grid = [float(v) for v in exp.get(
        "dt_grid", [2.0 ** -k for k in range(4, 11)])]
    magnitude_range = float(exp.get("magnitude_range", 1e6))
    fd_trials = int(exp.get("fd_trials", 100))
    fd_tol = float(exp.get("fd_tol", 1e-5))
    diss_samples = int(exp.get("dissipativity_samples", 2000))

    report = {"taming": {}, "derivatives": {}, "dissipativity": {}}
    all_passed = True
    for kind in kinds:
        r = verify_taming_assumptions(TamingSlot(kind), sample_count,
                                      dt_grid, magnitude_range, cfg.seed)
        report["taming"][kind] = {
            "passed": r.passed, "bound_checked": r.bound_checked,
            "max_bound_ratio": r.max_bound_ratio,
            "max_contraction_ratio": r.max_contraction_ratio,
            "max_consistency_ratio": r.max_consistency_ratio,
            "max_large_ratio": r.max_large_ratio, "notes": r.notes,
        }
        all_passed &= r.passed
        print(f"validate taming {r.summary()}")

    fd = check_derivatives_fd(cfg.model, fd_trials, cfg.seed, tol=fd_tol)
    report["derivatives"][cfg.model.name] = {
        "passed": fd.passed, "max_rel_state_jac": fd.max_rel_state_jac,
        "max_rel_lions": fd.max_rel_lions,
        "skipped_boundary": fd.skipped_boundary, "notes": fd.notes,
    }
    all_passed &= fd.passed
    print(f"validate derivatives {fd.summary()}")

    diss = check_dissipativity(cfg.model, diss_samples, cfg.seed)
    report["dissipativity"][cfg.model.name] = {
        "passed": diss.passed, "max_ratio": diss.max_ratio,
        "p_bar": diss.p_bar, "samples": diss.samples,
    }
    all_passed &= diss.passed
    print(f"validate dissipativity {diss.summary()}")

    report["all_passed"] = all_passed
    _dump_json(report, os.path.join(out, "validation_report.json"))
    write_config_echo(cfg, out)
    return 0 if all_passed else 1


def _cmd_moments(cfg, threads):
    out = _out_dir(cfg)
    p = float(cfg.experiment.get("p", 4))
    raw = cfg.experiment.get("dt_list")
    if raw is not None:
        dt_list = [parse_step(v, "dt_list entry") for v in raw]
    else:
        dt_list = cfg.scheme.get("dt_list") or [cfg.scheme_config().dt]
    series = []
    for dt in dt_list:
        scheme_cfg = cfg.scheme_config(dt=float(dt))
        series.append(experiments.moment_monitor(
            cfg.model, scheme_cfg, cfg.N, cfg.seed, p))

    csv_path = os.path.join(out, "moments.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dt", "time", "moment", "excluded"])
        for s in series:
            for t, v, e in zip(s.times, s.values, s.excluded):
                writer.writerow([repr(float(s.dt)), repr(float(t)),
                                 repr(float(v)), int(e)])
    suprema = {repr(float(s.dt)): s.supremum for s in series}
    finite = [v for v in suprema.values() if v == v]
    ratio = (max(finite) / min(finite)) if len(finite) >= 2 else None
    summary = {"p": p, "suprema": suprema, "sup_ratio_max_over_min": ratio,
               "max_excluded": max(s.max_excluded for s in series)}
    _dump_json(summary, os.path.join(out, "moments_summary.json"))
    write_config_echo(cfg, out)
    print(f"moments: p={p} suprema ratio="
          f"{ratio if ratio is None else round(ratio, 4)}")
    return 0


def _cmd_probe(cfg, threads):
    out = _out_dir(cfg)
    scheme_cfg = cfg.scheme_config()
    report = experiments.divergence_probe(cfg.model, scheme_cfg, cfg.N,
                                          cfg.seed)
    _dump_json(report.as_dict(), os.path.join(out, "probe_report.json"))
    times_path = os.path.join(out, "first_blowup_times.csv")
    with open(times_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["first_blowup_time"])
        for t in report.first_blowup_times:
            writer.writerow([repr(float(t))])
    write_config_echo(cfg, out)
    print(f"probe: {report.scheme} blown_fraction="
          f"{report.blown_fraction:.3f}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "converge": _cmd_converge,
    "validate": _cmd_validate,
    "moments": _cmd_moments,
    "probe": _cmd_probe,
}


def execute_command(subcommand, cfg, threads=1):
    """Dispatch one subcommand on a parsed configuration."""
    if subcommand not in _COMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}; expected one "
                          f"of {SUBCOMMANDS}")
    validate_experiment_block(cfg, subcommand)
    return _COMMANDS[subcommand](cfg, threads)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mvmilstein",
        description="Taming Milstein schemes for mean-field particle "
                    "systems")
    parser.add_argument("--version", action="version",
                        version=f"mvmilstein {__version__} (kernel {KERNEL})")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True,
                       help="path to the JSON run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the configuration seed")
        p.add_argument("--out", default=None,
                       help="override the output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (wallclock only, results are "
                            "independent of this)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, seed_override=args.seed,
                           out_override=args.out)
        return execute_command(args.subcommand, cfg,
                               threads=max(1, args.threads))
    except Error as exc:
        json.dump({"error": {"type": type(exc).__name__,
                             "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
