"""``schedlab`` command-line entry point.

Exit codes: 0 success, 1 a validation band was violated, 2 usage error,
3 I/O or data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .bounds import bound_for_plan
from .dataset import (
    Dataset, dataset_stats, find_cifar10_batches, load_cifar10, load_raw_tensor, save_raw_tensor,
    synth_points, synth_single_point,
)
from .errors import MalformedFileError, NoSupportError
from .parallel import set_threads
from .posterior import PosteriorConfig, posterior_profile
from .report import SCHEMA_VERSION, csv_text, emit_svg_lineplot, json_text, write_csv, write_json
from .sampler import paired_divergence, run_sampler
from .schedules import FAMILIES, ScheduleSpec, make_time_grid, sampler_coefficients
from .theory import TSTARS, reproduce_bound_table, concentration_table, validate_variance_scaling

EXIT_OK, EXIT_VALIDATION, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

# Built-in defaults; a config file overrides these and flags override both.
DEFAULTS = {
    "seed": 0, "threads": None, "out": None, "format": "csv",
    "dataset": None, "input_format": "auto", "normalization": None,
    "synthetic": None, "synth_n": 2, "synth_d": 2, "synth_fill": "uniform_pm1", "synth_seed": 0,
    "family": "fm", "T": None, "k1": 1e-4, "k2": 2e-2, "sigma_d": 0.5, "rho": 7.0, "t_min": 0.002,
    "t_max": 80.0, "edm_grid": "zero_end",
    "coarse_n": 100, "refine_n": 100, "drop_nats": 40.0, "single_stage": False,
    "tstar": list(TSTARS), "samples": 25, "steps": 100, "probe_eps": 0.01, "probe_samples": 10,
    "lam": None, "mode": "paired", "seeds": "0", "d_list": [256, 1024, 4096], "families": ["ddim", "edm", "fm", "uedm"],
    "svg": True,
}
NORMALIZATION_NAMES = {"unit": "unit_range", "edm": "edm_scaled", "none": "none"}


class UsageError(Exception):
    pass


def _floats(s: str) -> list:
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}")


def _ints(s: str) -> list:
    return [int(v) for v in _floats(s)]


def _names(s: str) -> list:
    return [v.strip() for v in s.split(",") if v.strip()]


def parse_seeds(spec) -> list:
    """``"0..49"`` (inclusive), ``"1,4,9"`` or a single integer."""
    if isinstance(spec, (list, tuple)):
        return [int(s) for s in spec]
    spec = str(spec)
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in spec.split(",") if s.strip()]


# -- parser -----------------------------------------------------------------


def _common(include_format: bool = True) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    g.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads for dataset scans")
    g.add_argument("--out", default=argparse.SUPPRESS,
                   help="output directory, or a .csv/.json file for the primary table")
    if include_format:
        g.add_argument("--format", choices=["csv", "json"], default=argparse.SUPPRESS,
                       help="stdout format when --out is not given")
    g.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file (nested sections allowed)")
    return p


def _data_args(p, input_format_flag="--input-format"):
    g = p.add_argument_group("dataset")
    g.add_argument("--dataset", "--input", dest="dataset", default=argparse.SUPPRESS,
                   help="CIFAR-10 batch directory/file or raw f32 tensor with a .json sidecar")
    g.add_argument(input_format_flag, dest="input_format", choices=["auto", "cifar10", "raw"],
                   default=argparse.SUPPRESS)
    g.add_argument("--normalization", choices=list(NORMALIZATION_NAMES), default=argparse.SUPPRESS)
    g.add_argument("--synthetic", choices=["single", "points", "gaussian", "two-point"], default=argparse.SUPPRESS,
                   help="use a generated dataset instead of --dataset")
    g.add_argument("--synth-n", type=int, default=argparse.SUPPRESS)
    g.add_argument("--synth-d", type=int, default=argparse.SUPPRESS)
    g.add_argument("--synth-fill", default=argparse.SUPPRESS, help="'uniform_pm1' or a constant")
    g.add_argument("--synth-seed", type=int, default=argparse.SUPPRESS)


def _schedule_args(p):
    g = p.add_argument_group("schedule")
    g.add_argument("--family", choices=FAMILIES, default=argparse.SUPPRESS)
    g.add_argument("--T", type=int, default=argparse.SUPPRESS)
    g.add_argument("--k1", type=float, default=argparse.SUPPRESS)
    g.add_argument("--k2", type=float, default=argparse.SUPPRESS)
    g.add_argument("--sigma-d", type=float, default=argparse.SUPPRESS)
    g.add_argument("--rho", type=float, default=argparse.SUPPRESS)
    g.add_argument("--t-min", type=float, default=argparse.SUPPRESS)
    g.add_argument("--t-max", type=float, default=argparse.SUPPRESS)
    g.add_argument("--edm-grid", choices=["zero_end", "tmin_end"], default=argparse.SUPPRESS)


def _posterior_args(p):
    g = p.add_argument_group("posterior grid")
    g.add_argument("--coarse-n", type=int, default=argparse.SUPPRESS)
    g.add_argument("--refine-n", type=int, default=argparse.SUPPRESS)
    g.add_argument("--drop-nats", type=float, default=argparse.SUPPRESS)
    g.add_argument("--single-stage", action="store_true", default=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="schedlab", parents=[common],
                                     description="Noise-level posteriors, effective targets and error bounds.")
    parser.add_argument("--version", action="version", version=f"schedlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ds = sub.add_parser("dataset", help="dataset utilities")
    ds_sub = ds.add_subparsers(dest="action", required=True)
    stats = ds_sub.add_parser("stats", parents=[_common(include_format=False)], help="sigma_d, mean, N, d")
    _data_args(stats, input_format_flag="--format")
    stats.add_argument("--output-format", dest="format", choices=["csv", "json"], default=argparse.SUPPRESS)

    post = sub.add_parser("posterior", parents=[common], help="posterior variance of t per t*")
    targ = sub.add_parser("targets", parents=[common], help="E(z), |R(z)|^2 and Var[t|z] per t*")
    for p in (post, targ):
        _data_args(p)
        _schedule_args(p)
        _posterior_args(p)
        p.add_argument("--tstar", type=_floats, default=argparse.SUPPRESS)
        p.add_argument("--samples", type=int, default=argparse.SUPPRESS)

    bound = sub.add_parser("bound", parents=[common], help="accumulated error bound for one family")
    samp = sub.add_parser("sample", parents=[common], help="oracle sampler runs")
    for p in (bound, samp):
        _data_args(p)
        _schedule_args(p)
        _posterior_args(p)
        p.add_argument("--steps", type=int, default=argparse.SUPPRESS)
        p.add_argument("--lambda", dest="lam", type=float, default=argparse.SUPPRESS)
    bound.add_argument("--probe-samples", type=int, default=argparse.SUPPRESS)
    bound.add_argument("--probe-eps", type=float, default=argparse.SUPPRESS)
    bound.add_argument("--no-svg", dest="svg", action="store_false", default=argparse.SUPPRESS)
    samp.add_argument("--mode", choices=["cond", "uncond", "paired"], default=argparse.SUPPRESS)
    samp.add_argument("--seeds", default=argparse.SUPPRESS, help="e.g. 0..49 or 1,2,3")

    val = sub.add_parser("validate", help="validation experiments")
    val_sub = val.add_subparsers(dest="experiment", required=True)
    t3 = val_sub.add_parser("table3", parents=[common])
    var = val_sub.add_parser("variance", parents=[common])
    bf = val_sub.add_parser("bound-figure", parents=[common])
    for p in (t3, bf):
        _data_args(p)
        _posterior_args(p)
    _schedule_args(t3)
    for p in (t3, var):
        p.add_argument("--tstar", type=_floats, default=argparse.SUPPRESS)
        p.add_argument("--samples", "--M", dest="samples", type=int, default=argparse.SUPPRESS)
    var.add_argument("--d-list", type=_ints, default=argparse.SUPPRESS)
    var.add_argument("--synth-fill", default=argparse.SUPPRESS)
    _posterior_args(var)
    bf.add_argument("--steps", type=int, default=argparse.SUPPRESS)
    bf.add_argument("--families", type=_names, default=argparse.SUPPRESS)
    bf.add_argument("--probe-samples", type=int, default=argparse.SUPPRESS)
    bf.add_argument("--probe-eps", type=float, default=argparse.SUPPRESS)
    bf.add_argument("--no-svg", dest="svg", action="store_false", default=argparse.SUPPRESS)
    return parser


# -- configuration ------------------------------------------------------------


def _flatten(cfg: dict, out: Optional[dict] = None) -> dict:
    out = {} if out is None else out
    for k, v in cfg.items():
        if isinstance(v, dict):
            _flatten(v, out)
        else:
            out[k.replace("-", "_")] = v
    return out


def resolve_config(ns: argparse.Namespace) -> dict:
    """Built-in defaults, then the config file, then explicit flags."""
    given = vars(ns).copy()
    cfg = dict(DEFAULTS)
    path = given.pop("config", None)
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text())
        except json.JSONDecodeError as err:
            raise UsageError(f"config file {path}: {err}")
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        flat = _flatten(loaded)
        unknown = sorted(set(flat) - set(DEFAULTS) - {"command", "action", "experiment"})
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(flat)
        cfg["config"] = str(path)
    cfg.update(given)
    return cfg


def make_spec(cfg: dict, family: Optional[str] = None) -> ScheduleSpec:
    return ScheduleSpec(
        family or cfg["family"], T=cfg["T"], k1=cfg["k1"], k2=cfg["k2"], sigma_d=cfg["sigma_d"], rho=cfg["rho"],
        t_min=cfg["t_min"], t_max=cfg["t_max"], edm_grid=cfg["edm_grid"],
    )


def make_posterior_config(cfg: dict) -> PosteriorConfig:
    return PosteriorConfig(cfg["coarse_n"], cfg["refine_n"], cfg["drop_nats"], single_stage=bool(cfg["single_stage"]))


def _fill(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return v


def load_dataset(cfg: dict) -> Dataset:
    kind = cfg["synthetic"]
    if kind is not None:
        n, d, seed = cfg["synth_n"], cfg["synth_d"], cfg["synth_seed"]
        if kind == "single":
            return synth_single_point(d, _fill(cfg["synth_fill"]), seed)
        if kind == "points":
            return synth_points(n, d, "uniform_pm1", seed=seed)
        if kind == "gaussian":
            return synth_points(n, d, "gaussian", seed=seed)
        return Dataset(np.stack([np.full(d, 0.5), np.full(d, -0.5)]), "unit_range")
    path = cfg["dataset"]
    if path is None:
        raise UsageError("a dataset is required: pass --dataset PATH or --synthetic KIND")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset path does not exist: {path}")
    fmt = cfg["input_format"]
    if fmt == "auto":
        fmt = "raw" if Path(str(path) + ".json").exists() else "cifar10"
    norm = cfg["normalization"]
    norm = None if norm is None else NORMALIZATION_NAMES.get(norm, norm)
    if fmt == "cifar10":
        return load_cifar10(find_cifar10_batches(path), norm or "unit_range")
    return load_raw_tensor(path, normalization=norm)


# -- output -----------------------------------------------------------------


class Output:
    """Writes the primary table, a summary and the echoed config."""

    def __init__(self, cfg: dict, name: str):
        self.cfg, self.name = cfg, name
        out = cfg["out"]
        self.dir = self.file = None
        if out is not None:
            p = Path(out)
            if p.suffix in (".csv", ".json"):
                p.parent.mkdir(parents=True, exist_ok=True)
                self.file = p
            else:
                p.mkdir(parents=True, exist_ok=True)
                self.dir = p

    def path(self, filename: str) -> Optional[Path]:
        return None if self.dir is None else self.dir / filename

    def finish(self, rows: list, summary: dict, columns=None) -> None:
        summary = {"schema_version": SCHEMA_VERSION, "command": self.name, **summary}
        echo = {k: v for k, v in self.cfg.items()}
        if self.dir is not None:
            write_csv(self.dir / f"{self.name}.csv", rows, columns)
            write_json(self.dir / "summary.json", summary)
            write_json(self.dir / "config.json", echo)
        elif self.file is not None:
            if self.file.suffix == ".csv":
                write_csv(self.file, rows, columns)
            else:
                write_json(self.file, {**summary, "rows": rows})
            write_json(self.file.with_name(self.file.name + ".config.json"), echo)
        elif self.cfg["format"] == "json":
            sys.stdout.write(json_text({**summary, "rows": rows}))
        else:
            sys.stdout.write(csv_text(rows, columns))


def _report_summary(report) -> dict:
    meta = {k: v for k, v in report.meta.items() if k != "samples"}
    return {"experiment": report.experiment, "passed": report.passed, "checks": report.checks, "meta": meta,
            "rows": report.rows}


def _status(report) -> int:
    return EXIT_VALIDATION if report.passed is False else EXIT_OK


# -- commands -----------------------------------------------------------------


def cmd_dataset_stats(cfg):
    ds = load_dataset(cfg)
    s = dataset_stats(ds)
    row = {"N": s.N, "d": s.d, "sigma_d": s.sigma_d, "mean": s.mean, "normalization": ds.normalization}
    Output(cfg, "dataset_stats").finish([row], {"stats": row})
    return EXIT_OK


def cmd_posterior(cfg):
    ds, spec = load_dataset(cfg), make_spec(cfg)
    prof = posterior_profile(ds, spec, cfg["tstar"], cfg["samples"], cfg["seed"], make_posterior_config(cfg))
    Output(cfg, "posterior").finish(prof.rows, {"summary": prof.summary},
                                    ["tstar", "sample_idx", "mean_t", "var_t"])
    return EXIT_OK


def cmd_targets(cfg):
    ds, spec = load_dataset(cfg), make_spec(cfg)
    rep = concentration_table(ds, spec, cfg["tstar"], cfg["samples"], cfg["seed"], make_posterior_config(cfg), reference=False)
    Output(cfg, "targets").finish(rep.meta["samples"], _report_summary(rep),
                                  ["tstar", "sample_idx", "E", "R_norm_sq", "var_t"])
    return EXIT_OK


def _bound_svgs(bounds: dict, out: Output):
    if out.dir is None:
        return
    for key, ylabel in (("terms", "A_i B_i"), ("A", "A_i"), ("B", "B_i")):
        series = {fam: (np.arange(b.N), getattr(b, key)) for fam, b in bounds.items()}
        emit_svg_lineplot(series, out.path(f"bound_{key}.svg"), log_y=True, xlabel="step i", ylabel=ylabel)


def cmd_bound(cfg):
    ds, spec = load_dataset(cfg), make_spec(cfg)
    plan = sampler_coefficients(spec, make_time_grid(spec, cfg["steps"]), cfg["lam"])
    b = bound_for_plan(plan, spec, ds, cfg["seed"], cfg["probe_samples"], cfg["probe_eps"], make_posterior_config(cfg))
    out = Output(cfg, "bound")
    summary = {"family": spec.family, "N": b.N, "accumulated": b.accumulated, "truncated_last10": b.truncated,
               "unresolved_steps": [int(i) for i in np.flatnonzero(b.unresolved)],
               "heuristic": spec.family == "uedm"}
    out.finish(b.rows(), summary)
    if cfg["svg"]:
        _bound_svgs({spec.family: b}, out)
    return EXIT_OK


def cmd_sample(cfg):
    ds, spec = load_dataset(cfg), make_spec(cfg)
    plan = sampler_coefficients(spec, make_time_grid(spec, cfg["steps"]), cfg["lam"])
    pcfg = make_posterior_config(cfg)
    out = Output(cfg, "divergence")
    rows = []
    for seed in parse_seeds(cfg["seeds"]):
        if cfg["mode"] == "paired":
            pd = paired_divergence(plan, spec, ds, seed, pcfg)
            runs = {"cond": pd.conditional, "uncond": pd.unconditional}
            rows.append({"seed": seed, "final_gap": pd.final_gap, "max_gap": float(pd.gaps.max())})
        else:
            mode = {"cond": "conditional", "uncond": "unconditional"}[cfg["mode"]]
            run = run_sampler(plan, mode, spec, ds, seed, False, pcfg)
            runs = {cfg["mode"]: run}
            nearest = float(np.min(np.linalg.norm(ds.data - run.x_final, axis=1)))
            rows.append({"seed": seed, "final_norm": float(np.linalg.norm(run.x_final)), "nearest_point_dist": nearest})
        for tag, run in runs.items():
            path = out.path(f"final_{tag}_seed{seed}.f32")
            if path is not None:
                save_raw_tensor(path, run.x_final[None, :], "none")
    gaps = [r["final_gap"] for r in rows] if cfg["mode"] == "paired" else None
    summary = {"family": spec.family, "N": plan.N, "mode": cfg["mode"], "lam": cfg["lam"],
               "mean_final_gap": None if gaps is None else float(np.mean(gaps))}
    out.finish(rows, summary)
    return EXIT_OK


def cmd_validate(cfg, experiment):
    pcfg = make_posterior_config(cfg)
    if experiment == "variance":
        rep = validate_variance_scaling(cfg["d_list"], cfg["tstar"], cfg["samples"], cfg["seed"],
                                        _fill(cfg["synth_fill"]), config=pcfg)
        Output(cfg, "variance").finish(rep.rows, _report_summary(rep))
        return _status(rep)
    ds = load_dataset(cfg)
    if experiment == "table3":
        rep = concentration_table(ds, make_spec(cfg), cfg["tstar"], cfg["samples"], cfg["seed"], pcfg)
        Output(cfg, "table3").finish(rep.rows, _report_summary(rep))
        return _status(rep)
    rep, bounds = reproduce_bound_table(ds, cfg["families"], cfg["steps"], cfg["seed"], cfg["probe_samples"],
                                        cfg["probe_eps"], pcfg)
    out = Output(cfg, "bound_steps")
    steps = [{"family": fam, **row} for fam, b in bounds.items() for row in b.rows()]
    out.finish(steps, _report_summary(rep))
    if cfg["svg"]:
        _bound_svgs(bounds, out)
    return _status(rep)


def dispatch(cfg: dict) -> int:
    cmd = cfg["command"]
    if cmd == "dataset":
        return cmd_dataset_stats(cfg)
    if cmd == "validate":
        return cmd_validate(cfg, cfg["experiment"])
    return {"posterior": cmd_posterior, "targets": cmd_targets, "bound": cmd_bound, "sample": cmd_sample}[cmd](cfg)


def parse_and_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 for --help
        return int(exc.code or 0)
    try:
        cfg = resolve_config(ns)
        if cfg["threads"] is not None:
            set_threads(cfg["threads"])
        return dispatch(cfg)
    except UsageError as err:
        print(f"schedlab: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, MalformedFileError, NoSupportError) as err:
        print(f"schedlab: error: {err}", file=sys.stderr)
        return EXIT_IO
    except ValueError as err:
        print(f"schedlab: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        set_threads(None)


def main(argv=None) -> None:
    sys.exit(parse_and_dispatch(argv))


if __name__ == "__main__":
    main()
