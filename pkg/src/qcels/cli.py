"""Configuration-driven experiment runner and command line.

Subcommands:

* ``model build`` / ``model inspect``: construct spectral-model JSON files
  from the bundled Hamiltonians, or summarize an existing one.
* ``run config.json``: run one experiment point per seed, write a sweep CSV
  and a summary JSON.
* ``sweep config.json --axis epsilon|tmax``: run the config's sweep axis
  (epsilon list for the fit methods, bits list for the baseline), with
  optional side-by-side baseline rows from ``compare_qpe``.

Configs are JSON validated against the bundled schema (unknown keys are
rejected).  A handful of presets ship with the package and can be named in
place of a path: tfim-fig4, hubbard4-fig5, hubbard8-fig6.

All task randomness derives from one master seed (``--seed``) folded with
the point index and the per-row seed from the config, so outputs are byte
identical across repeated runs and any ``--threads`` setting.  Rows are
sorted before writing.  Set ``QCELS_LOG=info`` or ``debug`` for progress
logging.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, rng
from .estimator import wrapped_distance
from .filters import build_filter, build_filter_paper_preset
from .multilevel import (build_schedule, rough_estimate,
                         run_gsee_small_overlap, run_multilevel)
from .qpe import QpeConfig, qpe_estimate
from .spectrum import (SpectralModel, build_hubbard, build_tfim, load_model,
                       make_spectral_model, model_from_hamiltonian,
                       paper_interval_recipe, relative_overlap, save_model)

logger = logging.getLogger("qcels")

CSV_COLUMNS = ["method", "model_label", "seed", "p0", "delta", "N", "N_s",
               "J", "tau_J", "t_max", "t_total", "theta_star", "abs_error",
               "wrapped_error"]

SEED_SCHEME = "task_seed = fold(master_seed, 'pt', point_index, 'run', row_seed)"


class ConfigError(ValueError):
    """Configuration rejected before any work ran."""


def _setup_logging() -> None:
    level = os.environ.get("QCELS_LOG", "").strip().lower()
    table = {"debug": logging.DEBUG, "info": logging.INFO,
             "warning": logging.WARNING, "quiet": logging.ERROR, "": logging.WARNING}
    logging.basicConfig(level=table.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


# ---------------------------------------------------------------------------
# configuration


def _preset_path(name: str):
    candidate = resources.files("qcels").joinpath("presets", name + ".json")
    return candidate if candidate.is_file() else None


def load_config(path_or_preset: str):
    """Load a config from a path or bundled preset name; returns (dict, bytes)."""
    p = Path(path_or_preset)
    if p.is_file():
        raw = p.read_bytes()
    else:
        preset = _preset_path(path_or_preset)
        if preset is None:
            raise ConfigError(f"no such config file or preset: {path_or_preset}")
        raw = preset.read_bytes()
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}") from exc
    return cfg, raw


def _schema():
    text = resources.files("qcels").joinpath("config_schema.json").read_text()
    return json.loads(text)


def validate_config(cfg: dict) -> None:
    """Schema validation plus method-specific requirement checks."""
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: e.json_path)
    if errors:
        e = errors[0]
        raise ConfigError(f"config field {e.json_path}: {e.message}")
    method = cfg["method"]
    model = cfg["model"]
    builder = model["builder"]
    need = {
        "tfim": ["sites", "coupling", "p0"],
        "hubbard": ["sites", "hopping", "interaction", "p0"],
        "file": ["path"],
        "synthetic": ["eigenvalues"],
    }[builder]
    for key in need:
        if key not in model:
            raise ConfigError(f"config field model.{key}: required for builder {builder!r}")
    if builder == "synthetic" and "weights" not in model and "p0" not in model:
        raise ConfigError("config field model.weights: synthetic models need weights or p0")
    if method in ("qcels", "gsee"):
        sched = cfg.get("schedule")
        if sched is None:
            raise ConfigError(f"config field schedule: required for method {method!r}")
        for key in ("delta", "epsilon", "N", "N_s"):
            if key not in sched:
                raise ConfigError(f"config field schedule.{key}: required for method {method!r}")
        if method == "qcels" and sched["N_s"] == "paper":
            raise ConfigError("config field schedule.N_s: 'paper' sizing needs the "
                              "filtered method (it depends on the filter degree)")
        if (sched["N_s"] == "paper"
                and cfg.get("gsee", {}).get("constant_filter", False)):
            raise ConfigError("config field schedule.N_s: 'paper' sizing is "
                              "undefined for the constant filter (degree 0)")
    if method == "qpe" and "bits" not in cfg.get("qpe", {}) \
            and "bits" not in cfg.get("sweep", {}):
        raise ConfigError("config field qpe.bits: required for method 'qpe' "
                          "(directly or as a sweep list)")
    sweep = cfg.get("sweep")
    if sweep is not None:
        if method == "qpe" and "bits" not in sweep:
            raise ConfigError("config field sweep.bits: required to sweep method 'qpe'")
        if method in ("qcels", "gsee") and "epsilons" not in sweep:
            raise ConfigError(f"config field sweep.epsilons: required to sweep method {method!r}")


def build_model_from_config(mcfg: dict) -> SpectralModel:
    builder = mcfg["builder"]
    policy = mcfg.get("policy", "pseudo-random")
    seed = mcfg.get("model_seed", 0)
    normalize_spectrum = mcfg.get("normalize", True)
    if builder == "file":
        return load_model(mcfg["path"])
    if builder == "synthetic":
        eigs = np.array(mcfg["eigenvalues"], dtype=float)
        if "weights" in mcfg:
            return SpectralModel(eigenvalues=eigs,
                                 weights=np.array(mcfg["weights"], dtype=float),
                                 label=mcfg.get("label", "synthetic"))
        return make_spectral_model(eigs, mcfg["p0"], policy, seed,
                                   label=mcfg.get("label", "synthetic"))
    if builder == "tfim":
        ham = build_tfim(mcfg["sites"], mcfg["coupling"])
    else:
        ham = build_hubbard(mcfg["sites"], mcfg["hopping"], mcfg["interaction"],
                            sector=tuple(mcfg["sector"]) if "sector" in mcfg else None)
    model = model_from_hamiltonian(ham, mcfg["p0"], policy, seed,
                                   normalize_spectrum=normalize_spectrum)
    if "label" in mcfg:
        model = SpectralModel(eigenvalues=model.eigenvalues, weights=model.weights,
                              label=mcfg["label"])
    return model


# ---------------------------------------------------------------------------
# experiment execution


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _row(method, model, seed, theta, t_max, t_total, *, delta=None, n=None,
         ns=None, levels=None, tau_last=None, period=None) -> dict:
    period = period if period is not None else 2 * np.pi
    return {
        "method": method,
        "model_label": model.label,
        "seed": seed,
        "p0": model.p0,
        "delta": delta,
        "N": n,
        "N_s": ns,
        "J": levels,
        "tau_J": tau_last,
        "t_max": t_max,
        "t_total": t_total,
        "theta_star": theta,
        "abs_error": abs(theta - model.lambda0),
        "wrapped_error": wrapped_distance(theta, model.lambda0, period),
    }


def _qcels_task(model, cfg, epsilon, point_idx, seed, master):
    sched_cfg = cfg["schedule"]
    sched = build_schedule(sched_cfg["delta"], epsilon, sched_cfg["N"],
                           sched_cfg["N_s"], sched_cfg.get("eta", 0.1))
    run_seed = rng.derive(master, "pt", point_idx, "run", seed)
    res = run_multilevel(model, sched, seed=run_seed)
    row = _row("qcels", model, seed, res.theta_star, res.t_max, res.t_total,
               delta=sched.delta, n=sched.n_points, ns=sched.n_shots,
               levels=sched.levels, tau_last=sched.taus[-1],
               period=2 * np.pi / sched.taus[-1])
    return row, res.to_dict()


def _gsee_task(model, cfg, epsilon, point_idx, seed, master):
    sched_cfg = cfg["schedule"]
    gsee_cfg = cfg.get("gsee", {})
    run_seed = rng.derive(master, "pt", point_idx, "run", seed)

    if gsee_cfg.get("constant_filter", False):
        # degeneracy mode: the identity filter reproduces the plain
        # pipeline bit for bit under a shared seed
        from .filters import constant_one_filter
        filt = constant_one_filter()
        sched = build_schedule(sched_cfg["delta"], epsilon, sched_cfg["N"],
                               sched_cfg["N_s"], sched_cfg.get("eta", 0.1))
        res = run_gsee_small_overlap(model, filt.interval, None, sched,
                                     seed=run_seed, filt=filt)
        row = _row("gsee", model, seed, res.theta_star, res.t_max, res.t_total,
                   delta=sched.delta, n=sched.n_points, ns=sched.n_shots,
                   levels=sched.levels, tau_last=sched.taus[-1],
                   period=2 * np.pi / sched.taus[-1])
        return row, res.to_dict()

    prior = gsee_cfg.get("prior", "oracle")
    fraction = gsee_cfg.get("recipe_fraction", 1.0 / 3.0)
    width_factor = gsee_cfg.get("recipe_width_factor", 0.25)
    low_edge = gsee_cfg.get("interval_low_edge", -np.pi / 2)
    # D depends only on the spectrum and weights, not on the prior draw
    d_sep = paper_interval_recipe(model, model.lambda0, fraction=fraction,
                                  width_factor=width_factor, low_edge=low_edge).D
    if prior == "oracle":
        lam_prior = rough_estimate(model, "oracle", d_sep, seed=run_seed)
    else:
        lam_prior = rough_estimate(model, "injected", d_sep, value=float(prior))
    iv = paper_interval_recipe(model, lam_prior, fraction=fraction,
                               width_factor=width_factor, low_edge=low_edge)
    if "q" in gsee_cfg:
        filt = build_filter(iv, gsee_cfg["q"])
    else:
        filt = build_filter_paper_preset(iv)
    ns = sched_cfg["N_s"]
    if ns == "paper":
        ns = math.floor(15.0 * model.p0 ** -2 * math.log(filt.d)) if filt.d > 1 else 1
    sched = build_schedule(sched_cfg["delta"], epsilon, sched_cfg["N"], ns,
                           sched_cfg.get("eta", 0.1))
    res = run_gsee_small_overlap(model, iv, None, sched, seed=run_seed, filt=filt,
                                 shift_sign=gsee_cfg.get("shift_sign", -1))
    logger.debug("gsee point=%s seed=%s d=%d q=%.3g p_r=%.3f", point_idx, seed,
                 filt.d, filt.q, relative_overlap(model, iv))
    row = _row("gsee", model, seed, res.theta_star, res.t_max, res.t_total,
               delta=sched.delta, n=sched.n_points, ns=sched.n_shots,
               levels=sched.levels, tau_last=sched.taus[-1],
               period=2 * np.pi / sched.taus[-1])
    details = res.to_dict()
    details["lambda_prior"] = lam_prior
    details["filter_d"] = filt.d
    details["filter_q"] = filt.q
    details["relative_overlap"] = relative_overlap(model, iv)
    return row, details


def _qpe_point_task(model, bits, tau, runs, point_idx, seeds, master):
    """All seed rows for one baseline point; the outcome distribution is
    computed once.  Each row's estimate is the median of its run outcomes;
    the per-run mean absolute error is kept for the point summary."""
    cfg = QpeConfig(bits=bits, tau=tau, runs=runs)
    rows = []
    details = []
    run_error_sum = 0.0
    run_error_count = 0
    for seed in seeds:
        run_seed = rng.derive(master, "pt", point_idx, "run", seed)
        res = qpe_estimate(model, cfg, seed=run_seed)
        estimate = float(np.median(res.estimates))
        rows.append(_row("qpe", model, seed, estimate, res.t_max, res.t_total,
                         tau_last=tau, period=2 * np.pi / tau))
        details.append(res.to_dict())
        run_error_sum += res.errors.sum()
        run_error_count += res.errors.size
    return rows, run_error_sum / run_error_count, details


def _build_points(cfg: dict, axis: str):
    """(method, point_index, x-label, x-value) tuples for the work list."""
    method = cfg["method"]
    points = []
    if axis == "run":
        if method == "qpe":
            points.append((method, 0, "bits", cfg["qpe"]["bits"]))
        else:
            points.append((method, 0, "epsilon", cfg["schedule"]["epsilon"]))
        return points
    sweep = cfg.get("sweep")
    if sweep is None:
        raise ConfigError("config field sweep: required by the sweep command")
    if method == "qpe":
        values = sweep["bits"]
        label = "bits"
    else:
        values = sweep["epsilons"]
        label = "epsilon"
    if len(values) < 3:
        raise ConfigError(f"config field sweep.{label}: need at least 3 axis points")
    for i, v in enumerate(values):
        points.append((method, i, label, v))
    if "compare_qpe" in cfg:
        comp = cfg["compare_qpe"]
        base = len(points)
        for i, b in enumerate(comp["bits"]):
            points.append(("qpe", base + i, "bits", b))
    return points


def run_experiment(cfg: dict, raw: bytes, master_seed: int, out_dir: Path,
                   threads: int = 1, axis: str = "run"):
    """Execute all points and seeds, write CSV plus summary, return paths."""
    validate_config(cfg)
    model = build_model_from_config(cfg["model"])
    seeds = cfg["seeds"]
    points = _build_points(cfg, axis)
    comp = cfg.get("compare_qpe", {})
    qpe_cfg = cfg.get("qpe", {})

    tasks = []
    for method, idx, label, x in points:
        if method == "qcels":
            for s in seeds:
                tasks.append(("row", idx, lambda i=idx, s=s, x=x:
                              _qcels_task(model, cfg, x, i, s, master_seed)))
        elif method == "gsee":
            for s in seeds:
                tasks.append(("row", idx, lambda i=idx, s=s, x=x:
                              _gsee_task(model, cfg, x, i, s, master_seed)))
        else:
            src = qpe_cfg if (axis == "run" or cfg["method"] == "qpe") else comp
            tau = src.get("tau", 1.0)
            runs = src.get("runs", 10)
            tasks.append(("point", idx, lambda i=idx, b=x, t=tau, r=runs:
                          _qpe_point_task(model, b, t, r, i, seeds, master_seed)))

    results = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(fn): k for k, (kind, idx, fn) in enumerate(tasks)}
            for fut, k in futures.items():
                results[k] = fut.result()
    else:
        for k, (kind, idx, fn) in enumerate(tasks):
            results[k] = fn()

    rows = []
    details = []
    qpe_run_means = {}
    for k, (kind, idx, fn) in enumerate(tasks):
        if kind == "row":
            row, det = results[k]
            rows.append((idx, row))
            details.append((idx, row["method"], row["seed"], det))
        else:
            point_rows, run_mean, dets = results[k]
            qpe_run_means[idx] = run_mean
            rows.extend((idx, r) for r in point_rows)
            details.extend((idx, r["method"], r["seed"], d)
                           for r, d in zip(point_rows, dets))
    rows.sort(key=lambda pr: (pr[1]["method"], pr[0], pr[1]["seed"]))
    details.sort(key=lambda it: (it[1], it[0], it[2]))

    out_dir.mkdir(parents=True, exist_ok=True)
    out_cfg = cfg.get("output", {})
    csv_path = out_dir / out_cfg.get("csv", cfg["name"] + ".csv")
    summary_path = out_dir / out_cfg.get("summary", cfg["name"] + "-summary.json")

    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for _, row in rows:
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])

    summary = _summarize(cfg, raw, master_seed, axis, points, rows, qpe_run_means)
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if axis == "run":
        # single-point runs also keep the full per-level histories
        results_path = out_dir / out_cfg.get("results", cfg["name"] + "-results.json")
        payload = [{"point": idx, "seed": seed, "result": det}
                   for idx, method, seed, det in details]
        with open(results_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    logger.info("wrote %s and %s", csv_path, summary_path)
    return csv_path, summary_path


def _slope(xs, ys):
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.maximum(np.asarray(ys, dtype=float), 1e-18))
    coef = np.polyfit(x, y, 1)
    return float(coef[0]), float(coef[1])


def _summarize(cfg, raw, master_seed, axis, points, rows, qpe_run_means) -> dict:
    by_point = {}
    for idx, row in rows:
        by_point.setdefault((row["method"], idx), []).append(row)

    point_stats = []
    for method, idx, label, x in points:
        rws = by_point[(method, idx)]
        errs = np.array([r["wrapped_error"] for r in rws])
        stat = {
            "method": method,
            "x_label": label,
            "x": x,
            "t_max": rws[0]["t_max"],
            "t_total_mean": float(np.mean([r["t_total"] for r in rws])),
            "err_mean": float(errs.mean()),
            "err_median": float(np.median(errs)),
            "err_max": float(errs.max()),
            "rows": len(rws),
        }
        if method in ("qcels", "gsee"):
            stat["success_rate"] = float(np.mean(errs <= x))
        else:
            stat["qpe_run_mean_error"] = qpe_run_means[idx]
        point_stats.append(stat)

    slopes = {}
    if axis != "run":
        for method in sorted({p[0] for p in points}):
            stats = [p for p in point_stats if p["method"] == method]
            if len(stats) < 3:
                continue
            if axis == "epsilon" and method == "qpe":
                continue
            xs = [p["x"] if axis == "epsilon" else p["t_max"] for p in stats]
            med_slope, med_icpt = _slope(xs, [p["err_median"] for p in stats])
            mean_slope, mean_icpt = _slope(xs, [p["err_mean"] for p in stats])
            slopes[method] = {
                "x_var": "epsilon" if axis == "epsilon" else "t_max",
                "n_points": len(stats),
                "slope_median": med_slope,
                "intercept_median": med_icpt,
                "slope_mean": mean_slope,
                "intercept_mean": mean_icpt,
                "const_geomean_median": float(np.exp(np.mean(
                    [np.log(max(p["err_median"], 1e-18) * p["t_max"]) for p in stats]))),
                "const_geomean_mean": float(np.exp(np.mean(
                    [np.log(max(p["err_mean"], 1e-18) * p["t_max"]) for p in stats]))),
            }

    return {
        "tool_version": __version__,
        "config_name": cfg["name"],
        "config_digest": hashlib.sha256(raw).hexdigest(),
        "master_seed": master_seed,
        "seed_scheme": SEED_SCHEME,
        "axis": axis,
        "points": point_stats,
        "slopes": slopes,
    }


# ---------------------------------------------------------------------------
# entry points


def _cmd_model(args) -> int:
    if args.model_cmd == "inspect":
        model = load_model(args.path)
        info = {
            "label": model.label,
            "levels": model.size,
            "lambda0": model.lambda0,
            "p0": model.p0,
            "eigenvalue_range": [float(model.eigenvalues[0]), float(model.eigenvalues[-1])],
            "weight_sum": float(model.weights.sum()),
        }
        print(json.dumps(info, indent=2, sort_keys=True))
        return 0

    policy = args.policy
    if policy.startswith("["):
        policy = json.loads(policy)
    if args.type == "tfim":
        ham = build_tfim(args.sites, args.coupling)
    else:
        sector = tuple(int(v) for v in args.sector.split(",")) if args.sector else None
        ham = build_hubbard(args.sites, args.hopping, args.interaction, sector=sector)
    model = model_from_hamiltonian(ham, args.p0, policy, args.model_seed,
                                   normalize_spectrum=not args.no_normalize)
    save_model(model, args.out)
    print(f"wrote {args.out}: {model.size} levels, lambda0 = {model.lambda0!r}")
    return 0


def _cmd_run(args, axis) -> int:
    cfg, raw = load_config(args.config)
    csv_path, summary_path = run_experiment(
        cfg, raw, args.seed, Path(args.out_dir), threads=args.threads, axis=axis)
    print(f"wrote {csv_path}")
    print(f"wrote {summary_path}")
    return 0


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(prog="qcels",
                                     description="phase-estimation experiments")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_model = sub.add_parser("model", help="build or inspect spectral models")
    msub = p_model.add_subparsers(dest="model_cmd", required=True)
    p_build = msub.add_parser("build", help="diagonalize a Hamiltonian into a model file")
    p_build.add_argument("--type", choices=["tfim", "hubbard"], required=True)
    p_build.add_argument("--sites", type=int, required=True)
    p_build.add_argument("--coupling", type=float, default=1.0, help="tfim field strength")
    p_build.add_argument("--hopping", type=float, default=1.0, help="hubbard hopping")
    p_build.add_argument("--interaction", type=float, default=4.0, help="hubbard interaction")
    p_build.add_argument("--sector", default=None, help="hubbard sector as 'n_up,n_dn'")
    p_build.add_argument("--p0", type=float, required=True)
    p_build.add_argument("--policy", default="pseudo-random")
    p_build.add_argument("--model-seed", type=int, default=0)
    p_build.add_argument("--no-normalize", action="store_true")
    p_build.add_argument("--out", required=True)
    p_inspect = msub.add_parser("inspect", help="print a model file summary")
    p_inspect.add_argument("path")

    for name, axis_choices in (("run", None), ("sweep", ["epsilon", "tmax"])):
        p = sub.add_parser(name, help=f"{name} an experiment config")
        p.add_argument("config", help="config path or preset name")
        if axis_choices:
            p.add_argument("--axis", choices=axis_choices, required=True)
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--out-dir", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1)

    args = parser.parse_args(argv)
    try:
        if args.cmd == "model":
            return _cmd_model(args)
        if args.cmd == "run":
            return _cmd_run(args, "run")
        return _cmd_run(args, args.axis)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
