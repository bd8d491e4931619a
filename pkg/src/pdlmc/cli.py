"""Config-driven experiment harness.

``pdlmc run <config>`` executes one sampler on one problem and writes
machine-readable results; ``pdlmc compare <config>...`` runs several
configs against the same problem and tabulates them side by side;
``pdlmc histogram <trajectory.csv>`` bins a logged coordinate into
plot-ready densities.

Config files are flat INI: a ``[problem]`` section (kind plus spec
fields), a ``[sampler]`` section (algorithm plus step sizes, iteration
budget, seed), and an optional ``[output]`` section.  See the configs/
directory for working examples of every problem kind.

All floats are serialized with 17 significant digits so that files
round-trip to the exact in-memory values and reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import datasets, problems
from .core import ConfigurationError, NumericError, as_vector
from .diagnostics import (dual_readout, ergodic_mean_duals, ergodic_mean_x,
                          feasibility_report, w2_1d)
from .samplers import (SamplerConfig, StepSchedule, rejection_trajectory,
                       run_dlmc, run_dual_ascent_minibatch, run_lmc,
                       run_pdlmc, run_projected_lmc)

SAMPLERS = ("lmc", "pdlmc", "dlmc", "dual-ascent-minibatch", "projected-lmc",
            "rejection")
EMITS = ("trajectory", "ergodic", "feasibility", "duals", "histogram")
_FMT = ".17g"

# fixed seed for the ground-truth oracle runs used by `compare`
_ORACLE_SEED = 424242
_ORACLE_SAMPLES = 100_000


@dataclass
class RunConfig:
    """A fully resolved run: problem + sampler + output request."""

    problem_kind: str
    problem_fields: dict
    sampler: str
    sampler_fields: dict
    x0: str
    out_dir: Path
    emit: tuple[str, ...]
    hist_coord: int
    hist_bins: int
    source: Path

    def config_hash(self):
        lines = [f"problem.kind={self.problem_kind}",
                 f"sampler.kind={self.sampler}", f"sampler.x0={self.x0}"]
        lines += [f"problem.{k}={v}" for k, v in sorted(self.problem_fields.items())]
        lines += [f"sampler.{k}={v}" for k, v in sorted(self.sampler_fields.items())]
        lines += [f"output.emit={','.join(self.emit)}",
                  f"output.hist_coord={self.hist_coord}",
                  f"output.hist_bins={self.hist_bins}"]
        digest = hashlib.sha256("\n".join(lines).encode()).hexdigest()
        return digest[:16]


def _fail(section, key, message):
    raise ConfigurationError(f"{section}.{key}: {message}")


def _get(section_proxy, section, key, cast, default=None, required=False):
    if key not in section_proxy:
        if required:
            _fail(section, key, "missing required key")
        return default
    raw = section_proxy[key]
    try:
        return cast(raw)
    except (ValueError, TypeError):
        _fail(section, key, f"cannot parse {raw!r}")


def _vector(raw):
    return [float(tok) for tok in raw.replace(";", ",").split(",") if tok.strip()]


def _bool(raw):
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(raw)


def load_config(path):
    """Parse and validate a config file into a :class:`RunConfig`."""
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"cannot read config file {path}")
    if "problem" not in parser or "sampler" not in parser:
        raise ConfigurationError(f"{path}: need [problem] and [sampler] sections")

    prob = parser["problem"]
    kind = _get(prob, "problem", "kind", str, required=True)
    known = ("truncated-gaussian", "gaussian-moment", "logistic-fairness", "market")
    if kind not in known:
        _fail("problem", "kind", f"unknown problem {kind!r}; expected one of {known}")
    pfields = {k: prob[k] for k in prob if k != "kind"}

    samp = parser["sampler"]
    sampler = _get(samp, "sampler", "kind", str, required=True)
    if sampler not in SAMPLERS:
        _fail("sampler", "kind", f"unknown sampler {sampler!r}; expected one of {SAMPLERS}")
    sfields = {k: samp[k] for k in samp if k not in ("kind", "x0")}
    x0 = samp.get("x0", "0")

    out = parser["output"] if "output" in parser else {}
    out_dir = Path(out.get("dir", f"out/{path.stem}"))
    emit_raw = out.get("emit", "trajectory, feasibility, duals")
    emit = tuple(tok.strip() for tok in emit_raw.split(",") if tok.strip())
    for e in emit:
        if e not in EMITS:
            _fail("output", "emit", f"unknown output {e!r}; expected subset of {EMITS}")
    hist_coord = int(out.get("hist_coord", "0"))
    hist_bins = int(out.get("hist_bins", "60"))

    cfg = RunConfig(problem_kind=kind, problem_fields=pfields, sampler=sampler,
                    sampler_fields=sfields, x0=x0, out_dir=out_dir, emit=emit,
                    hist_coord=hist_coord, hist_bins=hist_bins, source=path)
    build_problem(cfg)  # fail fast on bad problem fields
    build_sampler_config(cfg)
    return cfg


def _problem_spec(cfg):
    f = cfg.problem_fields
    get = f.get
    kind = cfg.problem_kind
    if kind == "truncated-gaussian":
        region_kind = get("region", "interval")
        if region_kind == "interval":
            region = problems.Interval(float(get("a", "1")), float(get("b", "3")))
        elif region_kind == "ball":
            region = problems.Ball(_vector(get("center", "0,0")),
                                   float(get("radius", "1")))
        else:
            _fail("problem", "region", f"unknown region {region_kind!r}")
        return problems.TruncatedGaussianSpec(
            mean=_vector(get("mean", "0")), region=region,
            slack=float(get("slack", "0")))
    if kind == "gaussian-moment":
        if "b" not in f:
            _fail("problem", "b", "missing required key")
        return problems.GaussianMomentSpec(b=_vector(f["b"]))
    if kind == "logistic-fairness":
        source = get("dataset", "bundled")
        table = datasets.bundled_adult_table() if source == "bundled" \
            else problems.load_labeled_csv(source)
        return problems.LogisticFairnessSpec(
            table=table, prior_variance=float(get("prior_variance", "3.0")),
            tolerance=float(get("tolerance", "0.01")))
    source = get("returns", "bundled")
    names, series = datasets.bundled_returns() if source == "bundled" \
        else datasets.load_returns_csv(source)
    if "targets" in f:
        targets = _vector(f["targets"])
    elif "target_scale" in f:
        scale = float(f["target_scale"])
        probe = problems.MarketSpec(return_series=series,
                                    target_means=np.zeros(series.shape[1]),
                                    prior_variance=float(get("prior_variance", "3.0")),
                                    asset_names=names)
        mean, _ = problems.market_posterior_moments(probe)
        targets = scale * mean
    else:
        _fail("problem", "targets", "need `targets` or `target_scale`")
    return problems.MarketSpec(return_series=series, target_means=targets,
                               prior_variance=float(get("prior_variance", "3.0")),
                               asset_names=names)


def build_problem(cfg):
    spec = _problem_spec(cfg)
    makers = {"truncated-gaussian": problems.make_truncated_gaussian,
              "gaussian-moment": problems.make_gaussian_moment,
              "logistic-fairness": problems.make_logistic_fairness,
              "market": problems.make_market}
    problem = makers[cfg.problem_kind](spec)
    projector = problems.projector_for(spec) \
        if cfg.problem_kind == "truncated-gaussian" else None
    return problem, spec, projector


def build_sampler_config(cfg):
    f = dict(cfg.sampler_fields)
    schedule = f.pop("schedule", "constant")
    if schedule not in ("constant", "inverse-sqrt"):
        _fail("sampler", "schedule", f"unknown schedule {schedule!r}")

    def sched(key, default):
        return StepSchedule(schedule, float(f.pop(key, default)))

    try:
        eta_x = sched("eta_x", "1e-3")
        eta_lambda = sched("eta_lambda", str(eta_x.base))
        eta_nu = sched("eta_nu", str(eta_lambda.base))
        out = SamplerConfig(
            eta_x=eta_x, eta_lambda=eta_lambda, eta_nu=eta_nu,
            iterations=int(f.pop("iterations", "1000")),
            burn_in_fraction=float(f.pop("burn_in_fraction", "0.5")),
            minibatch=int(f.pop("minibatch", "1")),
            dlmc_inner=int(f.pop("dlmc_inner", "1")),
            dlmc_gamma=float(f.pop("dlmc_gamma", "1e-3")),
            dlmc_warm_start=_bool(f.pop("dlmc_warm_start", "true")),
            seed=int(f.pop("seed", "0")),
            log_stride=int(f.pop("log_stride", "1")),
            dual_cap=float(f.pop("dual_cap", "1e4")))
    except ValueError as exc:
        raise ConfigurationError(f"sampler: bad numeric value ({exc})") from None
    if f:
        _fail("sampler", next(iter(f)), "unknown key")
    return out


def _validate_compat(cfg, problem):
    if cfg.sampler == "dlmc" and problem.n_eq:
        _fail("sampler", "kind", "dlmc supports inequality-only problems "
              f"(problem has {problem.n_eq} equality constraints)")
    if cfg.sampler == "rejection" and (problem.direct_sampler is None
                                       or not problem.support):
        _fail("sampler", "kind",
              "rejection needs a Gaussian target with support constraints")
    if cfg.sampler == "projected-lmc" and cfg.problem_kind != "truncated-gaussian":
        _fail("sampler", "kind", "projected-lmc needs a support-constrained problem")


def execute(cfg, seed_override=None, out_override=None):
    """Run one config end to end; returns (summary dict, trajectory, files)."""
    problem, spec, projector = build_problem(cfg)
    _validate_compat(cfg, problem)
    scfg = build_sampler_config(cfg)
    if seed_override is not None:
        from dataclasses import replace
        scfg = replace(scfg, seed=int(seed_override))
        cfg.sampler_fields["seed"] = str(seed_override)
    out_dir = Path(out_override) if out_override else cfg.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    x0_list = _vector(cfg.x0)
    x0 = np.full(problem.dim, x0_list[0]) if len(x0_list) == 1 \
        else as_vector(x0_list, problem.dim)

    t0 = time.perf_counter()
    rate = None
    if cfg.sampler == "lmc":
        traj = run_lmc(problem, scfg, x0)
    elif cfg.sampler == "pdlmc":
        traj = run_pdlmc(problem, scfg, x0)
    elif cfg.sampler == "dlmc":
        traj = run_dlmc(problem, scfg, x0)
    elif cfg.sampler == "dual-ascent-minibatch":
        traj = run_dual_ascent_minibatch(problem, scfg, x0)
    elif cfg.sampler == "projected-lmc":
        traj = run_projected_lmc(problem, scfg, x0, projector)
    else:
        traj, rate = rejection_trajectory(problem, scfg)
    wall_ms = 1000.0 * (time.perf_counter() - t0)

    feas = feasibility_report(traj, problem)
    erg_lam, erg_nu = ergodic_mean_duals(traj)
    summary = {
        "seed": scfg.seed,
        "config_hash": cfg.config_hash(),
        "sampler": cfg.sampler,
        "problem": problem.label,
        "K": scfg.iterations,
        "ergodic_mean": list(ergodic_mean_x(traj)),
        "ergodic_lambda": list(erg_lam),
        "ergodic_nu": list(erg_nu),
        "final_lambda": list(traj.lams[-1]),
        "final_nu": list(traj.nus[-1]),
        "max_slack": feas.max_slack,
        "outside_fraction": feas.outside_fraction,
        "acceptance_rate": rate,
        "wall_ms": wall_ms,
    }

    files = [out_dir / "summary.json"]
    with open(files[0], "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    if "trajectory" in cfg.emit:
        files.append(out_dir / "trajectory.csv")
        write_trajectory_csv(traj, files[-1])
    if "ergodic" in cfg.emit:
        files.append(out_dir / "ergodic.csv")
        _write_ergodic_csv(traj, files[-1])
    if "feasibility" in cfg.emit:
        files.append(out_dir / "feasibility.csv")
        _write_feasibility_csv(feas, files[-1])
    if "duals" in cfg.emit:
        files.append(out_dir / "duals.csv")
        _write_duals_csv(traj, files[-1])
    if "histogram" in cfg.emit:
        files.append(out_dir / "histogram.csv")
        centers, density = histogram_data(
            traj.xs[:, cfg.hist_coord], traj.ks, cfg.hist_bins,
            scfg.burn_in_fraction)
        _write_histogram_csv(centers, density, files[-1])
    summary["files"] = [str(f) for f in files]
    with open(files[0], "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary, traj, files


# ---------------------------------------------------------------------------
# file formats


def write_trajectory_csv(traj, path):
    d = traj.xs.shape[1]
    I = traj.lams.shape[1]
    J = traj.nus.shape[1]
    header = (["k"] + [f"x_{i}" for i in range(d)]
              + [f"lambda_{i}" for i in range(I)] + [f"nu_{j}" for j in range(J)]
              + [f"g_{i}" for i in range(I)] + [f"h_{j}" for j in range(J)])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(traj)):
            row = [str(int(traj.ks[i]))]
            for block in (traj.xs, traj.lams, traj.nus):
                row += [format(v, _FMT) for v in block[i]]
            for block in (traj.gs, traj.hs):
                row += [format(v, _FMT) for v in block[i]]
            writer.writerow(row)


def read_trajectory_csv(path):
    """Parse a trajectory CSV back into its columnar arrays.

    Returns a dict with keys ks, xs, lams, nus, gs, hs; values round-trip
    exactly thanks to the 17-significant-digit serialization.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    counts = {}
    for prefix in ("x_", "lambda_", "nu_", "g_", "h_"):
        counts[prefix] = sum(1 for h in header if h.startswith(prefix))
    data = np.array([[float(v) for v in row] for row in rows]) \
        if rows else np.empty((0, len(header)))
    out = {"ks": data[:, 0].astype(np.int64)}
    col = 1
    for key, prefix in (("xs", "x_"), ("lams", "lambda_"), ("nus", "nu_"),
                        ("gs", "g_"), ("hs", "h_")):
        n = counts[prefix]
        out[key] = data[:, col:col + n]
        col += n
    return out


def _write_ergodic_csv(traj, path):
    """Running (prefix) means of samples and constraint values per logged k."""
    n = len(traj)
    counts = np.arange(1, n + 1)[:, None]
    run_x = np.cumsum(traj.xs, axis=0) / counts
    run_g = np.cumsum(traj.gs, axis=0) / counts
    run_h = np.cumsum(traj.hs, axis=0) / counts
    header = (["k"] + [f"running_mean_x_{i}" for i in range(traj.xs.shape[1])]
              + [f"running_mean_g_{i}" for i in range(traj.gs.shape[1])]
              + [f"running_mean_h_{j}" for j in range(traj.hs.shape[1])])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(n):
            row = [str(int(traj.ks[i]))]
            row += [format(v, _FMT) for v in run_x[i]]
            row += [format(v, _FMT) for v in run_g[i]]
            row += [format(v, _FMT) for v in run_h[i]]
            writer.writerow(row)


def _write_feasibility_csv(feas, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "index", "value"])
        for i, v in enumerate(feas.ineq_slack):
            writer.writerow(["ineq_slack", i, format(v, _FMT)])
        for j, v in enumerate(feas.eq_gap):
            writer.writerow(["eq_gap", j, format(v, _FMT)])
        if feas.max_slack is not None:
            writer.writerow(["max_slack", "", format(feas.max_slack, _FMT)])
        if feas.outside_fraction is not None:
            writer.writerow(["outside_fraction", "",
                             format(feas.outside_fraction, _FMT)])


def _write_duals_csv(traj, path):
    report = dual_readout(traj)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "index", "ergodic", "final", "active", "note"])
        for i in range(report.ergodic_lam.size):
            writer.writerow(["lambda", i, format(report.ergodic_lam[i], _FMT),
                             format(report.final_lam[i], _FMT),
                             int(i in report.active_set), report.notes[i]])
        off = report.ergodic_lam.size
        for j in range(report.ergodic_nu.size):
            writer.writerow(["nu", j, format(report.ergodic_nu[j], _FMT),
                             format(report.final_nu[j], _FMT), "",
                             report.notes[off + j]])


def histogram_data(values, ks, bins, burn_in_fraction):
    """Burn-in-filtered normalized histogram of one logged coordinate."""
    if bins < 2:
        raise ConfigurationError(f"need at least 2 bins, got {bins}")
    start = int(burn_in_fraction * len(values))
    kept = values[start:]
    if kept.size == 0:
        raise ConfigurationError("no samples left after burn-in")
    density, edges = np.histogram(kept, bins=bins, density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, density


def _write_histogram_csv(centers, density, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_center", "density"])
        for c, dns in zip(centers, density):
            writer.writerow([format(c, _FMT), format(dns, _FMT)])


# ---------------------------------------------------------------------------
# commands


def _cmd_run(args):
    cfg = load_config(args.config)
    summary, _, files = execute(cfg, seed_override=args.seed,
                                out_override=args.out)
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_compare(args):
    cfgs = [load_config(p) for p in args.configs]
    first = (cfgs[0].problem_kind, sorted(cfgs[0].problem_fields.items()))
    for cfg in cfgs[1:]:
        if (cfg.problem_kind, sorted(cfg.problem_fields.items())) != first:
            raise ConfigurationError(
                f"compare needs identical [problem] sections; {cfg.source} differs")
    problem, spec, _ = build_problem(cfgs[0])

    oracle = None
    if problem.dim == 1 and problem.direct_sampler is not None and problem.support:
        from .samplers import rejection_sample
        oracle, _ = rejection_sample(problem, _ORACLE_SAMPLES, _ORACLE_SEED)
        oracle = oracle[:, 0]

    out_root = Path(args.out) if args.out else Path("out/compare")
    rows = []
    for cfg in cfgs:
        summary, traj, _ = execute(cfg, out_override=out_root / cfg.source.stem)
        dist = ""
        if oracle is not None:
            start = traj.kept_slice()
            dist = format(w2_1d(traj.xs[start:, 0], oracle), ".6g")
        rows.append({
            "config": cfg.source.stem,
            "sampler": summary["sampler"],
            "ergodic_mean": ";".join(format(v, ".6g") for v in summary["ergodic_mean"]),
            "max_slack": "" if summary["max_slack"] is None
                         else format(summary["max_slack"], ".6g"),
            "outside_fraction": "" if summary["outside_fraction"] is None
                                else format(summary["outside_fraction"], ".6g"),
            "w2_to_oracle": dist,
        })

    out_root.mkdir(parents=True, exist_ok=True)
    table_path = out_root / "compare.csv"
    cols = ["config", "sampler", "ergodic_mean", "max_slack",
            "outside_fraction", "w2_to_oracle"]
    with open(table_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        writer.writerows(rows)
    widths = {c: max(len(c), *(len(r[c]) for r in rows)) for c in cols}
    lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
    for r in rows:
        lines.append("  ".join(r[c].ljust(widths[c]) for c in cols))
    print("\n".join(lines))
    return 0


def _cmd_histogram(args):
    data = read_trajectory_csv(args.trajectory)
    xs = data["xs"]
    if not 0 <= args.coord < xs.shape[1]:
        raise ConfigurationError(
            f"coordinate {args.coord} out of range for dimension {xs.shape[1]}")
    centers, density = histogram_data(xs[:, args.coord], data["ks"],
                                      args.bins, args.burn_in)
    out = Path(args.out) if args.out else Path(args.trajectory).with_name(
        "histogram.csv")
    _write_histogram_csv(centers, density, out)
    print(f"wrote {out}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="pdlmc", description="Constrained-sampling experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    p_run.add_argument("--out", default=None, help="override the output directory")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run several configs on one problem")
    p_cmp.add_argument("configs", nargs="+")
    p_cmp.add_argument("--out", default=None)
    p_cmp.set_defaults(func=_cmd_compare)

    p_hist = sub.add_parser("histogram", help="bin a trajectory coordinate")
    p_hist.add_argument("trajectory")
    p_hist.add_argument("--coord", type=int, default=0)
    p_hist.add_argument("--bins", type=int, default=60)
    p_hist.add_argument("--burn-in", type=float, default=0.5, dest="burn_in")
    p_hist.add_argument("--out", default=None)
    p_hist.set_defaults(func=_cmd_histogram)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
