"""Command-line front end.

Subcommands::

    geometry FAMILY [params]   print an array as a one-line record
    coarray  FAMILY [params]   co-array statistics (and weights) as CSV
    compare  [--budgets A..B]  best configuration per family per sensor budget
    verify   [--m-max ...]     thinning-rule sweep
    estimate CONFIG            CS spectrum for each configured array
    rmse     CONFIG            RMSE versus SNR for each configured array

Exit codes: 0 success, 2 invalid input, 3 runtime failure or non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__, coarray, estimation, geometry, sigmodel
from .config import FAMILY_ALIASES, ExperimentConfig, load_config, resolve_family
from .errors import ConfigError, InfeasibleEpsilon, SparseDoaError
from .geometry import Family

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3
STATS_HEADER = ["family", "params", "sensors", "unique", "consecutive", "aperture", "holes"]
COMPARE_FAMILIES = [
    ("conventional_coprime", Family.CONVENTIONAL_COPRIME, None),
    ("thinned_coprime", Family.THINNED_COPRIME, None),
    ("nested", Family.NESTED, None),
    ("cadis", Family.CADIS, "compact"),
    ("nested_cadis", Family.CADIS, "nested"),
]


class RuntimeFailure(Exception):
    """A run finished but did not produce a trustworthy result."""


def _params_text(params: dict) -> str:
    return " ".join(f"{k}={v}" for k, v in params.items())


def _array_from_args(args) -> geometry.SensorArray:
    fam = resolve_family(args.family)
    if fam is Family.CUSTOM:
        if not args.positions:
            raise geometry.BadParam("custom arrays need --positions")
        return geometry.custom_array(args.positions)
    names = {
        Family.PROTOTYPE_COPRIME: ("M", "N"),
        Family.CONVENTIONAL_COPRIME: ("M", "N"),
        Family.THINNED_COPRIME: ("M", "N"),
        Family.NESTED: ("N1", "N2"),
        Family.CADIS: ("M", "N", "p", "L"),
    }[fam]
    params = {}
    for n in names:
        v = getattr(args, n)
        if v is None:
            raise geometry.BadParam(f"{fam.value} needs -{n}" if len(n) == 1 else f"{fam.value} needs --{n}")
        params[n] = v
    return geometry.build(fam, params)


def _stats_row(arr: geometry.SensorArray) -> list:
    st = coarray.array_stats(arr)
    return [arr.family.value, _params_text(arr.params), arr.size, st.unique, st.consecutive, st.aperture, st.hole_count]


def _emit(rows, header, out_path=None) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    if out_path:
        Path(out_path).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def cmd_geometry(args) -> int:
    arr = _array_from_args(args)
    print(arr.to_line())
    print(f"sensors: {arr.size}")
    return EXIT_OK


def cmd_coarray(args) -> int:
    arr = _array_from_args(args)
    if args.weights:
        c = coarray.difference_coarray(arr)
        _emit(zip(c.lags.tolist(), c.weights.tolist()), ["lag", "weight"], args.out)
    else:
        _emit([_stats_row(arr)], STATS_HEADER, args.out)
    return EXIT_OK


def compare_rows(budgets) -> list[list]:
    """Top-ranked configuration of each family for every budget."""
    rows = []
    for b in budgets:
        for label, fam, mode in COMPARE_FAMILIES:
            try:
                ranked = coarray.enumerate_configs(b, fam, mode or "compact")
            except SparseDoaError:
                continue
            params, st = ranked[0]
            rows.append([b, label, _params_text(params), b, st.unique, st.consecutive, st.aperture, st.hole_count])
    return rows


def ratio_summary(rows) -> dict:
    """Mean thinned/nested ratios of aperture and consecutive lags."""
    by = {(r[0], r[1]): r for r in rows}
    ap, cons = [], []
    for (b, label), r in sorted(by.items()):
        if label == "thinned_coprime" and (b, "nested") in by:
            n = by[(b, "nested")]
            ap.append(r[6] / n[6])
            cons.append(r[5] / n[5])
    if not ap:
        return {}
    return {
        "budgets": len(ap),
        "mean_aperture_ratio": float(np.mean(ap)),
        "mean_consecutive_ratio": float(np.mean(cons)),
    }


def _parse_budgets(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise geometry.BadParam(f"cannot parse budgets {text!r}; use A..B or a,b,c") from None


def cmd_compare(args) -> int:
    budgets = _parse_budgets(args.budgets)
    if min(budgets) < 4:
        raise geometry.BadParam("sensor budgets must be >= 4")
    if args.family:
        fam = resolve_family(args.family)
        rows = []
        for b in budgets:
            for params, st in coarray.enumerate_configs(b, fam, args.cadis_mode):
                rows.append([b, fam.value, _params_text(params), b, st.unique, st.consecutive, st.aperture, st.hole_count])
        _emit(rows, ["budget"] + STATS_HEADER, args.out)
        return EXIT_OK
    rows = compare_rows(budgets)
    _emit(rows, ["budget"] + STATS_HEADER, args.out)
    if args.summary:
        for k, v in ratio_summary(rows).items():
            print(f"# {k}: {v:.4f}" if isinstance(v, float) else f"# {k}: {v}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    rows, bad = [], 0
    for M in range(args.m_min, args.m_max + 1):
        for N in range(M + 1, args.n_max + 1):
            if math.gcd(M, N) != 1:
                continue
            chk = coarray.verify_thinning(M, N)
            pairs = coarray.verify_conjugate_pairs(M, N)
            ok = (
                chk.equal_sets
                and pairs
                and chk.saving == (M + 1) // 2
                and chk.conv.aperture == chk.thin.aperture
            )
            bad += not ok
            rows.append([M, N, chk.equal_sets, pairs, chk.saving, chk.conv.aperture, chk.thin.aperture, chk.thin.unique])
    _emit(rows, ["M", "N", "equal_sets", "conjugate_pairs", "saving", "conv_aperture", "thin_aperture", "unique"], args.out)
    if not rows:
        raise geometry.BadParam("empty sweep range")
    if bad:
        raise RuntimeFailure(f"{bad} parameter pairs violate the thinning rule")
    return EXIT_OK


def _label(arr: geometry.SensorArray) -> str:
    if not arr.params:
        return f"{arr.family.value}_{arr.size}"
    return arr.family.value + "_" + "_".join(f"{k}-{v}" for k, v in arr.params.items())


def _manifest(cfg: ExperimentConfig, command: str, extra: dict) -> dict:
    return {
        "command": command,
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "versions": {
            "sparsedoa": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "config": cfg.to_dict(),
        **extra,
    }


def _write_manifest(out_dir: Path, manifest: dict) -> None:
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _scenario(cfg: ExperimentConfig, snr_idx: int) -> sigmodel.SourceScenario:
    if cfg.noise_power is not None:
        noise = cfg.noise_power
    else:
        noise = 10.0 ** (-cfg.snr_db[snr_idx] / 10.0)
    return sigmodel.SourceScenario(tuple(cfg.grid.snap(cfg.angles_deg)), tuple(cfg.powers), cfg.snapshots, noise)


def cmd_estimate(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg.output_dir = args.out
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_snr = 1 if cfg.snr_db is None else len(cfg.snr_db)
    results, failed = [], []
    opts = cfg.solver_options()
    for arr in cfg.built_arrays():
        sensing = estimation.SensingProblem.build(arr, cfg.grid)
        for si in range(n_snr):
            scen = _scenario(cfg, si)
            X = sigmodel.simulate_snapshots(arr, scen, sigmodel.make_rng(cfg.seed, si, 0))
            R = sigmodel.sample_covariance(X)
            eps = cfg.epsilon if cfg.epsilon is not None else estimation.default_epsilon(R, cfg.snapshots, cfg.eps_scale)
            name = _label(arr) + (f"_snr{cfg.snr_db[si]:g}" if n_snr > 1 else "")
            spec = estimation.cs_spectrum(arr, R, cfg.grid, eps, opts, sensing)
            spec.write_csv(out_dir / f"spectrum_{name}.csv")
            rep = estimation.detection_report(spec, scen.angles_deg, min_separation_deg=cfg.min_separation_deg)
            _emit(
                [[f"{a:.4f}"] for a in rep.estimated],
                ["angle_deg"],
                out_dir / f"doas_{name}.csv",
            )
            results.append({
                "name": name,
                "array": arr.to_line(),
                "epsilon": round(eps, 10),
                "noise_power_est": round(spec.noise_power_est, 10),
                "converged": spec.converged,
                "iterations": spec.iterations,
                "missed": len(rep.missed),
                "spurious": len(rep.spurious),
                "all_recovered": rep.all_recovered,
            })
            if not spec.converged:
                failed.append(name)
            print(f"{name}: missed={len(rep.missed)} spurious={len(rep.spurious)} "
                  f"noise_est={spec.noise_power_est:.4g} converged={spec.converged}")
    _write_manifest(out_dir, _manifest(cfg, "estimate", {"results": results}))
    if failed:
        raise RuntimeFailure(f"solver did not converge for {', '.join(failed)}")
    return EXIT_OK


def cmd_rmse(args) -> int:
    cfg = load_config(args.config, need_snr_list=True)
    if args.out:
        cfg.output_dir = args.out
    if args.workers:
        cfg.workers = args.workers
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = []
    opts = cfg.solver_options()
    for arr in cfg.built_arrays():
        exp = estimation.RmseExperiment(
            array=arr,
            angles_deg=tuple(cfg.angles_deg),
            snr_db=tuple(cfg.snr_db),
            snapshots=cfg.snapshots,
            runs=cfg.runs,
            grid=cfg.grid,
            eps_scale=cfg.eps_scale,
            epsilon=cfg.epsilon,
            seed=cfg.seed,
            min_separation_deg=cfg.min_separation_deg,
            solver=opts,
            workers=cfg.workers,
        )
        curve = estimation.run_rmse_experiment(exp)
        name = _label(arr)
        curve.write_csv(out_dir / f"rmse_{name}.csv")
        summary.append({"name": name, "array": arr.to_line(), "failures": curve.failures})
        pts = " ".join(f"{s:g}dB={r:.4f}" for s, r in zip(curve.snr_points_db, curve.rmse_deg))
        print(f"{name}: {pts}")
    _write_manifest(out_dir, _manifest(cfg, "rmse", {"results": summary}))
    if any(f == cfg.runs for s in summary for f in s["failures"]):
        raise RuntimeFailure("every run failed at some SNR point")
    return EXIT_OK


def _add_array_args(p) -> None:
    p.add_argument("family", help=f"one of {', '.join(sorted(FAMILY_ALIASES))} or a full family name")
    p.add_argument("-M", type=int)
    p.add_argument("-N", type=int)
    p.add_argument("--N1", type=int)
    p.add_argument("--N2", type=int)
    p.add_argument("-p", type=int, help="CADiS compression factor")
    p.add_argument("-L", type=int, help="CADiS displacement")
    p.add_argument("--positions", type=int, nargs="+", help="explicit positions for a custom array")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparsedoa", description="Sparse array geometry and CS DOA estimation.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("geometry", help="print sensor positions")
    _add_array_args(p)
    p.set_defaults(func=cmd_geometry)

    p = sub.add_parser("coarray", help="co-array statistics as CSV")
    _add_array_args(p)
    p.add_argument("--weights", action="store_true", help="emit the lag/weight table instead")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_coarray)

    p = sub.add_parser("compare", help="lag comparison across sensor budgets")
    p.add_argument("--budgets", default="12..40", help="A..B or comma list (default 12..40)")
    p.add_argument("--family", help="list every configuration of one family instead")
    p.add_argument("--cadis-mode", default="compact", choices=["compact", "far", "nested"])
    p.add_argument("--summary", action="store_true", help="print thinned/nested ratios to stderr")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", help="thinning-rule sweep")
    p.add_argument("--m-min", type=int, default=4)
    p.add_argument("--m-max", type=int, default=10)
    p.add_argument("--n-max", type=int, default=13)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("estimate", help="CS spectrum from a YAML config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides outputs.dir)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("rmse", help="RMSE versus SNR from a YAML config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides outputs.dir)")
    p.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")
    p.set_defaults(func=cmd_rmse)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleEpsilon as exc:
        print(f"error: {exc.name}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ConfigError as exc:
        print(f"error: ConfigError: {len(exc.problems)} problem(s)", file=sys.stderr)
        for line in exc.problems:
            print(f"  - {line}", file=sys.stderr)
        return EXIT_INVALID
    except SparseDoaError as exc:
        print(f"error: {exc.name}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: BadParam: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except RuntimeFailure as exc:
        print(f"error: RuntimeFailure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, yaml.YAMLError) as exc:
        print(f"error: IOError: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
