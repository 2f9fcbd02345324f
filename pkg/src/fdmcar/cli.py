"""Command-line interface: ``fdmcar test | band | simulate | dump-estimates | rerun``.

Every command writes a run manifest next to its outputs (embedded in the
JSON for ``test``, as ``<output>.manifest.json`` otherwise). ``fdmcar rerun``
replays a manifest and reproduces the numeric outputs bit for bit.

Exit codes: 0 success, 1 input/output or parse failure, 2 statistical
validation failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .errors import FdmcarError, InputError, NumericalError, ValidationError
from .estimators import _group_mean, _kernel, restrict
from .mcar import STATISTICS, Analysis, TestConfig
from .partition import load_labels, partition_by_measure, partition_complete
from .sample import load_csv, restrict_domain
from .simulation import ScenarioConfig, run_power_experiment, run_type1_experiment
from .svg import band_svg, power_svg

SCHEMA_VERSION = 1
SEED_ENV = "FDMCAR_SEED"


class UsageError(InputError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _b_grid(s: str) -> list[float]:
    """``lo:hi:step`` or a comma-separated list."""
    try:
        if ":" in s:
            lo, hi, step = (float(x) for x in s.split(":"))
            k = int(round((hi - lo) / step))
            return [round(lo + i * step, 12) for i in range(k + 1)]
        return [float(x) for x in s.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {s!r}: {exc}") from None


def _add_data_args(p):
    p.add_argument("--input", required=True, help="CSV, one curve per row")
    p.add_argument("--header", action="store_true", help="first row holds grid coordinates")
    p.add_argument("--missing-token", default="NA")
    p.add_argument("--partition", default="complete", help="complete | measure:<delta> | file:<path>")
    p.add_argument("--threshold", type=float, default=0.1, help="per-group coverage threshold for the subdomain")


def _add_calib_args(p):
    p.add_argument("--calibration", choices=["asymptotic", "bootstrap"], default="asymptotic")
    p.add_argument("--bstar", type=_positive_int, default=10_000)
    p.add_argument("--fve", type=float, default=0.99)
    p.add_argument("--q-max", type=_positive_int, default=50)
    p.add_argument("--seed", type=int, default=None, help=f"defaults to ${SEED_ENV}, else 0")
    p.add_argument("--threads", type=_positive_int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fdmcar", description="MCAR tests for partially observed functional data")
    parser.add_argument("--version", action="version", version=f"fdmcar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("test", help="run one or all MCAR tests")
    _add_data_args(p)
    _add_calib_args(p)
    p.add_argument("--method", choices=[*STATISTICS, "all"], default="all")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--m-z", type=_positive_int, default=100)
    p.add_argument("--K", type=_positive_int, default=200)
    p.add_argument("--out", help="result JSON (stdout if omitted)")
    p.add_argument("--dump-estimates", metavar="DIR", help="also write estimator CSVs to DIR")

    p = sub.add_parser("band", help="simultaneous confidence band for the mean difference")
    _add_data_args(p)
    _add_calib_args(p)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out", help="band CSV (default <input stem>_band.csv)")
    p.add_argument("--plot", nargs="?", const="", default=None, help="SVG path (default <input stem>_band.svg)")

    p = sub.add_parser("simulate", help="Brownian-motion simulation study")
    p.add_argument("--case", type=int, choices=[1, 2], required=True)
    p.add_argument("--n", type=_positive_int, default=100)
    p.add_argument("--p", type=_positive_int, default=100)
    p.add_argument("--reps", type=_positive_int, default=1000)
    p.add_argument("--bstar", type=_positive_int, default=2000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--a", type=float, default=-1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--b-grid", type=_b_grid, default=None, help="lo:hi:step or comma list (case 2)")
    p.add_argument("--method", choices=[*STATISTICS, "all"], default="all")
    p.add_argument("--calibration", choices=["asymptotic", "bootstrap", "both"], default="both")
    p.add_argument("--fve", type=float, default=0.99)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--out", help="rejection table CSV (default simulate_case<k>.csv)")
    p.add_argument("--plot", nargs="?", const="", default=None, help="SVG of rejection curves (case 2)")

    p = sub.add_parser("dump-estimates", help="write mean, p_hat and kernel estimates as CSV")
    _add_data_args(p)
    p.add_argument("--out", required=True, metavar="DIR")

    p = sub.add_parser("rerun", help="replay a run manifest")
    p.add_argument("manifest")
    p.add_argument("--threads", type=_positive_int, default=None, help="override the recorded thread count")
    p.add_argument("--out-dir", default=None, help="write outputs here instead of the recorded paths")
    return parser


def _resolve_seed(seed):
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None


def _labels(sample, spec: str):
    if spec == "complete":
        return partition_complete(sample)
    if spec.startswith("measure:"):
        try:
            delta = float(spec.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad partition {spec!r}") from None
        if not 0 < delta <= 1:
            raise UsageError("measure threshold must lie in (0, 1]")
        return partition_by_measure(sample, delta)
    if spec.startswith("file:"):
        return load_labels(spec.split(":", 1)[1], sample.n)
    raise UsageError(f"unknown partition {spec!r}; use complete, measure:<delta> or file:<path>")


def _load(args):
    sample = load_csv(args.input, missing_token=args.missing_token, header=args.header)
    labels = _labels(sample, args.partition)
    subdomain = restrict_domain(sample, labels, args.threshold)
    return sample, labels, subdomain


def _subdomain_info(sample, subdomain) -> dict:
    return {
        "columns": [int(j) for j in subdomain.kept],
        "intervals": [[float(a), float(b)] for a, b in subdomain.intervals(sample.grid)],
        "size": int(len(subdomain)),
        "coverage_fraction": float(subdomain.coverage_fraction),
    }


def _replay_argv(args, argv) -> list[str]:
    """``argv`` with an explicit seed and absolute paths, so a manifest replays anywhere."""
    out = list(argv)
    path_flags = {"--input", "--out", "--plot", "--dump-estimates"}
    for i, tok in enumerate(out[:-1]):
        if tok in path_flags and not out[i + 1].startswith("--"):
            out[i + 1] = str(Path(out[i + 1]).resolve())
        if tok == "--partition" and out[i + 1].startswith("file:"):
            out[i + 1] = "file:" + str(Path(out[i + 1][5:]).resolve())
    for i, tok in enumerate(out):
        if tok.startswith("--") and "=" in tok:
            raise UsageError("use '--flag value' rather than '--flag=value'")
    if "seed" in vars(args) and "--seed" not in out:
        out += ["--seed", str(args.seed)]
    return out


def _manifest(args, argv, started, **extra) -> dict:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    return {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "argv": list(argv),
        "replay_argv": _replay_argv(args, argv),
        "config": config,
        "seed": getattr(args, "seed", None),
        "elapsed_seconds": time.perf_counter() - started,
        **extra,
    }


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, allow_nan=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _write_table(path, header, columns):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def _dump(sample, labels, subdomain, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    r = restrict(sample, labels, subdomain)
    a, b = _group_mean(r, "A"), _group_mean(r, "B")
    t = sample.grid.points[subdomain.kept]
    _write_table(outdir / "mean.csv", ["t", "mu_A", "mu_B", "diff"], [t, a.mu, b.mu, a.mu - b.mu])
    _write_table(outdir / "p_hat.csv", ["t", "p_A", "p_B"], [t, a.p_hat, b.p_hat])
    k = _kernel(r).k
    np.savetxt(outdir / "kernel.csv", k, delimiter=",", fmt="%.17g")
    return [str(outdir / f) for f in ("mean.csv", "p_hat.csv", "kernel.csv")]


def _test_config(args, seed) -> TestConfig:
    if not 0 < args.fve <= 1:
        raise UsageError("--fve must lie in (0, 1]")
    return TestConfig(
        calibration=args.calibration,
        bstar=args.bstar,
        fve=args.fve,
        q_max=args.q_max,
        seed=seed,
        threshold=args.threshold,
        m_z=getattr(args, "m_z", 100),
        K=getattr(args, "K", 200),
    )


def cmd_test(args, argv) -> int:
    started = time.perf_counter()
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    sample, labels, subdomain = _load(args)
    analysis = Analysis(sample, labels, _test_config(args, args.seed), subdomain)
    methods = STATISTICS if args.method == "all" else (args.method,)
    results = []
    for kind in methods:
        res = analysis.test(kind)
        results.append({**res.as_dict(), "rejects": bool(res.rejects(args.alpha)), "alpha": args.alpha})
    outputs = _dump(sample, labels, subdomain, args.dump_estimates) if args.dump_estimates else []
    manifest = _manifest(
        args,
        argv,
        started,
        subdomain=_subdomain_info(sample, subdomain),
        group_sizes={"n": sample.n, "n_A": labels.n_a, "n_B": labels.n_b},
        partition_rule=labels.rule,
        q_used={r["method"]: r["q_used"] for r in results},
        outputs=outputs,
    )
    _write_json({"schema_version": SCHEMA_VERSION, "results": results, "manifest": manifest}, args.out)
    return 0


def _default(path, stem, suffix):
    return Path(path) if path else Path(f"{stem}{suffix}")


def cmd_band(args, argv) -> int:
    started = time.perf_counter()
    if not 0 < args.level < 1:
        raise UsageError("--level must lie in (0, 1)")
    sample, labels, subdomain = _load(args)
    band = Analysis(sample, labels, _test_config(args, args.seed), subdomain).band(args.level)
    stem = Path(args.input).stem + "_band"
    out = _default(args.out, stem, ".csv")
    _write_table(out, ["t", "center", "lower", "upper"], [band.t, band.center, band.lower, band.upper])
    outputs = [str(out)]
    if args.plot is not None:
        plot = Path(args.plot) if args.plot else (out.with_suffix(".svg") if args.out else Path(stem + ".svg"))
        plot.write_text(band_svg(band.t, band.center, band.half_width, band.level))
        outputs.append(str(plot))
    manifest = _manifest(
        args,
        argv,
        started,
        subdomain=_subdomain_info(sample, subdomain),
        group_sizes={"n": sample.n, "n_A": labels.n_a, "n_B": labels.n_b},
        partition_rule=labels.rule,
        q_used=band.q_used,
        band={
            "level": band.level,
            "source": band.source,
            "quantile": band.quantile,
            "half_width": band.half_width,
            "contains_zero": band.contains_zero(),
        },
        outputs=outputs,
    )
    _write_json(manifest, f"{out}.manifest.json")
    _write_json({"schema_version": SCHEMA_VERSION, "band": manifest["band"], "outputs": outputs}, None)
    return 0


def cmd_simulate(args, argv) -> int:
    started = time.perf_counter()
    if args.plot is not None and args.case == 1:
        raise UsageError("--plot draws rejection curves over --b-grid and needs --case 2")
    methods = STATISTICS if args.method == "all" else (args.method,)
    cals = ("asymptotic", "bootstrap") if args.calibration == "both" else (args.calibration,)
    try:
        config = ScenarioConfig(
            n=args.n,
            p=args.p,
            mechanism="mcar_interval" if args.case == 1 else "censoring",
            a=args.a,
            b=args.b,
            reps=args.reps,
            alpha=args.alpha,
            seed=args.seed,
            bstar=args.bstar,
            methods=methods,
            calibrations=cals,
            fve=args.fve,
            threads=args.threads,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.case == 1:
        table = run_type1_experiment(config)
    else:
        table = run_power_experiment(config, args.b_grid or [args.b])
    out = _default(args.out, f"simulate_case{args.case}", ".csv")
    table.write_csv(out)
    outputs = [str(out)]
    if args.plot is not None:
        plot = Path(args.plot) if args.plot else out.with_suffix(".svg")
        b_grid = table.config["b_grid"]
        curves = {m: [table.rate(m, b) for b in b_grid] for m in table.pvalues[b_grid[0]]}
        plot.write_text(power_svg(b_grid, curves, args.alpha))
        outputs.append(str(plot))
    manifest = _manifest(args, argv, started, scenario=table.config, outputs=outputs, table=table.rows)
    _write_json(manifest, f"{out}.manifest.json")
    return 0


def cmd_dump(args, argv) -> int:
    started = time.perf_counter()
    sample, labels, subdomain = _load(args)
    outputs = _dump(sample, labels, subdomain, args.out)
    manifest = _manifest(
        args,
        argv,
        started,
        subdomain=_subdomain_info(sample, subdomain),
        group_sizes={"n": sample.n, "n_A": labels.n_a, "n_B": labels.n_b},
        outputs=outputs,
    )
    _write_json(manifest, Path(args.out) / "manifest.json")
    return 0


def _redirect(argv: list[str], out_dir: Path) -> list[str]:
    argv = list(argv)
    for i, tok in enumerate(argv[:-1]):
        if tok in ("--out", "--plot", "--dump-estimates") and not argv[i + 1].startswith("--"):
            argv[i + 1] = str(out_dir / Path(argv[i + 1]).name)
    return argv


def cmd_rerun(args, argv) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        manifest = manifest.get("manifest", manifest)  # test results embed their manifest
        replay = list(manifest["replay_argv"])
    except (OSError, ValueError, KeyError, AttributeError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest}: {exc}") from None
    if args.threads is not None:
        if "--threads" in replay:
            replay[replay.index("--threads") + 1] = str(args.threads)
        else:
            replay += ["--threads", str(args.threads)]
    if args.out_dir is not None:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        replay = _redirect(replay, out_dir)
        # default output names follow --out, so pinning it redirects plots too
        if replay[0] in ("band", "simulate") and "--out" not in replay:
            replay += ["--out", str(out_dir / Path(manifest["outputs"][0]).name)]
    return main(replay)


COMMANDS = {"test": cmd_test, "band": cmd_band, "simulate": cmd_simulate, "dump-estimates": cmd_dump, "rerun": cmd_rerun}


def _fail(exc: Exception, code: int) -> int:
    err = {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("row", "column", "max_min_count"):
        if getattr(exc, attr, None) is not None:
            err[attr] = getattr(exc, attr)
    sys.stdout.write(json.dumps({"schema_version": SCHEMA_VERSION, "error": err}) + "\n")
    sys.stderr.write(f"fdmcar: error: {exc}\n")
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if "seed" in vars(args):
            args.seed = _resolve_seed(args.seed)
        with threadpool_limits(1):
            return COMMANDS[args.command](args, argv)
    except (InputError, OSError) as exc:
        return _fail(exc, 1)
    except (ValidationError, NumericalError) as exc:
        return _fail(exc, 2)
    except FdmcarError as exc:
        return _fail(exc, 2)


if __name__ == "__main__":
    sys.exit(main())
