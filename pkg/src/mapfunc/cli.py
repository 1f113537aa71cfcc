"""Command-line front end.

Subcommands: describe, classify, simulate, cramer, subexp, checks.  Every
command is reproducible byte for byte given the same inputs and seed
(wall-clock timing goes to stderr, never into artifacts).  Exit codes:
0 ok/convergent, 10 divergent/refused, 11 no positive eigenvalue root,
12 not of subexponential type, 13 property-check failure, 20
inconclusive, 1 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import secrets
import sys
import time

import numpy as np

from . import cramer, finiteness, heavytail, model as model_mod, sim
from .errors import (
    EpsilonTooLarge,
    MapfuncError,
    ModelFileError,
    NotConvergent,
    NotOfTypeError,
    PositiveDrift,
)
from .model import UNDEFINED, drift_K, is_degenerate, scan_leading_eigenvalue
from .modelfile import load_model
from .rngstreams import STREAM_SPAN
from .stats import SampleSet

EXIT_OK = 0
EXIT_DIVERGENT = 10
EXIT_NO_ROOT = 11
EXIT_NOT_OF_TYPE = 12
EXIT_CHECK_FAILED = 13
EXIT_INCONCLUSIVE = 20
EXIT_USAGE = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and math.isinf(obj):
        return "Infinity" if obj > 0 else "-Infinity"
    return obj


def _dump_json(obj, path=None) -> str:
    text = json.dumps(_jsonify(obj), sort_keys=True, indent=2) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def _write_curve_csv(path, header: tuple[str, str], xs, ys) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{header[0]},{header[1]}\n")
        for x, y in zip(xs, ys):
            fh.write(f"{float(x)!r},{float(y)!r}\n")


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = secrets.randbits(63)
    print(f"note: no --seed given, using generated seed {seed}", file=sys.stderr)
    return seed


def _resolve_threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("MAPFUNC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            print(f"warning: ignoring bad MAPFUNC_THREADS={env!r}", file=sys.stderr)
    return 1


def _parse_grid(spec: str) -> np.ndarray:
    try:
        lo, hi, n = spec.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    except ValueError:
        raise argparse.ArgumentTypeError("grid must be 'lo:hi:count'") from None


def _parse_window(spec: str) -> tuple[float, float]:
    try:
        hi, lo = spec.split(":")
        return float(hi), float(lo)
    except ValueError:
        raise argparse.ArgumentTypeError("window must be 'shallow:deep'") from None


def _load_model_or_exit(path):
    try:
        return load_model(path)
    except FileNotFoundError:
        print(f"error: model file not found: {path}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE) from None
    except ModelFileError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE) from None


def _outdir(args) -> str | None:
    if args.out is None:
        return None
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _emit(args, name: str, payload) -> None:
    out = _outdir(args)
    if out is None:
        sys.stdout.write(_dump_json(payload))
    else:
        path = os.path.join(out, name)
        _dump_json(payload, path)
        print(f"wrote {path}", file=sys.stderr)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_describe(args) -> int:
    mdl = _load_model_or_exit(args.model)
    k = drift_K(mdl)
    lines = [
        f"model hash: {mdl.model_hash()}",
        f"K: {'Undefined' if k is UNDEFINED else k}",
        f"degenerate: {str(is_degenerate(mdl)).lower()}",
        f"mean cycle time: {mdl.mean_cycle_time()}",
        f"killing: {mdl.killing}",
        f"non-lattice: {str(cramer.lattice_guard(mdl)).lower()}",
    ]
    for name, law in (
        ("levy.plus", mdl.levy_plus),
        ("levy.minus", mdl.levy_minus),
        ("jump.plus", mdl.u_plus),
        ("jump.minus", mdl.u_minus),
    ):
        lo, hi = law.mgf_domain()
        lines.append(f"transform domain {name}: ({lo:g}, {hi:g})")
    if mdl.killing == 0:
        zmax = model_mod.transform_domain_sup(mdl)
        hi = min(2.0, zmax - 1e-6) if math.isfinite(zmax) else 2.0
        grid = args.grid if args.grid is not None else np.linspace(-2.0, max(hi, -1.0), 17)
        lines.append("leading eigenvalue scan:")
        for z, lam in scan_leading_eigenvalue(mdl, grid):
            lines.append(f"  z={z:+.6g}  lambda={'absent' if lam is None else f'{lam:.10g}'}")
    else:
        lines.append("leading eigenvalue scan: skipped (killing > 0)")
    print("\n".join(lines))
    return EXIT_OK


def cmd_classify(args) -> int:
    mdl = _load_model_or_exit(args.model)
    seed = _resolve_seed(args)
    cfg = sim.SimConfig(master_seed=seed)
    verdict = finiteness.classify_convergence(mdl, cfg, n=args.n)
    payload = verdict.to_dict()
    payload["seed"] = seed
    payload["model"] = mdl.model_hash()
    _emit(args, "verdict.json", payload)
    if verdict.convergent:
        return EXIT_OK
    if verdict.divergent:
        return EXIT_DIVERGENT
    return EXIT_INCONCLUSIVE


def cmd_simulate(args) -> int:
    mdl = _load_model_or_exit(args.model)
    seed = _resolve_seed(args)
    threads = _resolve_threads(args)
    cfg = sim.SimConfig(master_seed=seed, diverge_threshold=args.diverge_threshold)
    verdict = finiteness.classify_convergence(mdl, cfg, base_stream=9 * STREAM_SPAN)
    if not verdict.convergent and not args.force:
        payload = verdict.to_dict()
        payload["refused"] = True
        _emit(args, "verdict.json", payload)
        print("refusing to sample a non-convergent model (use --force)", file=sys.stderr)
        return EXIT_DIVERGENT

    t0 = time.monotonic()
    a, b, diverged, hit_max = sim.sample_AB_batch(mdl, args.n, cfg, 0, threads)
    wall = time.monotonic() - t0
    keep = ~diverged
    mh = mdl.model_hash()
    a_set = SampleSet(a[keep], label="A_inf", model_hash=mh, master_seed=seed)
    b_set = SampleSet(b[keep], label="B_inf", model_hash=mh, master_seed=seed)
    out = _outdir(args) or "."
    if args.format == "csv":
        a_path, b_path = os.path.join(out, "a.csv"), os.path.join(out, "b.csv")
        a_set.save_csv(a_path)
        b_set.save_csv(b_path)
    else:
        a_path, b_path = os.path.join(out, "a.mfs"), os.path.join(out, "b.mfs")
        a_set.save_binary(a_path)
        b_set.save_binary(b_path)
    manifest = {
        "model": mh,
        "seed": seed,
        "requested": args.n,
        "kept": int(keep.sum()),
        "divergedFraction": float(diverged.mean()),
        "hitMaxCyclesFraction": float(hit_max.mean()),
        "files": [os.path.basename(a_path), os.path.basename(b_path)],
        "format": args.format,
        "verdict": verdict.tag.value,
    }
    _dump_json(manifest, os.path.join(out, "manifest.json"))
    print(
        f"sampled {args.n} draws in {wall:.2f}s on {threads} thread(s) -> {out}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_cramer(args) -> int:
    mdl = _load_model_or_exit(args.model)
    seed = _resolve_seed(args)
    threads = _resolve_threads(args)
    cfg = sim.SimConfig(master_seed=seed)
    try:
        root = cramer.find_cramer_root(mdl)
    except PositiveDrift as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_ROOT
    if isinstance(root, cramer.RootStatus):
        zmax = model_mod.transform_domain_sup(mdl)
        hi = min(8.0, zmax - 1e-6) if math.isfinite(zmax) else 8.0
        scan = scan_leading_eigenvalue(mdl, np.linspace(0.0, max(hi, 0.5), 33))
        payload = {
            "status": root.value,
            "lambdaScan": [[z, lam] for z, lam in scan],
            "seed": seed,
        }
        _emit(args, "cramer.json", payload)
        return EXIT_NO_ROOT

    if args.samples:
        a_samples = (
            SampleSet.load_binary(args.samples)
            if args.samples.endswith(".mfs")
            else SampleSet.load_csv(args.samples)
        )
        b_samples = None
    else:
        a, b, diverged, _ = sim.sample_AB_batch(mdl, args.n, cfg, 0, threads)
        keep = ~diverged
        mh = mdl.model_hash()
        a_samples = SampleSet(a[keep], label="A_inf", model_hash=mh, master_seed=seed)
        b_samples = SampleSet(b[keep], label="B_inf", model_hash=mh, master_seed=seed)

    report = cramer.build_cramer_report(mdl, root, a_samples, b_samples, window=args.window)
    payload = report.to_dict()
    payload["seed"] = seed
    payload["model"] = mdl.model_hash()
    if report.c_a is not None:
        slope, slope_se = None, None
        try:
            from .stats import loglog_tail_slope

            slope, slope_se = loglog_tail_slope(a_samples, args.window)
        except MapfuncError:
            pass
        payload["tailSlope"] = slope
        payload["tailSlopeStderr"] = slope_se
    _emit(args, "cramer.json", payload)
    out = _outdir(args)
    if out is not None and report.c_a is not None:
        _write_curve_csv(
            os.path.join(out, "fit.csv"),
            ("t", "t_kappa_survival"),
            report.c_a.thresholds,
            report.c_a.values,
        )
    return EXIT_OK


def cmd_subexp(args) -> int:
    mdl = _load_model_or_exit(args.model)
    seed = _resolve_seed(args)
    threads = _resolve_threads(args)
    # Deep-tail sampling setup: the divergence threshold is lifted so the
    # tail is not censored, and the truncation weight is far below the
    # default because with a power-law jump the chance that a truncated
    # draw would still have cleared a deep threshold decays only
    # polynomially in the truncation depth.
    cfg = sim.SimConfig(
        master_seed=seed, diverge_threshold=1e250, trunc_weight=1e-100
    )
    try:
        report = heavytail.subexp_compare(
            mdl, cfg, args.n, threads=threads, window=args.window
        )
    except (NotOfTypeError, PositiveDrift) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_OF_TYPE
    payload = report.to_dict()
    payload["seed"] = seed
    payload["model"] = mdl.model_hash()
    if args.diagnose:
        k = drift_K(mdl)
        eps = -k / 2.0
        stats = heavytail.excursion_decompose(
            mdl, cfg, eps, args.level_a, args.paths, base_stream=7 * STREAM_SPAN
        )
        payload["excursions"] = stats.to_dict()
    _emit(args, "subexp.json", payload)
    out = _outdir(args)
    if out is not None:
        _write_curve_csv(
            os.path.join(out, "ratio.csv"), ("x", "ratio"), report.x, report.ratio
        )
    return EXIT_OK


def cmd_checks(args) -> int:
    mdl = _load_model_or_exit(args.model)
    seed = _resolve_seed(args)
    cfg = sim.SimConfig(master_seed=seed)
    results = {}
    failures = []

    wk = heavytail.willekens_check(
        mdl.levy_plus, mdl.q_plus, u=2.0, u0=1.0, n=args.n, cfg=cfg, base_stream=0
    )
    results["willekens"] = wk
    if not wk["ok"]:
        failures.append("willekens")

    k = drift_K(mdl)
    heavy_law = None
    for law in (mdl.u_plus, mdl.u_minus):
        if law.right_tail_class() is model_mod.TailClass.STRONG_SUBEXP:
            heavy_law = law
            break
    if heavy_law is not None and k is not UNDEFINED and isinstance(k, float) and k < 0:
        xs = np.geomspace(2.0, 20.0, 8)
        try:
            ts = heavytail.tailsum_check(
                heavy_law,
                mdl.q_plus,
                mdl.q_minus,
                k,
                eps=-k / 2.0,
                x_grid=xs,
                n_t=max(args.n, 10_000),
                master_seed=seed,
                base_stream=STREAM_SPAN,
            )
            results["tailsum"] = ts
            if abs(ts["ratio"][-1] - 1.0) > 0.05:
                failures.append("tailsum")
        except EpsilonTooLarge as exc:
            results["tailsum"] = {"skipped": str(exc)}
    else:
        results["tailsum"] = {"skipped": "no strong-subexponential switch jump or K >= 0"}

    if k is not UNDEFINED and isinstance(k, float) and math.isfinite(k) and k < 0:
        eps = -k / 2.0
        level_a = max(args.level_a, math.log(2.0) + math.log(-(k + eps)) + 0.5)
        horizon = 60.0 * mdl.mean_cycle_time()
        c_override = None
        if args.corrupt_logbound_c:
            c_override = 0.5 * (level_a - math.log(-(k + eps)))
        la = heavytail.logA_bound_check(
            mdl,
            cfg,
            eps,
            level_a,
            horizon,
            n_paths=args.paths,
            base_stream=2 * STREAM_SPAN,
            c_override=c_override,
        )
        results["logBound"] = la
        if la["violations"] != 0:
            failures.append("logBound")
    else:
        results["logBound"] = {"skipped": "needs finite K < 0"}

    try:
        af = sim.affine_fixedpoint_check(
            mdl, cfg, n=args.n, base_stream=3 * STREAM_SPAN
        )
        results["affine"] = af
        if not af["pass"]:
            failures.append("affine")
    except NotConvergent as exc:
        results["affine"] = {"skipped": str(exc)}

    payload = {"results": results, "failures": failures, "seed": seed, "model": mdl.model_hash()}
    _emit(args, "checks.json", payload)
    if failures:
        print("failed checks: " + ", ".join(failures), file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, n_default: int) -> None:
    p.add_argument("--model", required=True, help="model specification file")
    p.add_argument("--out", help="output directory (default: JSON to stdout)")
    p.add_argument("--seed", type=int, help="master seed (generated and logged if omitted)")
    p.add_argument("--n", type=int, default=n_default, help="sample count")
    p.add_argument("--threads", type=int, help="worker threads (or MAPFUNC_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mapfunc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("describe", help="analytic summary of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", type=_parse_grid, help="eigenvalue scan grid 'lo:hi:count'")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("classify", help="convergence verdict")
    _add_common(p, n_default=20_000)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", help="sample the exponential functionals")
    _add_common(p, n_default=100_000)
    p.add_argument("--force", action="store_true", help="sample even if divergent")
    p.add_argument("--format", choices=("csv", "bin"), default="csv")
    p.add_argument("--diverge-threshold", type=float, default=1e12)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cramer", help="tail exponent and tail constants")
    _add_common(p, n_default=100_000)
    p.add_argument("--samples", help="reuse functional samples (csv or .mfs)")
    p.add_argument(
        "--window", type=_parse_window, default=(1e-2, 1e-4), help="survival window 'hi:lo'"
    )
    p.set_defaults(func=cmd_cramer)

    p = sub.add_parser("subexp", help="heavy-tail asymptotics check")
    _add_common(p, n_default=100_000)
    p.add_argument(
        "--window", type=_parse_window, default=(1e-2, 1e-4), help="survival window 'hi:lo'"
    )
    p.add_argument("--diagnose", action="store_true", help="attach excursion statistics")
    p.add_argument("--level-a", type=float, default=4.0, help="excursion barrier level")
    p.add_argument("--paths", type=int, default=2_000, help="excursion path count")
    p.set_defaults(func=cmd_subexp)

    p = sub.add_parser("checks", help="bundle of property checks")
    _add_common(p, n_default=50_000)
    p.add_argument("--level-a", type=float, default=3.0)
    p.add_argument("--paths", type=int, default=2_000)
    # Negative control: halve the log-bound constant so the check must fail.
    p.add_argument(
        "--corrupt-logbound-c", action="store_true", help=argparse.SUPPRESS
    )
    p.set_defaults(func=cmd_checks)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MapfuncError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
