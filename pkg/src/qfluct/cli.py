"""``qf``: command-line runner for the kernel, sampling and simulation checks.

Exit codes: 0 ok, 1 a checked threshold failed (``--strict``, ``verify``),
2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import acceptance, gp, particles, presets, rw
from .dist import HeatField, MixtureDensity, mixture_from_doc
from .errors import DomainError, NumericError
from .kernel import LimitKernel, write_kernel_csv
from .quantile import QuantileCurve

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(Exception):
    pass


def parse_grid(text: str) -> np.ndarray:
    """``a:b:step`` with both ends included."""
    try:
        a, b, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigError(f"grid must look like a:b:step, got {text!r}") from None
    if step <= 0 or b < a or a < 0:
        raise ConfigError(f"bad grid {text!r}: need 0 <= a <= b and step > 0")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return a + step * np.arange(count)


def parse_floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("QF_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"QF_THREADS must be an integer, got {env!r}") from None
    return 1


def _load(args) -> tuple[dict, MixtureDensity, float]:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    if getattr(args, "mixture", None):
        doc["preset"] = args.mixture
    if "mixture" in doc:
        mix = mixture_from_doc(doc)
    elif "preset" in doc:
        try:
            mix = presets.mixture(doc["preset"])
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    else:
        mix = MixtureDensity.standard_normal()
    alpha = args.alpha if getattr(args, "alpha", None) is not None else doc.get("alpha", 0.5)
    return doc, mix, float(alpha)


def _pick(args, doc, name, default, cast=lambda v: v):
    val = getattr(args, name, None)
    if val is None:
        val = doc.get(name, default)
    return cast(val)


def _sidecar(out: Path, resolved: dict) -> Path:
    path = out.with_name(out.name + ".config.json")
    path.write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")
    return path


def _report(out: Path, report) -> Path:
    path = out.with_name(out.name + ".report.json")
    path.write_text(json.dumps(report, indent=2, sort_keys=True, default=float) + "\n")
    return path


def _base_resolved(command, mix, alpha, seed, threads, out):
    return {"command": command, "mixture": mix.to_json(), "alpha": alpha, "seed": seed, "threads": threads,
            "out": str(out)}


def cmd_kernel(args) -> int:
    doc, mix, alpha = _load(args)
    grid = parse_grid(_pick(args, doc, "grid", "0:3:0.1"))
    out = Path(_pick(args, doc, "out", "kernel.csv"))
    kernel = LimitKernel(QuantileCurve.from_mixture(mix, alpha))
    rows = write_kernel_csv(kernel, grid, out)
    resolved = _base_resolved("kernel", mix, alpha, None, _threads(args), out)
    resolved.update(grid=_pick(args, doc, "grid", "0:3:0.1"), points=int(grid.size), rows=rows)
    _sidecar(out, resolved)
    print(f"wrote {rows} rows to {out}")
    return EXIT_OK


def cmd_gp(args) -> int:
    doc, mix, alpha = _load(args)
    grid_n = _pick(args, doc, "grid_n", 4096, int)
    t_max = _pick(args, doc, "t_max", 1.0, float)
    replicas = _pick(args, doc, "replicas", 8, int)
    seed = _pick(args, doc, "seed", presets.GP_SEED, int)
    out = Path(_pick(args, doc, "out", "gp_paths.csv"))
    threads = _threads(args)
    if grid_n < 1 or t_max <= 0 or replicas < 1:
        raise ConfigError("need grid_n >= 1, t_max > 0 and replicas >= 1")
    kernel = LimitKernel(QuantileCurve.from_mixture(mix, alpha))
    grid = np.linspace(0.0, t_max, grid_n + 1)
    sample = gp.sample_gp(kernel, grid, replicas, seed, workers=threads)
    gp.write_paths_csv(sample, out)
    report = gp.quartic_report(sample, kernel, t_max)
    if grid_n >= 64:
        report["hurst"] = gp.hurst_estimate(sample)
    resolved = _base_resolved("gp", mix, alpha, seed, threads, out)
    resolved.update(grid_n=grid_n, t_max=t_max, replicas=replicas, fingerprint=sample.fingerprint)
    _sidecar(out, resolved)
    _report(out, report)
    print(json.dumps(report, sort_keys=True))
    if args.strict and report["rel_err"] > 0.15:
        print(f"quartic variation rel_err {report['rel_err']:.3f} exceeds 0.15", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_particles(args) -> int:
    doc, mix, alpha = _load(args)
    n = _pick(args, doc, "n", 10_000, int)
    replicas = _pick(args, doc, "replicas", 10_000, int)
    times = parse_floats(_pick(args, doc, "times", "0,0.5,1"))
    seed = _pick(args, doc, "seed", presets.PARTICLE_SEED, int)
    checks = [c for c in str(_pick(args, doc, "checks", "fdd,tail")).split(",") if c]
    alphas = parse_floats(_pick(args, doc, "alphas", "0.25,0.75"))
    out = Path(_pick(args, doc, "out", "particles_fn.csv"))
    threads = _threads(args)
    unknown = set(checks) - {"fdd", "bridge", "field", "tail"}
    if unknown:
        raise ConfigError(f"unknown particle checks {sorted(unknown)}")
    fld = HeatField(mix)
    cfg = particles.EnsembleConfig(fld, alpha, n, tuple(times), replicas, seed)
    kernel = LimitKernel(QuantileCurve(fld, alpha))
    sample = particles.simulate_ensemble(cfg, workers=threads)
    particles.write_fn_csv(sample, out)
    report, failures = {}, []
    if "fdd" in checks:
        rep = particles.fdd_covariance_check(sample, kernel)
        report["fdd"] = rep
        if max(map(max, rep["rel_err"])) > 0.05 or max(abs(k) for k in rep["kurtosis"]) > 0.15:
            failures.append("fdd")
    if "tail" in checks:
        lam = float(3 * math.sqrt(kernel.rho(cfg.times[0], cfg.times[0])))
        rep = particles.tail_check(sample, [0.5, 1.0, 2.0, lam], kernel)
        report["tail"] = rep
        if not rep["pass"]:
            failures.append("tail")
    if "bridge" in checks:
        t = cfg.times[-1]
        rep = particles.fixed_time_bridge_check(cfg, t, alphas, workers=threads)
        report["bridge"] = rep
        if max(map(max, rep["rel_err"])) > 0.07:
            failures.append("bridge")
    if "field" in checks:
        s, t = cfg.times[0], cfg.times[-1]
        q = QuantileCurve(fld, alpha)
        rep = particles.empirical_field_cov(cfg, (float(q.quantile(s)), s), (float(q.quantile(t)), t), workers=threads)
        report["field"] = rep
        if rep["rel_err"] > 0.07:
            failures.append("field")
    resolved = _base_resolved("particles", mix, alpha, seed, threads, out)
    resolved.update(n=n, j=cfg.j, replicas=replicas, times=list(cfg.times), checks=checks, alphas=alphas)
    _sidecar(out, resolved)
    _report(out, report)
    for name, rep in report.items():
        print(name, json.dumps({k: rep[k] for k in ("rel_err", "pass", "kurtosis", "freq") if k in rep}))
    if args.strict and failures:
        print(f"threshold breached: {', '.join(failures)}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_rw(args) -> int:
    doc, mix, alpha = _load(args)
    seed = _pick(args, doc, "seed", presets.RW_SEED, int)
    replicas = _pick(args, doc, "replicas", 10_000 if args.quick else 100_000, int)
    out = Path(_pick(args, doc, "out", "rwest_sweep.csv"))
    curve = QuantileCurve.from_mixture(mix, alpha)
    # preset 1: the sandwich at s = 0.5, t = 0.6, n = 200, y = -0.05
    sand = rw.sandwich_check(rw.GapContext(curve, 0.5, 0.6, 0.0, -0.05), 200, replicas, seed)
    # preset 2: the random-walk ratio sweep
    rows = rw.rwest_sweep(presets.RWEST_PRESETS, presets.RWEST_NS, alpha=0.5, tau=2.0)
    rw.write_rwest_csv(rows, out)
    # preset 3: the Taylor remainder sweep
    taylor = [
        rw.psi_taylor_check(rw.GapContext(curve, 0.5, 0.5 + d, x, y))
        for d in presets.TAYLOR_DELTAS
        for y in presets.taylor_ys(d)
        for x in presets.TAYLOR_XS
    ]
    growth = max(
        max(r["ratio"] for r in rows if (r["r1"], r["r2"]) == p) / next(r["ratio"] for r in rows if (r["r1"], r["r2"]) == p)
        for p in presets.RWEST_PRESETS
    )
    report = {
        "sandwich": sand,
        "rwest": {"rows": rows, "max_growth": growth, "pass": growth <= 2.0},
        "taylor": {"rows": taylor, "pass": all(r["pass"] for r in taylor)},
    }
    resolved = _base_resolved("rw", mix, alpha, seed, _threads(args), out)
    resolved.update(replicas=replicas)
    _sidecar(out, resolved)
    _report(out, report)
    summary = {k: v["pass"] for k, v in report.items()}
    print(json.dumps(summary))
    if args.strict and not all(summary.values()):
        return EXIT_FAILED
    return EXIT_OK


def cmd_verify(args) -> int:
    numbers = None
    if args.only:
        numbers = {int(v) for v in args.only.split(",")}
    results = acceptance.run(numbers, quick=args.quick, on_result=lambda r: print(r.line(), flush=True))
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    if args.out:
        out = Path(args.out)
        out.write_text(
            json.dumps(
                [{"number": r.number, "title": r.title, "passed": r.passed, "detail": r.detail, "seconds": r.seconds}
                 for r in results],
                indent=2,
            )
            + "\n"
        )
    return EXIT_FAILED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output path")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--threads", type=int, help="worker count (default: QF_THREADS or 1)")
    common.add_argument("--strict", action="store_true", help="exit 1 when a threshold is breached")
    common.add_argument("--quick", action="store_true", help="smaller, faster run")
    common.add_argument("--mixture", choices=sorted(presets.MIXTURES), help="named mixture instead of a config")
    common.add_argument("--alpha", type=float, help="quantile level")

    parser = argparse.ArgumentParser(prog="qf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", parents=[common], help="tabulate rho, rho_tilde and derivatives")
    p.add_argument("--grid", help="a:b:step, inclusive (default 0:3:0.1)")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("gp", parents=[common], help="sample the limit process and report quartic variation")
    p.add_argument("--grid-n", dest="grid_n", type=int, help="number of grid intervals (default 4096)")
    p.add_argument("--t-max", dest="t_max", type=float, help="right end of the grid (default 1)")
    p.add_argument("--replicas", type=int)
    p.set_defaults(func=cmd_gp)

    p = sub.add_parser("particles", parents=[common], help="particle ensembles and covariance checks")
    p.add_argument("--n", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--times", help="comma-separated times (default 0,0.5,1)")
    p.add_argument("--checks", help="comma-separated subset of fdd,bridge,field,tail (default fdd,tail)")
    p.add_argument("--alphas", help="levels for the bridge check (default 0.25,0.75)")
    p.set_defaults(func=cmd_particles)

    p = sub.add_parser("rw", parents=[common], help="sandwich, random-walk bound and Taylor presets")
    p.add_argument("--replicas", type=int)
    p.set_defaults(func=cmd_rw)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"qf: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"qf: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
