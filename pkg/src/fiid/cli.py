"""Command-line front end: ``fiid run | verify | export-dot``.

Exit status: 0 pass, 1 verification failure, 2 usage or contract error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import secrets
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .construction import ConstructionConfig, run
from .errors import ContractViolation, InsufficientDataError, InvalidParameter
from .export import result_dot
from .tree_window import build_window
from .verification import (
    BUILTIN_SPECS,
    exact_suite,
    generate_batch,
    gw_depth_survival,
    gw_empirical_survival,
    gw_extinction_fixed_point,
    marginal_fairness,
    mass_transport_balance,
    pattern_chisquare,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
EXPORT_RADIUS_LIMIT = 7
FALLBACKS = {"paper-zero": "paper_zero", "flag": "flag_and_exclude"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunManifest:
    command: str
    config: dict
    version: str
    seeds: list
    outputs: list = field(default_factory=list)
    started: str = ""
    finished: str = ""
    seed_was_drawn: bool = False

    def write(self, out: Path) -> Path:
        path = out / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _common(p: argparse.ArgumentParser, radius: int, bits: int, samples: int, margin: int = 4) -> None:
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--radius", type=int, default=radius)
    p.add_argument("--bits", type=int, default=bits)
    p.add_argument("--seed", type=int, default=None, help="base seed; drawn at random if omitted")
    p.add_argument("--samples", type=int, default=samples, help="seeds are seed..seed+samples-1")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--fallback", choices=sorted(FALLBACKS), default="flag")
    p.add_argument("--margin", type=int, default=margin)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--no-archive", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fiid", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run the construction for one or more seeds")
    _common(p_run, radius=10, bits=3, samples=1)
    p_run.add_argument("--format", choices=["json", "csv"], default="json",
                       help="csv adds summary.csv next to the JSON results")

    p_ver = sub.add_parser("verify", help="run the verification suites")
    _common(p_ver, radius=12, bits=3, samples=10_000)
    p_ver.add_argument("--suite", choices=["exact", "audit", "stats", "all"], default="all")
    p_ver.add_argument("--trials", type=int, default=1000, help="instances for the exact suite")
    p_ver.add_argument("--exact-radius", type=int, default=8)
    p_ver.add_argument("--audit-samples", type=int, default=200)
    p_ver.add_argument("--audit-radius", type=int, default=10)
    p_ver.add_argument("--gw-degree", type=int, default=4)
    p_ver.add_argument("--gw-radius", type=int, default=14)

    p_dot = sub.add_parser("export-dot", help="write a DOT drawing of one labeled window")
    _common(p_dot, radius=3, bits=1, samples=1, margin=1)
    p_dot.add_argument("--step-overlay", type=int, default=None, help="outline the cells of this partition")
    p_dot.add_argument("--force", action="store_true", help=f"allow radius > {EXPORT_RADIUS_LIMIT}")
    return parser


def _config(args, **extra) -> ConstructionConfig:
    fields = dict(degree=args.degree, radius=args.radius, n_bits=args.bits, seed=args.seed,
                  fallback_policy=FALLBACKS[args.fallback], interior_margin=args.margin,
                  archive=not args.no_archive)
    return ConstructionConfig(**{**fields, **extra})


def _resolve_seed(args) -> bool:
    if args.seed is None:
        args.seed = secrets.randbits(32)
        print(f"seed: {args.seed}", file=sys.stderr)
        return True
    return False


def _seeds(args) -> list:
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    return list(range(args.seed, args.seed + args.samples))


# -- run ------------------------------------------------------------------

_RUN_WINDOW: dict = {}


def _run_one(cfg: ConstructionConfig) -> tuple:
    key = (cfg.degree, cfg.radius)
    if key not in _RUN_WINDOW:
        _RUN_WINDOW.clear()
        _RUN_WINDOW[key] = build_window(*key)
    result = run(cfg, _RUN_WINDOW[key])
    rec = result.record()
    row = {
        "seed": cfg.seed,
        "degenerate": int(result.degenerate),
        "root_word": result.root_word(),
        "n_clusters": len(rec.clusters),
        "boundary_reaching": sum(c["reaches_boundary"] for c in rec.clusters),
        "root_chain": " ".join(map(str, rec.chain_sizes)),
    }
    return rec.to_json(), row


def cmd_run(args) -> int:
    drawn = _resolve_seed(args)
    base = _config(args, audit=False)
    seeds = _seeds(args)
    out = args.out or Path("fiid-out")
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("run", asdict(base), __version__, seeds, started=_now(), seed_was_drawn=drawn)
    configs = [base.replace(seed=s) for s in seeds]
    if args.jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            outputs = list(pool.map(_run_one, configs, chunksize=max(1, len(configs) // (8 * args.jobs))))
    else:
        outputs = [_run_one(c) for c in configs]
    rows = []
    for seed, (text, row) in zip(seeds, outputs):
        path = out / f"result_{seed}.json"
        path.write_text(text + "\n")
        manifest.outputs.append(str(path))
        rows.append(row)
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        path = out / "summary.csv"
        path.write_text(buf.getvalue())
        manifest.outputs.append(str(path))
    manifest.finished = _now()
    manifest.write(out)
    degenerate = sum(r["degenerate"] for r in rows)
    print(f"wrote {len(rows)} result(s) to {out}; degenerate: {degenerate}/{len(rows)}")
    return EXIT_OK


# -- verify ---------------------------------------------------------------


def _line(name: str, ok: bool, detail: str) -> str:
    return f"{'PASS' if ok else 'FAIL'}  {name:<40} {detail}"


def run_exact(args, report: dict, lines: list) -> bool:
    rep = exact_suite(args.trials, args.exact_radius, args.seed, args.degree)
    report["exact"] = rep.to_dict()
    checked = sum(rep.checks.values())
    lines.append(_line("exact structural suite", rep.passed,
                       f"{checked} checks, {len(rep.violations)} violations, skipped {rep.skipped}"))
    return rep.passed


def run_audit(args, report: dict, lines: list) -> bool:
    cfg = ConstructionConfig(degree=args.degree, radius=args.audit_radius, n_bits=args.bits,
                             fallback_policy=FALLBACKS[args.fallback],
                             interior_margin=args.margin, audit=True)
    seeds = list(range(args.seed, args.seed + args.audit_samples))
    batch = generate_batch(cfg, seeds, args.jobs, specs=())
    good = batch.usable()
    headline = all(s.headline_ok for s in good) if good else False
    rate = batch.degeneracy_rate
    report["audit"] = {"samples": len(seeds), "radius": args.audit_radius,
                       "degeneracy_rate": rate, "headline_ok": headline,
                       "headline_samples": len(good)}
    lines.append(_line("construction audit", rate < 0.5,
                       f"{len(seeds)} runs, invariants exact, degeneracy rate {rate:.3f}"))
    lines.append(_line("headline proxy", headline,
                       f"{len(good)} non-degenerate samples, interior depth <= {args.audit_radius - args.margin}"))
    return rate < 0.5 and headline


def run_stats(args, report: dict, lines: list) -> bool:
    k = args.bits
    cfg = _config(args, audit=False, archive=True)
    batch = generate_batch(cfg, _seeds(args), args.jobs)
    ok = True
    chi = pattern_chisquare(batch, k)
    report["chisquare"] = chi.to_dict()
    report["degeneracy_rate"] = batch.degeneracy_rate
    lines.append(_line("root pattern uniformity", chi.passed(),
                       f"chi2={chi.statistic:.3f} dof={chi.dof} p={chi.p_value:.4g} "
                       f"band=+-{chi.band:.4f} n={chi.n_used} excluded={chi.n_excluded}"))
    ok &= chi.passed()
    fair = marginal_fairness(batch)
    report["fairness"] = asdict(fair)
    lines.append(_line("per-bit fairness", fair.passed,
                       " ".join(f"{f:.4f}" for f in fair.frequencies)))
    ok &= fair.passed
    report["transport"] = {}
    for name, spec in BUILTIN_SPECS.items():
        tr = mass_transport_balance(batch, spec)
        passed = tr.passed(exact=spec.exact)
        report["transport"][name] = {**asdict(tr), "combined_se": tr.combined_se, "z": tr.z}
        lines.append(_line(f"mass transport [{name}]", passed,
                           f"sent={tr.mean_sent:.4f} received={tr.mean_received:.4f} "
                           f"z={tr.z:.2f} clipped={tr.clipped_fraction:.3f}"))
        ok &= passed
    gw = gw_empirical_survival(args.gw_degree, args.gw_radius, args.samples, args.seed)
    fixed = gw_extinction_fixed_point(args.gw_degree)
    limit = gw_depth_survival(args.gw_degree, 200)
    fixed_ok = abs(limit - (1 - fixed ** args.gw_degree)) <= 1e-12
    report["galton_watson"] = {**asdict(gw), "fixed_point": fixed, "limit_survival": limit,
                               "fixed_point_ok": fixed_ok}
    lines.append(_line("Galton-Watson oracle", gw.passed and fixed_ok,
                       f"freq={gw.frequency:.4f} exact={gw.oracle:.4f} z={gw.z:.2f} "
                       f"limit={limit:.6f}"))
    ok &= gw.passed and fixed_ok
    good = batch.usable()
    sizes = [s.max_interior_cell for s in good]
    report["cells"] = {"max_interior_cell": max(sizes) if sizes else 0,
                       "window_size": build_window(args.degree, args.radius).n}
    return bool(ok)


def cmd_verify(args) -> int:
    drawn = _resolve_seed(args)
    suites = ["exact", "audit", "stats"] if args.suite == "all" else [args.suite]
    if "stats" in suites and args.samples < 10 * (1 << args.bits):
        raise InsufficientDataError(
            f"chi-square over {1 << args.bits} patterns needs at least "
            f"{10 * (1 << args.bits)} samples, got {args.samples}")
    manifest = RunManifest("verify", {k: str(v) if isinstance(v, Path) else v
                                      for k, v in vars(args).items() if k != "func"},
                           __version__, [args.seed], started=_now(), seed_was_drawn=drawn)
    report, lines, ok = {"suites": suites}, [], True
    runners = {"exact": run_exact, "audit": run_audit, "stats": run_stats}
    for name in suites:
        ok &= runners[name](args, report, lines)
    report["passed"] = bool(ok)
    print("\n".join(lines))
    print("verify:", "PASS" if ok else "FAIL")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        path = args.out / "report.json"
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        manifest.outputs.append(str(path))
        manifest.finished = _now()
        manifest.write(args.out)
    return EXIT_OK if ok else EXIT_FAIL


# -- export-dot -----------------------------------------------------------


def cmd_export_dot(args) -> int:
    if args.radius > EXPORT_RADIUS_LIMIT and not args.force:
        raise UsageError(f"radius {args.radius} > {EXPORT_RADIUS_LIMIT}; pass --force to draw it anyway")
    _resolve_seed(args)
    cfg = _config(args, audit=False, archive=True)
    result = run(cfg)
    if args.step_overlay is not None and not 0 <= args.step_overlay < len(result.archive):
        raise UsageError(f"--step-overlay must be in 0..{len(result.archive) - 1}")
    text = result_dot(result, args.step_overlay)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / f"window_{args.seed}.dot").write_text(text)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "export-dot": cmd_export_dot}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
    except (InvalidParameter, ContractViolation, InsufficientDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
