"""Command-line front end: lemma verification, certificates, simulation, fitting."""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import suites
from .constants import (
    ENV_VAR,
    ConstantsError,
    ConstantsTable,
    get_constants,
)
from .core import CaseTag, Params
from .fitting import REGISTRY, drift, fit_all, fit_constants
from .grids import GridError, GridPoint, load_grid, single_point
from .montecarlo import (
    DEFAULT_SEED,
    coverage_target,
    order_stat_envelope_check,
    simultaneous_median_band_check,
)
from .report import Report, ReportRow, run_stamp
from .sharp import (
    MEDIAN_SAMPLES,
    CaseIVaRangeError,
    certificate,
    compute_case_iv_internals,
    exact_certificates,
)

log = logging.getLogger("lorentz_sharp")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VIOLATION = 3
EXIT_IO = 4

COMMANDS = ("verify-lemmas", "certify", "simulate", "fit-constants")
DEFAULT_SAMPLES = {"verify-lemmas": MEDIAN_SAMPLES, "certify": MEDIAN_SAMPLES, "simulate": 100_000, "fit-constants": 2000}
DEFAULT_STRESS = 100_000
MIN_SAMPLES = 1000
STABILITY_DRIFT = 1.5
MEDIAN_NS = (100, 1000, 10_000)
ENVELOPE_NS = (100, 1000)
ENVELOPE_TS = (1.0, 2.0, 3.0)
BAND_NS = (100, 1000, 10_000)
FALLBACK_CONSTANTS = Path("lorentz_sharp_constants.json")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    points: list[GridPoint]
    samples: int
    seed: int = DEFAULT_SEED
    mode: str = "exact"
    output_path: Path = Path("reports")
    format: str = "csv"
    strict: bool = False
    freeze: bool = False
    fit_first: bool = False
    workers: int = 1
    plot: bool = False
    families: list[str] = field(default_factory=list)
    stress: int = DEFAULT_STRESS
    out_given: bool = False


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lorentz-sharp", description=__doc__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--grid", help="parameter grid JSON file (default: shipped canonical grid)")
    ap.add_argument("--n", type=int)
    ap.add_argument("--r", type=float)
    ap.add_argument("--p", type=float)
    ap.add_argument("--t", type=float)
    ap.add_argument("--samples", type=int, help="Monte Carlo samples (default depends on the command)")
    ap.add_argument("--seed", type=_seed, default=DEFAULT_SEED, help="64-bit seed, decimal or 0x-hex")
    ap.add_argument("--mode", choices=("paper", "exact"), default="exact")
    ap.add_argument("--out", help="report directory; for fit-constants the constants file")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--strict", action="store_true", help="treat skipped grid points as violations")
    ap.add_argument("--freeze", action="store_true", help="mark fitted constants frozen")
    ap.add_argument("--fit-first", action="store_true", help="fit missing constants in memory before running")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--plot", action="store_true", help="also write PNG figures (needs matplotlib)")
    ap.add_argument("--family", action="append", default=[], help="restrict to these families (repeatable)")
    ap.add_argument("--stress", type=int, default=DEFAULT_STRESS, help="stress vectors per certified point")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def make_config(args: argparse.Namespace) -> RunConfig:
    single = [args.n, args.r, args.p, args.t]
    try:
        if any(v is not None for v in single):
            if any(v is None for v in single):
                raise ConfigError("--n, --r, --p and --t must be given together")
            if args.grid:
                raise ConfigError("--grid and a single point are exclusive")
            points = single_point(args.n, args.r, args.p, args.t)
        else:
            points = load_grid(args.grid)
    except (GridError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if args.workers < 1:
        raise ConfigError("--workers must be positive")
    samples = args.samples if args.samples is not None else DEFAULT_SAMPLES[args.command]
    if samples < 100:
        raise ConfigError("--samples must be at least 100")
    unknown = [f for f in args.family if f not in REGISTRY and f not in SUITE_FAMILIES]
    if unknown:
        raise ConfigError(f"unknown families: {', '.join(unknown)}")
    return RunConfig(
        command=args.command,
        points=points,
        samples=samples,
        seed=args.seed,
        mode=args.mode,
        output_path=Path(args.out) if args.out else Path("reports"),
        format=args.format,
        strict=args.strict,
        freeze=args.freeze,
        fit_first=args.fit_first,
        workers=args.workers,
        plot=args.plot,
        families=list(args.family),
        stress=args.stress,
        out_given=args.out is not None,
    )


# -- constants -----------------------------------------------------------------


def load_constants(families, cfg: RunConfig) -> ConstantsTable:
    """The default table, checked for ``families``; --fit-first fills gaps in memory."""
    table = get_constants()
    missing = [f for f in families if f not in table or not table[f].frozen]
    if not missing:
        return table
    if not cfg.fit_first:
        table.require(missing[0])
    log.warning("fitting %d missing families in memory: %s", len(missing), ", ".join(missing))
    merged = ConstantsTable(dict(table.entries), path=table.path)
    fitted = fit_all(missing, seed=cfg.seed, workers=cfg.workers)
    fitted.freeze()
    for name in fitted:
        merged.set(fitted[name])
    return merged


# -- verify-lemmas ---------------------------------------------------------------

SUITE_FAMILIES = ("log_sum_branch_agreement", "sum_integral_sandwich", "sphere_search")
VERIFY_FAMILIES = (
    suites.ANALYTIC_FAMILIES + suites.MEDIAN_FAMILIES + ("orderstat_envelope", "median_band") + SUITE_FAMILIES
)


def _selected(cfg: RunConfig, universe) -> list[str]:
    return [f for f in universe if not cfg.families or f in cfg.families]


def cmd_verify_lemmas(cfg: RunConfig, report: Report) -> int:
    chosen = _selected(cfg, VERIFY_FAMILIES)
    table = load_constants([f for f in chosen if f in REGISTRY], cfg)
    for fam in chosen:
        log.info("verify %s", fam)
        if fam in suites.ANALYTIC_FAMILIES:
            report.extend(suites.envelope_rows(fam, table))
        elif fam in suites.MEDIAN_FAMILIES:
            report.extend(suites.median_envelope_rows(fam, MEDIAN_NS, cfg.samples, cfg.seed, table, cfg.workers))
        elif fam == "orderstat_envelope":
            C = table.require(fam).C_fit
            for n in ENVELOPE_NS:
                for t in ENVELOPE_TS:
                    rep = order_stat_envelope_check(n, t, C, cfg.samples, cfg.seed, cfg.workers)
                    e = rep.empirical_violation_prob
                    report.add(ReportRow(fam, e.statistic, e.point, rep.passed, n=n, t=t, ci_low=e.ci_low,
                                         ci_high=e.ci_high, target=rep.target, samples=cfg.samples, seed=cfg.seed))
        elif fam == "median_band":
            for n in BAND_NS:
                rep = simultaneous_median_band_check(n, cfg.samples, cfg.seed, constants=table, workers=cfg.workers)
                e = rep.probability
                report.add(ReportRow(fam, e.statistic, e.point, rep.passed, n=n, ci_low=e.ci_low,
                                     ci_high=e.ci_high, target=0.51, samples=cfg.samples, seed=cfg.seed))
        elif fam == "log_sum_branch_agreement":
            report.extend(suites.branch_agreement_rows(table))
        elif fam == "sum_integral_sandwich":
            report.extend(suites.sandwich_rows())
        elif fam == "sphere_search":
            report.extend(suites.sphere_rows(seed=cfg.seed))
    return EXIT_OK if report.passed else EXIT_VIOLATION


# -- certify -------------------------------------------------------------------


def _cert_name(k: int, params: Params) -> str:
    return f"{k:04d}-case{params.case}-n{params.n}-r{params.r!r}-p{params.p!r}-t{params.t!r}.json"


def cmd_certify(cfg: RunConfig, report: Report, stamp: str) -> int:
    points = [gp.params for gp in cfg.points]
    skipped = []
    live = []
    for params in points:
        if params.case is CaseTag.IVa:
            try:
                compute_case_iv_internals(params)
            except CaseIVaRangeError as exc:
                skipped.append(params)
                report.add(ReportRow.at(params, "skipped", str(exc), math.nan, not cfg.strict))
                continue
        live.append(params)
    table = None
    if cfg.mode == "paper":
        needed = sorted({f"theorem_{p.case}_{part}" for p in live if not p.degenerate for part in ("S", "F", "Rsimple")})
        table = load_constants([f for f in needed if f in REGISTRY], cfg)
    pairs = exact_certificates(live, cfg.samples, cfg.seed, cfg.workers)
    cert_dir = cfg.output_path / f"certify-{stamp}-certificates"
    cert_dir.mkdir(parents=True, exist_ok=False)
    holder_cache: dict[tuple, suites.StressResult] = {}
    for k, (params, (exact, sn)) in enumerate(zip(live, pairs)):
        cert = exact if cfg.mode == "exact" else certificate(params, "paper", constants=table, sn=sn)
        (cert_dir / _cert_name(k, params)).open("x", encoding="utf-8").write(cert.to_json() + "\n")
        key = (params.n, sn.kind, sn.digest, params.alpha)
        if key not in holder_cache:
            holder_cache[key] = suites.holder_stress(sn, cfg.stress, cfg.seed)
        h = holder_cache[key]
        report.add(ReportRow.at(params, "holder", f"violations in {h.vectors} vectors; point = max ratio",
                                h.worst_ratio, h.violations == 0, target=1.0))
        imp = suites.implication_stress(cert, sn, cfg.stress, cfg.seed)
        report.add(ReportRow.at(params, "implication", f"violations in {imp.vectors} vectors; point = max psi/R inside",
                                imp.worst_ratio, imp.violations == 0, target=1.0))
        if params.case is CaseTag.IVa:
            report.extend(suites.case_iva_rows(params))
    report.meta["certificates"] = str(cert_dir)
    if skipped:
        report.note(f"{len(skipped)} Case IVa points outside the validity range were skipped")
    return EXIT_OK if report.passed else EXIT_VIOLATION


# -- simulate ------------------------------------------------------------------


def sharpness_samples(n: int, samples: int) -> int:
    """Sample cap keeping the n * samples work of one profile near 1e9."""
    return min(samples, max(10_000, 10**9 // n))


def cmd_simulate(cfg: RunConfig, report: Report) -> int:
    points = [gp.params for gp in cfg.points]
    sharp_pts = {}
    for p in points:
        if p.p > 1:
            sharp_pts.setdefault((p.n, p.r, p.p), p)
    table = load_constants(["tail_slope"] if sharp_pts else [], cfg)
    live = []
    for params in points:
        if params.case is CaseTag.IVa:
            try:
                compute_case_iv_internals(params)
            except CaseIVaRangeError as exc:
                report.add(ReportRow.at(params, "skipped", str(exc), math.nan, not cfg.strict))
                continue
        live.append(params)
    pairs = exact_certificates(live, MEDIAN_SAMPLES, cfg.seed, cfg.workers)
    report.extend(suites.coverage_rows(pairs, cfg.samples, cfg.seed, cfg.workers))
    report.note("events at t > 3 are out of empirical reach; they are covered only by the deterministic inclusion checks")
    for t in sorted({p.t for p in live}):
        if coverage_target(t) * cfg.samples < 10:
            report.note(f"t={t!r}: target {coverage_target(t):.3g} is below 10 expected hits at {cfg.samples} samples")
    for params in sharp_pts.values():
        k = sharpness_samples(params.n, cfg.samples)
        report.extend(suites.sharpness_rows(params, k, cfg.seed, table, cfg.workers))
    gating = [r for r in report.rows if r.family in ("coverage", "sharpness_inclusion", "skipped")]
    for r in report.rows:
        if not r.passed and r.family not in ("coverage", "sharpness_inclusion", "skipped"):
            log.warning("%s outside its window at n=%s r=%s p=%s: %r", r.family, r.n, r.r, r.p, r.point)
    return EXIT_OK if all(r.passed for r in gating) else EXIT_VIOLATION


# -- fit-constants --------------------------------------------------------------


def constants_output(cfg: RunConfig) -> Path:
    if cfg.out_given:
        return cfg.output_path
    return Path(os.environ[ENV_VAR]) if os.environ.get(ENV_VAR) else FALLBACK_CONSTANTS


def cmd_fit_constants(cfg: RunConfig, report: Report) -> tuple[int, Path]:
    names = _selected(cfg, list(REGISTRY))
    target = constants_output(cfg)
    previous = None
    if target.exists():
        try:
            previous = ConstantsTable.load(target)
        except ConstantsError as exc:
            log.warning("ignoring unreadable previous constants: %s", exc)
    table = fit_all(names, seed=cfg.seed, samples=cfg.samples, workers=cfg.workers,
                    progress=lambda name: log.info("fit %s", name))
    for name in names:
        fc = table[name]
        report.add(ReportRow(name, "c_fit", fc.c_fit, True, samples=cfg.samples, seed=cfg.seed))
        report.add(ReportRow(name, "C_fit", fc.C_fit, True, samples=cfg.samples, seed=cfg.seed))
        checks = []
        if name in suites.ANALYTIC_FAMILIES:
            checks.append(("doubled-grid refit", fit_constants(name, "doubled", seed=cfg.seed)))
        if previous is not None and name in previous:
            checks.append(("previous file", previous[name]))
        for label, other in checks:
            d = drift(fc, other)
            if d > STABILITY_DRIFT:
                log.warning("%s: constants moved by x%.3g against the %s", name, d, label)
                report.note(f"{name}: drift x{d:.3g} against the {label}")
            report.add(ReportRow(name, f"drift vs {label}", d, d <= STABILITY_DRIFT, target=STABILITY_DRIFT))
    if cfg.freeze:
        table.freeze()
    merged = ConstantsTable(dict(previous.entries) if previous else {})
    for name in table:
        merged.set(table[name])
    try:
        merged.save(target)
    except OSError as exc:
        raise _IOFailure(f"cannot write constants file {target}: {exc}") from exc
    report.meta["constants_file"] = str(target)
    report.meta["frozen"] = cfg.freeze
    return EXIT_OK, target


class _IOFailure(Exception):
    pass


# -- entry point ----------------------------------------------------------------


def run(cfg: RunConfig) -> int:
    if cfg.samples < MIN_SAMPLES:
        log.warning("sample budget %d is below %d; estimates will be coarse", cfg.samples, MIN_SAMPLES)
    report = Report(cfg.command, cfg.seed)
    report.meta["workers"] = cfg.workers
    report.meta["mode"] = cfg.mode
    if cfg.samples < MIN_SAMPLES:
        report.note(f"sample budget {cfg.samples} below {MIN_SAMPLES}")
    stamp = run_stamp()
    if cfg.command == "fit-constants":
        code, target = cmd_fit_constants(cfg, report)
        out_dir = target.parent if cfg.out_given else Path("reports")
        paths = report.write(out_dir, cfg.format, stamp)
        print(f"wrote {target}")
    else:
        if cfg.command == "verify-lemmas":
            code = cmd_verify_lemmas(cfg, report)
        elif cfg.command == "certify":
            cfg.output_path.mkdir(parents=True, exist_ok=True)
            code = cmd_certify(cfg, report, stamp)
        else:
            code = cmd_simulate(cfg, report)
        paths = report.write(cfg.output_path, cfg.format, stamp)
    if cfg.plot:
        from . import plotting

        paths += plotting.render(cfg.command, report.rows, paths[0].with_suffix(""))
    for path in paths:
        print(f"wrote {path}")
    fails = report.failures
    print(f"{cfg.command}: {len(report.rows) - len(fails)}/{len(report.rows)} rows passed")
    for row in fails[:20]:
        print(f"  FAIL {row.family} {row.statistic} n={row.n} r={row.r} p={row.p} t={row.t} point={row.point!r}")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = make_config(args)
        return run(cfg)
    except (ConfigError, ConstantsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (_IOFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
