"""Benchmark harness: run a sampler-by-construction matrix and emit CSV.

The experiment repeats each (sampler, construction) cell over many
independent runs. Every run gets its own generator seeded base_seed +
run_index, draws the interior starting points, runs the chain, and is
summarized; cells aggregate across runs. Scheduling (sequential or a
worker pool) never changes the output because runs are keyed by index.

Also exposes the ``armskit-bench`` CLI:

    armskit-bench run [--config FILE] [--runs R] [--n N] [--seed S]
                      [--samplers LIST] [--procedures LIST] [--out PATH]
                      [--workers W]
    armskit-bench dump-proposal --sampler X --procedure Y --at-iteration T
                      [--seed S] [--out PATH]

Exit codes: 0 success, 1 when any cell fails (more than 1% of its runs
errored), 2 for configuration problems.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import envelope
from .diagnostics import QuadratureGrid, RunSummary, summarize
from .envelope import Procedure, SupportSet
from .errors import ArmskitError, ParseError, SpecError
from .samplers import SamplerKind, run_chain
from .target import GaussianMixtureSpec, benchmark_mixture, gaussian_mixture

__all__ = [
    "ExperimentConfig",
    "CellResult",
    "parse_config",
    "run_experiment",
    "emit_csv",
    "main",
    "CSV_HEADER",
]

CSV_HEADER = (
    "sampler,procedure,est_mean,std_est,lag1_corr,avg_support,"
    "avg_rs_rej,avg_second_ctrl,avg_D,runs,N,seed"
)

_DEFAULT_SAMPLERS = (SamplerKind.ARMS, SamplerKind.A2RMS, SamplerKind.IA2RMS)
_DEFAULT_PROCEDURES = (
    Procedure.MAXMIN_SECANT,
    Procedure.PLAIN_SECANT,
    Procedure.STEPWISE,
    Procedure.TRAPEZOID,
)


@dataclass(frozen=True)
class ExperimentConfig:
    samplers: tuple[SamplerKind, ...] = _DEFAULT_SAMPLERS
    procedures: tuple[Procedure, ...] = _DEFAULT_PROCEDURES
    n: int = 5000
    runs: int = 200
    base_seed: int = 12345
    k_stop: int | None = None  # None means "equal to n": adaptation never stops
    mixture: GaussianMixtureSpec = field(default_factory=benchmark_mixture)
    # The benchmark evaluates the mixture unnormalized, as integer weights
    # 3, 3, 4 (total mass 10). Chains are invariant to the constant; it only
    # sets the scale of avg_D. target_mass=1 gives the normalized form.
    target_mass: float = 10.0
    s0_lo: float = -10.0
    s0_hi: float = 10.0
    s0_interior: int = 2
    s0_range: tuple[float, float] = (-10.0, 10.0)
    grid: QuadratureGrid = field(default_factory=QuadratureGrid)
    out: str | None = None
    workers: int = 1
    tail_beta: float = 0.0
    tail_alpha: float = 1.0


@dataclass(frozen=True)
class CellResult:
    """Aggregates for one (sampler, procedure) cell."""

    sampler: SamplerKind
    procedure: Procedure
    est_mean: float
    std_est: float
    lag1_corr: float
    avg_support: float
    avg_rs_rej: float
    avg_second_ctrl: float
    avg_D: float
    runs: int
    n: int
    seed: int
    failed: bool
    failures: tuple[tuple[int, str], ...]


def _single_run(cfg: ExperimentConfig, kind: SamplerKind, procedure: Procedure, run_index: int) -> RunSummary:
    """One independent chain; the per-run rng also draws the interior points."""
    rng = np.random.default_rng(cfg.base_seed + run_index)
    lo, hi = cfg.s0_range
    interior = sorted(lo + rng.random() * (hi - lo) for _ in range(cfg.s0_interior))
    s0 = [cfg.s0_lo, *interior, cfg.s0_hi]
    target = gaussian_mixture(cfg.mixture, cfg.target_mass)
    chain, state = run_chain(
        kind,
        target,
        procedure,
        s0,
        cfg.n,
        cfg.k_stop,
        rng,
        tail_beta=cfg.tail_beta,
        tail_alpha=cfg.tail_alpha,
    )
    # every run in the table is reported on the same declared grid; chains
    # that adapted poorly keep proposal mass beyond any fixed window, and
    # their rows are the interesting ones, so truncate tails instead of
    # turning the run into a failure
    return summarize(chain, state, target, cfg.grid, check_coverage=False)


def _run_task(task):
    cfg, kind, procedure, run_index = task
    try:
        return kind, procedure, run_index, None, _single_run(cfg, kind, procedure, run_index)
    except (ArmskitError, ValueError, ZeroDivisionError, OverflowError) as exc:
        return kind, procedure, run_index, f"{type(exc).__name__}: {exc}", None


def run_experiment(cfg: ExperimentConfig) -> list[CellResult]:
    """Execute the full matrix; per-run failures are recorded, not raised.

    A cell whose failures exceed 1% of its runs is marked failed and gets
    no aggregates worth trusting; the CLI turns that into exit code 1.
    """
    tasks = [
        (cfg, kind, procedure, r)
        for kind in cfg.samplers
        for procedure in cfg.procedures
        for r in range(cfg.runs)
    ]
    if cfg.workers > 1:
        chunk = max(1, len(tasks) // (cfg.workers * 8))
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_run_task, tasks, chunksize=chunk))
    else:
        outcomes = [_run_task(t) for t in tasks]

    by_cell: dict[tuple, dict[int, tuple]] = {}
    for kind, procedure, run_index, err, summary in outcomes:
        by_cell.setdefault((kind, procedure), {})[run_index] = (err, summary)

    cells = []
    for kind in cfg.samplers:
        for procedure in cfg.procedures:
            cell_runs = by_cell.get((kind, procedure), {})
            oks: list[RunSummary] = []
            failures: list[tuple[int, str]] = []
            for r in range(cfg.runs):
                err, summary = cell_runs[r]
                if err is None:
                    oks.append(summary)
                else:
                    failures.append((r, err))
            failed = len(failures) > 0.01 * cfg.runs or not oks
            if oks:
                means = np.array([s.est_mean for s in oks])
                corrs = [s.lag1_corr for s in oks if s.lag1_corr is not None]
                cells.append(
                    CellResult(
                        sampler=kind,
                        procedure=procedure,
                        est_mean=float(means.mean()),
                        std_est=float(means.std(ddof=1)) if len(oks) > 1 else 0.0,
                        lag1_corr=float(np.mean(corrs)) if corrs else float("nan"),
                        avg_support=float(np.mean([s.final_support for s in oks])),
                        avg_rs_rej=float(np.mean([s.rs_rejections for s in oks])),
                        avg_second_ctrl=float(np.mean([s.second_control_additions for s in oks])),
                        avg_D=float(np.mean([s.discrepancy for s in oks])),
                        runs=cfg.runs,
                        n=cfg.n,
                        seed=cfg.base_seed,
                        failed=failed,
                        failures=tuple(failures),
                    )
                )
            else:
                cells.append(
                    CellResult(
                        sampler=kind,
                        procedure=procedure,
                        est_mean=float("nan"),
                        std_est=float("nan"),
                        lag1_corr=float("nan"),
                        avg_support=float("nan"),
                        avg_rs_rej=float("nan"),
                        avg_second_ctrl=float("nan"),
                        avg_D=float("nan"),
                        runs=cfg.runs,
                        n=cfg.n,
                        seed=cfg.base_seed,
                        failed=True,
                        failures=tuple(failures),
                    )
                )
    return cells


def _fmt(v: float) -> str:
    if v != v:
        return "nan"
    return format(float(v), "#.6g")


def emit_csv(cells: list[CellResult], path: str | Path | None = None) -> str:
    """Render healthy cells as CSV (6 significant digits, trailing newline)."""
    lines = [CSV_HEADER]
    for c in cells:
        if c.failed:
            continue
        lines.append(
            ",".join(
                (
                    c.sampler.value,
                    c.procedure.value,
                    _fmt(c.est_mean),
                    _fmt(c.std_est),
                    _fmt(c.lag1_corr),
                    _fmt(c.avg_support),
                    _fmt(c.avg_rs_rej),
                    _fmt(c.avg_second_ctrl),
                    _fmt(c.avg_D),
                    str(c.runs),
                    str(c.n),
                    str(c.seed),
                )
            )
        )
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


# ---------------------------------------------------------------------------
# config file parsing: flat key=value lines, '#' comments, comma lists

def _to_int(fieldname: str, raw: str, lineno: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"line {lineno}: field {fieldname!r} needs an integer, got {raw!r}") from None


def _to_float(fieldname: str, raw: str, lineno: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"line {lineno}: field {fieldname!r} needs a number, got {raw!r}") from None


def _to_float_list(fieldname: str, raw: str, lineno: int) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in raw.split(","))
    except ValueError:
        raise ParseError(
            f"line {lineno}: field {fieldname!r} needs comma-separated numbers, got {raw!r}"
        ) from None


def parse_config(path: str | Path) -> ExperimentConfig:
    """Read a flat key=value config file into an ExperimentConfig."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path!r}: {exc}") from None
    return parse_config_text(text)


def parse_config_text(text: str) -> ExperimentConfig:
    kw: dict = {}
    mixture_parts: dict[str, tuple[float, ...]] = {}
    grid_parts: dict[str, float] = {}
    s0_range = [None, None]

    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected key=value, got {rawline!r}")
        key, _, raw = line.partition("=")
        key = key.strip().lower()
        raw = raw.strip()

        if key == "samplers":
            try:
                kw["samplers"] = tuple(SamplerKind.from_name(p) for p in raw.split(","))
            except SpecError as exc:
                raise ParseError(f"line {lineno}: field 'samplers': {exc}") from None
        elif key == "procedures":
            try:
                kw["procedures"] = tuple(Procedure.from_name(p) for p in raw.split(","))
            except SpecError as exc:
                raise ParseError(f"line {lineno}: field 'procedures': {exc}") from None
        elif key == "n":
            kw["n"] = _to_int(key, raw, lineno)
        elif key == "runs":
            kw["runs"] = _to_int(key, raw, lineno)
        elif key == "seed":
            kw["base_seed"] = _to_int(key, raw, lineno)
        elif key == "k":
            kw["k_stop"] = None if raw.lower() in ("n", "none") else _to_int(key, raw, lineno)
        elif key == "workers":
            kw["workers"] = _to_int(key, raw, lineno)
        elif key == "s0_lo":
            kw["s0_lo"] = _to_float(key, raw, lineno)
        elif key == "s0_hi":
            kw["s0_hi"] = _to_float(key, raw, lineno)
        elif key == "s0_interior":
            kw["s0_interior"] = _to_int(key, raw, lineno)
        elif key == "s0_range_lo":
            s0_range[0] = _to_float(key, raw, lineno)
        elif key == "s0_range_hi":
            s0_range[1] = _to_float(key, raw, lineno)
        elif key == "grid_lo":
            grid_parts["lo"] = _to_float(key, raw, lineno)
        elif key == "grid_hi":
            grid_parts["hi"] = _to_float(key, raw, lineno)
        elif key == "grid_points":
            grid_parts["n_points"] = _to_int(key, raw, lineno)
        elif key == "out":
            kw["out"] = raw
        elif key == "target_mass":
            kw["target_mass"] = _to_float(key, raw, lineno)
        elif key == "tail_beta":
            kw["tail_beta"] = _to_float(key, raw, lineno)
        elif key == "tail_alpha":
            kw["tail_alpha"] = _to_float(key, raw, lineno)
        elif key in ("mixture_weights", "mixture_means", "mixture_variances"):
            mixture_parts[key.removeprefix("mixture_")] = _to_float_list(key, raw, lineno)
        else:
            raise ParseError(f"line {lineno}: unknown field {key!r}")

    if mixture_parts:
        missing = {"weights", "means", "variances"} - set(mixture_parts)
        if missing:
            raise ParseError(f"mixture needs weights, means and variances; missing {sorted(missing)}")
        try:
            kw["mixture"] = GaussianMixtureSpec(**mixture_parts)
        except SpecError as exc:
            raise ParseError(f"field 'mixture_*': {exc}") from None
    if grid_parts:
        base = QuadratureGrid()
        try:
            kw["grid"] = QuadratureGrid(
                lo=grid_parts.get("lo", base.lo),
                hi=grid_parts.get("hi", base.hi),
                n_points=int(grid_parts.get("n_points", base.n_points)),
            )
        except SpecError as exc:
            raise ParseError(f"field 'grid_*': {exc}") from None
    if s0_range != [None, None]:
        default = ExperimentConfig.__dataclass_fields__["s0_range"].default
        kw["s0_range"] = (
            s0_range[0] if s0_range[0] is not None else default[0],
            s0_range[1] if s0_range[1] is not None else default[1],
        )
    return ExperimentConfig(**kw)


# ---------------------------------------------------------------------------
# CLI

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="armskit-bench",
        description="Run the adaptive-sampler benchmark matrix or dump a proposal.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the experiment matrix and emit CSV")
    run_p.add_argument("--config", help="flat key=value config file")
    run_p.add_argument("--runs", type=int, help="independent runs per cell")
    run_p.add_argument("--n", type=int, help="chain length per run")
    run_p.add_argument("--seed", type=int, help="base seed; run r uses seed+r")
    run_p.add_argument("--samplers", help="comma list, e.g. arms,ia2rms")
    run_p.add_argument("--procedures", help="comma list, e.g. p1,p3")
    run_p.add_argument("--out", help="write CSV here instead of stdout")
    run_p.add_argument("--workers", type=int, help="parallel worker processes")

    dump_p = sub.add_parser("dump-proposal", help="dump one run's proposal pieces as CSV")
    dump_p.add_argument("--sampler", required=True)
    dump_p.add_argument("--procedure", required=True)
    dump_p.add_argument("--at-iteration", type=int, required=True, dest="at_iteration")
    dump_p.add_argument("--seed", type=int, default=None)
    dump_p.add_argument("--out", help="write CSV here instead of stdout")
    return parser


def _apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    updates: dict = {}
    if args.runs is not None:
        updates["runs"] = args.runs
    if args.n is not None:
        updates["n"] = args.n
    if args.seed is not None:
        updates["base_seed"] = args.seed
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.samplers is not None:
        updates["samplers"] = tuple(SamplerKind.from_name(p) for p in args.samplers.split(","))
    if args.procedures is not None:
        updates["procedures"] = tuple(Procedure.from_name(p) for p in args.procedures.split(","))
    if args.out is not None:
        updates["out"] = args.out
    return replace(cfg, **updates) if updates else cfg


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = parse_config(args.config) if args.config else ExperimentConfig()
        cfg = _apply_overrides(cfg, args)
    except (ParseError, SpecError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    cells = run_experiment(cfg)
    text = emit_csv(cells, cfg.out)
    if cfg.out is None:
        sys.stdout.write(text)
    bad = [c for c in cells if c.failed]
    for c in bad:
        detail = "; ".join(f"run {r}: {msg}" for r, msg in c.failures[:3])
        print(
            f"cell {c.sampler.value}/{c.procedure.value} failed "
            f"({len(c.failures)}/{c.runs} runs): {detail}",
            file=sys.stderr,
        )
    return 1 if bad else 0


def _cmd_dump(args: argparse.Namespace) -> int:
    try:
        kind = SamplerKind.from_name(args.sampler)
        procedure = Procedure.from_name(args.procedure)
        if args.at_iteration < 0:
            raise SpecError(f"--at-iteration must be >= 0, got {args.at_iteration}")
    except SpecError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    cfg = ExperimentConfig()
    seed = cfg.base_seed if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    lo, hi = cfg.s0_range
    interior = sorted(lo + rng.random() * (hi - lo) for _ in range(cfg.s0_interior))
    s0 = [cfg.s0_lo, *interior, cfg.s0_hi]
    target = gaussian_mixture(cfg.mixture, cfg.target_mass)
    if args.at_iteration == 0:
        prop = envelope.build(SupportSet.from_points(s0, target), procedure, target)
    else:
        _, state = run_chain(kind, target, procedure, s0, args.at_iteration, None, rng)
        prop = state.proposal

    lines = ["piece_index,lo,hi,form,params,area"]
    for idx, plo, phi, form, params, area in envelope.proposal_csv_rows(prop):
        lines.append(f"{idx},{plo!r},{phi!r},{form},{params},{area!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_dump(args)


if __name__ == "__main__":
    sys.exit(main())
