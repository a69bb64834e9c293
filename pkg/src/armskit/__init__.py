"""Adaptive rejection samplers over interchangeable piecewise proposals.

The package splits into small layers:

- target: log-density wrappers and Gaussian mixtures
- envelope: support sets, piecewise proposal construction, sampling
- samplers: the four chain drivers (ars, arms, a2rms, ia2rms)
- diagnostics: proposal/chain quality measures and run summaries
- bench: the experiment matrix, config parsing and the CLI
"""

from .bench import CSV_HEADER, CellResult, ExperimentConfig, emit_csv, parse_config, run_experiment
from .diagnostics import (
    QuadratureGrid,
    RunSummary,
    acceptance_rate,
    discrepancy,
    lag1_correlation,
    summarize,
)
from .envelope import (
    ExpLinear,
    FlatLog,
    LinearPdf,
    Piece,
    PiecewiseProposal,
    Procedure,
    SupportSet,
    build,
    insert,
    inflate_tails,
    log_eval,
    log_eval_array,
    mass_between,
    piece_area,
    proposal_csv_rows,
    sample,
)
from .errors import (
    ArmskitError,
    DegenerateChain,
    DivergentArea,
    DomainError,
    DominanceViolation,
    DuplicatePoint,
    GridError,
    InsufficientSupport,
    NonFiniteValue,
    ParseError,
    SamplerAbort,
    SpecError,
    TailSlopeError,
)
from .samplers import SamplerKind, SamplerState, mh_alpha, run_chain
from .target import (
    GaussianMixtureSpec,
    TargetDensity,
    benchmark_mixture,
    gaussian_mixture,
    mixture_mean,
)

__version__ = "0.1.0"

__all__ = [
    "ArmskitError",
    "CSV_HEADER",
    "CellResult",
    "DegenerateChain",
    "DivergentArea",
    "DomainError",
    "DominanceViolation",
    "DuplicatePoint",
    "ExpLinear",
    "ExperimentConfig",
    "FlatLog",
    "GaussianMixtureSpec",
    "GridError",
    "InsufficientSupport",
    "LinearPdf",
    "NonFiniteValue",
    "ParseError",
    "Piece",
    "PiecewiseProposal",
    "Procedure",
    "QuadratureGrid",
    "RunSummary",
    "SamplerAbort",
    "SamplerKind",
    "SamplerState",
    "SpecError",
    "SupportSet",
    "TailSlopeError",
    "TargetDensity",
    "acceptance_rate",
    "benchmark_mixture",
    "build",
    "discrepancy",
    "emit_csv",
    "gaussian_mixture",
    "inflate_tails",
    "insert",
    "lag1_correlation",
    "log_eval",
    "log_eval_array",
    "mass_between",
    "mh_alpha",
    "mixture_mean",
    "parse_config",
    "piece_area",
    "proposal_csv_rows",
    "run_chain",
    "run_experiment",
    "sample",
    "summarize",
]
