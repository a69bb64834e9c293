"""Rejection-test MCMC steps over adaptive piecewise proposals.

Four variants share one skeleton. Every step draws a candidate x' from the
current proposal and runs the rejection-sampling (RS) test u' <= p(x')/pi(x');
an RS rejection adds x' to the support, rebuilds, and redraws. They differ
in what happens after the RS test passes:

* ``ars``     accepts x' outright (valid only under a dominating proposal),
* ``arms``    runs a Metropolis-Hastings correction,
* ``a2rms``   MH, then while k <= K_stop may also add x' to the support
              with probability 1 - pi(x')/p(x'),
* ``ia2rms``  MH, then applies that same test to the point the chain left
              behind (the displaced state on acceptance, the rejected
              candidate otherwise), so the support is built from points the
              chain is not sitting on.

RNG discipline (load-bearing for the reduction trace tests): each proposal
costs one piece-selection uniform, the within-piece uniform(s), and the RS
uniform u'. The MH uniform is drawn only when alpha < 1, and the second-
control uniform u2 only when the insertion test can fire (pi < p at the
point, and for ia2rms the point is not already in the support). Under a
dominating proposal none of the conditional draws happen, so all four
samplers consume identical streams and produce identical chains.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import envelope
from .envelope import PiecewiseProposal, Procedure, SupportSet
from .errors import DominanceViolation, DuplicatePoint, SamplerAbort, SpecError
from .target import TargetDensity

__all__ = [
    "SamplerKind",
    "SamplerState",
    "mh_alpha",
    "ars_next",
    "arms_next",
    "a2rms_next",
    "ia2rms_next",
    "run_chain",
]

_INF = math.inf
_MAX_CONSECUTIVE_REJECTS = 1_000_000
_DOMINANCE_SLACK = 1e-10  # log-space slack, matches a (1 + 1e-10) density factor


class SamplerKind(enum.Enum):
    ARS = "ars"
    ARMS = "arms"
    A2RMS = "a2rms"
    IA2RMS = "ia2rms"

    @classmethod
    def from_name(cls, name: str) -> "SamplerKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise SpecError(f"unknown sampler {name!r}; expected one of {valid}") from None


@dataclass(slots=True)
class SamplerState:
    """Mutable chain state threaded through the step functions."""

    kind: SamplerKind
    x_current: float
    log_p_current: float
    log_prop_current: float
    support: SupportSet
    proposal: PiecewiseProposal
    k: int = 0
    t: int = 0
    K_stop: int = 0
    m0: int = 0
    rs_rejections: int = 0
    second_control_additions: int = 0
    mh_rejections: int = 0
    insertion_iterations: list[int] = field(default_factory=list)
    tail_beta: float = 0.0
    tail_alpha: float = 1.0
    _prop_cache_gen: int = -1


def mh_alpha(log_p_new: float, log_p_cur: float, log_prop_new: float, log_prop_cur: float) -> float:
    """Metropolis-Hastings acceptance for the rejection-corrected kernel.

    alpha = min[1, p(x') min(p(x_k), pi(x_k)) / (p(x_k) min(p(x'), pi(x')))],
    computed in log space. A zero-density candidate gives 0; a zero-density
    proposal value at the candidate makes the ratio blow up, giving 1.
    """
    a = _log_alpha(log_p_new, log_p_cur, log_prop_new, log_prop_cur)
    return 1.0 if a == 0.0 else math.exp(a)


def _log_alpha(lp_new: float, lp_cur: float, lw_new: float, lw_cur: float) -> float:
    if lp_new == -_INF:
        return -_INF
    num = lp_new + (lp_cur if lp_cur < lw_cur else lw_cur)
    den = lp_cur + (lp_new if lp_new < lw_new else lw_new)
    if den == -_INF:
        return 0.0
    d = num - den
    return 0.0 if d >= 0.0 else d


def _grow_support(state: SamplerState, x: float, target: TargetDensity) -> bool:
    """Insert x into the support and swap in the rebuilt proposal.

    Returns False when x duplicates an existing point (a no-op by contract,
    so the bookkeeping identity final_m = m0 + insertions stays exact).
    """
    try:
        prop = envelope.insert(
            state.support, x, target, state.proposal.procedure, previous=state.proposal
        )
    except DuplicatePoint:
        return False
    if state.tail_beta > 0.0:
        prop = envelope.inflate_tails(prop, state.tail_beta, state.tail_alpha, prop.generation)
    state.proposal = prop
    state.support = prop.support
    return True


def _rs_accept(state: SamplerState, target: TargetDensity, rng) -> tuple[float, float, float]:
    """Draw candidates until one passes the RS test; adapt on each rejection."""
    consecutive = 0
    while True:
        x, lw = envelope.sample(state.proposal, rng)
        u = rng.random()
        lp = target.log_density(x)
        if u == 0.0 or math.log(u) <= lp - lw:
            return x, lp, lw
        if _grow_support(state, x, target):
            state.rs_rejections += 1
            state.insertion_iterations.append(state.k)
        state.t += 1
        consecutive += 1
        if consecutive > _MAX_CONSECUTIVE_REJECTS:
            raise SamplerAbort(
                "rejection-sampling loop exceeded its budget",
                iteration=state.k,
                generation=state.proposal.generation,
                support_size=state.support.size,
            )


def ars_next(state: SamplerState, target: TargetDensity, rng) -> float:
    """One accepted sample under a dominating proposal (i.i.d. regime)."""
    consecutive = 0
    while True:
        x, lw = envelope.sample(state.proposal, rng)
        u = rng.random()
        lp = target.log_density(x)
        if lp > lw + _DOMINANCE_SLACK:
            raise DominanceViolation(
                f"target exceeds the proposal at x={x!r}: log p={lp!r} > log pi={lw!r}"
            )
        if u == 0.0 or math.log(u) <= lp - lw:
            state.x_current = x
            state.log_p_current = lp
            state.log_prop_current = lw
            state._prop_cache_gen = state.proposal.generation
            state.k += 1
            return x
        if _grow_support(state, x, target):
            state.rs_rejections += 1
            state.insertion_iterations.append(state.k)
        state.t += 1
        consecutive += 1
        if consecutive > _MAX_CONSECUTIVE_REJECTS:
            raise SamplerAbort(
                "rejection-sampling loop exceeded its budget",
                iteration=state.k,
                generation=state.proposal.generation,
                support_size=state.support.size,
            )


def _refresh_current(state: SamplerState) -> float:
    """pi_t(x_k) under the live proposal; cached per proposal generation."""
    if state._prop_cache_gen != state.proposal.generation:
        state.log_prop_current = envelope.log_eval(state.proposal, state.x_current)
        state._prop_cache_gen = state.proposal.generation
    return state.log_prop_current


def _mh_accept(state: SamplerState, lp_new: float, lw_new: float, rng) -> bool:
    """MH coin flip; draws a uniform only when the odds are genuinely < 1."""
    la = _log_alpha(lp_new, state.log_p_current, lw_new, _refresh_current(state))
    if la >= 0.0:
        return True
    if la == -_INF:
        return False
    u = rng.random()
    return u == 0.0 or math.log(u) < la


def _second_control(state, y: float, lp_y: float, lw_y: float, target, rng) -> None:
    """Support-building test: add y with probability 1 - pi(y)/p(y).

    Skipped without drawing when pi(y) >= p(y) (the test cannot fire) and
    when p(y) = 0 (the ratio is +inf, the point is never added).
    """
    if lp_y == -_INF or lw_y >= lp_y:
        return
    u2 = rng.random()
    if u2 > math.exp(lw_y - lp_y):
        if _grow_support(state, y, target):
            state.second_control_additions += 1
            state.insertion_iterations.append(state.k)


def arms_next(state: SamplerState, target: TargetDensity, rng) -> float:
    """RS test, then MH correction; the support only grows on RS rejections."""
    x_new, lp_new, lw_new = _rs_accept(state, target, rng)
    if _mh_accept(state, lp_new, lw_new, rng):
        state.x_current = x_new
        state.log_p_current = lp_new
        state.log_prop_current = lw_new
    else:
        state.mh_rejections += 1
    state.t += 1
    state.k += 1
    return state.x_current


def a2rms_next(state: SamplerState, target: TargetDensity, rng) -> float:
    """ARMS plus a second control that keeps refining where pi < p.

    While k <= K_stop the accepted-or-not candidate x' can still join the
    support with probability 1 - pi(x')/p(x'). K_stop = 0 disables the
    second control entirely (reduces to plain ARMS).
    """
    x_new, lp_new, lw_new = _rs_accept(state, target, rng)
    if _mh_accept(state, lp_new, lw_new, rng):
        state.x_current = x_new
        state.log_p_current = lp_new
        state.log_prop_current = lw_new
    else:
        state.mh_rejections += 1
    if 0 < state.K_stop and state.k <= state.K_stop:
        _second_control(state, x_new, lp_new, lw_new, target, rng)
    state.t += 1
    state.k += 1
    return state.x_current


def ia2rms_next(state: SamplerState, target: TargetDensity, rng) -> float:
    """ARMS where the second control feeds on the point the chain left.

    On MH acceptance the displaced state is the candidate for insertion;
    on rejection it is the failed proposal. Either way the inserted point
    is never the chain's current position, and membership is checked first
    so known support points are skipped without consuming randomness.
    """
    x_new, lp_new, lw_new = _rs_accept(state, target, rng)
    lw_cur = _refresh_current(state)
    if _mh_accept(state, lp_new, lw_new, rng):
        y, lp_y, lw_y = state.x_current, state.log_p_current, lw_cur
        state.x_current = x_new
        state.log_p_current = lp_new
        state.log_prop_current = lw_new
    else:
        y, lp_y, lw_y = x_new, lp_new, lw_new
        state.mh_rejections += 1
    if not state.support.contains(y):
        _second_control(state, y, lp_y, lw_y, target, rng)
    state.t += 1
    state.k += 1
    return state.x_current


_STEP = {
    SamplerKind.ARS: ars_next,
    SamplerKind.ARMS: arms_next,
    SamplerKind.A2RMS: a2rms_next,
    SamplerKind.IA2RMS: ia2rms_next,
}


def run_chain(
    kind: SamplerKind,
    target: TargetDensity,
    procedure: Procedure,
    s0: Iterable[float] | SupportSet,
    N: int,
    K: int | None,
    rng,
    *,
    tail_beta: float = 0.0,
    tail_alpha: float = 1.0,
) -> tuple[np.ndarray, SamplerState]:
    """Run N iterations from initial support s0; returns (chain, final state).

    K is the adaptation stop time for the a2rms second control; None means
    N (never stops within the run). The initial state x_0 is drawn from the
    initial proposal, redrawn until it lands where p > 0, and is not part
    of the returned chain. Identical seeds give bitwise-identical chains.
    """
    if N < 1:
        raise SpecError(f"N must be at least 1, got {N}")
    support = s0 if isinstance(s0, SupportSet) else SupportSet.from_points(s0, target)
    proposal = envelope.build(support, procedure, target)
    if tail_beta > 0.0:
        proposal = envelope.inflate_tails(proposal, tail_beta, tail_alpha, 0)

    x0 = lw0 = lp0 = None
    for _ in range(1000):
        x0, lw0 = envelope.sample(proposal, rng)
        lp0 = target.log_density(x0)
        if lp0 > -_INF:
            break
    else:
        raise SamplerAbort(
            "could not draw an initial state with positive target density",
            iteration=0,
            generation=0,
            support_size=support.size,
        )

    state = SamplerState(
        kind=kind,
        x_current=x0,
        log_p_current=lp0,
        log_prop_current=lw0,
        support=proposal.support,
        proposal=proposal,
        K_stop=N if K is None else K,
        m0=support.size,
        tail_beta=tail_beta,
        tail_alpha=tail_alpha,
        _prop_cache_gen=proposal.generation,
    )
    step = _STEP[kind]
    chain = np.empty(N)
    for i in range(N):
        chain[i] = step(state, target, rng)
    return chain, state
