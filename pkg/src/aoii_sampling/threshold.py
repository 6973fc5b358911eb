"""Closed-form analysis of threshold sampling policies.

A threshold policy with threshold ``v_th`` samples exactly when the AoII
counter reaches ``v_th``. It confines the chain to ``(0,0), (0,1), (1,0), ...,
(v_th,0)``, enumerated ``0, 1, 2, ..., v_th + 1``. The stationary law of that
chain and its average cost are available in closed form.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .model import Action, ModelParams, SysState, enumerate_states, sampling_bound, state_index, transitions

# Relative tolerance under which two thresholds count as equally good.
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class ThresholdPolicy:
    v_th: int

    def __post_init__(self):
        if isinstance(self.v_th, bool) or int(self.v_th) != self.v_th or self.v_th < 1:
            raise ValueError(f"threshold must be a positive integer, got {self.v_th!r}")

    def action(self, s: SysState) -> Action:
        if s.b == 1 or s.v < self.v_th:
            return Action.IDLE
        return Action.SAMPLE

    def as_mapping(self, params: ModelParams) -> dict[SysState, Action]:
        """Full policy table over the capped state space."""
        if self.v_th > params.K:
            raise ValueError(f"threshold {self.v_th} exceeds the cap K={params.K}")
        return {s: self.action(s) for s in enumerate_states(params)}


@dataclass(frozen=True)
class StationaryDist:
    v_th: int
    probs: np.ndarray

    def __getitem__(self, i):
        return self.probs[i]


@dataclass(frozen=True)
class ThresholdSearchResult:
    v_lower: int
    v_upper: int
    v_opt: int
    cost_opt: float
    cost_table: dict[int, float] = field(repr=False)


def upper_threshold_bound(params: ModelParams) -> int:
    """AoII level from which sampling is always optimal."""
    return sampling_bound(params.q, params.S, params.p)


def lower_threshold_bound(params: ModelParams) -> int:
    """AoII level below which sampling is never optimal."""
    q, q1, S, p = params.q, params.q1, params.S, params.p
    return max(math.ceil(p * q * q / ((1.0 - q) * S) - 1.0 / (2.0 * q1)), 1)


def _entry_mass(q: float, q1: float, v_th: int) -> float:
    """Stationary probability of state (1,0) under threshold ``v_th``."""
    tail = (1.0 - q) ** v_th
    return q1 * q / (2.0 * q1 - 2.0 * q1 * tail + q * tail)


def stationary_distribution(params: ModelParams, policy: ThresholdPolicy) -> StationaryDist:
    q, q1, v_th = params.q, params.q1, policy.v_th
    probs = np.empty(v_th + 2)
    probs[2:] = _entry_mass(q, q1, v_th) * (1.0 - q) ** np.arange(v_th)
    # Remaining balance equations: everything leaving the (v,0) ladder by a
    # machine flip lands in (0,0); (0,1) is fed only by sampling at v_th.
    lhs = np.array([[q, 0.0], [0.0, q1]])
    rhs = np.array([q * probs[2:].sum(), (1.0 - q) * probs[-1]])
    probs[:2] = np.linalg.solve(lhs, rhs)
    probs /= probs.sum()
    return StationaryDist(v_th, probs)


def balance_residuals(params: ModelParams, v_th: int, probs: np.ndarray) -> np.ndarray:
    """Residual of each global balance equation of the induced chain, in enumeration order."""
    q, q1 = params.q, params.q1
    probs = np.asarray(probs, dtype=float)
    res = np.empty(v_th + 2)
    res[0] = probs[0] - ((1.0 - q) * probs[0] + q * probs[2:].sum())
    res[1] = probs[1] - ((1.0 - q1) * probs[1] + (1.0 - q) * probs[v_th + 1])
    res[2] = probs[2] - (q * probs[0] + q1 * probs[1])
    res[3:] = probs[3:] - (1.0 - q) * probs[2:-1]
    return res


def induced_chain(params: ModelParams, policy: ThresholdPolicy) -> np.ndarray:
    """Row-stochastic transition matrix of the chain a threshold policy induces."""
    n = policy.v_th + 2
    P = np.zeros((n, n))
    states = [SysState(0, 0), SysState(0, 1)] + [SysState(v, 0) for v in range(1, policy.v_th + 1)]
    capped = dataclasses.replace(params, K=max(params.K, policy.v_th))
    for s in states:
        for nxt, pr in transitions(s, policy.action(s), capped):
            P[state_index(s), state_index(nxt)] += pr
    return P


def threshold_average_cost(params: ModelParams, policy: ThresholdPolicy) -> float:
    q, S, p, v_th = params.q, params.S, params.p, policy.v_th
    entry = _entry_mass(q, params.q1, v_th)
    i = np.arange(v_th)
    aoii = float(np.sum(S * (i + 1) * entry * (1.0 - q) ** i))
    return aoii + q * (1.0 - q) ** (v_th - 1) * entry * p


def _search_key(params: ModelParams, v_th: int) -> tuple[int, float]:
    """Order-preserving key for the average cost of threshold ``v_th``.

    The cost equals ``S/(2q) + (1-q)**v_th * h / (2*D)`` with
    ``h = 2 q^2 q1 p / (1-q) - S (2 q1 v_th + 1)`` and
    ``D = 2 q1 - (2 q1 - q) (1-q)**v_th``. Only the second term depends on
    ``v_th``; it is compared through its sign and log-magnitude so thresholds
    remain distinguishable after ``(1-q)**v_th`` drops below double precision.
    """
    q, q1, S, p = params.q, params.q1, params.S, params.p
    r = 1.0 - q
    h = 2.0 * q * q * q1 * p / r - S * (2.0 * q1 * v_th + 1.0)
    if h == 0.0:
        return (1, 0.0)
    denom = 2.0 * (2.0 * q1 - (2.0 * q1 - q) * r**v_th)
    log_mag = v_th * math.log(r) + math.log(abs(h)) - math.log(denom)
    return (0, -log_mag) if h < 0 else (2, log_mag)


def _ties(a: tuple[int, float], b: tuple[int, float]) -> bool:
    return a[0] == b[0] and abs(a[1] - b[1]) <= TIE_RTOL


def optimal_threshold(params: ModelParams) -> ThresholdSearchResult:
    """Exhaustive search between the two threshold bounds.

    Ties resolve toward the larger threshold.
    """
    lo, hi = lower_threshold_bound(params), upper_threshold_bound(params)
    keys = {v: _search_key(params, v) for v in range(lo, hi + 1)}
    best = min(keys.values())
    v_opt = max(v for v, k in keys.items() if _ties(k, best))
    table = {v: threshold_average_cost(params, ThresholdPolicy(v)) for v in keys}
    return ThresholdSearchResult(lo, hi, v_opt, table[v_opt], table)
