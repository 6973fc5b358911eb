"""Problem instance, state space, per-slot cost and transition kernel.

States are ``(v, b)`` pairs: ``v`` counts slots since the server's estimate of
the machine last matched its true state, ``b`` flags a machine that is busy
with a job the server assigned. Serving states always carry ``v == 0``, so the
capped space is ``(0, 0), (0, 1), (1, 0), ..., (K, 0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple

import numpy as np


class InvalidParams(ValueError):
    """Raised when a :class:`ModelParams` violates one of its invariants."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


class InadmissibleAction(ValueError):
    pass


class Action(IntEnum):
    IDLE = 0
    SAMPLE = 1


class SysState(NamedTuple):
    v: int
    b: int = 0

    def __str__(self) -> str:
        return f"({self.v},{self.b})"


SYNCED = SysState(0, 0)
SERVING = SysState(0, 1)


def sampling_bound(q: float, S: float, p: float) -> int:
    """Smallest AoII at which sampling is guaranteed optimal, ``max(1, ceil(pq / (S(1-q))))``."""
    return max(1, math.ceil(p * q / (S * (1.0 - q))))


def default_cap(q: float, S: float, p: float) -> int:
    return max(sampling_bound(q, S, p) + 5, 8)


@dataclass(frozen=True)
class ModelParams:
    """Problem instance.

    Attributes:
        q: per-slot flip probability of the machine between free and busy.
        q1: per-slot completion probability of a server-assigned job.
        S: cost per unit of AoII per slot.
        p: penalty for a dropped job.
        K: AoII cap of the bounded state space.
    """

    q: float
    q1: float
    S: float
    p: float
    K: int

    @classmethod
    def create(cls, q: float, q1: float, S: float, p: float, K: int | None = None) -> ModelParams:
        """Build and validate; ``K`` defaults to :func:`default_cap`."""
        if K is None:
            _check_ranges(q, q1, S, p)
            K = default_cap(q, S, p)
        params = cls(float(q), float(q1), float(S), float(p), int(K))
        validate_params(params)
        return params

    def replace(self, **changes) -> ModelParams:
        """Copy with some fields changed; ``K`` is re-derived unless given explicitly."""
        fields = {"q": self.q, "q1": self.q1, "S": self.S, "p": self.p, "K": None}
        fields.update(changes)
        return ModelParams.create(**fields)

    @property
    def n_states(self) -> int:
        return self.K + 2


def _range_violations(q, q1, S, p) -> list[str]:
    out = []
    if not (isinstance(q, (int, float)) and 0.0 < q < 1.0):
        out.append(f"q={q!r} out of range: need 0 < q < 1")
    if not (isinstance(q1, (int, float)) and 0.0 < q1 <= 1.0):
        out.append(f"q1={q1!r} out of range: need 0 < q1 <= 1")
    if not (isinstance(S, (int, float)) and math.isfinite(S) and S > 0.0):
        out.append(f"S={S!r} out of range: need S > 0")
    if not (isinstance(p, (int, float)) and math.isfinite(p) and p > 0.0):
        out.append(f"p={p!r} out of range: need p > 0")
    return out


def _check_ranges(q, q1, S, p) -> None:
    violations = _range_violations(q, q1, S, p)
    if violations:
        raise InvalidParams(violations)


def validate_params(params: ModelParams) -> None:
    """Raise :class:`InvalidParams` naming every violated bound; return None when valid."""
    violations = _range_violations(params.q, params.q1, params.S, params.p)
    K = params.K
    if not isinstance(K, (int, np.integer)) or isinstance(K, bool) or K < 1:
        violations.append(f"K={K!r} out of range: need a positive integer")
    elif not violations:
        bound = sampling_bound(params.q, params.S, params.p)
        if K < bound:
            violations.append(f"K={K} below the sampling bound {bound}: need K >= {bound}")
    if violations:
        raise InvalidParams(violations)


def admissible_actions(s: SysState, params: ModelParams) -> tuple[Action, ...]:
    if s.b == 1 or s.v == 0:
        return (Action.IDLE,)
    if s.v >= params.K:
        return (Action.SAMPLE,)
    return (Action.IDLE, Action.SAMPLE)


def _check_state(s: SysState, params: ModelParams) -> None:
    if s.b not in (0, 1) or s.v < 0:
        raise ValueError(f"malformed state {s}")
    if s.b == 1 and s.v != 0:
        raise ValueError(f"serving state must have v=0, got {s}")
    if s.v > params.K:
        raise ValueError(f"state {s} lies beyond the cap K={params.K}")


def _check_action(s: SysState, a: Action, params: ModelParams) -> None:
    if a not in admissible_actions(s, params):
        raise InadmissibleAction(f"action {Action(a).name} is not admissible at {s}")


def step_cost(s: SysState, a: Action, params: ModelParams) -> float:
    """``S*v`` plus the expected drop penalty ``q*p`` when sampling."""
    _check_state(s, params)
    _check_action(s, a, params)
    return params.S * s.v + (params.q * params.p if a == Action.SAMPLE else 0.0)


def transitions(s: SysState, a: Action, params: ModelParams) -> list[tuple[SysState, float]]:
    _check_state(s, params)
    _check_action(s, a, params)
    q, q1 = params.q, params.q1
    if s == SERVING:
        rows = [(SERVING, 1.0 - q1), (SysState(1, 0), q1)]
    elif s == SYNCED:
        rows = [(SYNCED, 1.0 - q), (SysState(1, 0), q)]
    elif a == Action.SAMPLE:
        rows = [(SYNCED, q), (SERVING, 1.0 - q)]
    else:
        rows = [(SysState(s.v + 1, 0), 1.0 - q), (SYNCED, q)]
    return [(nxt, prob) for nxt, prob in rows if prob > 0.0]


def enumerate_states(params: ModelParams) -> list[SysState]:
    return [SYNCED, SERVING] + [SysState(v, 0) for v in range(1, params.K + 1)]


def state_index(s: SysState) -> int:
    """Position of ``s`` in :func:`enumerate_states` order."""
    if s.b == 1:
        return 1
    return 0 if s.v == 0 else s.v + 1


@dataclass(frozen=True)
class KernelArrays:
    """Dense encoding of the kernel for vectorised dynamic programming.

    ``cost[a, i]`` is ``inf`` where action ``a`` is inadmissible at state ``i``.
    Each row has at most two successors, stored as ``succ[a, i, j]`` with
    probability ``prob[a, i, j]`` (zero-probability padding points at state 0).
    """

    cost: np.ndarray
    succ: np.ndarray
    prob: np.ndarray


def kernel_arrays(params: ModelParams) -> KernelArrays:
    states = enumerate_states(params)
    n = len(states)
    cost = np.full((2, n), np.inf)
    succ = np.zeros((2, n, 2), dtype=np.intp)
    prob = np.zeros((2, n, 2))
    for i, s in enumerate(states):
        for a in admissible_actions(s, params):
            cost[a, i] = step_cost(s, a, params)
            for j, (nxt, pr) in enumerate(transitions(s, a, params)):
                succ[a, i, j] = state_index(nxt)
                prob[a, i, j] = pr
    return KernelArrays(cost, succ, prob)
