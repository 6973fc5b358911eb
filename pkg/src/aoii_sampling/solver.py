"""Dynamic-programming solvers on the capped state space.

Both iterations start from the zero function and use the kernel exactly as
:mod:`aoii_sampling.model` defines it. The relative iteration normalises by
the value of the synced state ``(0,0)``, whose limit is the optimal average
cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import Action, ModelParams, SysState, enumerate_states, kernel_arrays, validate_params

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 1_000_000

# Sampling must beat idling by more than this (relative) margin to be chosen.
TIE_RTOL = 1e-9

NEVER_SAMPLES = math.inf
"""Marker returned by :func:`is_threshold` for a policy that never samples."""


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class DiscountedSolve:
    params: ModelParams
    alpha: float
    values: dict[SysState, float] = field(repr=False)
    iterations: int
    residual: float


@dataclass(frozen=True)
class SolveResult:
    params: ModelParams
    rel_values: dict[SysState, float] = field(repr=False)
    avg_cost: float
    policy: dict[SysState, Action] = field(repr=False)
    threshold: int | float | None
    iterations: int = 0
    residual: float = 0.0

    def value_array(self) -> np.ndarray:
        return np.array([self.rel_values[s] for s in enumerate_states(self.params)])


def _q_values(kernel, V: np.ndarray) -> np.ndarray:
    expected = np.einsum("aij,aij->ai", kernel.prob, V[kernel.succ])
    return kernel.cost + expected


def _greedy(Q: np.ndarray) -> np.ndarray:
    idle, sample = Q[Action.IDLE], Q[Action.SAMPLE]
    margin = TIE_RTOL * np.maximum(1.0, np.abs(np.where(np.isfinite(idle), idle, sample)))
    return np.where(sample < idle - margin, Action.SAMPLE, Action.IDLE)


def discounted_value_iteration(
    params: ModelParams,
    alpha: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> DiscountedSolve:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"discount alpha={alpha!r} must lie in (0, 1)")
    validate_params(params)
    kernel = kernel_arrays(params)
    V = np.zeros(params.n_states)
    residual = math.inf
    for it in range(1, max_iter + 1):
        Q = _q_values(kernel, alpha * V)
        new = Q.min(axis=0)
        residual = float(np.max(np.abs(new - V)))
        V = new
        if residual <= tol:
            values = dict(zip(enumerate_states(params), V.tolist()))
            return DiscountedSolve(params, alpha, values, it, residual)
    raise ConvergenceError(
        f"discounted value iteration did not reach tol={tol:g} in {max_iter} iterations "
        f"(residual {residual:.3e})",
        max_iter,
        residual,
    )


def relative_value_iteration(
    params: ModelParams,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SolveResult:
    """Average-cost optimal values, cost and policy.

    Stops once the sup-norm change between successive iterates is at most
    ``tol``. The returned policy is greedy with respect to the final values,
    and ties go to idling.
    """
    validate_params(params)
    kernel = kernel_arrays(params)
    V = np.zeros(params.n_states)
    residual = math.inf
    for it in range(1, max_iter + 1):
        new = _q_values(kernel, V).min(axis=0) - V[0]
        residual = float(np.max(np.abs(new - V)))
        V = new
        if residual <= tol:
            break
    else:
        raise ConvergenceError(
            f"relative value iteration did not reach tol={tol:g} in {max_iter} iterations "
            f"(residual {residual:.3e})",
            max_iter,
            residual,
        )
    states = enumerate_states(params)
    actions = _greedy(_q_values(kernel, V))
    policy = {s: Action(int(a)) for s, a in zip(states, actions)}
    return SolveResult(
        params=params,
        rel_values=dict(zip(states, V.tolist())),
        avg_cost=float(V[0]),
        policy=policy,
        threshold=is_threshold(policy),
        iterations=it,
        residual=residual,
    )


def extract_policy(result: SolveResult) -> dict[SysState, Action]:
    """Greedy policy with respect to ``result.rel_values`` (ties go to idling)."""
    kernel = kernel_arrays(result.params)
    actions = _greedy(_q_values(kernel, result.value_array()))
    return {s: Action(int(a)) for s, a in zip(enumerate_states(result.params), actions)}


def is_threshold(policy: dict[SysState, Action]) -> int | float | None:
    """Threshold of ``policy`` if its sampling set is an up-set of ``{1..K}``.

    Returns the smallest sampling AoII, :data:`NEVER_SAMPLES` when the policy
    never samples, and ``None`` when the structure is not a threshold.
    """
    ladder = sorted((s.v, a) for s, a in policy.items() if s.b == 0 and s.v >= 1)
    sampling = [v for v, a in ladder if a == Action.SAMPLE]
    if not sampling:
        return NEVER_SAMPLES
    first = sampling[0]
    if any(a != Action.SAMPLE for v, a in ladder if v >= first):
        return None
    return first
