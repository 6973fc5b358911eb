from __future__ import annotations

import numpy as np
import pytest

from aoii_sampling.model import ModelParams, enumerate_states, state_index, step_cost, transitions
from aoii_sampling.threshold import upper_threshold_bound

ACCEPTANCE_LINES: list[str] = []

# Random instances: q and q1 stay away from 0 so chains mix within the
# solver's iteration budget; draws whose sampling bound exceeds MAX_BOUND are
# redrawn to keep the state space at desk scale.
Q_RANGE = (0.02, 0.98)
Q1_RANGE = (0.02, 1.0)
COST_RANGE = (0.1, 50.0)
MAX_BOUND = 1000


def random_params(rng: np.random.Generator, n: int, margin: int = 5) -> list[ModelParams]:
    out = []
    while len(out) < n:
        q, q1 = rng.uniform(*Q_RANGE), rng.uniform(*Q1_RANGE)
        S, p = rng.uniform(*COST_RANGE), rng.uniform(*COST_RANGE)
        probe = ModelParams(q, q1, S, p, 1)
        bound = upper_threshold_bound(probe)
        if bound > MAX_BOUND:
            continue
        out.append(ModelParams.create(q, q1, S, p, bound + margin))
    return out


def power_stationary(P: np.ndarray, tol: float = 1e-14, max_squarings: int = 64) -> np.ndarray:
    """Stationary row vector from high matrix powers, P^(2^k) by repeated squaring.

    Rows are renormalised after each squaring; iteration stops once every row
    of the power agrees with their mean to ``tol``.
    """
    M = P.copy()
    for _ in range(max_squarings):
        M = M @ M
        M /= M.sum(axis=1, keepdims=True)
        pi = M.mean(axis=0)
        if np.max(np.abs(M - pi)) <= tol:
            return pi / pi.sum()
    raise RuntimeError("matrix powers did not converge")


def policy_chain(params: ModelParams, policy) -> tuple[np.ndarray, np.ndarray]:
    """Transition matrix and per-state cost of ``policy`` over the full capped space."""
    states = enumerate_states(params)
    n = len(states)
    P = np.zeros((n, n))
    c = np.zeros(n)
    for s in states:
        a = policy[s]
        c[state_index(s)] = step_cost(s, a, params)
        for nxt, pr in transitions(s, a, params):
            P[state_index(s), state_index(nxt)] += pr
    return P, c


@pytest.fixture
def fig5() -> ModelParams:
    return ModelParams.create(0.4, 0.3, 1.0, 20.0, 20)


@pytest.fixture
def half() -> ModelParams:
    return ModelParams.create(0.5, 0.5, 1.0, 2.0)


@pytest.fixture
def acceptance_report():
    def record(criterion: str, passed: bool, detail: str = "") -> None:
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}" + (f" -- {detail}" if detail else ""))
        assert passed, f"{criterion}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
