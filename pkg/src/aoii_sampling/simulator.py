"""Seeded Monte Carlo simulation of the sampled Markov machine.

Randomness comes from numpy's PCG64 bit generator seeded with ``seed``. Each
slot consumes exactly two uniforms from ``Generator.random``, in this order:
first the transition draw, then the drop draw. The next state is the first
successor of the kernel row when the transition draw falls below that
successor's probability, else the second. A sampled slot charges the drop
penalty when the drop draw falls below ``q``.

Slot ``t`` charges ``S*v(t)`` plus any drop penalty for the action taken in
state ``s(t)``, then moves to ``s(t+1)``. The first ``burn_in`` slots are not
accumulated.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .model import (
    SYNCED,
    Action,
    ModelParams,
    SysState,
    admissible_actions,
    enumerate_states,
    state_index,
    transitions,
    validate_params,
)

N_BATCHES = 100
CHUNK = 1 << 16


class PolicyError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    horizon: int = 1_000_000
    seed: int = 0
    burn_in: int = 1_000
    initial_state: SysState = SYNCED

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon={self.horizon} must be positive")
        if not 0 <= self.burn_in < self.horizon:
            raise ValueError(f"burn_in={self.burn_in} must satisfy 0 <= burn_in < horizon={self.horizon}")


@dataclass(frozen=True)
class SimStats:
    """Time averages over the accumulated (post burn-in) slots."""

    S: float
    p: float
    slots: int
    avg_cost: float
    avg_aoii: float
    drop_rate: float
    sample_rate: float
    stderr_cost: float
    aoii_histogram: dict[int, float] = field(repr=False)
    state_fractions: dict[SysState, float] = field(repr=False)
    transition_counts: dict[tuple[SysState, Action], Counter] = field(repr=False)


def _compile(params: ModelParams, policy: dict[SysState, Action]):
    """Per-state lookup rows ``(action, first_next, first_prob, second_next)``; None where undefined."""
    states = enumerate_states(params)
    rows: list[tuple[int, int, float, int] | None] = [None] * len(states)
    for s in states:
        if s not in policy:
            continue
        a = Action(policy[s])
        if a not in admissible_actions(s, params):
            raise PolicyError(f"policy picks inadmissible {a.name} at {s}")
        succ = transitions(s, a, params)
        first, p_first = succ[0]
        second = succ[1][0] if len(succ) > 1 else first
        rows[state_index(s)] = (int(a), state_index(first), p_first, state_index(second))
    return states, rows


def simulate(params: ModelParams, policy: dict[SysState, Action], config: SimConfig = SimConfig()) -> SimStats:
    validate_params(params)
    states, rows = _compile(params, policy)
    rng = np.random.Generator(np.random.PCG64(config.seed))

    path = np.empty(config.horizon, dtype=np.int64)
    dropped = np.zeros(config.horizon, dtype=bool)
    sampled_states = np.array([r is not None and r[0] == Action.SAMPLE for r in rows])
    s = state_index(config.initial_state)
    for start in range(0, config.horizon, CHUNK):
        n = min(CHUNK, config.horizon - start)
        draws = rng.random((n, 2))
        seg = np.empty(n, dtype=np.int64)
        for t, u in enumerate(draws[:, 0].tolist()):
            seg[t] = s
            row = rows[s]
            if row is None:
                raise PolicyError(f"policy undefined at reached state {states[s]}")
            s = row[1] if u < row[2] else row[3]
        path[start : start + n] = seg
        dropped[start : start + n] = sampled_states[seg] & (draws[:, 1] < params.q)

    path, dropped = path[config.burn_in :], dropped[config.burn_in :]
    return _summarise(params, states, rows, path, dropped)


def _summarise(params, states, rows, path, dropped) -> SimStats:
    n = len(path)
    aoii = np.array([st.v for st in states], dtype=np.int64)[path]
    sampled = np.array([r is not None and r[0] == Action.SAMPLE for r in rows])[path]

    avg_aoii = int(aoii.sum()) / n
    drop_rate = int(dropped.sum()) / n
    avg_cost = params.S * avg_aoii + params.p * drop_rate

    n_batches = min(N_BATCHES, n)
    if n_batches >= 2:
        batch_cost = [
            params.S * a.mean() + params.p * d.mean()
            for a, d in zip(np.array_split(aoii, n_batches), np.array_split(dropped, n_batches))
        ]
        stderr = float(np.std(batch_cost, ddof=1) / np.sqrt(n_batches))
    else:
        stderr = float("nan")

    visits = np.bincount(path, minlength=len(states))
    state_fractions = {states[i]: c / n for i, c in enumerate(visits.tolist()) if c}
    hist = Counter()
    for st, frac in state_fractions.items():
        hist[st.v] += frac

    # Transitions out of every accumulated slot except the last.
    pairs = np.bincount(path[:-1] * len(states) + path[1:], minlength=len(states) ** 2)
    counts: dict[tuple[SysState, Action], Counter] = {}
    for flat in np.flatnonzero(pairs).tolist():
        i, j = divmod(flat, len(states))
        key = (states[i], Action(rows[i][0]))
        counts.setdefault(key, Counter())[states[j]] = int(pairs[flat])

    return SimStats(
        S=params.S,
        p=params.p,
        slots=n,
        avg_cost=avg_cost,
        avg_aoii=avg_aoii,
        drop_rate=drop_rate,
        sample_rate=int(sampled.sum()) / n,
        stderr_cost=stderr,
        aoii_histogram=dict(sorted(hist.items())),
        state_fractions=state_fractions,
        transition_counts=counts,
    )


def empirical_distribution(stats: SimStats) -> np.ndarray:
    """Visit fractions in enumeration order ``(0,0), (0,1), (1,0), ...``, up to the largest visited AoII."""
    top = max((s.v for s in stats.state_fractions), default=0)
    out = np.zeros(top + 2)
    for s, frac in stats.state_fractions.items():
        out[state_index(s)] += frac
    return out
