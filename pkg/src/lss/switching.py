"""Continuous-time Markov chain engine for the regime process.

Regime paths are sampled with the standard jump-chain construction: in
state i the holding time is Exp(-r_ii) and the next state is drawn with
probabilities r_ij / (-r_ii).  Paths are right-continuous step functions;
``regime_at`` returns the post-jump state at a jump time.

``coupling_time`` runs two independent chains until they first occupy the
same state; ``meeting_time_cdf`` is the matrix-exponential first-passage
law of the product chain (the oracle the coupling experiment is checked
against).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.sparse.csgraph import connected_components

__all__ = [
    "GeneratorMatrix",
    "SwitchPath",
    "CouplingTime",
    "GeneratorError",
    "validate_generator",
    "sample_path",
    "coupling_time",
    "stationary_distribution",
    "meeting_time_cdf",
    "is_irreducible",
]

_ROW_SUM_TOL = 1e-12


class GeneratorError(ValueError):
    """Generator matrix violates the rate-matrix invariants."""


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """CTMC generator: nonnegative off-diagonal rates, zero row sums."""

    rates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rates", np.atleast_2d(np.asarray(self.rates, dtype=float)))

    @property
    def n_states(self) -> int:
        return self.rates.shape[0]

    @property
    def min_positive_rate(self) -> float:
        off = self.rates[~np.eye(self.n_states, dtype=bool)]
        positive = off[off > 0]
        return float(positive.min()) if positive.size else 0.0


def validate_generator(gen: GeneratorMatrix) -> None:
    """Raise GeneratorError unless off-diagonals are >= 0 and rows sum to zero."""
    q = gen.rates
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise GeneratorError(f"generator must be square, got shape {q.shape}")
    if q.shape[0] < 1:
        raise GeneratorError("generator needs at least one state")
    off = q[~np.eye(q.shape[0], dtype=bool)]
    if off.size and off.min() < 0:
        raise GeneratorError(f"negative off-diagonal rate {off.min()}")
    row_sums = q.sum(axis=1)
    worst = float(np.abs(row_sums).max())
    if worst > _ROW_SUM_TOL:
        raise GeneratorError(f"row sums must vanish, worst deviation {worst:.3e}")


@dataclass(frozen=True, eq=False)
class SwitchPath:
    """Piecewise-constant regime trajectory on [start_time, end_time].

    ``jump_times`` are strictly increasing and lie in (start_time, end_time];
    ``jump_states[k]`` is the state entered at ``jump_times[k]``.
    """

    start_time: float
    end_time: float
    initial_state: int
    jump_times: np.ndarray
    jump_states: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "jump_times", np.asarray(self.jump_times, dtype=float))
        object.__setattr__(self, "jump_states", np.asarray(self.jump_states, dtype=np.int64))
        jt = self.jump_times
        if jt.size:
            if np.any(np.diff(jt) <= 0):
                raise ValueError("jump times must be strictly increasing")
            if jt[0] <= self.start_time or jt[-1] > self.end_time:
                raise ValueError("jump times must lie in (start_time, end_time]")
            states = np.concatenate(([self.initial_state], self.jump_states))
            if np.any(states[1:] == states[:-1]):
                raise ValueError("consecutive states must differ")

    @property
    def n_jumps(self) -> int:
        return int(self.jump_times.size)

    def regime_at(self, t) -> np.ndarray | int:
        """Right-continuous state at time(s) t: post-jump state at a jump time."""
        t_arr = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.jump_times, t_arr, side="right")
        states = np.concatenate(([self.initial_state], self.jump_states))
        out = states[idx]
        return int(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def sample_path(
    gen: GeneratorMatrix, j0: int, s: float, t: float, rng: np.random.Generator
) -> SwitchPath:
    """Sample a regime path on [s, t] starting from state j0 at time s.

    A state with zero exit rate is absorbing.  Consumes one exponential and
    one uniform per jump, in jump order.
    """
    validate_generator(gen)
    if not s < t:
        raise ValueError(f"need s < t, got s={s}, t={t}")
    q = gen.rates
    n = gen.n_states
    if not 0 <= j0 < n:
        raise ValueError(f"initial state {j0} outside 0..{n - 1}")
    times: list[float] = []
    states: list[int] = []
    clock = s
    state = j0
    while True:
        exit_rate = -q[state, state]
        if exit_rate <= 0.0:
            break
        clock = clock + rng.exponential(1.0 / exit_rate)
        if clock > t:
            break
        probs = q[state].copy()
        probs[state] = 0.0
        cdf = np.cumsum(probs) / exit_rate
        state = int(np.searchsorted(cdf, rng.random(), side="right"))
        times.append(clock)
        states.append(state)
    return SwitchPath(
        start_time=s, end_time=t, initial_state=j0,
        jump_times=np.array(times), jump_states=np.array(states, dtype=np.int64),
    )


@dataclass(frozen=True)
class CouplingTime:
    """First meeting time of two chains; ``censored`` marks a horizon cutoff."""

    value: float
    censored: bool


def coupling_time(
    gen: GeneratorMatrix,
    j1: int,
    j2: int,
    rng: np.random.Generator,
    max_horizon: float | None = None,
) -> CouplingTime:
    """Simulate independent chains from j1 and j2 until they first coincide.

    Returns 0 when j1 == j2.  For nearly-reducible chains the run is cut at
    ``max_horizon`` (default 100 / min positive rate) with ``censored=True``.
    """
    validate_generator(gen)
    if j1 == j2:
        return CouplingTime(0.0, False)
    if max_horizon is None:
        rate = gen.min_positive_rate
        if rate <= 0.0:
            raise ValueError("coupling_time: generator has no positive rates and j1 != j2")
        max_horizon = 100.0 / rate
    q = gen.rates

    def next_jump(state: int, now: float) -> float:
        exit_rate = -q[state, state]
        if exit_rate <= 0.0:
            return np.inf
        return now + rng.exponential(1.0 / exit_rate)

    def jump_target(state: int) -> int:
        exit_rate = -q[state, state]
        probs = q[state].copy()
        probs[state] = 0.0
        cdf = np.cumsum(probs) / exit_rate
        return int(np.searchsorted(cdf, rng.random(), side="right"))

    s1, s2 = j1, j2
    t1, t2 = next_jump(s1, 0.0), next_jump(s2, 0.0)
    while True:
        t_next = min(t1, t2)
        if t_next > max_horizon:
            return CouplingTime(max_horizon, True)
        if t1 <= t2:
            s1 = jump_target(s1)
            t1 = next_jump(s1, t_next)
        else:
            s2 = jump_target(s2)
            t2 = next_jump(s2, t_next)
        if s1 == s2:
            return CouplingTime(float(t_next), False)


def stationary_distribution(gen: GeneratorMatrix) -> np.ndarray:
    """Solve pi Q = 0, sum(pi) = 1 for an irreducible generator.

    Raises GeneratorError when the linear system is rank-deficient (reducible
    chain) or the solution is not strictly positive.
    """
    validate_generator(gen)
    n = gen.n_states
    a = np.vstack([gen.rates.T, np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < n:
        raise GeneratorError("reducible generator: stationary distribution is not unique")
    residual = float(np.linalg.norm(pi @ gen.rates))
    if residual > 1e-10 or pi.min() <= 0.0:
        raise GeneratorError(
            f"no strictly positive stationary solution (residual {residual:.3e}, min {pi.min():.3e})"
        )
    return pi / pi.sum()


def is_irreducible(gen: GeneratorMatrix) -> bool:
    """Strong connectivity of the positive-rate digraph."""
    adj = (gen.rates > 0).astype(int)
    np.fill_diagonal(adj, 0)
    n_comp, _ = connected_components(adj, directed=True, connection="strong")
    return n_comp == 1


def meeting_time_cdf(gen: GeneratorMatrix, j1: int, j2: int, t) -> np.ndarray | float:
    """P{coupling time <= t} for independent chains from (j1, j2).

    Exact via the matrix exponential of the product chain on S x S with the
    diagonal pairs made absorbing.
    """
    validate_generator(gen)
    if j1 == j2:
        t_arr = np.asarray(t, dtype=float)
        ones = np.ones_like(t_arr)
        return float(ones) if t_arr.ndim == 0 else ones
    n = gen.n_states
    q = gen.rates
    eye = np.eye(n)
    big = np.kron(q, eye) + np.kron(eye, q)
    diag_pairs = [i * n + i for i in range(n)]
    big[diag_pairs, :] = 0.0  # absorbing once the chains meet
    start = j1 * n + j2

    def cdf_at(tt: float) -> float:
        if tt < 0:
            return 0.0
        probs = expm(big * tt)[start]
        return float(probs[diag_pairs].sum())

    t_arr = np.asarray(t, dtype=float)
    if t_arr.ndim == 0:
        return cdf_at(float(t_arr))
    return np.array([cdf_at(tt) for tt in t_arr])
