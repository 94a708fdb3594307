"""Euler-Maruyama integration of the truncated system along sampled regime paths.

Stepping rules:

* the time axis is the base grid {s, s+dt, ...} merged with any requested
  snapshot times, and every trajectory additionally splits at its own
  regime-jump times, so no Euler-Maruyama sub-step ever spans a jump;
* drift and diffusion are evaluated at the left endpoint of each sub-step
  in the regime holding there (right-continuous regime path);
* per sub-step of length h each trajectory consumes one row of K standard
  normals from its own noise stream, scaled by sqrt(h).

Noise streams are per-trajectory and counter-based (see ``streams``), and
normals are drawn in fixed blocks of ``NORMAL_BLOCK`` rows, so a trajectory's
output is a function of (seed, tag, index) alone: ensembles are bit-identical
however the work is chunked across workers, and ensemble member m equals a
standalone ``simulate`` call with the same index.

Synchronous pairs drive two solutions with one switching path and one
Wiener stream; ``synchronous=False`` keeps the shared path but gives the
second member an independent Wiener stream.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import LatticeState, ModelSpec, apply_A
from .streams import trajectory_streams
from .switching import SwitchPath, sample_path

__all__ = [
    "SimConfig",
    "Trajectory",
    "EnsembleSnapshots",
    "BlowUpError",
    "BrownianGrid",
    "default_dt",
    "simulate",
    "simulate_pair_synchronous",
    "run_ensemble",
    "ensemble_snapshots",
    "pair_ensemble_snapshots",
]

BLOWUP_NORM = 1e12
NORMAL_BLOCK = 64
_TIME_TOL = 1e-12


class BlowUpError(RuntimeError):
    """Trajectory norm exceeded the blow-up threshold (or went non-finite)."""

    def __init__(self, time: float, trajectory_index: int, norm: float):
        self.time = time
        self.trajectory_index = trajectory_index
        self.norm = norm
        super().__init__(
            f"trajectory {trajectory_index} blew up at t={time:.6g} (norm {norm:.3e}); "
            "the explicit scheme needs a smaller dt or the spec violates the "
            "dissipativity conditions"
        )


@dataclass(frozen=True)
class SimConfig:
    """Time stepping and ensemble size for one run."""

    dt: float
    s: float
    t_end: float
    seed: int
    n_traj: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.s < self.t_end:
            raise ValueError(f"need s < t_end, got s={self.s}, t_end={self.t_end}")
        if self.dt > self.t_end - self.s:
            raise ValueError("dt exceeds the horizon t_end - s")
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")


def default_dt(spec: ModelSpec) -> float:
    """Conservative default step: 1e-3 * min(1, 1/(4 nu + max lambda))."""
    lam_max = float(np.max(spec.lambda_by_regime))
    return 1e-3 * min(1.0, 1.0 / (4.0 * spec.nu + lam_max))


@dataclass(eq=False)
class Trajectory:
    """One sampled solution: states at every sub-step boundary plus the regime path."""

    times: np.ndarray      # (P+1,)
    values: np.ndarray     # (P+1, dim)
    regimes: np.ndarray    # (P+1,) right-continuous regime at each time
    path: SwitchPath

    @property
    def terminal(self) -> LatticeState:
        return LatticeState(self.values[-1], int(self.regimes[-1]))


@dataclass(eq=False)
class EnsembleSnapshots:
    """Ensemble states at requested times: values[t_idx, traj_idx, site]."""

    times: np.ndarray      # (T,)
    values: np.ndarray     # (T, M, dim)
    regimes: np.ndarray    # (T, M)


# ---------------------------------------------------------------------------
# noise sources
# ---------------------------------------------------------------------------


class _BlockNormals:
    """Per-trajectory standard normals, drawn in fixed blocks, chronological order."""

    def __init__(self, rngs: list[np.random.Generator], k_modes: int):
        self._rngs = rngs
        self._k = k_modes
        m = len(rngs)
        self._buf = np.empty((m, NORMAL_BLOCK, k_modes))
        self._pos = np.full(m, NORMAL_BLOCK, dtype=np.int64)

    def increments(self, ids: np.ndarray, t0: np.ndarray, t1: np.ndarray) -> np.ndarray:
        for i in ids[self._pos[ids] >= NORMAL_BLOCK]:
            self._buf[i] = self._rngs[i].standard_normal((NORMAL_BLOCK, self._k))
            self._pos[i] = 0
        rows = self._buf[ids, self._pos[ids]]
        self._pos[ids] += 1
        return rows * np.sqrt(t1 - t0)[:, None]


@dataclass(eq=False)
class BrownianGrid:
    """Pre-sampled Brownian path on a fine uniform grid, for refinement studies.

    ``increments`` looks windows up by grid index, so every sub-step endpoint
    must sit on the fine grid: usable for single-regime runs whose dt is an
    integer multiple of ``dt_fine``.
    """

    t0: float
    dt_fine: float
    w: np.ndarray  # (n_pts, K) cumulative path, w[0] = 0

    @classmethod
    def sample(cls, rng: np.random.Generator, t0: float, t1: float, dt_fine: float, k_modes: int) -> "BrownianGrid":
        n = int(round((t1 - t0) / dt_fine))
        steps = rng.standard_normal((n, k_modes)) * math.sqrt(dt_fine)
        w = np.vstack([np.zeros((1, k_modes)), np.cumsum(steps, axis=0)])
        return cls(t0=t0, dt_fine=dt_fine, w=w)

    def _index(self, t: np.ndarray) -> np.ndarray:
        raw = (t - self.t0) / self.dt_fine
        idx = np.rint(raw).astype(np.int64)
        if np.any(np.abs(raw - idx) > 1e-6):
            raise ValueError("sub-step endpoint is not on the Brownian grid")
        return idx

    def increments(self, ids: np.ndarray, t0: np.ndarray, t1: np.ndarray) -> np.ndarray:
        return self.w[self._index(t1)] - self.w[self._index(t0)]


# ---------------------------------------------------------------------------
# schedule
# ---------------------------------------------------------------------------


def _base_grid(s: float, t_end: float, dt: float, extra: np.ndarray) -> np.ndarray:
    """Base step grid merged with extra checkpoint times; endpoints exact."""
    count = int(math.floor((t_end - s) / dt + 1e-9))
    pts = s + dt * np.arange(count + 1)
    pts[-1] = min(pts[-1], t_end)
    merged = np.concatenate([pts, [t_end], np.asarray(extra, dtype=float)])
    merged = np.sort(merged)
    scale = max(1.0, abs(s), abs(t_end))
    keep = np.concatenate([[True], np.diff(merged) > _TIME_TOL * scale])
    grid = merged[keep]
    grid[0], grid[-1] = s, t_end
    return grid


# ---------------------------------------------------------------------------
# core engine
# ---------------------------------------------------------------------------


def _pack_jumps(paths: list[SwitchPath]):
    counts = np.array([p.n_jumps for p in paths], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    if counts.sum():
        jt = np.concatenate([p.jump_times for p in paths])
        js = np.concatenate([p.jump_states for p in paths])
    else:
        jt = np.empty(0)
        js = np.empty(0, dtype=np.int64)
    return counts, offsets[:-1], jt, js


def _integrate_batch(
    spec: ModelSpec,
    s: float,
    t_end: float,
    dt: float,
    inits: list[np.ndarray],
    paths: list[SwitchPath],
    sources: list,
    snapshot_times: np.ndarray,
    record_full: bool,
    index_offset: int = 0,
):
    """Step all members over the merged grid, splitting at per-trajectory jumps.

    Returns (snap_values per member, snap_regimes, full records per member or None).
    ``record_full`` is only supported for single-trajectory batches.
    """
    m_traj = len(paths)
    n_members = len(inits)
    k_modes = spec.noise_modes
    lam = spec.lambda_by_regime
    g_arr = spec.g_by_regime
    h_arr = spec.h_by_regime
    eps = spec.epsilon
    f_fam, s_fam = spec.f_family, spec.sigma_family
    nu = spec.nu

    snapshot_times = np.asarray(snapshot_times, dtype=float)
    if snapshot_times.size and np.any(np.diff(snapshot_times) <= 0):
        raise ValueError("snapshot times must be strictly increasing")
    grid = _base_grid(s, t_end, dt, snapshot_times)
    scale = max(1.0, abs(s), abs(t_end))
    snap_idx = np.searchsorted(grid, snapshot_times)
    snap_idx = np.clip(snap_idx, 0, len(grid) - 1)
    near = np.abs(grid[snap_idx] - snapshot_times) <= 1e-9 * scale
    prev_ok = snap_idx > 0
    snap_idx = np.where(near, snap_idx, np.where(prev_ok, snap_idx - 1, snap_idx))
    if np.any(np.abs(grid[snap_idx] - snapshot_times) > 1e-9 * scale):
        raise ValueError("snapshot time does not lie on the integration grid")
    want_snap = {int(i): pos for pos, i in enumerate(snap_idx)}

    counts, offsets, jt_flat, js_flat = _pack_jumps(paths)
    jp = np.zeros(m_traj, dtype=np.int64)

    states = [np.array(x, dtype=float, copy=True) for x in inits]
    regimes = np.array([p.initial_state for p in paths], dtype=np.int64)
    t_cur = np.full(m_traj, grid[0])

    n_snap = len(snapshot_times)
    snap_values = [np.empty((n_snap, m_traj, spec.dim)) for _ in range(n_members)]
    snap_regimes = np.empty((n_snap, m_traj), dtype=np.int64)

    full = None
    if record_full:
        if m_traj != 1:
            raise ValueError("record_full is only supported for single trajectories")
        full = [[(grid[0], states[k][0].copy(), int(paths[0].regime_at(grid[0])))] for k in range(n_members)]

    def next_jump_times() -> np.ndarray:
        has = jp < counts
        idx = offsets + np.minimum(jp, np.maximum(counts - 1, 0))
        nxt = np.full(m_traj, np.inf)
        if jt_flat.size:
            nxt[has] = jt_flat[idx[has]]
        return nxt

    def record_snapshot(pos: int, t_at: float):
        for k in range(n_members):
            snap_values[k][pos] = states[k]
        for m in range(m_traj):
            snap_regimes[pos, m] = paths[m].regime_at(t_at)

    if 0 in want_snap:
        record_snapshot(want_snap[0], grid[0])

    for q in range(len(grid) - 1):
        t1_interval = grid[q + 1]
        while True:
            nxt = next_jump_times()
            due = nxt <= t_cur + _TIME_TOL * scale
            if np.any(due):
                regimes[due] = js_flat[offsets[due] + jp[due]]
                jp[due] += 1
                continue
            active = t_cur < t1_interval - _TIME_TOL * scale
            if not np.any(active):
                break
            ids = np.nonzero(active)[0]
            stop = np.minimum(t1_interval, nxt[ids])
            t0s = t_cur[ids]
            h = stop - t0s

            reg_ids = regimes[ids]
            draws: dict[int, np.ndarray] = {}
            for k in range(n_members):
                u = states[k][ids]
                drift_term = -nu * apply_A(u) - lam[reg_ids][:, None] * u
                noise_term = np.zeros_like(u) if eps != 0.0 else None
                if eps != 0.0:
                    src = sources[k]
                    key = id(src)
                    if key not in draws:
                        draws[key] = src.increments(ids, t0s, stop)
                    dw = draws[key]
                for j in np.unique(reg_ids):
                    rows = reg_ids == j
                    tj = t0s[rows]
                    drift_term[rows] += f_fam.value(tj, int(j), u[rows]) + g_arr[j]
                    if eps != 0.0:
                        diff = h_arr[j] + s_fam.value(tj, int(j), u[rows], k_modes)
                        noise_term[rows] = (diff * dw[rows][:, None, :]).sum(axis=-1)
                new = u + h[:, None] * drift_term
                if eps != 0.0:
                    new += eps * noise_term
                bad = ~np.isfinite(new).all(axis=1) | (np.abs(new).max(axis=1) > BLOWUP_NORM)
                if np.any(bad):
                    first = int(np.nonzero(bad)[0][0])
                    finite_part = new[first][np.isfinite(new[first])]
                    norm = float(np.linalg.norm(finite_part)) if finite_part.size else math.inf
                    raise BlowUpError(float(stop[first]), index_offset + int(ids[first]), norm)
                states[k][ids] = new
            t_cur[ids] = stop
            if record_full:
                t_now = float(t_cur[0])
                reg_now = int(paths[0].regime_at(t_now))
                for k in range(n_members):
                    full[k].append((t_now, states[k][0].copy(), reg_now))
        if (q + 1) in want_snap:
            record_snapshot(want_snap[q + 1], t1_interval)

    return snap_values, snap_regimes, full


# ---------------------------------------------------------------------------
# public runners
# ---------------------------------------------------------------------------


def _full_to_trajectory(records, path: SwitchPath) -> Trajectory:
    times = np.array([r[0] for r in records])
    values = np.stack([r[1] for r in records])
    regimes = np.array([r[2] for r in records], dtype=np.int64)
    return Trajectory(times=times, values=values, regimes=regimes, path=path)


def _as_init(spec: ModelSpec, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1 or xi.shape[0] != spec.dim:
        raise ValueError(f"initial vector must have length {spec.dim}, got shape {xi.shape}")
    return xi


def simulate(
    spec: ModelSpec,
    cfg: SimConfig,
    xi,
    j0: int,
    *,
    tag: str = "simulate",
    index: int = 0,
    path: SwitchPath | None = None,
    extra_times=(),
    brownian: BrownianGrid | None = None,
) -> Trajectory:
    """Integrate one trajectory from (s, xi, j0) to t_end.

    ``path`` injects a pre-sampled regime path (it must start at j0);
    ``brownian`` replaces the trajectory's noise stream with a fixed
    fine-grid Brownian path for step-refinement studies.
    """
    xi = _as_init(spec, xi)
    path_rng, noise_rng, _ = trajectory_streams(cfg.seed, tag, index)
    if path is None:
        path = sample_path(spec.generator, j0, cfg.s, cfg.t_end, path_rng)
    elif path.initial_state != j0:
        raise ValueError("injected path does not start from j0")
    source = brownian if brownian is not None else _BlockNormals([noise_rng], spec.noise_modes)
    _, _, full = _integrate_batch(
        spec, cfg.s, cfg.t_end, cfg.dt,
        inits=[xi[None, :]], paths=[path], sources=[source],
        snapshot_times=np.asarray(extra_times, dtype=float) if len(extra_times) else np.empty(0),
        record_full=True,
    )
    return _full_to_trajectory(full[0], path)


def simulate_pair_synchronous(
    spec: ModelSpec,
    cfg: SimConfig,
    xi1,
    xi2,
    j0: int,
    *,
    synchronous: bool = True,
    tag: str = "pair",
    index: int = 0,
    path: SwitchPath | None = None,
) -> tuple[Trajectory, Trajectory]:
    """Two solutions sharing one switching path; same Wiener increments when synchronous."""
    xi1 = _as_init(spec, xi1)
    xi2 = _as_init(spec, xi2)
    path_rng, noise_rng, noise2_rng = trajectory_streams(cfg.seed, tag, index)
    if path is None:
        path = sample_path(spec.generator, j0, cfg.s, cfg.t_end, path_rng)
    elif path.initial_state != j0:
        raise ValueError("injected path does not start from j0")
    src1 = _BlockNormals([noise_rng], spec.noise_modes)
    src2 = src1 if synchronous else _BlockNormals([noise2_rng], spec.noise_modes)
    _, _, full = _integrate_batch(
        spec, cfg.s, cfg.t_end, cfg.dt,
        inits=[xi1[None, :], xi2[None, :]], paths=[path], sources=[src1, src2],
        snapshot_times=np.empty(0), record_full=True,
    )
    return _full_to_trajectory(full[0], path), _full_to_trajectory(full[1], path)


def _broadcast_inits(spec: ModelSpec, xi, j0, m: int) -> tuple[np.ndarray, np.ndarray]:
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 1:
        xi = np.broadcast_to(xi, (m, xi.shape[0]))
    if xi.shape != (m, spec.dim):
        raise ValueError(f"initial data must broadcast to ({m}, {spec.dim}), got {xi.shape}")
    j0 = np.asarray(j0, dtype=np.int64)
    if j0.ndim == 0:
        j0 = np.broadcast_to(j0, (m,))
    if j0.shape != (m,):
        raise ValueError(f"initial regimes must broadcast to ({m},)")
    if np.any((j0 < 0) | (j0 >= spec.n_regimes)):
        raise ValueError("initial regime outside the state space")
    return np.array(xi, dtype=float), np.array(j0, dtype=np.int64)


def _ensemble_chunk(args) -> tuple[np.ndarray, np.ndarray] | tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Worker payload: integrate trajectories [lo, hi) of an ensemble or pair ensemble."""
    (spec, s, t_end, dt, seed, tag, lo, xi, j0, snapshot_times, xi2, synchronous) = args
    m = xi.shape[0]
    paths = []
    noise1 = []
    noise2 = []
    for i in range(m):
        path_rng, noise_rng, noise2_rng = trajectory_streams(seed, tag, lo + i)
        paths.append(sample_path(spec.generator, int(j0[i]), s, t_end, path_rng))
        noise1.append(noise_rng)
        noise2.append(noise2_rng)
    src1 = _BlockNormals(noise1, spec.noise_modes)
    if xi2 is None:
        inits = [xi]
        sources = [src1]
    else:
        inits = [xi, xi2]
        sources = [src1, src1 if synchronous else _BlockNormals(noise2, spec.noise_modes)]
    snap_values, snap_regimes, _ = _integrate_batch(
        spec, s, t_end, dt, inits=inits, paths=paths, sources=sources,
        snapshot_times=snapshot_times, record_full=False, index_offset=lo,
    )
    if xi2 is None:
        return snap_values[0], snap_regimes
    return snap_values[0], snap_values[1], snap_regimes


def _run_chunks(spec, cfg, xi_all, j0_all, snapshot_times, tag, workers, xi2_all=None, synchronous=True):
    m = cfg.n_traj
    workers = max(1, int(workers))
    bounds = np.linspace(0, m, num=min(workers, m) + 1, dtype=int)
    jobs = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi == lo:
            continue
        jobs.append((
            spec, cfg.s, cfg.t_end, cfg.dt, cfg.seed, tag, int(lo),
            xi_all[lo:hi], j0_all[lo:hi], snapshot_times,
            None if xi2_all is None else xi2_all[lo:hi], synchronous,
        ))
    if len(jobs) == 1 or workers == 1:
        results = [_ensemble_chunk(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_ensemble_chunk, jobs))
    return results


def ensemble_snapshots(
    spec: ModelSpec,
    cfg: SimConfig,
    xi,
    j0,
    snapshot_times,
    *,
    tag: str = "ensemble",
    workers: int = 1,
) -> EnsembleSnapshots:
    """Ensemble of cfg.n_traj trajectories recorded at the given times.

    ``xi`` may be a single vector or an (M, dim) array of per-trajectory
    starts; likewise ``j0`` may be a scalar regime or an (M,) array.
    Results are reduced in trajectory-index order, so the output is
    independent of ``workers``.
    """
    snapshot_times = np.atleast_1d(np.asarray(snapshot_times, dtype=float))
    xi_all, j0_all = _broadcast_inits(spec, xi, j0, cfg.n_traj)
    results = _run_chunks(spec, cfg, xi_all, j0_all, snapshot_times, tag, workers)
    values = np.concatenate([r[0] for r in results], axis=1)
    regimes = np.concatenate([r[1] for r in results], axis=1)
    return EnsembleSnapshots(times=snapshot_times, values=values, regimes=regimes)


def run_ensemble(
    spec: ModelSpec,
    cfg: SimConfig,
    xi,
    j0,
    *,
    tag: str = "ensemble",
    workers: int = 1,
) -> list[LatticeState]:
    """Terminal states of cfg.n_traj trajectories, ordered by trajectory index."""
    snaps = ensemble_snapshots(spec, cfg, xi, j0, [cfg.t_end], tag=tag, workers=workers)
    return [
        LatticeState(snaps.values[-1, i], int(snaps.regimes[-1, i]))
        for i in range(cfg.n_traj)
    ]


def pair_ensemble_snapshots(
    spec: ModelSpec,
    cfg: SimConfig,
    xi1,
    xi2,
    j0,
    snapshot_times,
    *,
    synchronous: bool = True,
    tag: str = "pair",
    workers: int = 1,
) -> tuple[EnsembleSnapshots, EnsembleSnapshots]:
    """Ensemble of solution pairs sharing per-trajectory switching paths."""
    snapshot_times = np.atleast_1d(np.asarray(snapshot_times, dtype=float))
    xi1_all, j0_all = _broadcast_inits(spec, xi1, j0, cfg.n_traj)
    xi2_all, _ = _broadcast_inits(spec, xi2, j0, cfg.n_traj)
    results = _run_chunks(
        spec, cfg, xi1_all, j0_all, snapshot_times, tag, workers,
        xi2_all=xi2_all, synchronous=synchronous,
    )
    values1 = np.concatenate([r[0] for r in results], axis=1)
    values2 = np.concatenate([r[1] for r in results], axis=1)
    regimes = np.concatenate([r[2] for r in results], axis=1)
    first = EnsembleSnapshots(times=snapshot_times, values=values1, regimes=regimes)
    second = EnsembleSnapshots(times=snapshot_times, values=values2, regimes=regimes)
    return first, second
