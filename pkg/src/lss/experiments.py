"""One statistical experiment per verified estimate.

Each driver simulates, computes statistics with standard errors, and tests
the corresponding inequality at its stated tolerance.  Drivers whose
hypotheses fail (the dissipativity conditions, periodicity, chain
irreducibility) refuse by raising ``HypothesisNotMet`` rather than
reporting a failure: nothing is claimed there.

Convergence-in-distribution checks are one-sided by construction: the
dictionary metric is a certified lower bound of the bounded-Lipschitz
distance, so "at the noise floor" means consistent with convergence.  The
noise floor is calibrated per experiment as the 95th percentile of the
dictionary distance between independent re-estimates of the same measure.
Monotone-trend assertions compare against the best nonincreasing fit
(isotonic residuals) rather than demanding pointwise decrease.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .integrator import SimConfig, ensemble_snapshots, pair_ensemble_snapshots
from .measures import EmpiricalMeasure, TestFunctionDictionary, dl_lower_bound, estimate_measure
from .model import ModelSpec, has_geometric_site_profile, validate
from .reporting import ExperimentReport, PointStat
from .stats import binomial_se, mean_se, ols_line, pava_decreasing
from .switching import (
    GeneratorMatrix,
    coupling_time,
    is_irreducible,
    meeting_time_cdf,
    validate_generator,
)
from .streams import substream

__all__ = [
    "HypothesisNotMet",
    "exp_energy_bound",
    "exp_contraction",
    "exp_tail",
    "exp_pullback",
    "exp_forward",
    "exp_periodic",
    "exp_eps_sweep",
    "exp_chain_coupling",
    "reference_lag",
]


class HypothesisNotMet(RuntimeError):
    """The experiment's hypothesis fails for this spec; nothing is claimed."""


def _require(condition: bool, why: str):
    if not condition:
        raise HypothesisNotMet(why)


def _point_status(value: float, bound_total: float, se: float) -> str:
    """pass if the inequality holds; a violation within 3 SE is inconclusive."""
    if value <= bound_total:
        return "pass"
    if value - 3.0 * se <= bound_total:
        return "inconclusive"
    return "fail"


def _combine(statuses: Sequence[str]) -> str:
    if any(s == "fail" for s in statuses):
        return "fail"
    if any(s == "inconclusive" for s in statuses):
        return "inconclusive"
    return "pass"


def reference_lag(gamma: float, xi_scale_sq: float = 1.0) -> float:
    """Pullback depth making the contraction residual e^{-gamma L}*scale < 1e-6."""
    return float(np.log(1e6 * max(1.0, xi_scale_sq)) / gamma)


# ---------------------------------------------------------------------------
# moment-bound experiments
# ---------------------------------------------------------------------------


def exp_energy_bound(
    spec: ModelSpec,
    cfg: SimConfig,
    xi,
    j0: int,
    sample_times,
    *,
    workers: int = 1,
) -> ExperimentReport:
    """Mean-square energy versus the dissipativity bound.

    At each sample time t the Monte Carlo estimate of E||u(t)||^2 must stay
    below ||xi||^2 e^{-varpi1 (t-s)} + varpi2/varpi1, within 3 standard
    errors plus a 5*dt*bound discretization allowance.
    """
    t0 = time.perf_counter()
    report = validate(spec)
    _require(report.mu_holds, "condition (mu) fails: the energy bound is not claimed")
    sample_times = np.sort(np.asarray(sample_times, dtype=float))
    xi = np.asarray(xi, dtype=float)
    xi_sq = float(xi @ xi)
    snaps = ensemble_snapshots(spec, cfg, xi, j0, sample_times, tag="energy", workers=workers)
    points: list[PointStat] = []
    statuses: list[str] = []
    for idx, t in enumerate(snaps.times):
        norms_sq = (snaps.values[idx] ** 2).sum(axis=1)
        value, se = mean_se(norms_sq)
        bound = xi_sq * np.exp(-report.varpi1 * (t - cfg.s)) + report.varpi2 / report.varpi1
        total = bound + 3.0 * se + 5.0 * cfg.dt * bound
        statuses.append(_point_status(value, total, se))
        points.append(PointStat(point=f"t={t:.6g}", statistic="mean_sq_norm", value=value, se=se, bound=bound))
    out = ExperimentReport(
        name="energy",
        params={
            "m": cfg.n_traj, "dt": cfg.dt, "s": cfg.s, "seed": cfg.seed,
            "varpi1": report.varpi1, "varpi2": report.varpi2, "xi_sq": xi_sq, "j0": j0,
        },
        points=points,
        verdict=_combine(statuses),
        extras={"stationary_bound": report.varpi2 / report.varpi1},
    )
    out.wallclock_s = time.perf_counter() - t0
    return out


def exp_contraction(
    spec: ModelSpec,
    cfg: SimConfig,
    xi1,
    xi2,
    j0: int,
    sample_times,
    *,
    workers: int = 1,
) -> ExperimentReport:
    """Synchronous-pair contraction against ||xi1-xi2||^2 e^{-gamma (t-s)}."""
    t0 = time.perf_counter()
    report = validate(spec)
    _require(report.uc1_holds, "condition (uc1) fails: the contraction bound is not claimed")
    sample_times = np.sort(np.asarray(sample_times, dtype=float))
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    diff_sq0 = float(((xi1 - xi2) ** 2).sum())
    first, second = pair_ensemble_snapshots(
        spec, cfg, xi1, xi2, j0, sample_times, synchronous=True, tag="contraction", workers=workers
    )
    points: list[PointStat] = []
    statuses: list[str] = []
    fit_t: list[float] = []
    fit_log: list[float] = []
    for idx, t in enumerate(first.times):
        diff_sq = ((first.values[idx] - second.values[idx]) ** 2).sum(axis=1)
        value, se = mean_se(diff_sq)
        bound = diff_sq0 * np.exp(-report.gamma * (t - cfg.s))
        rel_se = se / value if value > 0 else 0.0
        total = bound * (1.0 + 3.0 * rel_se)
        statuses.append(_point_status(value, total, se))
        points.append(PointStat(point=f"t={t:.6g}", statistic="mean_sq_diff", value=value, se=se, bound=bound))
        if value > 0 and t > cfg.s:
            fit_t.append(t - cfg.s)
            fit_log.append(np.log(value))
    fitted = None
    if len(fit_t) >= 2:
        slope, _ = ols_line(fit_t, fit_log)
        fitted = -slope
    out = ExperimentReport(
        name="contraction",
        params={
            "m": cfg.n_traj, "dt": cfg.dt, "s": cfg.s, "seed": cfg.seed,
            "gamma": report.gamma, "diff_sq0": diff_sq0, "j0": j0,
        },
        points=points,
        verdict=_combine(statuses),
        extras={"fitted_exponent": fitted, "gamma": report.gamma},
    )
    out.wallclock_s = time.perf_counter() - t0
    return out


def exp_tail(
    spec: ModelSpec,
    cfg: SimConfig,
    xi,
    j0: int,
    cut_levels,
    *,
    sample_times=None,
    eta: float = 0.05,
    ratio_cap: float = 0.9,
    workers: int = 1,
) -> ExperimentReport:
    """Tail mass over sites |i| >= n0: monotone in n0 and geometrically small.

    Requires condition (mu) and a geometric site profile so the truncated
    tail stands in for the infinite-lattice one.  Ratios of consecutive tail
    masses must stay below ``ratio_cap`` within their Monte Carlo CI, and
    the largest cut must fall below ``eta`` uniformly over the sampled times.
    """
    t0 = time.perf_counter()
    report = validate(spec)
    _require(report.mu_holds, "condition (mu) fails: tail estimate not claimed")
    _require(
        has_geometric_site_profile(spec),
        "coefficients lack a geometric site profile: truncated tails are not meaningful",
    )
    cut_levels = sorted(int(c) for c in cut_levels)
    n = spec.trunc_radius
    if cut_levels[-1] > n:
        raise ValueError(f"cut level {cut_levels[-1]} exceeds truncation radius {n}")
    if sample_times is None:
        sample_times = np.linspace(cfg.s + (cfg.t_end - cfg.s) / 5.0, cfg.t_end, 5)
    sample_times = np.sort(np.asarray(sample_times, dtype=float))
    snaps = ensemble_snapshots(spec, cfg, xi, j0, sample_times, tag="tail", workers=workers)
    sites = np.abs(np.arange(-n, n + 1))
    points: list[PointStat] = []
    statuses: list[str] = []
    for idx, t in enumerate(snaps.times):
        sq = snaps.values[idx] ** 2
        tails = []
        for n0 in cut_levels:
            per_sample = sq[:, sites >= n0].sum(axis=1)
            value, se = mean_se(per_sample)
            tails.append((value, se))
            bound = eta if n0 == cut_levels[-1] else None
            points.append(PointStat(point=f"t={t:.6g},n0={n0}", statistic="tail_mass", value=value, se=se, bound=bound))
            if n0 == cut_levels[-1]:
                statuses.append(_point_status(value, eta + 3.0 * se, se))
        for (va, sa), (vb, sb), n0a, n0b in zip(tails[:-1], tails[1:], cut_levels[:-1], cut_levels[1:]):
            if vb - va > 1e-12 * max(1.0, va):
                statuses.append("fail")  # monotonicity in n0 is exact on a fixed cloud
            if va <= 1e-30:
                continue
            ratio = vb / va
            se_ratio = ratio * np.sqrt((sa / va) ** 2 + (sb / vb) ** 2) if vb > 0 else sb / va
            statuses.append(_point_status(ratio, ratio_cap + 3.0 * se_ratio, se_ratio))
            points.append(PointStat(
                point=f"t={t:.6g},n0={n0a}->{n0b}", statistic="tail_ratio",
                value=ratio, se=se_ratio, bound=ratio_cap,
            ))
    out = ExperimentReport(
        name="tail",
        params={
            "m": cfg.n_traj, "dt": cfg.dt, "s": cfg.s, "seed": cfg.seed,
            "cut_levels": cut_levels, "eta": eta, "ratio_cap": ratio_cap, "j0": j0,
        },
        points=points,
        verdict=_combine(statuses),
        extras={},
    )
    out.wallclock_s = time.perf_counter() - t0
    return out


# ---------------------------------------------------------------------------
# distributional experiments
# ---------------------------------------------------------------------------


_BOOT_PAIRS = 24


@dataclass
class FloorCalibration:
    """Null distribution of the dictionary distance between independent
    re-estimates of one measure: the floor is its 95th percentile."""

    floor: float
    spread: float
    pool: np.ndarray

    def family_floor(self, k: int) -> float:
        """95th percentile of the max over k independent null draws.

        Checks of the form "every one of k converged values sits at the
        floor" test a maximum, and each converged value is itself a null
        draw; the per-point q95 would fail 1 - 0.95^k of the time by
        construction.
        """
        if k <= 1:
            return self.floor
        rng = np.random.default_rng(0xFA317)
        draws = rng.choice(self.pool, size=(4096, k), replace=True).max(axis=1)
        return float(np.quantile(draws, 0.95))


def _calibrate_floor(
    make_measure: Callable[[str], EmpiricalMeasure],
    dictionary: TestFunctionDictionary,
    replicates: int,
) -> FloorCalibration:
    """Estimate the noise floor from re-estimates of the same measure.

    A handful of fresh re-simulated pairs would give a hopelessly noisy
    quantile, so the fresh dl values are pooled with bootstrap pairs
    resampled from the fresh clouds (which reproduce the Monte Carlo
    fluctuation of an M-sample estimate at no simulation cost).
    """
    vals: list[float] = []
    clouds: list[EmpiricalMeasure] = []
    for r in range(replicates):
        mu_a = make_measure(f"floor{r}a")
        mu_b = make_measure(f"floor{r}b")
        clouds.extend([mu_a, mu_b])
        vals.append(dl_lower_bound(mu_a, mu_b, dictionary))
    rng = np.random.default_rng(0x5EED_F100)
    for cloud in clouds[:2]:
        m = cloud.size
        for _ in range(_BOOT_PAIRS):
            ia = rng.integers(0, m, size=m)
            ib = rng.integers(0, m, size=m)
            vals.append(dl_lower_bound(
                EmpiricalMeasure(cloud.samples[ia], cloud.regimes[ia]),
                EmpiricalMeasure(cloud.samples[ib], cloud.regimes[ib]),
                dictionary,
            ))
    arr = np.asarray(vals)
    return FloorCalibration(
        floor=float(np.quantile(arr, 0.95)),
        spread=float(arr.std(ddof=1)),
        pool=arr,
    )


def _bootstrap_null_pool(
    clouds: Sequence[EmpiricalMeasure],
    dictionary: TestFunctionDictionary,
    pairs_per_cloud: int = 16,
    seed: int = 0x5EED_B007,
) -> np.ndarray:
    """Null dl sample for a specific comparison: same-cloud bootstrap pairs.

    Resampling one M-cloud twice reproduces the fluctuation of independent
    M-sample estimates of that cloud's law, so the pooled values estimate
    the noise floor at exactly the measures being compared.
    """
    rng = np.random.default_rng(seed)
    vals = []
    for cloud in clouds:
        m = cloud.size
        for _ in range(pairs_per_cloud):
            ia = rng.integers(0, m, size=m)
            ib = rng.integers(0, m, size=m)
            vals.append(dl_lower_bound(
                EmpiricalMeasure(cloud.samples[ia], cloud.regimes[ia]),
                EmpiricalMeasure(cloud.samples[ib], cloud.regimes[ib]),
                dictionary,
            ))
    return np.asarray(vals)


def _trend_statuses(values: Sequence[float], cal: FloorCalibration) -> list[str]:
    """Convergence-to-floor check robust to Monte Carlo jitter.

    (a) the best nonincreasing fit leaves residuals at noise level (no
    systematic rebound; threshold family-corrected for the max over points),
    and (b) the sequence reaches the floor somewhere; a single converged dl
    value is itself a null draw, so the last point alone is not required to
    sit under the floor.
    """
    arr = np.asarray(values, dtype=float)
    statuses = []
    fit = pava_decreasing(arr)
    resid = float(np.abs(arr - fit).max())
    statuses.append("pass" if resid <= cal.family_floor(len(arr)) else "fail")
    statuses.append("pass" if arr.min() <= cal.floor else "fail")
    return statuses


def _pullback_measure(spec, dt, seed, m, t, lag, xi, j0, tag, workers) -> EmpiricalMeasure:
    cfg = SimConfig(dt=dt, s=t - lag, t_end=t, seed=seed, n_traj=m)
    return estimate_measure(spec, cfg, xi, j0, t, tag=tag, workers=workers)


def exp_pullback(
    spec: ModelSpec,
    cfg: SimConfig,
    t_fixed: float,
    pullback_lags,
    starts,
    *,
    dictionary: TestFunctionDictionary | None = None,
    floor_replicates: int = 2,
    workers: int = 1,
) -> ExperimentReport:
    """Cauchy-in-lag and start-independence of pullback measures at a fixed time.

    For lags L_1 < L_2 < ... the dictionary distance between successive
    pullback estimates must decrease (isotonic residuals at noise level) to
    the calibrated floor, and estimates from distinct starts must agree at
    the floor for the deepest lag.
    """
    t0 = time.perf_counter()
    report = validate(spec)
    _require(report.mu_holds, "condition (mu) fails")
    _require(report.uc1_holds, "condition (uc1) fails")
    _require(is_irreducible(spec.generator), "switching generator is not irreducible")
    lags = np.sort(np.asarray(pullback_lags, dtype=float))
    if dictionary is None:
        dictionary = TestFunctionDictionary(spec.dim, spec.n_regimes, seed=cfg.seed)
    measures = []
    for si, (xi, j0) in enumerate(starts):
        row = [
            _pullback_measure(spec, cfg.dt, cfg.seed, cfg.n_traj, t_fixed, lag, xi, j0,
                              tag=f"pullback:s{si}:lag{li}", workers=workers)
            for li, lag in enumerate(lags)
        ]
        measures.append(row)

    xi0, j00 = starts[0]
    cal = _calibrate_floor(
        lambda sfx: _pullback_measure(spec, cfg.dt, cfg.seed, cfg.n_traj, t_fixed, lags[-1],
                                      xi0, j00, tag=f"pullback:{sfx}", workers=workers),
        dictionary, floor_replicates,
    )
    floor, spread = cal.floor, cal.spread

    points: list[PointStat] = []
    statuses: list[str] = []
    for si, row in enumerate(measures):
        succ = [dl_lower_bound(row[k], row[k + 1], dictionary) for k in range(len(row) - 1)]
        statuses.extend(_trend_statuses(succ, cal))
        for k, d in enumerate(succ):
            points.append(PointStat(
                point=f"start={si},lag={lags[k]:.6g}->{lags[k + 1]:.6g}",
                statistic="dl_successive", value=d, se=spread, bound=floor,
            ))
    for si in range(1, len(measures)):
        cross = [dl_lower_bound(measures[0][k], measures[si][k], dictionary) for k in range(len(lags))]
        statuses.extend(_trend_statuses(cross, cal))
        for k, d in enumerate(cross):
            points.append(PointStat(
                point=f"starts=0:{si},lag={lags[k]:.6g}",
                statistic="dl_cross_start", value=d, se=spread, bound=floor,
            ))
    out = ExperimentReport(
        name="pullback",
        params={
            "m": cfg.n_traj, "dt": cfg.dt, "seed": cfg.seed, "t_fixed": t_fixed,
            "lags": [float(x) for x in lags], "n_starts": len(starts),
            "gamma": report.gamma,
        },
        points=points,
        verdict=_combine(statuses),
        extras={"floor": floor, "floor_spread": spread, "dictionary_size": dictionary.size},
    )
    out.wallclock_s = time.perf_counter() - t0
    return out


def exp_forward(
    spec: ModelSpec,
    cfg: SimConfig,
    s_fixed: float,
    horizons,
    starts,
    *,
    reference_lag_override: float | None = None,
    dictionary: TestFunctionDictionary | None = None,
    floor_replicates: int = 2,
    workers: int = 1,
) -> ExperimentReport:
    """Forward stability: the law from any start approaches the evolution
    system of measures (estimated by deep pullback) as the horizon grows."""
    t0 = time.perf_counter()
    report = validate(spec)
    _require(report.mu_holds, "condition (mu) fails")
    _require(report.uc1_holds, "condition (uc1) fails")
    _require(is_irreducible(spec.generator), "switching generator is not irreducible")
    horizons = np.sort(np.asarray(horizons, dtype=float))
    if dictionary is None:
        dictionary = TestFunctionDictionary(spec.dim, spec.n_regimes, seed=cfg.seed)
    # starts may be single vectors or warm-start (M, dim) clouds
    scale = max([1.0] + [float((np.atleast_2d(np.asarray(x)) ** 2).sum(axis=1).max()) for x, _ in starts])
    lag_ref = reference_lag_override if reference_lag_override is not None else reference_lag(report.gamma, scale)
    xi_ref = np.zeros(spec.dim)

    refs = [
        _pullback_measure(spec, cfg.dt, cfg.seed, cfg.n_traj, s_fixed + h, lag_ref, xi_ref, 0,
                          tag=f"forward:ref{hi}", workers=workers)
        for hi, h in enumerate(horizons)
    ]
    cal = _calibrate_floor(
        lambda sfx: _pullback_measure(spec, cfg.dt, cfg.seed, cfg.n_traj, s_fixed + horizons[-1],
                                      lag_ref, xi_ref, 0, tag=f"forward:{sfx}", workers=workers),
        dictionary, floor_replicates,
    )
    floor, spread = cal.floor, cal.spread

    points: list[PointStat] = []
    statuses: list[str] = []
    for si, (xi, j0) in enumerate(starts):
        dls = []
        for hi, h in enumerate(horizons):
            run_cfg = SimConfig(dt=cfg.dt, s=s_fixed, t_end=s_fixed + h, seed=cfg.seed, n_traj=cfg.n_traj)
            mu_fwd = estimate_measure(spec, run_cfg, xi, j0, s_fixed + h,
                                      tag=f"forward:s{si}:h{hi}", workers=workers)
            dls.append(dl_lower_bound(mu_fwd, refs[hi], dictionary))
        statuses.extend(_trend_statuses(dls, cal))
        for hi, d in enumerate(dls):
            points.append(PointStat(
                point=f"start={si},horizon={horizons[hi]:.6g}",
                statistic="dl_forward", value=d, se=spread, bound=floor,
            ))
    out = ExperimentReport(
        name="forward",
        params={
            "m": cfg.n_traj, "dt": cfg.dt, "seed": cfg.seed, "s_fixed": s_fixed,
            "horizons": [float(x) for x in horizons], "n_starts": len(starts),
            "reference_lag": lag_ref, "gamma": report.gamma,
        },
        points=points,
        verdict=_combine(statuses),
        extras={"floor": floor, "floor_spread": spread},
    )
    out.wallclock_s = time.perf_counter() - t0
    return out


def exp_periodic(
    spec: ModelSpec,
    cfg: SimConfig,
    t_grid,
    *,
    dictionary: TestFunctionDictionary | None = None,
    floor_replicates: int = 2,
    workers: int = 1,
) -> ExperimentReport:
    """Period-agreement of the evolution system of measures.

    Estimates mu_t and mu_{t+period} by equal-depth pullback; they must
    agree at the noise floor on every grid point.  The half-period
    comparison is reported alongside as a negative control (no bound).
    """
    t0 = time.perf_counter()
    report = validate(spec)
    _require(spec.period is not None, "spec declares no period: condition (P) not available")
    _require(report.mu_holds, "condition (mu) fails")
    _require(report.uc1_holds, "condition (uc1) fails")
    _require(is_irreducible(spec.generator), "switching generator is not irreducible")
    t_grid = np.asarray(t_grid, dtype=float)
    period = float(spec.period)
    if dictionary is None:
        dictionary = TestFunctionDictionary(spec.dim, spec.n_regimes, seed=cfg.seed)
    lag_ref = reference_lag(report.gamma)
    xi0 = np.zeros(spec.dim)

    cal = _calibrate_floor(
        lambda sfx: _pullback_measure(spec, cfg.dt, cfg.seed, cfg.n_traj, float(t_grid[0]), lag_ref,
                                      xi0, 0, tag=f"periodic:{sfx}", workers=workers),
        dictionary, floor_replicates,
    )
    floor, spread = cal.floor, cal.spread

    points: list[PointStat] = []
    statuses: list[str] = []
    half_values: list[float] = []
    full_values: list[float] = []
    pools: list[np.ndarray] = []
    for ti, t in enumerate(t_grid):
        mu_t = _pullback_measure(spec, cfg.dt, cfg.seed, cfg.n_traj, t, lag_ref, xi0, 0,
                                 tag=f"periodic:t{ti}", workers=workers)
        mu_tp = _pullback_measure(spec, cfg.dt, cfg.seed, cfg.n_traj, t + period, lag_ref, xi0, 0,
                                  tag=f"periodic:tp{ti}", workers=workers)
        mu_th = _pullback_measure(spec, cfg.dt, cfg.seed, cfg.n_traj, t + 0.5 * period, lag_ref, xi0, 0,
                                  tag=f"periodic:th{ti}", workers=workers)
        full_values.append(dl_lower_bound(mu_t, mu_tp, dictionary))
        half_values.append(dl_lower_bound(mu_t, mu_th, dictionary))
        # the null scale varies with the phase of t, so each comparison gets
        # its own bootstrap floor from the clouds actually compared
        pools.append(_bootstrap_null_pool([mu_t, mu_tp], dictionary, seed=0x5EED_B007 + ti))
    point_floors = [float(np.quantile(p, 0.95)) for p in pools]
    rng = np.random.default_rng(0xFA317)
    ratio_draws = np.stack([
        rng.choice(pool, size=4096) / pf for pool, pf in zip(pools, point_floors)
    ])
    family_factor = float(np.quantile(ratio_draws.max(axis=0), 0.95))
    for ti, t in enumerate(t_grid):
        statuses.append("pass" if full_values[ti] <= family_factor * point_floors[ti] else "fail")
        points.append(PointStat(point=f"t={t:.6g}", statistic="dl_period",
                                value=full_values[ti], se=spread, bound=point_floors[ti]))
        points.append(PointStat(point=f"t={t:.6g}", statistic="dl_half_period",
                                value=half_values[ti], se=spread, bound=None))
    out = ExperimentReport(
        name="periodic",
        params={
            "m": cfg.n_traj, "dt": cfg.dt, "seed": cfg.seed, "period": period,
            "t_grid": [float(x) for x in t_grid], "reference_lag": lag_ref,
        },
        points=points,
        verdict=_combine(statuses),
        extras={"floor": floor, "floor_spread": spread, "point_floors": point_floors,
                "family_factor": family_factor,
                "half_period_min_dl": min(half_values), "half_period_max_dl": max(half_values)},
    )
    out.wallclock_s = time.perf_counter() - t0
    return out


def exp_eps_sweep(
    spec: ModelSpec,
    cfg: SimConfig,
    eps_list,
    eps0: float,
    t_fixed: float,
    *,
    dictionary: TestFunctionDictionary | None = None,
    floor_replicates: int = 2,
    tail_cut: int | None = None,
    workers: int = 1,
) -> ExperimentReport:
    """Noise-intensity limit: measures at eps_n approach the eps0 measure.

    All specs share every coefficient except epsilon.  The dictionary
    distance to the eps0 measure must be isotonically decreasing along the
    sweep with terminal value at the floor; tail masses are reported for
    every eps as the uniform-tightness check.
    """
    t0 = time.perf_counter()
    report = validate(spec)
    _require(report.mu_holds, "condition (mu) fails")
    _require(report.uc1_holds, "condition (uc1) fails")
    _require(is_irreducible(spec.generator), "switching generator is not irreducible")
    eps_arr = np.asarray(eps_list, dtype=float)
    gaps = np.abs(eps_arr - eps0)
    if np.any(np.diff(gaps) > 0):
        raise ValueError("eps_list must approach eps0 monotonically")
    if dictionary is None:
        dictionary = TestFunctionDictionary(spec.dim, spec.n_regimes, seed=cfg.seed)
    lag_ref = reference_lag(report.gamma)
    xi0 = np.zeros(spec.dim)
    n = spec.trunc_radius
    cut = tail_cut if tail_cut is not None else max(1, (n + 1) // 2)
    sites = np.abs(np.arange(-n, n + 1))

    spec0 = spec.replace_epsilon(eps0)
    mu0 = _pullback_measure(spec0, cfg.dt, cfg.seed, cfg.n_traj, t_fixed, lag_ref, xi0, 0,
                            tag="eps:ref", workers=workers)
    cal = _calibrate_floor(
        lambda sfx: _pullback_measure(spec0, cfg.dt, cfg.seed, cfg.n_traj, t_fixed, lag_ref,
                                      xi0, 0, tag=f"eps:{sfx}", workers=workers),
        dictionary, floor_replicates,
    )
    floor, spread = cal.floor, cal.spread

    points: list[PointStat] = []
    statuses: list[str] = []
    dls: list[float] = []
    for ei, eps in enumerate(eps_arr):
        spec_e = spec.replace_epsilon(float(eps))
        mu_e = _pullback_measure(spec_e, cfg.dt, cfg.seed, cfg.n_traj, t_fixed, lag_ref, xi0, 0,
                                 tag=f"eps:e{ei}", workers=workers)
        d = dl_lower_bound(mu_e, mu0, dictionary)
        dls.append(d)
        points.append(PointStat(point=f"eps={eps:.6g}", statistic="dl_to_eps0", value=d, se=spread, bound=floor))
        tail = float((mu_e.samples[:, sites >= cut] ** 2).sum(axis=1).mean())
        points.append(PointStat(point=f"eps={eps:.6g}", statistic="tail_mass", value=tail, se=0.0, bound=None))
    statuses.extend(_trend_statuses(dls, cal))
    out = ExperimentReport(
        name="eps_sweep",
        params={
            "m": cfg.n_traj, "dt": cfg.dt, "seed": cfg.seed, "t_fixed": t_fixed,
            "eps_list": [float(x) for x in eps_arr], "eps0": eps0,
            "reference_lag": lag_ref, "tail_cut": cut,
        },
        points=points,
        verdict=_combine(statuses),
        extras={"floor": floor, "floor_spread": spread},
    )
    out.wallclock_s = time.perf_counter() - t0
    return out


# ---------------------------------------------------------------------------
# chain coupling
# ---------------------------------------------------------------------------


def exp_chain_coupling(
    gen: GeneratorMatrix,
    pairs,
    t_grid,
    m: int,
    *,
    seed: int = 42,
    eta: float = 0.05,
) -> ExperimentReport:
    """Empirical coupling-time CDF versus the product-chain matrix exponential.

    For each start pair the empirical P{tau <= T} must match the exact
    first-passage probability of the 2-chain product process within 3
    binomial standard errors at every grid time.  Also reports the time at
    which the oracle CDF reaches 1 - eta.
    """
    t0 = time.perf_counter()
    validate_generator(gen)
    _require(is_irreducible(gen), "generator is not irreducible: coupling may never occur")
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    points: list[PointStat] = []
    statuses: list[str] = []
    extras: dict[str, object] = {}
    for j1, j2 in pairs:
        rng = substream(seed, f"coupling:{j1}:{j2}", 0, 1)
        draws = np.empty(m)
        censored = 0
        for i in range(m):
            ct = coupling_time(gen, j1, j2, rng)
            draws[i] = ct.value if not ct.censored else np.inf
            censored += int(ct.censored)
        for t in t_grid:
            emp = float((draws <= t).mean())
            oracle = float(meeting_time_cdf(gen, j1, j2, t))
            se = binomial_se(oracle, m)
            gap = abs(emp - oracle)
            statuses.append(_point_status(gap, 3.0 * se, se))
            points.append(PointStat(
                point=f"pair=({j1},{j2}),T={t:.6g}", statistic="coupling_cdf",
                value=emp, se=se, bound=oracle,
            ))
        extras[f"t_quantile_pair_{j1}_{j2}"] = _oracle_quantile(gen, j1, j2, 1.0 - eta)
        extras[f"censored_pair_{j1}_{j2}"] = censored
    out = ExperimentReport(
        name="coupling",
        params={"m": m, "seed": seed, "eta": eta, "t_grid": [float(x) for x in t_grid],
                "pairs": [list(p) for p in pairs]},
        points=points,
        verdict=_combine(statuses),
        extras=extras,
    )
    out.wallclock_s = time.perf_counter() - t0
    return out


def _oracle_quantile(gen: GeneratorMatrix, j1: int, j2: int, p: float) -> float:
    """Smallest T with P{tau <= T} >= p, by bisection on the exact CDF."""
    if j1 == j2:
        return 0.0
    hi = 1.0
    while meeting_time_cdf(gen, j1, j2, hi) < p:
        hi *= 2.0
        if hi > 1e9:
            return float("inf")
    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if meeting_time_cdf(gen, j1, j2, mid) >= p:
            hi = mid
        else:
            lo = mid
    return hi
