from pathlib import Path

import numpy as np
import pytest

from lss.config import load_config
from lss.integrator import (
    BlowUpError,
    BrownianGrid,
    SimConfig,
    default_dt,
    ensemble_snapshots,
    pair_ensemble_snapshots,
    run_ensemble,
    simulate,
    simulate_pair_synchronous,
)
from lss.model import ModelSpec, ZeroDiffusion, ZeroDrift, validate
from lss.switching import GeneratorMatrix, SwitchPath, sample_path
from lss.streams import substream

from oracles import linear_flow_piecewise_exact, ou_stationary_variance

ROOT = Path(__file__).resolve().parents[1]
TANH_SINE = load_config(ROOT / "configs" / "tanh_sine.json")
LINEAR = load_config(ROOT / "configs" / "linear_switching.json")
OU = load_config(ROOT / "configs" / "ou_scalar.json")


def _scalar_linear_spec(nu=1.0, lam=1.0, eps=0.0, h=0.0, g=0.0):
    return ModelSpec(
        nu=nu, lambda_by_regime=[lam], g_by_regime=[[g]], h_by_regime=[[[h]]],
        f_family=ZeroDrift(), sigma_family=ZeroDiffusion(), epsilon=eps,
        trunc_radius=0, noise_modes=1, generator=GeneratorMatrix([[0.0]]),
    )


# ---------------------------------------------------------------------------
# config and schedule
# ---------------------------------------------------------------------------


def test_sim_config_invariants():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0, s=0.0, t_end=1.0, seed=0)
    with pytest.raises(ValueError):
        SimConfig(dt=0.1, s=1.0, t_end=1.0, seed=0)
    with pytest.raises(ValueError):
        SimConfig(dt=2.0, s=0.0, t_end=1.0, seed=0)
    with pytest.raises(ValueError):
        SimConfig(dt=0.1, s=0.0, t_end=1.0, seed=0, n_traj=0)


def test_default_dt_formula():
    assert default_dt(TANH_SINE) == pytest.approx(1e-3 / 9.0)
    assert default_dt(OU) == pytest.approx(1e-3 / 5.0)


def test_substep_times_cover_window_exactly():
    cfg = SimConfig(dt=0.03, s=-1.0, t_end=1.0, seed=5)
    traj = simulate(TANH_SINE, cfg, np.zeros(TANH_SINE.dim), 0)
    assert traj.times[0] == -1.0 and traj.times[-1] == 1.0
    assert np.all(np.diff(traj.times) > 0)
    assert abs(np.sum(np.diff(traj.times)) - 2.0) <= 1e-12


def test_no_substep_spans_a_jump():
    cfg = SimConfig(dt=0.05, s=0.0, t_end=5.0, seed=6)
    traj = simulate(TANH_SINE, cfg, np.zeros(TANH_SINE.dim), 0)
    assert traj.path.n_jumps > 0
    for jt in traj.path.jump_times:
        assert np.min(np.abs(traj.times - jt)) <= 1e-12 * 5


def test_trajectory_regimes_match_path():
    cfg = SimConfig(dt=0.05, s=0.0, t_end=5.0, seed=7)
    traj = simulate(TANH_SINE, cfg, np.zeros(TANH_SINE.dim), 1)
    expected = np.array([traj.path.regime_at(t) for t in traj.times])
    assert np.array_equal(traj.regimes, expected)


# ---------------------------------------------------------------------------
# exact linear oracles
# ---------------------------------------------------------------------------


def test_scalar_linear_decay_matches_exponential():
    # n=0, f=sigma=g=h=0, nu=1, lambda=1: u(t) = e^{-3t} xi
    dt = 0.001
    spec = _scalar_linear_spec()
    cfg = SimConfig(dt=dt, s=0.0, t_end=1.0, seed=1)
    traj = simulate(spec, cfg, [1.0], 0)
    exact = np.exp(-3.0)
    rel_err = abs(traj.values[-1, 0] - exact) / exact
    assert rel_err <= 5.0 * dt


def test_switching_linear_matches_variation_of_constants():
    spec = LINEAR.replace_epsilon(0.0)
    dt = 0.002
    cfg = SimConfig(dt=dt, s=0.0, t_end=2.0, seed=8)
    xi = np.linspace(-1.0, 1.0, spec.dim)
    traj = simulate(spec, cfg, xi, 0)
    exact = linear_flow_piecewise_exact(
        spec.nu, spec.lambda_by_regime, spec.g_by_regime, traj.path, xi, 2.0
    )
    assert np.linalg.norm(traj.values[-1] - exact) <= 10.0 * dt


def test_switching_linear_norm_bound():
    # ||u(t)|| <= ||xi|| e^{-lambda_min t} + C with C from the forcing
    spec = LINEAR.replace_epsilon(0.0)
    cfg = SimConfig(dt=0.005, s=0.0, t_end=3.0, seed=9)
    xi = 2.0 * np.ones(spec.dim)
    traj = simulate(spec, cfg, xi, 1)
    lam_min = float(np.min(spec.lambda_by_regime))
    g_max = float(np.max(np.linalg.norm(spec.g_by_regime, axis=1)))
    norms = np.linalg.norm(traj.values, axis=1)
    bound = np.linalg.norm(xi) * np.exp(-lam_min * (traj.times - cfg.s)) + g_max / lam_min
    assert np.all(norms <= bound * (1.0 + 20.0 * cfg.dt))


def test_zero_is_a_fixed_point():
    spec = ModelSpec(
        nu=1.0, lambda_by_regime=[2.0, 3.0],
        g_by_regime=np.zeros((2, 5)), h_by_regime=np.zeros((2, 5, 2)),
        f_family=ZeroDrift(n_regimes=2), sigma_family=ZeroDiffusion(n_regimes=2),
        epsilon=1.0, trunc_radius=2, noise_modes=2,
        generator=GeneratorMatrix([[-1.0, 1.0], [2.0, -2.0]]),
    )
    cfg = SimConfig(dt=0.01, s=0.0, t_end=2.0, seed=10)
    traj = simulate(spec, cfg, np.zeros(5), 0)
    assert np.all(traj.values == 0.0)


def test_ou_terminal_variance():
    # stationary variance eps^2 h^2 / (2 (2 nu + lambda)) = 1/6
    m = 4000
    cfg = SimConfig(dt=0.002, s=0.0, t_end=4.0, seed=11, n_traj=m)
    terminal = run_ensemble(OU, cfg, [0.0], 0)
    vals = np.array([st.values[0] for st in terminal])
    target = ou_stationary_variance(1.0, 1.0, 1.0, 1.0)
    se = target * np.sqrt(2.0 / (m - 1))
    assert abs(vals.var(ddof=1) - target) <= 3 * se + 5 * cfg.dt * target


# ---------------------------------------------------------------------------
# determinism and stream layout
# ---------------------------------------------------------------------------


def test_ensemble_member_equals_standalone_simulate():
    cfg = SimConfig(dt=0.01, s=0.0, t_end=1.0, seed=12, n_traj=5)
    states = run_ensemble(TANH_SINE, cfg, np.zeros(TANH_SINE.dim), 0, tag="eq")
    for idx in (0, 3):
        solo = simulate(
            TANH_SINE, SimConfig(dt=0.01, s=0.0, t_end=1.0, seed=12), np.zeros(TANH_SINE.dim), 0,
            tag="eq", index=idx,
        )
        assert np.array_equal(states[idx].values, solo.values[-1])
        assert states[idx].regime == int(solo.regimes[-1])


def test_run_ensemble_m1_reduces_to_simulate():
    cfg = SimConfig(dt=0.01, s=0.0, t_end=1.0, seed=13, n_traj=1)
    st = run_ensemble(TANH_SINE, cfg, np.ones(TANH_SINE.dim), 1, tag="m1")[0]
    solo = simulate(TANH_SINE, cfg, np.ones(TANH_SINE.dim), 1, tag="m1", index=0)
    assert np.array_equal(st.values, solo.values[-1])


def test_workers_bit_identical():
    xi = np.zeros(TANH_SINE.dim)
    runs = []
    for workers in (1, 2, 5):
        cfg = SimConfig(dt=0.01, s=0.0, t_end=1.0, seed=14, n_traj=64)
        snaps = ensemble_snapshots(TANH_SINE, cfg, xi, 0, [0.5, 1.0], workers=workers)
        runs.append(snaps)
    for other in runs[1:]:
        assert np.array_equal(runs[0].values, other.values)
        assert np.array_equal(runs[0].regimes, other.regimes)


def test_rerun_bit_identical():
    cfg = SimConfig(dt=0.01, s=0.0, t_end=1.0, seed=15, n_traj=8)
    a = ensemble_snapshots(TANH_SINE, cfg, np.zeros(TANH_SINE.dim), 0, [1.0])
    b = ensemble_snapshots(TANH_SINE, cfg, np.zeros(TANH_SINE.dim), 0, [1.0])
    assert np.array_equal(a.values, b.values)


def test_eps_zero_depends_only_on_switch_path():
    spec = TANH_SINE.replace_epsilon(0.0)
    cfg = SimConfig(dt=0.01, s=0.0, t_end=2.0, seed=16)
    path = sample_path(spec.generator, 0, 0.0, 2.0, substream(123, "shared-path", 0, 0))
    a = simulate(spec, cfg, np.ones(spec.dim), 0, tag="noiseA", path=path)
    b = simulate(spec, cfg, np.ones(spec.dim), 0, tag="noiseB", path=path)
    assert np.array_equal(a.values, b.values)


# ---------------------------------------------------------------------------
# synchronous pairs
# ---------------------------------------------------------------------------


def test_pair_identical_starts_identical_paths():
    cfg = SimConfig(dt=0.01, s=0.0, t_end=1.0, seed=17)
    xi = np.linspace(-1, 1, TANH_SINE.dim)
    a, b = simulate_pair_synchronous(TANH_SINE, cfg, xi, xi.copy(), 0)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.path.jump_times, b.path.jump_times)


def test_pair_linear_difference_exact_rate():
    # f = sigma = 0: the difference is deterministic with rate 2 nu + lambda = 3
    dt = 0.002
    spec = _scalar_linear_spec(eps=1.0, h=1.0)
    cfg = SimConfig(dt=dt, s=0.0, t_end=1.0, seed=18)
    a, b = simulate_pair_synchronous(spec, cfg, [1.0], [-1.0], 0)
    diff = np.abs(a.values[:, 0] - b.values[:, 0])
    rate = -np.log(diff[-1] / diff[0]) / 1.0
    assert rate == pytest.approx(3.0, rel=10 * dt)


def test_pair_independent_flag_changes_second_member():
    cfg = SimConfig(dt=0.01, s=0.0, t_end=1.0, seed=19)
    xi = np.ones(TANH_SINE.dim)
    a_sync, b_sync = simulate_pair_synchronous(TANH_SINE, cfg, xi, xi.copy(), 0)
    a_ind, b_ind = simulate_pair_synchronous(TANH_SINE, cfg, xi, xi.copy(), 0, synchronous=False)
    assert np.array_equal(a_sync.values, a_ind.values)  # first member untouched
    assert not np.array_equal(b_sync.values, b_ind.values)


def test_pair_ensemble_contraction_bound():
    rep = validate(TANH_SINE)
    m = 500
    cfg = SimConfig(dt=0.005, s=0.0, t_end=1.0, seed=20, n_traj=m)
    xi1 = np.ones(TANH_SINE.dim)
    xi2 = -np.ones(TANH_SINE.dim)
    first, second = pair_ensemble_snapshots(TANH_SINE, cfg, xi1, xi2, 0, [0.25, 0.5, 1.0])
    diff0 = float(((xi1 - xi2) ** 2).sum())
    for idx, t in enumerate(first.times):
        diff_sq = ((first.values[idx] - second.values[idx]) ** 2).sum(axis=1)
        bound = diff0 * np.exp(-rep.gamma * t)
        rel_se = diff_sq.std(ddof=1) / np.sqrt(m) / diff_sq.mean()
        assert diff_sq.mean() <= bound * (1 + 3 * rel_se)


# ---------------------------------------------------------------------------
# mean-square stability and step refinement
# ---------------------------------------------------------------------------


def test_mean_square_stability_bound():
    rep = validate(TANH_SINE)
    assert rep.mu_holds
    m = 2000
    cfg = SimConfig(dt=0.005, s=0.0, t_end=3.0, seed=21, n_traj=m)
    xi = np.ones(TANH_SINE.dim)
    times = np.linspace(0.3, 3.0, 10)
    snaps = ensemble_snapshots(TANH_SINE, cfg, xi, 0, times)
    for idx, t in enumerate(snaps.times):
        norms_sq = (snaps.values[idx] ** 2).sum(axis=1)
        se = norms_sq.std(ddof=1) / np.sqrt(m)
        bound = float(xi @ xi) * np.exp(-rep.varpi1 * t) + rep.varpi2 / rep.varpi1
        assert norms_sq.mean() <= bound + 3 * se + 5 * cfg.dt * bound


def test_strong_error_halves_with_dt():
    # multiplicative diffusion: strong order 1/2 to 1; the error ratio between
    # dt and dt/2 against a dt/16 reference must land in [1.3, 2.3]
    from lss.model import SineDiffusion

    spec = ModelSpec(
        nu=0.5, lambda_by_regime=[1.0], g_by_regime=[[0.3, 0.2, 0.1]],
        h_by_regime=[[[0.4], [0.3], [0.2]]],
        f_family=ZeroDrift(),
        sigma_family=SineDiffusion(d=(0.0,), e=(0.6,), rho=0.5, eta_ratio=0.5, kappa_ratio=0.5),
        epsilon=1.0, trunc_radius=1, noise_modes=1, generator=GeneratorMatrix([[0.0]]),
    )
    dt = 0.05
    dt_fine = dt / 16.0
    n_paths = 160
    xi = np.array([1.0, -0.5, 0.25])
    errs = {dt: [], dt / 2.0: []}
    for p in range(n_paths):
        grid = BrownianGrid.sample(substream(1000, "order", p, 1), 0.0, 1.0, dt_fine, 1)
        ref = simulate(spec, SimConfig(dt=dt_fine, s=0.0, t_end=1.0, seed=0), xi, 0, brownian=grid)
        for step in (dt, dt / 2.0):
            run = simulate(spec, SimConfig(dt=step, s=0.0, t_end=1.0, seed=0), xi, 0, brownian=grid)
            errs[step].append(np.linalg.norm(run.values[-1] - ref.values[-1]))
    ratio = np.mean(errs[dt]) / np.mean(errs[dt / 2.0])
    assert 1.3 <= ratio <= 2.3


def test_blow_up_error_names_trajectory_and_time():
    spec = _scalar_linear_spec(nu=1.0, lam=4.0)
    cfg = SimConfig(dt=1.0, s=0.0, t_end=40.0, seed=22)
    with pytest.raises(BlowUpError) as err:
        simulate(spec, cfg, [1.0], 0)
    assert err.value.trajectory_index == 0
    assert 0.0 < err.value.time <= 40.0


def test_injected_path_must_start_at_j0():
    path = SwitchPath(start_time=0.0, end_time=1.0, initial_state=1,
                      jump_times=np.empty(0), jump_states=np.empty(0, dtype=np.int64))
    cfg = SimConfig(dt=0.01, s=0.0, t_end=1.0, seed=23)
    with pytest.raises(ValueError, match="j0"):
        simulate(TANH_SINE, cfg, np.zeros(TANH_SINE.dim), 0, path=path)
