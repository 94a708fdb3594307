"""Model coefficients, lattice operators, and dissipativity conditions.

The state lives on the truncated lattice sites i = -n..n (vector length
2n+1, Dirichlet zero padding outside).  A regime-switching drift/diffusion
pair is described by per-regime constants (lambda, g, h) plus two
coefficient families:

* a drift family, evaluated per site as f_i(t, j, s), reporting a global
  Lipschitz constant ``lipschitz``, a growth envelope ``alpha(n)`` (per
  site) and ``beta0`` such that |f_i(t,j,s)| <= alpha_i + beta0*|s|;
* a diffusion family, evaluated per site and mode as sigma_{i,k}(t, j, s),
  reporting per-mode Lipschitz constants ``lipschitz(K)``, growth slopes
  ``beta(K)`` and offsets ``delta(n, K)``.

Families are plain frozen dataclasses; anything exposing the same
attributes works.  The built-in ones have closed-form constants so that
``validate`` is exact rather than estimated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .switching import GeneratorMatrix, validate_generator

__all__ = [
    "SpecValidationError",
    "TanhDrift",
    "ZeroDrift",
    "SineDiffusion",
    "ZeroDiffusion",
    "ModelSpec",
    "LatticeState",
    "ConditionReport",
    "apply_A",
    "apply_B",
    "drift",
    "diffusion_column",
    "validate",
    "geometric_profile",
    "geometric_noise_profile",
    "has_geometric_site_profile",
]


class SpecValidationError(ValueError):
    """Raised by ``validate`` with the full list of structural violations."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid model spec:\n  - " + "\n  - ".join(problems))


# ---------------------------------------------------------------------------
# lattice operators
# ---------------------------------------------------------------------------


def apply_A(u: np.ndarray) -> np.ndarray:
    """Discrete Laplacian-type operator (Au)_i = -u_{i-1} + 2u_i - u_{i+1}.

    Dirichlet zero padding outside the truncation.  Acts on the last axis,
    so batched states of shape (..., 2n+1) are fine.
    """
    u = np.asarray(u, dtype=float)
    if u.shape[-1] < 1:
        raise ValueError("apply_A: empty state vector")
    out = 2.0 * u
    out[..., 1:] -= u[..., :-1]
    out[..., :-1] -= u[..., 1:]
    return out


def apply_B(u: np.ndarray) -> np.ndarray:
    """Forward difference (Bu)_i = u_{i+1} - u_i with zero padding on the right."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] < 1:
        raise ValueError("apply_B: empty state vector")
    out = -u.copy()
    out[..., :-1] += u[..., 1:]
    return out


# ---------------------------------------------------------------------------
# coefficient families
# ---------------------------------------------------------------------------


def _site_envelope(rho: float, n: int) -> np.ndarray:
    """rho^{|i|} for i = -n..n."""
    absi = np.abs(np.arange(-n, n + 1))
    return rho ** absi


def _mode_weights(ratio: float, k_modes: int) -> np.ndarray:
    """ratio^{k-1} for k = 1..K."""
    return ratio ** np.arange(k_modes)


@dataclass(frozen=True)
class TanhDrift:
    """Per-site drift f_i(t,j,s) = c_j * rho^{|i|} * cos(2 pi t / period) + b_j * tanh(s).

    With ``period=None`` the cosine factor is the constant 1.  Closed-form
    constants: alpha_i = max_j|c_j| * rho^{|i|}, beta0 = lipschitz = max_j|b_j|.
    """

    c: tuple[float, ...]
    b: tuple[float, ...]
    rho: float
    period: float | None = None
    family_tag: str = field(default="tanh", init=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError("TanhDrift: rho must lie in (0, 1)")
        if len(self.c) != len(self.b):
            raise ValueError("TanhDrift: c and b must have one entry per regime")

    @property
    def n_regimes(self) -> int:
        return len(self.c)

    def _time_factor(self, t):
        if self.period is None:
            return np.ones_like(np.asarray(t, dtype=float)) if np.ndim(t) else 1.0
        return np.cos(2.0 * np.pi * np.asarray(t, dtype=float) / self.period)

    def value(self, t, j: int, u: np.ndarray) -> np.ndarray:
        """Evaluate per site; t may be a scalar or a (batch,) vector matching u."""
        u = np.asarray(u, dtype=float)
        n = (u.shape[-1] - 1) // 2
        base = self.c[j] * _site_envelope(self.rho, n)
        tf = self._time_factor(t)
        forcing = np.multiply.outer(tf, base) if np.ndim(tf) else tf * base
        return forcing + self.b[j] * np.tanh(u)

    def alpha(self, n: int) -> np.ndarray:
        return max(abs(cj) for cj in self.c) * _site_envelope(self.rho, n)

    @property
    def beta0(self) -> float:
        return max(abs(bj) for bj in self.b)

    @property
    def lipschitz(self) -> float:
        return max(abs(bj) for bj in self.b)

    def alpha_norm_sq_infinite(self) -> float:
        """sum over the whole integer lattice of alpha_i^2 (geometric closed form)."""
        cmax = max(abs(cj) for cj in self.c)
        r2 = self.rho ** 2
        return cmax ** 2 * (1.0 + r2) / (1.0 - r2)

    def params(self) -> dict[str, Any]:
        return {"c": list(self.c), "b": list(self.b), "rho": self.rho, "period": self.period}


@dataclass(frozen=True)
class ZeroDrift:
    """f == 0; alpha = 0, beta0 = lipschitz = 0.  Admits exact linear oracles."""

    n_regimes: int = 1
    period: float | None = field(default=None, init=False, repr=False)
    family_tag: str = field(default="zero", init=False, repr=False)

    def value(self, t, j: int, u: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(u, dtype=float))

    def alpha(self, n: int) -> np.ndarray:
        return np.zeros(2 * n + 1)

    beta0: float = field(default=0.0, init=False, repr=False)
    lipschitz: float = field(default=0.0, init=False, repr=False)

    def alpha_norm_sq_infinite(self) -> float:
        return 0.0

    def params(self) -> dict[str, Any]:
        return {"n_regimes": self.n_regimes}


@dataclass(frozen=True)
class SineDiffusion:
    """sigma_{i,k}(t,j,s) = d_j rho^{|i|} eta_k sin(2 pi t / period) + e_j kappa_k sin(s).

    eta_k = eta_ratio^{k-1} and kappa_k = kappa_ratio^{k-1}, both geometric so
    the mode tail beyond any truncation K has a closed form.  Constants:
    lipschitz_k = beta_k = max_j|e_j| * kappa_k, delta_{i,k} = max_j|d_j| * rho^{|i|} * eta_k.
    With ``period=None`` the sine time factor is replaced by the constant 1.
    """

    d: tuple[float, ...]
    e: tuple[float, ...]
    rho: float
    eta_ratio: float
    kappa_ratio: float
    period: float | None = None
    family_tag: str = field(default="sine", init=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError("SineDiffusion: rho must lie in (0, 1)")
        for name, r in (("eta_ratio", self.eta_ratio), ("kappa_ratio", self.kappa_ratio)):
            if not 0.0 < r < 1.0:
                raise ValueError(f"SineDiffusion: {name} must lie in (0, 1)")
        if len(self.d) != len(self.e):
            raise ValueError("SineDiffusion: d and e must have one entry per regime")

    @property
    def n_regimes(self) -> int:
        return len(self.d)

    def _time_factor(self, t):
        if self.period is None:
            return np.ones_like(np.asarray(t, dtype=float)) if np.ndim(t) else 1.0
        return np.sin(2.0 * np.pi * np.asarray(t, dtype=float) / self.period)

    def value(self, t, j: int, u: np.ndarray, k_modes: int) -> np.ndarray:
        """Array of shape u.shape + (K,) with sigma_{i,k}(t, j, u_i); t scalar or (batch,)."""
        u = np.asarray(u, dtype=float)
        n = (u.shape[-1] - 1) // 2
        eta = _mode_weights(self.eta_ratio, k_modes)
        kappa = _mode_weights(self.kappa_ratio, k_modes)
        site_mode = np.multiply.outer(_site_envelope(self.rho, n), eta)
        tf = self._time_factor(t)
        if np.ndim(tf):
            offset = self.d[j] * tf[:, None, None] * site_mode
        else:
            offset = self.d[j] * tf * site_mode
        return offset + self.e[j] * np.multiply.outer(np.sin(u), kappa)

    def lipschitz(self, k_modes: int) -> np.ndarray:
        return max(abs(ej) for ej in self.e) * _mode_weights(self.kappa_ratio, k_modes)

    def beta(self, k_modes: int) -> np.ndarray:
        return self.lipschitz(k_modes)

    def delta(self, n: int, k_modes: int) -> np.ndarray:
        dmax = max(abs(dj) for dj in self.d)
        return dmax * np.multiply.outer(_site_envelope(self.rho, n), _mode_weights(self.eta_ratio, k_modes))

    def mode_tail(self, k_modes: int) -> dict[str, float]:
        """Discarded-mode mass: sums over k > K of L_k^2, beta_k^2 and delta_{i,k}^2 (all i)."""
        emax2 = max(abs(ej) for ej in self.e) ** 2
        dmax2 = max(abs(dj) for dj in self.d) ** 2
        kr2, er2, r2 = self.kappa_ratio ** 2, self.eta_ratio ** 2, self.rho ** 2
        lip_tail = emax2 * kr2 ** k_modes / (1.0 - kr2)
        site_sum = (1.0 + r2) / (1.0 - r2)
        delta_tail = dmax2 * site_sum * er2 ** k_modes / (1.0 - er2)
        return {"lipschitz_sq": lip_tail, "beta_sq": lip_tail, "delta_sq": delta_tail}

    def delta_norm_sq_infinite(self) -> float:
        dmax2 = max(abs(dj) for dj in self.d) ** 2
        r2, er2 = self.rho ** 2, self.eta_ratio ** 2
        return dmax2 * (1.0 + r2) / (1.0 - r2) / (1.0 - er2)

    def params(self) -> dict[str, Any]:
        return {
            "d": list(self.d),
            "e": list(self.e),
            "rho": self.rho,
            "eta_ratio": self.eta_ratio,
            "kappa_ratio": self.kappa_ratio,
            "period": self.period,
        }


@dataclass(frozen=True)
class ZeroDiffusion:
    """sigma == 0; all derived constants vanish."""

    n_regimes: int = 1
    period: float | None = field(default=None, init=False, repr=False)
    family_tag: str = field(default="zero", init=False, repr=False)

    def value(self, t, j: int, u: np.ndarray, k_modes: int) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.zeros(u.shape + (k_modes,))

    def lipschitz(self, k_modes: int) -> np.ndarray:
        return np.zeros(k_modes)

    def beta(self, k_modes: int) -> np.ndarray:
        return np.zeros(k_modes)

    def delta(self, n: int, k_modes: int) -> np.ndarray:
        return np.zeros((2 * n + 1, k_modes))

    def mode_tail(self, k_modes: int) -> dict[str, float]:
        return {"lipschitz_sq": 0.0, "beta_sq": 0.0, "delta_sq": 0.0}

    def delta_norm_sq_infinite(self) -> float:
        return 0.0

    def params(self) -> dict[str, Any]:
        return {"n_regimes": self.n_regimes}


DRIFT_FAMILIES = {"tanh": TanhDrift, "zero": ZeroDrift}
DIFFUSION_FAMILIES = {"sine": SineDiffusion, "zero": ZeroDiffusion}


# ---------------------------------------------------------------------------
# coefficient profiles over the truncation
# ---------------------------------------------------------------------------


def geometric_profile(amplitudes, rho: float, n: int) -> np.ndarray:
    """Per-regime forcing vectors g_i(j) = amp_j * rho^{|i|}, shape (N, 2n+1)."""
    amps = np.asarray(amplitudes, dtype=float)
    return np.multiply.outer(amps, _site_envelope(rho, n))


def geometric_noise_profile(amplitudes, rho: float, eta_ratio: float, n: int, k_modes: int) -> np.ndarray:
    """Per-regime noise offsets h_{i,k}(j) = amp_j * rho^{|i|} * eta_ratio^{k-1}, shape (N, 2n+1, K)."""
    amps = np.asarray(amplitudes, dtype=float)
    site = _site_envelope(rho, n)
    mode = _mode_weights(eta_ratio, k_modes)
    return amps[:, None, None] * site[None, :, None] * mode[None, None, :]


# ---------------------------------------------------------------------------
# model spec and state
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """All coefficients of the switching lattice system on the truncation.

    ``validate`` is the gatekeeper: the constructor only coerces arrays, so
    an ill-formed spec can be built and then rejected with a full report.
    """

    nu: float
    lambda_by_regime: np.ndarray          # (N,)
    g_by_regime: np.ndarray               # (N, 2n+1)
    h_by_regime: np.ndarray               # (N, 2n+1, K)
    f_family: Any
    sigma_family: Any
    epsilon: float
    trunc_radius: int
    noise_modes: int
    generator: GeneratorMatrix
    period: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "lambda_by_regime", np.atleast_1d(np.asarray(self.lambda_by_regime, dtype=float)))
        object.__setattr__(self, "g_by_regime", np.asarray(self.g_by_regime, dtype=float))
        object.__setattr__(self, "h_by_regime", np.asarray(self.h_by_regime, dtype=float))

    @property
    def dim(self) -> int:
        return 2 * self.trunc_radius + 1

    @property
    def n_regimes(self) -> int:
        return len(self.lambda_by_regime)

    @property
    def site_index(self) -> np.ndarray:
        return np.arange(-self.trunc_radius, self.trunc_radius + 1)

    def replace_epsilon(self, epsilon: float) -> "ModelSpec":
        """Copy of this spec with a different noise intensity (used by the eps sweep)."""
        return ModelSpec(
            nu=self.nu,
            lambda_by_regime=self.lambda_by_regime,
            g_by_regime=self.g_by_regime,
            h_by_regime=self.h_by_regime,
            f_family=self.f_family,
            sigma_family=self.sigma_family,
            epsilon=epsilon,
            trunc_radius=self.trunc_radius,
            noise_modes=self.noise_modes,
            generator=self.generator,
            period=self.period,
        )


@dataclass(frozen=True, eq=False)
class LatticeState:
    """Truncated lattice vector plus the regime it was observed in."""

    values: np.ndarray
    regime: int

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1:
            raise ValueError("LatticeState.values must be one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("LatticeState.values must be finite")


@dataclass(frozen=True)
class ConditionReport:
    """Norms and dissipativity constants computed exactly from family constants.

    varpi1 = 2*lambda_min - 2 - 2*beta0^2 - 4*||beta||^2
    varpi2 = 2*(||alpha||^2 + ||g||^2 + ||h||^2 + 2*||delta||^2)
    gamma  = (7/4)*lambda_min - ||L||^2 - (4/lambda_min)*L_f^2
    mu_holds  <=>  lambda_min > 1 + beta0^2 + 2*||beta||^2
    uc1_holds <=>  ||L||^2 + 4*L_f^2/lambda_min < (7/4)*lambda_min
    """

    lambda_min: float
    norm_g: float
    norm_h: float
    norm_alpha: float
    norm_beta: float
    norm_delta: float
    norm_L: float
    beta0: float
    lipschitz_f: float
    varpi1: float
    varpi2: float
    gamma: float
    mu_holds: bool
    uc1_holds: bool
    analytic: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        out = {
            "lambda_min": self.lambda_min,
            "norm_g": self.norm_g,
            "norm_h": self.norm_h,
            "norm_alpha": self.norm_alpha,
            "norm_beta": self.norm_beta,
            "norm_delta": self.norm_delta,
            "norm_L": self.norm_L,
            "beta0": self.beta0,
            "lipschitz_f": self.lipschitz_f,
            "varpi1": self.varpi1,
            "varpi2": self.varpi2,
            "gamma": self.gamma,
            "mu_holds": self.mu_holds,
            "uc1_holds": self.uc1_holds,
            "analytic": dict(self.analytic),
        }
        return out


# ---------------------------------------------------------------------------
# spec-aware operations
# ---------------------------------------------------------------------------


def _check_state(spec: ModelSpec, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != spec.dim:
        raise ValueError(f"state length {u.shape[-1]} does not match truncation 2n+1 = {spec.dim}")
    return u


def drift(spec: ModelSpec, t: float, state: LatticeState) -> np.ndarray:
    """-nu*Au - lambda(j)*u + f(t, j, u) + g(j) for the state's regime j."""
    u = _check_state(spec, state.values)
    j = state.regime
    lam = spec.lambda_by_regime[j]
    return -spec.nu * apply_A(u) - lam * u + spec.f_family.value(t, j, u) + spec.g_by_regime[j]


def diffusion_column(spec: ModelSpec, t: float, state: LatticeState, k: int) -> np.ndarray:
    """epsilon * (h_k(j) + sigma_k(t, j, u)) for mode k (1-based, 1 <= k <= K)."""
    if not 1 <= k <= spec.noise_modes:
        raise ValueError(f"mode index k={k} out of range 1..{spec.noise_modes}")
    u = _check_state(spec, state.values)
    j = state.regime
    sigma = spec.sigma_family.value(t, j, u, spec.noise_modes)[..., k - 1]
    return spec.epsilon * (spec.h_by_regime[j][:, k - 1] + sigma)


def _structural_problems(spec: ModelSpec) -> list[str]:
    problems: list[str] = []
    if not spec.nu > 0:
        problems.append(f"nu must be positive, got {spec.nu}")
    if spec.trunc_radius < 0:
        problems.append(f"trunc_radius must be >= 0, got {spec.trunc_radius}")
    if spec.noise_modes < 1:
        problems.append(f"noise_modes must be >= 1, got {spec.noise_modes}")
    if not 0.0 <= spec.epsilon <= 1.0:
        problems.append(f"epsilon must lie in [0, 1], got {spec.epsilon}")
    if np.any(spec.lambda_by_regime <= 0):
        problems.append("all lambda(j) must be positive")
    n_reg = spec.n_regimes
    d = spec.dim
    if spec.g_by_regime.shape != (n_reg, d):
        problems.append(f"g has shape {spec.g_by_regime.shape}, expected {(n_reg, d)}")
    if spec.h_by_regime.shape != (n_reg, d, spec.noise_modes):
        problems.append(f"h has shape {spec.h_by_regime.shape}, expected {(n_reg, d, spec.noise_modes)}")
    try:
        validate_generator(spec.generator)
    except ValueError as exc:
        problems.append(f"generator: {exc}")
    else:
        if spec.generator.n_states != n_reg:
            problems.append(
                f"generator has {spec.generator.n_states} states but lambda lists {n_reg} regimes"
            )
    for label, fam in (("f_family", spec.f_family), ("sigma_family", spec.sigma_family)):
        fam_period = getattr(fam, "period", None)
        if spec.period is not None and fam_period is not None and not math.isclose(fam_period, spec.period):
            problems.append(
                f"{label} reports period {fam_period} but the spec declares {spec.period}"
            )
        fam_regimes = getattr(fam, "n_regimes", n_reg)
        if fam_regimes != n_reg:
            problems.append(f"{label} parametrizes {fam_regimes} regimes, expected {n_reg}")
    if spec.period is not None and not spec.period > 0:
        problems.append(f"period must be positive when set, got {spec.period}")
    return problems


def validate(spec: ModelSpec) -> ConditionReport:
    """Structural checks plus exact norms and the two dissipativity inequalities.

    Deterministic and pure: the report is a function of the spec alone.
    """
    problems = _structural_problems(spec)
    if problems:
        raise SpecValidationError(problems)

    n, k_modes = spec.trunc_radius, spec.noise_modes
    lambda_min = float(np.min(spec.lambda_by_regime))
    norm_g = float(np.max(np.linalg.norm(spec.g_by_regime, axis=1)))
    norm_h = float(np.max(np.sqrt(np.sum(spec.h_by_regime ** 2, axis=(1, 2)))))
    alpha = spec.f_family.alpha(n)
    norm_alpha = float(np.linalg.norm(alpha))
    beta0 = float(spec.f_family.beta0)
    lf = float(spec.f_family.lipschitz)
    lip = spec.sigma_family.lipschitz(k_modes)
    beta = spec.sigma_family.beta(k_modes)
    delta = spec.sigma_family.delta(n, k_modes)
    norm_L = float(np.linalg.norm(lip))
    norm_beta = float(np.linalg.norm(beta))
    norm_delta = float(np.linalg.norm(delta))

    varpi1 = 2.0 * lambda_min - 2.0 - 2.0 * beta0 ** 2 - 4.0 * norm_beta ** 2
    varpi2 = 2.0 * (norm_alpha ** 2 + norm_g ** 2 + norm_h ** 2 + 2.0 * norm_delta ** 2)
    gamma = 1.75 * lambda_min - norm_L ** 2 - (4.0 / lambda_min) * lf ** 2
    mu_holds = lambda_min > 1.0 + beta0 ** 2 + 2.0 * norm_beta ** 2
    uc1_holds = norm_L ** 2 + 4.0 * lf ** 2 / lambda_min < 1.75 * lambda_min

    analytic: dict[str, float] = {}
    if hasattr(spec.f_family, "alpha_norm_sq_infinite"):
        analytic["alpha_norm_sq_infinite"] = float(spec.f_family.alpha_norm_sq_infinite())
    if hasattr(spec.sigma_family, "delta_norm_sq_infinite"):
        analytic["delta_norm_sq_infinite"] = float(spec.sigma_family.delta_norm_sq_infinite())
    if hasattr(spec.sigma_family, "mode_tail"):
        for key, val in spec.sigma_family.mode_tail(k_modes).items():
            analytic[f"mode_tail_{key}"] = float(val)

    return ConditionReport(
        lambda_min=lambda_min,
        norm_g=norm_g,
        norm_h=norm_h,
        norm_alpha=norm_alpha,
        norm_beta=norm_beta,
        norm_delta=norm_delta,
        norm_L=norm_L,
        beta0=beta0,
        lipschitz_f=lf,
        varpi1=varpi1,
        varpi2=varpi2,
        gamma=gamma,
        mu_holds=mu_holds,
        uc1_holds=uc1_holds,
        analytic=analytic,
    )


def has_geometric_site_profile(spec: ModelSpec) -> bool:
    """True when every site-indexed coefficient decays with distance from the center.

    Used as the hypothesis of the tail experiment: the drift/diffusion
    families must be the zero family or carry a geometric envelope (rho < 1),
    and the explicit g/h profiles must be nonincreasing shell by shell.
    """
    for fam in (spec.f_family, spec.sigma_family):
        if fam.family_tag == "zero":
            continue
        rho = getattr(fam, "rho", None)
        if rho is None or not rho < 1.0:
            return False
    n = spec.trunc_radius
    center = n
    for arr in (np.abs(spec.g_by_regime), np.abs(spec.h_by_regime)):
        shell = np.empty(n + 1)
        for r in range(n + 1):
            left = arr[:, center - r, ...]
            right = arr[:, center + r, ...]
            shell[r] = max(left.max(), right.max())
        if np.any(np.diff(shell) > 1e-12):
            return False
    return True
