"""Empirical measures on (lattice state x regime) and a certified lower
bound for the bounded-Lipschitz metric.

The metric on the product space is d((x,i),(y,j)) = ||x-y|| + 1_{i != j}.
A test function phi is admissible when ||phi||_inf + Lip(phi) <= 1 under
that metric; the supremum of |mean_mu1 phi - mean_mu2 phi| over admissible
phi is the bounded-Lipschitz distance.  We evaluate the supremum over a
finite dictionary of functions whose admissibility is certified in closed
form at construction, which yields a guaranteed lower bound: convergence
of the true metric to zero is evidenced by the dictionary value falling to
the Monte Carlo noise floor.

Dictionary members:

* random features a*cos(<w,x> + b_j) with |a|*(3 + ||w||) <= 1 (the regime
  offset b_j costs at most a Lipschitz factor 2 across a regime flip);
* clipped per-site coordinates clip(x_i,-1,1)/2 and squares clip(x_i^2,0,1)/3;
* clipped norm min(||x||,1)/2 and norm-square min(||x||^2,1)/3;
* regime indicators 1_{j=j0}/2.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .integrator import SimConfig, ensemble_snapshots
from .model import ModelSpec

__all__ = [
    "EmpiricalMeasure",
    "TestFunctionDictionary",
    "estimate_measure",
    "dl_lower_bound",
    "tail_mass",
    "moments",
    "MomentSummary",
    "smooth_cutoff",
    "measure_to_csv",
    "measure_summary",
]


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Uniformly weighted sample cloud on (states, regimes)."""

    samples: np.ndarray   # (M, dim)
    regimes: np.ndarray   # (M,)

    def __post_init__(self):
        object.__setattr__(self, "samples", np.atleast_2d(np.asarray(self.samples, dtype=float)))
        object.__setattr__(self, "regimes", np.atleast_1d(np.asarray(self.regimes, dtype=np.int64)))
        if self.samples.shape[0] != self.regimes.shape[0]:
            raise ValueError("samples and regimes must have equal length")
        if self.samples.shape[0] < 1:
            raise ValueError("empirical measure needs at least one sample")

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def estimate_measure(
    spec: ModelSpec,
    cfg: SimConfig,
    xi,
    j0,
    t: float,
    *,
    tag: str = "measure",
    workers: int = 1,
) -> EmpiricalMeasure:
    """Terminal ensemble at time t as an M-sample cloud (requires cfg.t_end == t)."""
    if abs(cfg.t_end - t) > 1e-12 * max(1.0, abs(t)):
        raise ValueError(f"cfg.t_end={cfg.t_end} must equal the requested time t={t}")
    snaps = ensemble_snapshots(spec, cfg, xi, j0, [t], tag=tag, workers=workers)
    return EmpiricalMeasure(samples=snaps.values[-1], regimes=snaps.regimes[-1])


# ---------------------------------------------------------------------------
# test-function dictionary
# ---------------------------------------------------------------------------

_CERT_TOL = 1e-12


@dataclass(eq=False)
class TestFunctionDictionary:
    """Finite family of certified bounded-Lipschitz test functions.

    Random features are generated per index from (seed, m), so a dictionary
    with more features extends a smaller one with the same seed: enlarging
    the dictionary can only increase the metric lower bound.
    """

    __test__ = False  # "Test" prefix is the domain name, not a pytest class

    dim: int
    n_regimes: int
    n_random: int = 256
    seed: int = 2024
    norms: tuple[float, ...] = (0.25, 0.5, 1.0)
    w: np.ndarray = field(init=False, repr=False)
    a: np.ndarray = field(init=False, repr=False)
    b: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        w = np.empty((self.n_random, self.dim))
        b = np.empty((self.n_random, self.n_regimes))
        a = np.empty(self.n_random)
        for m in range(self.n_random):
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=(m,))))
            direction = rng.standard_normal(self.dim)
            direction /= max(np.linalg.norm(direction), 1e-300)
            norm = self.norms[m % len(self.norms)]
            w[m] = norm * direction
            b[m] = rng.uniform(0.0, 2.0 * np.pi, size=self.n_regimes)
            a[m] = 1.0 / (3.0 + norm)
        self.w, self.a, self.b = w, a, b
        self._check_certificates()

    def _check_certificates(self):
        budget = np.abs(self.a) * (3.0 + np.linalg.norm(self.w, axis=1))
        if np.any(budget > 1.0 + _CERT_TOL):
            worst = float(budget.max())
            raise ValueError(f"random feature violates the Lipschitz budget: {worst} > 1")

    def feature_means(self, mu: EmpiricalMeasure) -> np.ndarray:
        """Empirical mean of every dictionary function under mu."""
        x, reg = mu.samples, mu.regimes
        parts: list[np.ndarray] = []
        if self.n_random:
            phase = x @ self.w.T + self.b[:, reg].T       # (M, F)
            parts.append((self.a * np.cos(phase)).mean(axis=0))
        # clipped coordinates and squares: ||phi||_inf + Lip <= 1/2 + 1/2, 1/3 + 2/3
        parts.append(np.clip(x, -1.0, 1.0).mean(axis=0) / 2.0)
        parts.append(np.clip(x ** 2, 0.0, 1.0).mean(axis=0) / 3.0)
        nrm = np.linalg.norm(x, axis=1)
        parts.append(np.array([
            np.minimum(nrm, 1.0).mean() / 2.0,
            np.minimum(nrm ** 2, 1.0).mean() / 3.0,
        ]))
        parts.append(np.array([(reg == j).mean() / 2.0 for j in range(self.n_regimes)]))
        return np.concatenate(parts)

    @property
    def size(self) -> int:
        return self.n_random + 2 * self.dim + 2 + self.n_regimes


def dl_lower_bound(mu1: EmpiricalMeasure, mu2: EmpiricalMeasure, dictionary: TestFunctionDictionary) -> float:
    """sup over the dictionary of |mean phi d(mu1) - mean phi d(mu2)|.

    Never exceeds the true bounded-Lipschitz distance (certified test class),
    in particular never exceeds 2.  Symmetric; zero on identical clouds;
    satisfies the triangle inequality up to floating-point roundoff.
    """
    if mu1.dim != mu2.dim:
        raise ValueError(f"dimension mismatch: {mu1.dim} vs {mu2.dim}")
    diff = dictionary.feature_means(mu1) - dictionary.feature_means(mu2)
    return float(np.abs(diff).max())


# ---------------------------------------------------------------------------
# tails and moments
# ---------------------------------------------------------------------------


def smooth_cutoff(s) -> np.ndarray:
    """C^1 ramp: 0 for |s| <= 1, 1 for |s| >= 2, cubic smoothstep between."""
    z = np.clip(np.abs(np.asarray(s, dtype=float)) - 1.0, 0.0, 1.0)
    return z * z * (3.0 - 2.0 * z)


def tail_mass(mu: EmpiricalMeasure, n0: int, *, smooth: bool = False) -> float:
    """Mean over samples of the mass on sites |i| >= n0.

    Plain variant: sum_{|i| >= n0} u_i^2 averaged over the cloud (n0 = 0
    gives the full mean-square norm).  Smooth variant: || theta(i/n0) u ||^2
    with the C^1 cutoff theta (requires n0 >= 1).  Both are nonincreasing
    in n0.
    """
    n = (mu.dim - 1) // 2
    if n0 < 0 or n0 > n:
        raise ValueError(f"cut level n0={n0} outside 0..{n}")
    sites = np.arange(-n, n + 1)
    if smooth:
        if n0 < 1:
            raise ValueError("smooth tail mass needs n0 >= 1")
        weights = smooth_cutoff(sites / n0) ** 2
    else:
        weights = (np.abs(sites) >= n0).astype(float)
    return float((mu.samples ** 2 * weights).sum(axis=1).mean())


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    m = float(values.mean())
    if values.size < 2:
        return m, 0.0
    return m, float(values.std(ddof=1) / np.sqrt(values.size))


@dataclass(frozen=True)
class MomentSummary:
    mean_sq_norm: float
    mean_sq_norm_se: float
    site_second_moments: np.ndarray
    site_second_moments_se: np.ndarray
    regime_hist: np.ndarray
    regime_hist_se: np.ndarray


def moments(mu: EmpiricalMeasure, n_regimes: int | None = None) -> MomentSummary:
    """Mean-square norm, per-site second moments and regime frequencies, with SEs."""
    sq = mu.samples ** 2
    norms = sq.sum(axis=1)
    mean_sq, mean_sq_se = _mean_se(norms)
    site_mean = sq.mean(axis=0)
    if mu.size < 2:
        site_se = np.zeros_like(site_mean)
    else:
        site_se = sq.std(axis=0, ddof=1) / np.sqrt(mu.size)
    n_reg = n_regimes if n_regimes is not None else int(mu.regimes.max()) + 1
    hist = np.array([(mu.regimes == j).mean() for j in range(n_reg)])
    hist_se = np.sqrt(hist * (1.0 - hist) / mu.size) if mu.size > 1 else np.zeros_like(hist)
    return MomentSummary(
        mean_sq_norm=mean_sq,
        mean_sq_norm_se=mean_sq_se,
        site_second_moments=site_mean,
        site_second_moments_se=site_se,
        regime_hist=hist,
        regime_hist_se=hist_se,
    )


def measure_to_csv(mu: EmpiricalMeasure, path: Path | str) -> Path:
    """Dump the sample cloud as CSV: trajectory_index, regime, site_-n..site_n."""
    path = Path(path)
    n = (mu.dim - 1) // 2
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trajectory_index", "regime", *[f"site_{i}" for i in range(-n, n + 1)]])
        for idx in range(mu.size):
            writer.writerow([
                idx, int(mu.regimes[idx]),
                *[format(x, ".17g") for x in mu.samples[idx]],
            ])
    return path


def measure_summary(mu: EmpiricalMeasure, cut_levels=(), n_regimes: int | None = None) -> dict:
    """Moments, tail masses and regime frequencies as a JSON-ready dict."""
    mom = moments(mu, n_regimes=n_regimes)
    return {
        "n_samples": mu.size,
        "mean_sq_norm": mom.mean_sq_norm,
        "mean_sq_norm_se": mom.mean_sq_norm_se,
        "site_second_moments": mom.site_second_moments.tolist(),
        "site_second_moments_se": mom.site_second_moments_se.tolist(),
        "regime_hist": mom.regime_hist.tolist(),
        "regime_hist_se": mom.regime_hist_se.tolist(),
        "tail_mass": {str(n0): tail_mass(mu, int(n0)) for n0 in cut_levels},
    }
