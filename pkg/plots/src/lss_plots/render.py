"""Figure builders for the experiment CSV contract.

Five figure types:

* ``energy``      — mean-square norm vs time, bound curve overlaid, log y.
* ``contraction`` — mean-square pair gap vs time with the exponential bound;
                    the fitted-exponent annotation is read from the report
                    JSON, never refit here.
* ``dl``          — dictionary-distance curves (pullback, forward, periodic,
                    eps-sweep) with the calibrated noise-floor band.
* ``tail``        — tail-mass profiles over the cut level, one line per time.
* ``coupling``    — empirical coupling-time CDF vs the matrix-exponential
                    oracle per start pair.

Bound curves always come from the CSV's ``bound`` column; values are drawn
exactly as emitted.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

__all__ = ["PlotJob", "build_figure", "render", "FIGURE_TYPES"]

_COLUMNS = ["point", "statistic", "value", "se", "bound"]
_POINT_RE = re.compile(r"(\w+)=(\([^)]*\)|[^,]+)")


class MissingColumnError(ValueError):
    """CSV lacks a column required by the figure type."""


@dataclass(frozen=True)
class PlotJob:
    figure: str
    csv_paths: tuple[Path, ...]
    out_path: Path
    report_path: Path | None = None


def _load(path: Path) -> pd.DataFrame:
    frame = pd.read_csv(path)
    missing = [c for c in _COLUMNS if c not in frame.columns]
    if missing:
        raise MissingColumnError(f"{path}: missing column(s) {', '.join(missing)}")
    if frame.empty:
        raise ValueError(f"{path}: no data rows")
    return frame


def _point_fields(point: str) -> dict[str, str]:
    return {key: val for key, val in _POINT_RE.findall(str(point))}


def _numeric(field: str) -> float:
    # ranges like "0.1->0.2" plot at their right endpoint
    return float(field.split("->")[-1])


def _load_report(job: PlotJob) -> dict | None:
    if job.report_path is None:
        return None
    return json.loads(Path(job.report_path).read_text())


def _fig_energy(frames, report):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    meta = {}
    for frame in frames:
        rows = frame[frame.statistic == "mean_sq_norm"]
        if rows.empty:
            raise ValueError("energy figure: no mean_sq_norm rows")
        t = rows.point.map(lambda p: _numeric(_point_fields(p)["t"])).to_numpy()
        ax.errorbar(t, rows.value, yerr=3 * rows.se, fmt="o-", ms=3, label="Monte Carlo E||u||^2")
        ax.plot(t, rows.bound, "k--", label="energy bound")
        meta["all_below_bound"] = bool((rows.value <= rows.bound).all())
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("mean-square norm")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("energy decay vs bound")
    return fig, meta


def _fig_contraction(frames, report):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    meta = {}
    for frame in frames:
        rows = frame[frame.statistic == "mean_sq_diff"]
        if rows.empty:
            raise ValueError("contraction figure: no mean_sq_diff rows")
        t = rows.point.map(lambda p: _numeric(_point_fields(p)["t"])).to_numpy()
        ax.plot(t, rows.value, "o-", ms=3, label="E||u1-u2||^2")
        ax.plot(t, rows.bound, "k--", label="contraction bound")
        meta["all_below_tolerated_bound"] = bool(
            (rows.value <= rows.bound * (1 + 3 * rows.se / rows.value.clip(lower=1e-300))).all()
        )
    if report is not None:
        fitted = report.get("extras", {}).get("fitted_exponent")
        if fitted is not None:
            label = f"fitted exponent {fitted:.3g}"
            ax.annotate(label, xy=(0.03, 0.06), xycoords="axes fraction", fontsize=9)
            meta["fitted_exponent"] = fitted
            meta["annotation"] = label
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("mean-square difference")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("synchronous-pair contraction")
    return fig, meta


def _fig_dl(frames, report):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    meta = {"series": 0}
    floor_drawn = False
    for frame in frames:
        dl_rows = frame[frame.statistic.str.startswith("dl")]
        if dl_rows.empty:
            raise ValueError("dl figure: no dl_* rows")
        for (stat,), rows in dl_rows.groupby(["statistic"]):
            groups: dict[str, list[tuple[float, float, float | None]]] = {}
            for _, row in rows.iterrows():
                fields = _point_fields(row.point)
                x_key = next(
                    (k for k in ("lag", "horizon", "eps", "t", "T") if k in fields), None
                )
                x_val = _numeric(fields[x_key]) if x_key else float(len(groups))
                label_extra = ",".join(
                    f"{k}={v}" for k, v in fields.items() if k not in ("lag", "horizon", "eps", "t", "T")
                )
                key = f"{stat}" + (f" [{label_extra}]" if label_extra else "")
                groups.setdefault(key, []).append(
                    (x_val, row.value, None if pd.isna(row.bound) else row.bound)
                )
            for key, pts in groups.items():
                pts.sort()
                xs = [p[0] for p in pts]
                ys = [p[1] for p in pts]
                ax.plot(xs, ys, "o-", ms=3, label=key)
                meta["series"] += 1
                floors = [p[2] for p in pts if p[2] is not None]
                if floors and not floor_drawn:
                    ax.fill_between(xs, 0, max(floors), alpha=0.15, color="gray",
                                    label="noise floor")
                    floor_drawn = True
    ax.set_xlabel("lag / horizon / eps / t")
    ax.set_ylabel("dictionary distance (lower bound of d_L*)")
    ax.legend(loc="best", fontsize=7)
    ax.set_title("distributional convergence")
    return fig, meta


def _fig_tail(frames, report):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    meta = {"lines": 0}
    for frame in frames:
        rows = frame[frame.statistic == "tail_mass"]
        if rows.empty:
            raise ValueError("tail figure: no tail_mass rows")
        by_time: dict[str, list[tuple[float, float]]] = {}
        for _, row in rows.iterrows():
            fields = _point_fields(row.point)
            if "n0" not in fields:
                continue
            by_time.setdefault(fields.get("t", "?"), []).append(
                (float(fields["n0"]), row.value)
            )
        for t_key, pts in sorted(by_time.items()):
            pts.sort()
            xs = [p[0] for p in pts]
            ys = [p[1] if p[1] > 0 else np.nan for p in pts]  # zeros drop off the log axis
            ax.plot(xs, ys, "o-", ms=3, label=f"t={t_key}")
            meta["lines"] += 1
    ax.set_yscale("log")
    ax.set_xlabel("cut level n0")
    ax.set_ylabel("tail mass over |i| >= n0")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("site-tail profile")
    return fig, meta


def _fig_coupling(frames, report):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    meta = {"pairs": set()}
    for frame in frames:
        rows = frame[frame.statistic == "coupling_cdf"]
        if rows.empty:
            raise ValueError("coupling figure: no coupling_cdf rows")
        groups: dict[str, list[tuple[float, float, float]]] = {}
        for _, row in rows.iterrows():
            fields = _point_fields(row.point)
            groups.setdefault(fields.get("pair", "?"), []).append(
                (_numeric(fields["T"]), row.value, row.bound)
            )
        for pair, pts in sorted(groups.items()):
            pts.sort()
            xs = [p[0] for p in pts]
            ax.plot(xs, [p[1] for p in pts], "o-", ms=4, label=f"empirical {pair}")
            ax.plot(xs, [p[2] for p in pts], "kx--", label=f"oracle {pair}")
            meta["pairs"].add(pair)
    meta["pairs"] = sorted(meta["pairs"])
    ax.set_xlabel("T")
    ax.set_ylabel("P{coupling time <= T}")
    ax.set_ylim(0, 1.05)
    ax.legend(loc="lower right", fontsize=8)
    ax.set_title("chain coupling time CDF vs oracle")
    return fig, meta


FIGURE_TYPES = {
    "energy": _fig_energy,
    "contraction": _fig_contraction,
    "dl": _fig_dl,
    "tail": _fig_tail,
    "coupling": _fig_coupling,
}


def build_figure(job: PlotJob):
    """(figure, metadata) for a job; raises before any file is written."""
    if job.figure not in FIGURE_TYPES:
        raise ValueError(f"unknown figure type '{job.figure}' (known: {sorted(FIGURE_TYPES)})")
    frames = [_load(Path(p)) for p in job.csv_paths]
    report = _load_report(job)
    return FIGURE_TYPES[job.figure](frames, report)


def render(job: PlotJob) -> Path:
    """Render the figure to job.out_path (PNG, fixed dpi, deterministic)."""
    fig, _ = build_figure(job)
    out = Path(job.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
