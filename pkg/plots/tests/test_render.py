"""Renders real artifacts produced by the simulator CLI (the only interface
this package consumes) and checks the figures against their reports."""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from lss_plots.render import MissingColumnError, PlotJob, build_figure, render

HERE = Path(__file__).resolve()
REPO = HERE.parents[2]
TANH_SINE = REPO / "configs" / "tanh_sine.json"
OU = REPO / "configs" / "ou_scalar.json"

LSS = shutil.which("lss")
pytestmark = pytest.mark.skipif(LSS is None, reason="lss CLI not installed")


def _run(args, out_dir):
    cmd = [LSS, *args, "--out", str(out_dir), "--seed", "7"]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, f"{cmd}: rc={proc.returncode}\n{proc.stderr}"
    return out_dir


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    """One small run of every experiment subcommand."""
    out = tmp_path_factory.mktemp("artifacts")
    cfg = ["--config", str(TANH_SINE), "--dt", "0.01"]
    _run(["energy", *cfg, "--m", "300", "--t", "2.0", "--times", "8"], out)
    _run(["contraction", *cfg, "--m", "300", "--t", "1.2", "--times", "8"], out)
    _run(["tail", *cfg, "--m", "300", "--t", "2.0", "--eta", "0.05"], out)
    _run(["pullback", *cfg, "--m", "150"], out)
    _run(["forward", *cfg, "--m", "150"], out)
    _run(["periodic", *cfg, "--m", "150", "--t-grid", "0,0.5"], out)
    _run(["eps-sweep", *cfg, "--m", "150", "--eps-list", "1,0.5,0.25"], out)
    _run(["coupling", "--config", str(TANH_SINE), "--m", "2000"], out)
    return out


FIGS = [
    ("energy", "energy.csv"),
    ("contraction", "contraction.csv"),
    ("tail", "tail.csv"),
    ("dl", "pullback.csv"),
    ("dl", "forward.csv"),
    ("dl", "periodic.csv"),
    ("dl", "eps_sweep.csv"),
    ("coupling", "coupling.csv"),
]


@pytest.mark.parametrize("figure,csv_name", FIGS)
def test_every_experiment_csv_renders(artifacts, tmp_path, figure, csv_name):
    out = tmp_path / f"{csv_name}.png"
    job = PlotJob(figure=figure, csv_paths=(artifacts / csv_name,), out_path=out)
    path = render(job)
    assert path.exists() and path.stat().st_size > 1000


def test_energy_figure_reflects_pass(artifacts, tmp_path):
    job = PlotJob(
        figure="energy", csv_paths=(artifacts / "energy.csv",),
        out_path=tmp_path / "e.png",
    )
    _, meta = build_figure(job)
    assert meta["all_below_bound"] is True


def test_contraction_annotation_matches_report(artifacts, tmp_path):
    report_path = artifacts / "contraction.report.json"
    job = PlotJob(
        figure="contraction", csv_paths=(artifacts / "contraction.csv",),
        out_path=tmp_path / "c.png", report_path=report_path,
    )
    _, meta = build_figure(job)
    report = json.loads(report_path.read_text())
    fitted = report["extras"]["fitted_exponent"]
    assert f"{meta['fitted_exponent']:.3g}" == f"{fitted:.3g}"
    assert f"{fitted:.3g}" in meta["annotation"]


def test_report_exponent_is_genuine(artifacts):
    # independent refit from the CSV confirms the annotated value (the plot
    # itself never recomputes; this is test-side verification)
    import csv as csv_mod

    rows = list(csv_mod.DictReader((artifacts / "contraction.csv").open()))
    pts = [
        (float(r["point"].split("=")[1]), float(r["value"]))
        for r in rows
        if r["statistic"] == "mean_sq_diff" and float(r["value"]) > 0
    ]
    t = np.array([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope = float(np.polyfit(t, y, 1)[0])
    report = json.loads((artifacts / "contraction.report.json").read_text())
    assert -slope == pytest.approx(report["extras"]["fitted_exponent"], rel=1e-6)


def test_linear_contraction_slope_matches_ode_rate(tmp_path):
    # n=0, f=sigma=0, nu=1, lambda=1: slope on the log plot = -2(2nu+lambda) = -6
    out = _run(
        ["contraction", "--config", str(OU), "--dt", "0.002", "--m", "8",
         "--t", "1.0", "--times", "10"],
        tmp_path,
    )
    report = json.loads((out / "contraction.report.json").read_text())
    assert report["extras"]["fitted_exponent"] == pytest.approx(6.0, rel=0.05)
    job = PlotJob(
        figure="contraction", csv_paths=(out / "contraction.csv",),
        out_path=tmp_path / "lin.png", report_path=out / "contraction.report.json",
    )
    _, meta = build_figure(job)
    assert f"{meta['fitted_exponent']:.3g}" == f"{report['extras']['fitted_exponent']:.3g}"


def test_empty_csv_errors_without_writing(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("point,statistic,value,se,bound\n")
    out = tmp_path / "never.png"
    with pytest.raises(ValueError, match="no data rows"):
        render(PlotJob(figure="energy", csv_paths=(empty,), out_path=out))
    assert not out.exists()


def test_missing_column_named(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("point,value\nt=1,0.5\n")
    with pytest.raises(MissingColumnError, match="statistic"):
        render(PlotJob(figure="energy", csv_paths=(bad,), out_path=tmp_path / "x.png"))


def test_render_is_deterministic(artifacts, tmp_path):
    job_a = PlotJob(figure="coupling", csv_paths=(artifacts / "coupling.csv",),
                    out_path=tmp_path / "a.png")
    job_b = PlotJob(figure="coupling", csv_paths=(artifacts / "coupling.csv",),
                    out_path=tmp_path / "b.png")
    assert render(job_a).read_bytes() == render(job_b).read_bytes()


def test_cli_entry(artifacts, tmp_path, capsys):
    from lss_plots.cli import main

    out = tmp_path / "cli.png"
    code = main(["energy", str(artifacts / "energy.csv"), "-o", str(out)])
    assert code == 0 and out.exists()
    assert str(out) in capsys.readouterr().out
    assert main(["energy", str(tmp_path / "missing.csv"), "-o", str(out)]) == 1
