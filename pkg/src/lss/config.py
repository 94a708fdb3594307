"""Configuration document handling for model specs.

One JSON document describes the whole system: coefficients, families,
truncation, noise intensity and the switching generator.  ``g`` and ``h``
accept either explicit per-regime arrays or a geometric-profile shorthand.
The published schema lives in docs/modelspec.schema.json and is enforced
here before any numeric construction, so malformed documents fail with a
field-level diagnostic.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .model import (
    DIFFUSION_FAMILIES,
    DRIFT_FAMILIES,
    ModelSpec,
    SineDiffusion,
    TanhDrift,
    ZeroDiffusion,
    ZeroDrift,
    geometric_noise_profile,
    geometric_profile,
)
from .switching import GeneratorMatrix

__all__ = ["ConfigError", "load_config", "parse_config", "spec_to_document", "SCHEMA_PATH"]

SCHEMA_PATH = Path(__file__).resolve().parent.parent.parent / "docs" / "modelspec.schema.json"


class ConfigError(ValueError):
    """Malformed configuration document; message names the offending field."""


def _schema() -> dict:
    try:
        return json.loads(SCHEMA_PATH.read_text())
    except FileNotFoundError:  # installed layout: schema shipped inside the package
        bundled = Path(__file__).resolve().parent / "modelspec.schema.json"
        return json.loads(bundled.read_text())


def _validate_schema(doc: dict):
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config field '{where}': {exc.message}") from exc


def _build_drift(block: dict, n_regimes: int, period: float | None):
    family = block["family"]
    if family == "zero":
        return ZeroDrift(n_regimes=n_regimes)
    if family == "tanh":
        return TanhDrift(
            c=tuple(float(x) for x in block["c"]),
            b=tuple(float(x) for x in block["b"]),
            rho=float(block["rho"]),
            period=block.get("period", period),
        )
    raise ConfigError(f"unknown drift family '{family}' (known: {sorted(DRIFT_FAMILIES)})")


def _build_diffusion(block: dict, n_regimes: int, period: float | None):
    family = block["family"]
    if family == "zero":
        return ZeroDiffusion(n_regimes=n_regimes)
    if family == "sine":
        return SineDiffusion(
            d=tuple(float(x) for x in block["d"]),
            e=tuple(float(x) for x in block["e"]),
            rho=float(block["rho"]),
            eta_ratio=float(block["eta_ratio"]),
            kappa_ratio=float(block["kappa_ratio"]),
            period=block.get("period", period),
        )
    raise ConfigError(f"unknown diffusion family '{family}' (known: {sorted(DIFFUSION_FAMILIES)})")


def _build_g(block, n_regimes: int, n: int) -> np.ndarray:
    if isinstance(block, dict):
        return geometric_profile(block["amplitude"], float(block["rho"]), n)
    arr = np.asarray(block, dtype=float)
    if arr.shape != (n_regimes, 2 * n + 1):
        raise ConfigError(f"config field 'g': shape {arr.shape} != {(n_regimes, 2 * n + 1)}")
    return arr


def _build_h(block, n_regimes: int, n: int, k_modes: int) -> np.ndarray:
    if isinstance(block, dict):
        return geometric_noise_profile(
            block["amplitude"], float(block["rho"]), float(block["eta_ratio"]), n, k_modes
        )
    arr = np.asarray(block, dtype=float)
    if arr.shape != (n_regimes, 2 * n + 1, k_modes):
        raise ConfigError(f"config field 'h': shape {arr.shape} != {(n_regimes, 2 * n + 1, k_modes)}")
    return arr


def parse_config(doc: dict) -> ModelSpec:
    """Build a ModelSpec from a configuration document (already parsed JSON)."""
    _validate_schema(doc)
    lam = [float(x) for x in doc["lambda"]]
    n_regimes = len(lam)
    n = int(doc["trunc_radius"])
    k_modes = int(doc["noise_modes"])
    period = doc.get("period")
    period = float(period) if period is not None else None
    try:
        spec = ModelSpec(
            nu=float(doc["nu"]),
            lambda_by_regime=np.asarray(lam),
            g_by_regime=_build_g(doc["g"], n_regimes, n),
            h_by_regime=_build_h(doc["h"], n_regimes, n, k_modes),
            f_family=_build_drift(doc["f_family"], n_regimes, period),
            sigma_family=_build_diffusion(doc["sigma_family"], n_regimes, period),
            epsilon=float(doc["epsilon"]),
            trunc_radius=n,
            noise_modes=k_modes,
            generator=GeneratorMatrix(np.asarray(doc["generator"], dtype=float)),
            period=period,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return spec


def load_config(path: Path | str) -> ModelSpec:
    """Read and parse a configuration file, with a line diagnostic on bad JSON."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(doc)


def spec_to_document(spec: ModelSpec) -> dict[str, Any]:
    """Round-trippable configuration document for a spec (explicit arrays)."""
    f_doc = {"family": spec.f_family.family_tag, **spec.f_family.params()}
    s_doc = {"family": spec.sigma_family.family_tag, **spec.sigma_family.params()}
    for block in (f_doc, s_doc):
        block.pop("n_regimes", None)
    return {
        "nu": spec.nu,
        "lambda": [float(x) for x in spec.lambda_by_regime],
        "g": spec.g_by_regime.tolist(),
        "h": spec.h_by_regime.tolist(),
        "f_family": f_doc,
        "sigma_family": s_doc,
        "epsilon": spec.epsilon,
        "period": spec.period,
        "trunc_radius": spec.trunc_radius,
        "noise_modes": spec.noise_modes,
        "generator": spec.generator.rates.tolist(),
    }
