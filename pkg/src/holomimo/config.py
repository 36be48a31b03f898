"""JSON run configuration: strict parsing, validation, and canonical resolution.

A config file fully determines a run. Angles are authored in degrees and
converted to radians at the boundary; antenna spacing is authored as a
fraction of the wavelength (`spacing_over_lambda`, the only physically
meaningful combination) or as explicit meters. Parsing is strict: unknown
keys are rejected so typos fail loudly instead of silently running defaults.

The parsed result carries a `resolved` dictionary: the full post-default,
post-generator settings (clusters listed explicitly even when drawn from the
parametric generator). Output writers embed it so every artifact records
exactly what produced it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .correlation import QuadratureSpec
from .errors import ConfigurationError
from .estimation import Estimator
from .geometry import ArrayGeometry
from .scattering import Cluster, ScatteringConfig, generate_clusters

_SCATTERING_MODELS = ("isotropic", "clustered")
_CORRELATION_MODELS = ("exact", "approx")
_REPORT_MODELS = ("isotropic", "exact", "approx")
_DEFAULT_SNR_GRID_DB = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)


def _require(mapping: dict, key: str, context: str) -> Any:
    if key not in mapping:
        raise ConfigurationError(f"{context}: missing required key '{key}'")
    return mapping[key]


def _reject_unknown(mapping: dict, allowed: set[str], context: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigurationError(
            f"{context}: unknown key(s) {sorted(unknown)}; allowed: {sorted(allowed)}"
        )


def _as_positive_int(value: Any, context: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigurationError(f"{context}: expected a positive integer, got {value!r}")
    return value


def _as_finite_float(value: Any, context: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{context}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigurationError(f"{context}: value must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully validated run settings plus their canonical `resolved` form."""

    geometry: ArrayGeometry
    scattering_model: str
    scattering: ScatteringConfig | None
    beta: float
    correlation_model: str
    models: tuple[str, ...]
    snr_grid_db: tuple[float, ...]
    trials: int
    seed: int
    estimators: tuple[Estimator, ...]
    quadrature: QuadratureSpec
    output_stem: str
    resolved: dict


def _parse_geometry(raw: Any) -> ArrayGeometry:
    context = "geometry"
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{context}: expected an object")
    _reject_unknown(
        raw, {"m_h", "m_v", "spacing_over_lambda", "spacing_m", "wavelength_m"}, context
    )
    m_h = _as_positive_int(_require(raw, "m_h", context), f"{context}.m_h")
    m_v = _as_positive_int(_require(raw, "m_v", context), f"{context}.m_v")
    if "spacing_over_lambda" in raw:
        if "spacing_m" in raw or "wavelength_m" in raw:
            raise ConfigurationError(
                f"{context}: give either spacing_over_lambda or spacing_m+wavelength_m, not both"
            )
        fraction = _as_finite_float(raw["spacing_over_lambda"], f"{context}.spacing_over_lambda")
        if not fraction > 0:
            raise ConfigurationError(f"{context}.spacing_over_lambda: must be positive")
        spacing, wavelength = fraction, 1.0
    else:
        spacing = _as_finite_float(_require(raw, "spacing_m", context), f"{context}.spacing_m")
        wavelength = _as_finite_float(
            _require(raw, "wavelength_m", context), f"{context}.wavelength_m"
        )
        if spacing <= 0 or wavelength <= 0:
            raise ConfigurationError(f"{context}: spacing_m and wavelength_m must be positive")
    return ArrayGeometry(
        num_horizontal=m_h, num_vertical=m_v, spacing=spacing, wavelength=wavelength
    )


def _parse_cluster(raw: Any, context: str) -> Cluster:
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{context}: expected an object")
    _reject_unknown(raw, {"azimuth_deg", "elevation_deg", "power", "specular"}, context)
    azimuth = _as_finite_float(_require(raw, "azimuth_deg", context), f"{context}.azimuth_deg")
    elevation = _as_finite_float(
        _require(raw, "elevation_deg", context), f"{context}.elevation_deg"
    )
    power = _as_finite_float(_require(raw, "power", context), f"{context}.power")
    specular = raw.get("specular", False)
    if not isinstance(specular, bool):
        raise ConfigurationError(f"{context}.specular: expected a boolean")
    try:
        return Cluster(
            azimuth=math.radians(azimuth),
            elevation=math.radians(elevation),
            power=power,
            specular=specular,
        )
    except ValueError as exc:
        raise ConfigurationError(f"{context}: {exc}") from exc


def _parse_scattering(
    raw: Any, beta: float, directivity: tuple[float, float]
) -> tuple[str, ScatteringConfig | None]:
    context = "scattering"
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{context}: expected an object")
    model = _require(raw, "model", context)
    if model not in _SCATTERING_MODELS:
        raise ConfigurationError(
            f"{context}.model: expected one of {_SCATTERING_MODELS}, got {model!r}"
        )
    if model == "isotropic":
        _reject_unknown(raw, {"model"}, context)
        return model, None

    _reject_unknown(
        raw,
        {"model", "sigma_azimuth_deg", "sigma_elevation_deg", "clusters", "generate"},
        context,
    )
    sigma_az = _as_finite_float(
        _require(raw, "sigma_azimuth_deg", context), f"{context}.sigma_azimuth_deg"
    )
    sigma_el = _as_finite_float(
        _require(raw, "sigma_elevation_deg", context), f"{context}.sigma_elevation_deg"
    )

    has_clusters = "clusters" in raw
    has_generate = "generate" in raw
    if has_clusters == has_generate:
        raise ConfigurationError(f"{context}: give exactly one of 'clusters' or 'generate'")
    if has_clusters:
        raw_clusters = raw["clusters"]
        if not isinstance(raw_clusters, list) or not raw_clusters:
            raise ConfigurationError(f"{context}.clusters: expected a non-empty list")
        clusters = tuple(
            _parse_cluster(c, f"{context}.clusters[{k}]") for k, c in enumerate(raw_clusters)
        )
    else:
        gen = raw["generate"]
        gen_context = f"{context}.generate"
        if not isinstance(gen, dict):
            raise ConfigurationError(f"{gen_context}: expected an object")
        _reject_unknown(
            gen,
            {"count", "power_decay", "azimuth_range_deg", "elevation_range_deg", "seed"},
            gen_context,
        )
        count = _as_positive_int(_require(gen, "count", gen_context), f"{gen_context}.count")
        decay = _as_finite_float(
            _require(gen, "power_decay", gen_context), f"{gen_context}.power_decay"
        )
        ranges = {}
        for key in ("azimuth_range_deg", "elevation_range_deg"):
            pair = _require(gen, key, gen_context)
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigurationError(f"{gen_context}.{key}: expected [low, high]")
            lo = _as_finite_float(pair[0], f"{gen_context}.{key}[0]")
            hi = _as_finite_float(pair[1], f"{gen_context}.{key}[1]")
            ranges[key] = (math.radians(lo), math.radians(hi))
        gen_seed = gen.get("seed", 0)
        if not isinstance(gen_seed, int) or isinstance(gen_seed, bool) or gen_seed < 0:
            raise ConfigurationError(f"{gen_context}.seed: expected a nonnegative integer")
        try:
            clusters = generate_clusters(
                count=count,
                power_decay=decay,
                azimuth_range=ranges["azimuth_range_deg"],
                elevation_range=ranges["elevation_range_deg"],
                rng=np.random.default_rng(gen_seed),
            )
        except ValueError as exc:
            raise ConfigurationError(f"{gen_context}: {exc}") from exc

    try:
        scattering = ScatteringConfig(
            clusters=clusters,
            sigma_azimuth=math.radians(sigma_az),
            sigma_elevation=math.radians(sigma_el),
            directivity_a=directivity[0],
            directivity_b=directivity[1],
            gain=beta,
        )
    except ValueError as exc:
        raise ConfigurationError(f"{context}: {exc}") from exc
    return model, scattering


def _parse_directivity(raw: Any) -> tuple[float, float]:
    context = "directivity"
    if raw is None:
        return 0.0, 0.0
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{context}: expected an object")
    _reject_unknown(raw, {"a", "b"}, context)
    a = _as_finite_float(raw.get("a", 0.0), f"{context}.a")
    b = _as_finite_float(raw.get("b", 0.0), f"{context}.b")
    if a < 0 or b < 0:
        raise ConfigurationError(f"{context}: exponents must be nonnegative")
    return a, b


def _parse_quadrature(raw: Any) -> QuadratureSpec:
    context = "quadrature"
    if raw is None:
        return QuadratureSpec()
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{context}: expected an object")
    _reject_unknown(
        raw,
        {"nodes_azimuth", "nodes_elevation", "support_radius", "density_check_tol"},
        context,
    )
    kwargs: dict[str, Any] = {}
    if "nodes_azimuth" in raw:
        kwargs["nodes_azimuth"] = _as_positive_int(raw["nodes_azimuth"], f"{context}.nodes_azimuth")
    if "nodes_elevation" in raw:
        kwargs["nodes_elevation"] = _as_positive_int(
            raw["nodes_elevation"], f"{context}.nodes_elevation"
        )
    if "support_radius" in raw:
        kwargs["support_radius"] = (
            None
            if raw["support_radius"] is None
            else _as_finite_float(raw["support_radius"], f"{context}.support_radius")
        )
    if "density_check_tol" in raw:
        kwargs["density_check_tol"] = _as_finite_float(
            raw["density_check_tol"], f"{context}.density_check_tol"
        )
    try:
        return QuadratureSpec(**kwargs)
    except ValueError as exc:
        raise ConfigurationError(f"{context}: {exc}") from exc


def _resolved_dict(config: ExperimentConfig) -> dict:
    """Canonical post-default settings for embedding into output files."""
    resolved: dict[str, Any] = {
        "geometry": {
            "m_h": config.geometry.num_horizontal,
            "m_v": config.geometry.num_vertical,
            "spacing_over_lambda": config.geometry.spacing_fraction,
        },
        "beta": config.beta,
        "scattering": {"model": config.scattering_model},
        "models": list(config.models),
        "snr_grid_db": list(config.snr_grid_db),
        "trials": config.trials,
        "seed": config.seed,
        "estimators": [e.value for e in config.estimators],
        "quadrature": {
            "nodes_azimuth": config.quadrature.nodes_azimuth,
            "nodes_elevation": config.quadrature.nodes_elevation,
            "support_radius": config.quadrature.support_radius,
            "density_check_tol": config.quadrature.density_check_tol,
        },
        "output_stem": config.output_stem,
    }
    if config.scattering is not None:
        scattering = config.scattering
        resolved["correlation_model"] = config.correlation_model
        resolved["directivity"] = {
            "a": scattering.directivity_a,
            "b": scattering.directivity_b,
        }
        resolved["scattering"].update(
            {
                "sigma_azimuth_deg": math.degrees(scattering.sigma_azimuth),
                "sigma_elevation_deg": math.degrees(scattering.sigma_elevation),
                "clusters": [
                    {
                        "azimuth_deg": math.degrees(c.azimuth),
                        "elevation_deg": math.degrees(c.elevation),
                        "power": c.power,
                        "specular": c.specular,
                    }
                    for c in scattering.clusters
                ],
            }
        )
    return resolved


def load_config(
    path: str | Path, seed_override: int | None = None, stem_override: str | None = None
) -> ExperimentConfig:
    """Parse and validate a JSON run configuration.

    `seed_override` replaces the config seed (CLI --seed); `stem_override`
    replaces the output filename stem, which otherwise defaults to the config
    filename without extension.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: top-level JSON value must be an object")

    _reject_unknown(
        raw,
        {
            "geometry",
            "beta",
            "scattering",
            "directivity",
            "correlation_model",
            "models",
            "snr_grid_db",
            "trials",
            "seed",
            "estimators",
            "quadrature",
            "output_stem",
        },
        str(path),
    )

    geometry = _parse_geometry(_require(raw, "geometry", str(path)))
    beta = _as_finite_float(raw.get("beta", 1.0), "beta")
    if not beta > 0:
        raise ConfigurationError(f"beta: must be positive, got {beta}")
    directivity = _parse_directivity(raw.get("directivity"))
    scattering_model, scattering = _parse_scattering(
        _require(raw, "scattering", str(path)), beta, directivity
    )
    if scattering_model == "isotropic" and "directivity" in raw and directivity != (0.0, 0.0):
        raise ConfigurationError(
            "directivity: nonzero exponents require clustered scattering "
            "(the isotropic model assumes isotropic antennas)"
        )

    correlation_model = raw.get("correlation_model", "exact")
    if correlation_model not in _CORRELATION_MODELS:
        raise ConfigurationError(
            f"correlation_model: expected one of {_CORRELATION_MODELS}, got {correlation_model!r}"
        )
    if scattering_model == "isotropic" and "correlation_model" in raw:
        raise ConfigurationError("correlation_model only applies to clustered scattering")

    default_models = ("isotropic",) if scattering_model == "isotropic" else ("exact", "isotropic")
    raw_models = raw.get("models", list(default_models))
    if not isinstance(raw_models, list) or not raw_models:
        raise ConfigurationError("models: expected a non-empty list")
    models = []
    for model in raw_models:
        if model not in _REPORT_MODELS:
            raise ConfigurationError(
                f"models: expected entries from {_REPORT_MODELS}, got {model!r}"
            )
        if model in models:
            raise ConfigurationError(f"models: duplicate entry {model!r}")
        if scattering_model == "isotropic" and model != "isotropic":
            raise ConfigurationError(f"models: {model!r} requires clustered scattering")
        models.append(model)

    raw_snr = raw.get("snr_grid_db", list(_DEFAULT_SNR_GRID_DB))
    if not isinstance(raw_snr, list) or not raw_snr:
        raise ConfigurationError("snr_grid_db: expected a non-empty list")
    snr_grid_db = tuple(_as_finite_float(v, f"snr_grid_db[{k}]") for k, v in enumerate(raw_snr))
    if any(b <= a for a, b in zip(snr_grid_db, snr_grid_db[1:])):
        raise ConfigurationError("snr_grid_db: values must be strictly increasing")

    trials = _as_positive_int(raw.get("trials", 1000), "trials")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigurationError(f"seed: expected a nonnegative integer, got {seed!r}")
    if seed_override is not None:
        if seed_override < 0:
            raise ConfigurationError(f"seed override must be nonnegative, got {seed_override}")
        seed = seed_override

    raw_estimators = raw.get("estimators", [e.value for e in Estimator])
    if not isinstance(raw_estimators, list) or not raw_estimators:
        raise ConfigurationError("estimators: expected a non-empty list")
    estimators = []
    valid_names = [e.value for e in Estimator]
    for name in raw_estimators:
        try:
            estimator = Estimator(name)
        except ValueError:
            raise ConfigurationError(
                f"estimators: expected entries from {valid_names}, got {name!r}"
            ) from None
        if estimator in estimators:
            raise ConfigurationError(f"estimators: duplicate entry {name!r}")
        estimators.append(estimator)

    quadrature = _parse_quadrature(raw.get("quadrature"))

    stem = stem_override if stem_override is not None else raw.get("output_stem", path.stem)
    if not isinstance(stem, str) or not stem or "/" in stem or "\\" in stem:
        raise ConfigurationError(f"output_stem: expected a bare filename stem, got {stem!r}")

    config = ExperimentConfig(
        geometry=geometry,
        scattering_model=scattering_model,
        scattering=scattering,
        beta=beta,
        correlation_model=correlation_model,
        models=tuple(models),
        snr_grid_db=snr_grid_db,
        trials=trials,
        seed=seed,
        estimators=tuple(estimators),
        quadrature=quadrature,
        output_stem=stem,
        resolved={},
    )
    object.__setattr__(config, "resolved", _resolved_dict(config))
    return config
