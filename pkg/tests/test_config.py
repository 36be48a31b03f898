"""Tests for JSON config parsing, validation, and canonical resolution."""

import json
import math

import pytest

from holomimo import ConfigurationError, Estimator, load_config


def write_config(tmp_path, payload, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def isotropic_payload():
    return {
        "geometry": {"m_h": 4, "m_v": 4, "spacing_over_lambda": 0.25},
        "scattering": {"model": "isotropic"},
    }


def clustered_payload():
    return {
        "geometry": {"m_h": 4, "m_v": 4, "spacing_over_lambda": 0.25},
        "beta": 2.0,
        "scattering": {
            "model": "clustered",
            "sigma_azimuth_deg": 5.0,
            "sigma_elevation_deg": 4.0,
            "clusters": [
                {"azimuth_deg": 30.0, "elevation_deg": -10.0, "power": 0.7},
                {"azimuth_deg": -20.0, "elevation_deg": 15.0, "power": 0.3},
            ],
        },
    }


class TestDefaults:
    def test_isotropic_minimal(self, tmp_path):
        config = load_config(write_config(tmp_path, isotropic_payload()))
        assert config.geometry.num_antennas == 16
        assert config.geometry.spacing_fraction == 0.25
        assert config.scattering_model == "isotropic"
        assert config.scattering is None
        assert config.beta == 1.0
        assert config.trials == 1000
        assert config.seed == 0
        assert config.snr_grid_db == (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
        assert config.estimators == tuple(Estimator)
        assert config.models == ("isotropic",)
        assert config.output_stem == "run"

    def test_clustered_defaults(self, tmp_path):
        config = load_config(write_config(tmp_path, clustered_payload()))
        assert config.correlation_model == "exact"
        assert config.models == ("exact", "isotropic")
        assert config.quadrature.nodes_azimuth == 96

    def test_quadrature_defaults_and_overrides(self, tmp_path):
        payload = clustered_payload()
        payload["quadrature"] = {"nodes_azimuth": 48, "support_radius": None}
        config = load_config(write_config(tmp_path, payload))
        assert config.quadrature.nodes_azimuth == 48
        assert config.quadrature.nodes_elevation == 96
        assert config.quadrature.support_radius is None


class TestGeometry:
    def test_explicit_meters(self, tmp_path):
        payload = isotropic_payload()
        payload["geometry"] = {"m_h": 2, "m_v": 3, "spacing_m": 0.05, "wavelength_m": 0.2}
        config = load_config(write_config(tmp_path, payload))
        assert config.geometry.spacing_fraction == pytest.approx(0.25)
        assert config.geometry.num_antennas == 6

    def test_both_spacing_specs_rejected(self, tmp_path):
        payload = isotropic_payload()
        payload["geometry"]["spacing_m"] = 0.1
        with pytest.raises(ConfigurationError, match="not both"):
            load_config(write_config(tmp_path, payload))

    def test_missing_dimensions(self, tmp_path):
        payload = isotropic_payload()
        del payload["geometry"]["m_v"]
        with pytest.raises(ConfigurationError, match="m_v"):
            load_config(write_config(tmp_path, payload))

    @pytest.mark.parametrize("value", [0, -2, 2.5, True])
    def test_dimensions_must_be_positive_integers(self, tmp_path, value):
        payload = isotropic_payload()
        payload["geometry"]["m_h"] = value
        with pytest.raises(ConfigurationError):
            load_config(write_config(tmp_path, payload))


class TestScattering:
    def test_clusters_parsed_in_degrees(self, tmp_path):
        config = load_config(write_config(tmp_path, clustered_payload()))
        clusters = config.scattering.clusters
        assert clusters[0].azimuth == pytest.approx(math.radians(30.0))
        assert clusters[1].elevation == pytest.approx(math.radians(15.0))
        assert config.scattering.sigma_azimuth == pytest.approx(math.radians(5.0))
        assert config.scattering.gain == 2.0

    def test_generate_block(self, tmp_path):
        payload = clustered_payload()
        del payload["scattering"]["clusters"]
        payload["scattering"]["generate"] = {
            "count": 5,
            "power_decay": 3.0,
            "azimuth_range_deg": [-60.0, 60.0],
            "elevation_range_deg": [-30.0, 30.0],
            "seed": 7,
        }
        config = load_config(write_config(tmp_path, payload))
        assert len(config.scattering.clusters) == 5
        assert sum(c.power for c in config.scattering.clusters) == pytest.approx(1.0)
        # the generator is part of the config contract: same seed, same clusters
        again = load_config(write_config(tmp_path, payload, name="again.json"))
        assert config.scattering.clusters == again.scattering.clusters

    def test_clusters_and_generate_are_exclusive(self, tmp_path):
        payload = clustered_payload()
        payload["scattering"]["generate"] = {
            "count": 2,
            "power_decay": 1.0,
            "azimuth_range_deg": [-10.0, 10.0],
            "elevation_range_deg": [-10.0, 10.0],
        }
        with pytest.raises(ConfigurationError, match="exactly one"):
            load_config(write_config(tmp_path, payload))

    def test_cluster_angle_out_of_range(self, tmp_path):
        payload = clustered_payload()
        payload["scattering"]["clusters"][0]["azimuth_deg"] = 90.0
        with pytest.raises(ConfigurationError):
            load_config(write_config(tmp_path, payload))

    def test_unknown_scattering_model(self, tmp_path):
        payload = isotropic_payload()
        payload["scattering"]["model"] = "rayleigh"
        with pytest.raises(ConfigurationError, match="model"):
            load_config(write_config(tmp_path, payload))

    def test_directivity_requires_clustered(self, tmp_path):
        payload = isotropic_payload()
        payload["directivity"] = {"a": 1.0, "b": 1.0}
        with pytest.raises(ConfigurationError, match="directivity"):
            load_config(write_config(tmp_path, payload))

    def test_directivity_flows_into_scattering(self, tmp_path):
        payload = clustered_payload()
        payload["directivity"] = {"a": 2.0, "b": 1.0}
        config = load_config(write_config(tmp_path, payload))
        assert config.scattering.directivity_a == 2.0
        assert config.scattering.directivity_b == 1.0


class TestValidation:
    def test_unknown_top_level_key(self, tmp_path):
        payload = isotropic_payload()
        payload["trails"] = 100
        with pytest.raises(ConfigurationError, match="trails"):
            load_config(write_config(tmp_path, payload))

    def test_unknown_nested_key(self, tmp_path):
        payload = isotropic_payload()
        payload["geometry"]["mh"] = 4
        with pytest.raises(ConfigurationError, match="mh"):
            load_config(write_config(tmp_path, payload))

    def test_snr_grid_strictly_increasing(self, tmp_path):
        payload = isotropic_payload()
        payload["snr_grid_db"] = [0.0, 10.0, 10.0]
        with pytest.raises(ConfigurationError, match="increasing"):
            load_config(write_config(tmp_path, payload))

    def test_correlation_model_needs_clustered(self, tmp_path):
        payload = isotropic_payload()
        payload["correlation_model"] = "approx"
        with pytest.raises(ConfigurationError, match="clustered"):
            load_config(write_config(tmp_path, payload))

    def test_models_require_clustered_scattering(self, tmp_path):
        payload = isotropic_payload()
        payload["models"] = ["isotropic", "exact"]
        with pytest.raises(ConfigurationError, match="clustered"):
            load_config(write_config(tmp_path, payload))

    def test_duplicate_models_rejected(self, tmp_path):
        payload = clustered_payload()
        payload["models"] = ["exact", "exact"]
        with pytest.raises(ConfigurationError, match="duplicate"):
            load_config(write_config(tmp_path, payload))

    def test_unknown_estimator(self, tmp_path):
        payload = isotropic_payload()
        payload["estimators"] = ["mmse", "kalman"]
        with pytest.raises(ConfigurationError, match="kalman"):
            load_config(write_config(tmp_path, payload))

    def test_duplicate_estimator(self, tmp_path):
        payload = isotropic_payload()
        payload["estimators"] = ["ls", "ls"]
        with pytest.raises(ConfigurationError, match="duplicate"):
            load_config(write_config(tmp_path, payload))

    @pytest.mark.parametrize("seed", [-1, 1.5, True])
    def test_seed_validation(self, tmp_path, seed):
        payload = isotropic_payload()
        payload["seed"] = seed
        with pytest.raises(ConfigurationError, match="seed"):
            load_config(write_config(tmp_path, payload))

    @pytest.mark.parametrize("beta", [0.0, -1.0])
    def test_beta_must_be_positive(self, tmp_path, beta):
        payload = isotropic_payload()
        payload["beta"] = beta
        with pytest.raises(ConfigurationError, match="beta"):
            load_config(write_config(tmp_path, payload))

    def test_output_stem_rejects_paths(self, tmp_path):
        payload = isotropic_payload()
        payload["output_stem"] = "../escape"
        with pytest.raises(ConfigurationError, match="stem"):
            load_config(write_config(tmp_path, payload))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigurationError, match="JSON"):
            load_config(path)

    def test_top_level_must_be_object(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigurationError, match="object"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            load_config(tmp_path / "nowhere.json")


class TestOverridesAndResolution:
    def test_seed_override(self, tmp_path):
        payload = isotropic_payload()
        payload["seed"] = 11
        path = write_config(tmp_path, payload)
        assert load_config(path).seed == 11
        assert load_config(path, seed_override=99).seed == 99
        with pytest.raises(ConfigurationError):
            load_config(path, seed_override=-1)

    def test_stem_override(self, tmp_path):
        path = write_config(tmp_path, isotropic_payload(), name="mystem.json")
        assert load_config(path).output_stem == "mystem"
        assert load_config(path, stem_override="other").output_stem == "other"

    def test_resolved_embeds_realized_clusters(self, tmp_path):
        payload = clustered_payload()
        del payload["scattering"]["clusters"]
        payload["scattering"]["generate"] = {
            "count": 3,
            "power_decay": 2.0,
            "azimuth_range_deg": [-45.0, 45.0],
            "elevation_range_deg": [-20.0, 20.0],
            "seed": 3,
        }
        config = load_config(write_config(tmp_path, payload))
        resolved_clusters = config.resolved["scattering"]["clusters"]
        assert len(resolved_clusters) == 3
        for raw, cluster in zip(resolved_clusters, config.scattering.clusters):
            assert raw["azimuth_deg"] == pytest.approx(math.degrees(cluster.azimuth))
            assert raw["power"] == cluster.power

    def test_resolved_is_json_serializable(self, tmp_path):
        config = load_config(write_config(tmp_path, clustered_payload()))
        text = json.dumps(config.resolved, sort_keys=True)
        assert "spacing_over_lambda" in text
        assert config.resolved["beta"] == 2.0
        assert config.resolved["estimators"] == [e.value for e in Estimator]
