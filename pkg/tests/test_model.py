import math

import numpy as np
import pytest

from cavimag import (
    ConfigError,
    FrequencyGrid,
    MagnonMode,
    PhotonMode,
    PortCoupling,
    SystemSpec,
    dumps_config,
    load_config,
    loads_config,
    table3_cavity,
    validate_system,
)


def make_spec(**kwargs):
    defaults = dict(
        photon_modes=(
            PhotonMode(
                "c0", 14.0, (PortCoupling(1e-4 * 14.0, 0.0), PortCoupling(1e-4 * 14.0, 0.0)), (0.14,)
            ),
        ),
        magnon_modes=(MagnonMode("m", 14.0),),
        n_ports=2,
    )
    defaults.update(kwargs)
    return SystemSpec(**defaults)


class TestValidate:
    def test_clean_system_has_no_diagnostics(self):
        # g = 0.01 w and kappa = 0.01 sqrt(w), both well inside the RWA bounds
        assert validate_system(make_spec()) == []

    def test_hermiticity_violation_is_error(self):
        spec = SystemSpec(
            photon_modes=(
                PhotonMode("c0", 12.0, (PortCoupling(1e-3, 0.0),)),
                PhotonMode("c1", 14.0, (PortCoupling(1e-3, 0.0),)),
            ),
            n_ports=1,
            photon_photon_couplings=((0, 1, 1 + 0j), (1, 0, 1 + 0.5j)),
        )
        diags = validate_system(spec)
        assert any(d.severity == "error" and "Hermitian" in d.message for d in diags)

    def test_rwa_warning_for_strong_magnon_coupling(self):
        # g / sqrt(w0 wm) = 0.15 crosses the 0.1 rotating-wave threshold
        spec = make_spec(
            photon_modes=(
                PhotonMode(
                    "c0",
                    14.0,
                    (PortCoupling(1e-4, 0.0), PortCoupling(1e-4, 0.0)),
                    (0.15 * 14.0,),
                ),
            )
        )
        diags = validate_system(spec)
        assert [d.severity for d in diags] == ["warning"]
        assert "rotating-wave" in diags[0].message

    def test_negative_gamma_is_error(self):
        spec = make_spec(
            photon_modes=(
                PhotonMode("c0", 14.0, (PortCoupling(-1e-3, 0.0), PortCoupling(1e-3, 0.0)), (0.1,)),
            )
        )
        assert any("negative gamma" in d.message for d in validate_system(spec))

    def test_port_count_mismatch_is_error(self):
        spec = make_spec(
            photon_modes=(PhotonMode("c0", 14.0, (PortCoupling(1e-3, 0.0),), (0.1,)),)
        )
        assert any("port couplings" in d.message for d in validate_system(spec))

    def test_validation_is_pure(self):
        spec = make_spec()
        assert validate_system(spec) == validate_system(spec)


class TestSystemSpec:
    def test_magnon_rows_of_coupling_matrix_are_zero(self):
        spec = make_spec()
        k = spec.coupling_matrix()
        assert np.all(k[spec.n_photons :] == 0)

    def test_internal_coupling_matrix_is_hermitian(self):
        spec = SystemSpec(
            photon_modes=(
                PhotonMode("c0", 12.0, (PortCoupling(1e-3, 0.0),), (0.02,)),
                PhotonMode("c1", 14.0, (PortCoupling(1e-3, 0.0),), (0.03,)),
            ),
            magnon_modes=(MagnonMode("m", 13.0),),
            n_ports=1,
            photon_photon_couplings=((0, 1, 0.1 + 0.05j),),
        )
        g = spec.internal_coupling_matrix()
        assert np.allclose(g, g.conj().T)

    def test_retune_and_strip_magnons(self):
        spec = make_spec()
        retuned = spec.with_magnon_frequency(0, 13.0)
        assert retuned.magnon_modes[0].frequency == 13.0
        assert spec.magnon_modes[0].frequency == 14.0
        bare = spec.without_magnons()
        assert bare.n_magnons == 0
        assert bare.photon_modes[0].magnon_couplings == ()


class TestFrequencyGrid:
    def test_needs_two_points(self):
        with pytest.raises(ConfigError):
            FrequencyGrid(12.0, 17.0, 1)

    def test_needs_increasing_span(self):
        with pytest.raises(ConfigError):
            FrequencyGrid(17.0, 12.0, 11)

    def test_values(self):
        g = FrequencyGrid(12.0, 13.0, 11)
        assert g.values()[0] == 12.0 and g.values()[-1] == 13.0 and g.spacing == pytest.approx(0.1)


class TestReferenceCavity:
    def test_position_a_mode_te212(self):
        spec = table3_cavity("A")
        mode = {m.label: m for m in spec.photon_modes}["TE212"]
        assert mode.frequency == 14.4
        assert mode.ports[0].gamma == pytest.approx(14.4 / (2 * 912))
        assert mode.ports[1].gamma == pytest.approx(14.4 / (2 * 912))
        assert mode.magnon_couplings == (0.0301,)

    def test_position_b_mode_tm111(self):
        spec = table3_cavity("B")
        mode = {m.label: m for m in spec.photon_modes}["TM111"]
        assert mode.magnon_couplings == (0.0722,)

    def test_phase_groups(self):
        spec = table3_cavity("A")
        modes = {m.label: m for m in spec.photon_modes}
        for label in ("TE211", "TM012", "TE212", "TM013"):
            assert modes[label].ports[1].phase - modes[label].ports[0].phase == 0.0
        for label in ("TE113", "TM111", "TE311"):
            diff = modes[label].ports[1].phase - modes[label].ports[0].phase
            assert diff == pytest.approx(math.pi)

    def test_validates_clean(self):
        assert validate_system(table3_cavity("A")) == []
        assert validate_system(table3_cavity("B")) == []


class TestConfigIO:
    def test_round_trip_full_precision(self):
        spec = table3_cavity("A")
        again = loads_config(dumps_config(spec))
        assert again == spec

    def test_round_trip_with_photon_photon_coupling(self):
        spec = SystemSpec(
            photon_modes=(
                PhotonMode("c0", 12.123456789, (PortCoupling(1.23e-3, 0.0),)),
                PhotonMode("c1", 14.0, (PortCoupling(4.56e-4, math.pi),)),
            ),
            n_ports=1,
            photon_photon_couplings=((0, 1, 0.01 + 0.002j),),
        )
        assert loads_config(dumps_config(spec)) == spec

    def test_q_factor_form(self):
        text = """
        {"ports": 2,
         "photon_modes": [{"label": "c0", "freq_ghz": 14.4, "q_factor": 912,
                           "port_phases_rad": [0, 0]}],
         "magnon_modes": []}
        """
        spec = loads_config(text)
        assert spec.photon_modes[0].ports[0].gamma == pytest.approx(14.4 / (2 * 912))

    def test_missing_file_names_path(self, tmp_path):
        missing = tmp_path / "nope.json"
        with pytest.raises(ConfigError, match="nope.json"):
            load_config(missing)

    def test_invalid_config_is_rejected_on_load(self):
        text = """
        {"ports": 2,
         "photon_modes": [{"label": "c0", "freq_ghz": 14.4,
                           "gamma_per_port_ghz": [-0.001, 0.001],
                           "port_phases_rad": [0, 0]}]}
        """
        with pytest.raises(ConfigError, match="negative gamma"):
            loads_config(text)

    def test_field_errors_name_the_field(self):
        with pytest.raises(ConfigError, match="ports"):
            loads_config("{}")
        with pytest.raises(ConfigError, match=r"photon_modes\[0\]"):
            loads_config('{"ports": 1, "photon_modes": [{"label": "x"}]}')
