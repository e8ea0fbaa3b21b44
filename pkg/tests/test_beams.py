import numpy as np
import pytest

from mmwsounder import beams as bm
from mmwsounder.errors import ConfigError


def test_beam_id_steering_angles():
    b = bm.BeamId(0, 0, bm.Side.TX)
    assert b.steering_azimuth == -45.0
    assert b.steering_elevation == -30.0
    b = bm.BeamId(9, 6, bm.Side.RX)
    assert b.steering_azimuth == 0.0
    assert b.steering_elevation == 0.0
    b = bm.BeamId(18, 12, bm.Side.TX)
    assert b.steering_azimuth == 45.0
    assert b.steering_elevation == 30.0


def test_beam_id_rejects_out_of_range():
    with pytest.raises(ConfigError):
        bm.BeamId(19, 0, bm.Side.TX)
    with pytest.raises(ConfigError):
        bm.BeamId(0, 13, bm.Side.TX)
    with pytest.raises(ConfigError):
        bm.BeamId(-1, 0, bm.Side.RX)


def test_default_codebook_shape():
    cb = bm.default_codebook(bm.Side.RX)
    assert len(cb.patterns) == 19 * 13
    row = cb.azimuth_row(0.0)
    assert len(row) == 19
    steers = [pat.steering[0] for _, pat in row]
    assert steers == [-45.0 + 5.0 * i for i in range(19)]
    assert all(pat.steering[1] == 0.0 for _, pat in row)


def test_parametric_gain_values():
    p = bm.make_parametric_pattern(0.0, 0.0)
    assert bm.gain_db(p, 0.0, 0.0) == pytest.approx(20.0, abs=1e-12)
    assert bm.gain_db(p, 6.0, 0.0) == pytest.approx(17.0, abs=0.1)
    assert bm.gain_db(p, -6.0, 0.0) == pytest.approx(17.0, abs=0.1)
    assert bm.gain_db(p, 0.0, 11.0) == pytest.approx(17.0, abs=0.1)
    assert bm.gain_db(p, 40.0, 0.0) <= 10.0 + 1e-12


def test_parametric_sidelobe_and_back_floor():
    p = bm.make_parametric_pattern(0.0, 0.0)
    # inside the forward window the floor is peak - 10 dB
    assert bm.gain_db(p, 30.0, 0.0) == pytest.approx(10.0, abs=1e-9)
    # far off boresight the pattern drops to the back floor
    assert bm.gain_db(p, 90.0, 0.0) == pytest.approx(-20.0, abs=1e-9)
    assert bm.gain_db(p, 180.0, 0.0) == pytest.approx(-20.0, abs=1e-9)


def test_parametric_phase_is_zero():
    p = bm.make_parametric_pattern(10.0, 0.0)
    g = bm.gain(p, np.array([0.0, 10.0, 20.0]), 0.0)
    assert np.allclose(np.imag(g), 0.0)
    assert np.all(np.real(g) > 0)


def test_strongest_beam_identification():
    cb = bm.default_codebook(bm.Side.RX)
    row = cb.azimuth_row(0.0)
    for theta in np.arange(-45.0, 45.01, 0.5):
        gains = [abs(bm.gain(pat, theta, 0.0)) ** 2 for _, pat in row]
        best = row[int(np.argmax(gains))][1]
        assert abs(best.steering[0] - theta) <= 2.5 + 1e-9


def test_beam_overlap_within_3db():
    cb = bm.default_codebook(bm.Side.TX)
    row = cb.azimuth_row(0.0)
    for (_, a), (_, b) in zip(row, row[1:]):
        peak = bm.gain_db(b, *b.steering)
        at_neighbor = bm.gain_db(b, a.steering[0], 0.0)
        assert peak - at_neighbor <= 3.0 + 1e-9


def test_codebook_symmetry():
    cb = bm.default_codebook(bm.Side.TX)
    row = cb.azimuth_row(0.0)
    for k in range(9):
        plus, minus = row[9 + k][1], row[9 - k][1]
        for theta in (0.0, 7.0, 23.0, 44.0):
            assert bm.gain_db(plus, theta, 0.0) == pytest.approx(
                bm.gain_db(minus, -theta, 0.0), abs=1e-12
            )


def test_array_factor_boresight_hpbw_oracle():
    # Oracle: direct element-sum field scan at 0.1 deg, written out longhand.
    rows, cols, d = 2, 8, 0.5
    y = (np.arange(cols) - (cols - 1) / 2.0) * d
    z = (np.arange(rows) - (rows - 1) / 2.0) * d
    az = np.arange(0.0, 90.0, 0.1)
    u_y = np.sin(np.radians(az))
    af = np.zeros(az.size, dtype=complex)
    for yi in y:
        for zi in z:
            af += np.exp(2j * np.pi * yi * u_y)
    elem = np.cos(np.radians(az)) ** 2.0
    cut = np.abs(af) * elem
    rel = 20.0 * np.log10(cut / cut[0])
    hpbw = 2.0 * az[np.argmax(rel < -3.0)]
    assert 11.0 <= hpbw <= 14.0

    pat = bm.make_array_factor_pattern(0.0, 0.0)
    assert pat.az_hpbw == pytest.approx(hpbw, abs=0.3)


def test_array_factor_elevation_hpbw_fit():
    pat = bm.make_array_factor_pattern(0.0, 0.0)
    assert pat.el_hpbw == pytest.approx(22.0, abs=3.0)


def test_array_factor_radiated_power_steering_invariant():
    az = np.arange(-180.0, 180.0, 1.0) + 0.5
    el = np.arange(-90.0, 90.0, 1.0) + 0.5
    azg, elg = np.meshgrid(az, el, indexing="ij")
    dome = np.cos(np.radians(elg)) * np.radians(1.0) ** 2
    powers = []
    for steer in (-45.0, -25.0, 0.0, 10.0, 45.0):
        pat = bm.make_array_factor_pattern(steer, 0.0)
        g = bm.gain(pat, azg, elg)
        powers.append(np.sum(np.abs(g) ** 2 * dome))
    powers_db = 10.0 * np.log10(powers)
    assert powers_db.max() - powers_db.min() < 0.5


def test_array_factor_peak_gain_reasonable():
    pat = bm.make_array_factor_pattern(0.0, 0.0)
    assert 17.0 <= pat.peak_gain <= 23.0
    edge = bm.make_array_factor_pattern(45.0, 0.0)
    assert edge.peak_gain < pat.peak_gain  # scan loss
    assert edge.peak_gain > pat.peak_gain - 3.0


def test_array_factor_boresight_phase_coherent():
    # Symmetric aperture centered at the origin: boresight-steered response
    # is real for any azimuth, so neighboring-beam phases are consistent.
    pat = bm.make_array_factor_pattern(0.0, 0.0)
    g = bm.gain(pat, np.arange(-60.0, 60.0, 1.0), 0.0)
    assert np.max(np.abs(np.imag(g))) < 1e-9 * np.max(np.abs(g))


def test_link_budget_values():
    assert bm.link_budget(57, 20, 5, 400e6, 1.0) == pytest.approx(159.0, abs=0.1)
    assert bm.link_budget(57, 20, 5, 400e6, 0.0) == pytest.approx(160.0, abs=0.1)
    wide = bm.link_budget(57, 20, 5, 400e6, 0.0)
    narrow = bm.link_budget(57, 20, 5, 4e6, 0.0)
    assert narrow - wide == pytest.approx(20.0, abs=1e-9)
    with pytest.raises(ConfigError):
        bm.link_budget(57, 20, 5, 0.0, 0.0)


def test_wrap_and_local_azimuth():
    assert bm.wrap_angle(185.0) == pytest.approx(-175.0)
    assert bm.wrap_angle(-180.0) == pytest.approx(180.0)
    assert bm.wrap_angle(180.0) == pytest.approx(180.0)
    assert bm.local_azimuth(120.0, 90.0) == pytest.approx(30.0)
    assert bm.local_azimuth(-170.0, 90.0) == pytest.approx(100.0)


def test_orientation_validation():
    bm.default_codebook(bm.Side.RX, orientation=270.0)
    with pytest.raises(ConfigError):
        bm.default_codebook(bm.Side.RX, orientation=45.0)
    with pytest.raises(ConfigError):
        bm.default_codebook(bm.Side.TX, orientation=90.0)


def test_codebook_export_import_roundtrip(tmp_path):
    cb = bm.default_codebook(bm.Side.RX, bm.BeamModel.PARAMETRIC, orientation=90.0)
    path = str(tmp_path / "codebook.ini")
    bm.export_codebook(cb, path)
    cb2 = bm.import_codebook(path)
    assert cb2.side == cb.side
    assert cb2.orientation == cb.orientation
    assert len(cb2.patterns) == len(cb.patterns)
    assert cb2.patterns[0][1] == cb.patterns[0][1]
