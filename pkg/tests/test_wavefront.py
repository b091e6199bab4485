import numpy as np
import pytest

from microlocal import wavefront as W
from microlocal.errors import CalibrationError, MarginError
from microlocal.grid import GridSpec
from microlocal.symbols import PhaseDirection
from microlocal.waves import plane_wave, random_hs_field, traveling_delta

AX = np.array([1.0, -1.0]) / np.sqrt(2)


def test_window_is_compact_and_centered():
    g = GridSpec.square(64)
    w = W.window(g, [0.0, 0.0], 1.0)
    assert w.max() == pytest.approx(1.0)
    r = np.linalg.norm(g.coords, axis=-1)
    assert np.all(w[r >= 1.0] == 0)


def test_margin_refusal():
    g = GridSpec.square(64)
    with pytest.raises(MarginError):
        W.check_margin(g, [1.0, 0.0], 1.5)
    W.check_margin(g, [0.3, 0.0], 1.5)


def test_bands_are_half_octaves():
    b = W.default_bands(64.0)
    np.testing.assert_allclose(np.diff(np.log2(b)), 0.5)
    assert b[0] == 8.0


def test_rougher_fields_decay_slower():
    g = GridSpec.square(128)
    p = PhaseDirection(np.zeros(2), AX)
    slopes = {s: np.mean([W.raw_band_fit(random_hs_field(g, s, seed, 32), p, band_limit=32).slope
                          for seed in range(4)]) for s in (0.5, 2.0)}
    assert slopes[0.5] > slopes[2.0]


def test_cone_selects_the_wave_direction():
    g = GridSpec.square(64)
    pw = plane_wave(g, [4.0, -4.0])
    along = W.raw_band_fit(pw, PhaseDirection(np.zeros(2), AX), band_limit=16)
    across = W.raw_band_fit(pw, PhaseDirection(np.zeros(2), np.array([1.0, 1.0]) / np.sqrt(2)), band_limit=16)
    assert sum(along.energies) > 5 * sum(across.energies)


def test_calibration_failure_carries_table():
    g = GridSpec.square(64)
    with pytest.raises(CalibrationError) as info:
        W.calibrate(g, seeds=(0,), band_limit=16, tol=1e-6)
    table = info.value.table
    assert [e["s"] for e in table.entries] == list(W.CALIBRATION_S)


def test_scan_records_margin_failures():
    g = GridSpec.square(64)
    cal = W.CalibrationTable(1.0, 0.0, [], 0.0, 4.0, 1.5, 0.2, 16.0)
    u = traveling_delta(g, 16, window=True)
    est = W.wavefront_scan(u, [np.array([1.2, 0.0])], [AX], cal, band_limit=16)
    assert np.isnan(est[0].s_est)
    assert "error" in est[0].fit_diagnostics
