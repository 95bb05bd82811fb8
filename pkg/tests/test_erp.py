import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wmerp.erp import (
    average_epochs, average_to_csv, cluster_amplitude, components_to_csv, detect_component,
    electrode_cell, idw_interpolate, project_azimuthal, read_average_csv, read_components_csv,
    smooth, topo_snapshot, window_extremum,
)
from wmerp.signal_core import (
    FRONTAL_CLUSTER, PARIETAL_CLUSTER, DataError, Epoch, ErpAverage, Event, Montage,
)
from wmerp.source import HeadModel
from wmerp.synth import midline_dipole, referenced_topography

TIMES = np.arange(-100, 700, dtype=float)


def _epoch(data, cond="stimulus", task="inhibition"):
    data = np.atleast_2d(np.asarray(data, dtype=float))
    window = (-100.0, 700.0) if task == "inhibition" else (-100.0, 900.0)
    return Epoch(Event(1000, task, cond), data, 1000.0, window)


def _avg(mean, labels):
    mean = np.atleast_2d(np.asarray(mean, dtype=float))
    return ErpAverage("inhibition", "stimulus", 1, mean, np.zeros_like(mean), tuple(labels),
                      1000.0, (-100.0, 700.0))


def _gauss(center_ms, width_ms, amp):
    return amp * np.exp(-0.5 * ((TIMES - center_ms) / width_ms) ** 2)


# averaging -----------------------------------------------------------------------


def test_single_epoch_average():
    x = np.random.default_rng(0).normal(size=(3, 800))
    avg = average_epochs([_epoch(x)], "inhibition")
    np.testing.assert_array_equal(avg.mean, x)
    np.testing.assert_array_equal(avg.variance, 0)
    assert avg.n_epochs == 1


def test_opposite_epochs_cancel():
    x = np.random.default_rng(1).normal(size=(2, 800))
    avg = average_epochs([_epoch(x), _epoch(-x)], "inhibition")
    np.testing.assert_allclose(avg.mean, 0, atol=1e-15)


def test_noise_average_stays_within_three_standard_errors():
    rng = np.random.default_rng(2)
    template = _gauss(300, 30, 10.0)
    epochs = [_epoch(template + rng.normal(0, 5, 800)) for _ in range(100)]
    avg = average_epochs(epochs, "inhibition")
    z = np.abs(avg.mean[0] - template) / (5 / np.sqrt(100))
    # per-sample exceedance of 3 SE has probability 0.27 %
    assert np.mean(z > 3) < 0.01
    assert z.max() < 4.5


def test_group_selection_skips_rejected_and_other_conditions():
    a = _epoch(np.ones((1, 800)), "stimulus")
    b = _epoch(3 * np.ones((1, 800)), "distracter")
    c = Epoch(a.event, 100 * np.ones((1, 800)), 1000.0, a.window_ms, rejected=True)
    assert average_epochs([a, b, c], "inhibition", "stimulus").mean[0, 0] == 1.0
    assert average_epochs([a, b, c], "inhibition").mean[0, 0] == 2.0
    with pytest.raises(DataError):
        average_epochs([c], "inhibition")


def test_average_is_bit_reproducible():
    rng = np.random.default_rng(3)
    epochs = [_epoch(rng.normal(size=(4, 800))) for _ in range(50)]
    a, b = average_epochs(epochs, "inhibition"), average_epochs(epochs, "inhibition")
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.variance, b.variance)
    shuffled = [epochs[i] for i in rng.permutation(50)]
    np.testing.assert_allclose(average_epochs(shuffled, "inhibition").mean, a.mean, atol=1e-9)


# smoothing ---------------------------------------------------------------------------


def test_smooth_identity_and_constant():
    w = np.random.default_rng(4).normal(size=50)
    np.testing.assert_array_equal(smooth(w, 1), w)
    np.testing.assert_allclose(smooth(np.full(50, 2.5), 5), 2.5)


def test_smooth_impulse_plateau():
    w = np.zeros(21)
    w[10] = 5.0
    out = smooth(w, 5)
    np.testing.assert_allclose(out[8:13], 1.0)
    np.testing.assert_allclose(np.delete(out, range(8, 13)), 0.0)


def test_smooth_shrinks_at_edges():
    w = np.array([3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 9.0])
    out = smooth(w, 5)
    assert out[0] == 3.0  # window of 1
    assert out[1] == pytest.approx(1.0)  # window of 3
    assert out[-1] == 9.0


def test_smooth_errors():
    with pytest.raises(ValueError):
        smooth(np.zeros(10), 4)
    with pytest.raises(ValueError):
        smooth(np.zeros(3), 5)


@settings(deadline=None, max_examples=50)
@given(st.lists(st.floats(-100, 100), min_size=30, max_size=200))
def test_smooth_conserves_interior_mass(values):
    w = np.array(values)
    out = smooth(w, 5)
    # a bump far from both edges keeps its total
    bump = np.zeros(len(w) + 20)
    bump[10:10 + len(w)] = w
    assert smooth(bump, 5).sum() == pytest.approx(bump.sum(), abs=1e-8)
    assert len(out) == len(w)


# peak detection -------------------------------------------------------------------------


def test_n200_gaussian_bump_on_fz():
    w = _gauss(200, 15, -8.0)
    comp = detect_component(_avg(w, ["Fz"]), "N200", "Fz")
    assert abs(comp.latency_ms - 200) <= 1
    assert comp.amplitude_uv == pytest.approx(smooth(w)[300])
    assert comp.amplitude_uv == pytest.approx(-8.0, rel=0.01)


def test_p300_bump_on_pz():
    comp = detect_component(_avg(_gauss(300, 25, 6.0), ["Pz"]), "P300", "Pz")
    assert abs(comp.latency_ms - 300) <= 1
    assert comp.window_ms == (250.0, 350.0)


def test_zero_waveform_ties_to_window_start():
    avg = _avg(np.zeros(800), ["Pz"])
    for kind, start in (("N200", 150.0), ("P200", 150.0), ("P300", 250.0)):
        comp = detect_component(avg, kind, "Pz")
        assert comp.amplitude_uv == 0.0 and comp.latency_ms == start


def test_window_outside_epoch():
    short = ErpAverage("inhibition", None, 1, np.zeros((1, 300)), np.zeros((1, 300)), ("Pz",),
                       1000.0, (-100.0, 200.0))
    with pytest.raises(DataError):
        detect_component(short, "P300", "Pz")
    with pytest.raises(DataError):
        detect_component(_avg(np.zeros(800), ["Pz"]), "P300", "Fz")


@settings(deadline=None, max_examples=50)
@given(seed=st.integers(0, 2**32 - 1), offset=st.floats(-20, 20))
def test_component_sign_and_window(seed, offset):
    values = np.random.default_rng(seed).normal(offset, 10, 800)
    avg = _avg(values, ["Cz"])
    n2 = detect_component(avg, "N200", "Cz")
    p3 = detect_component(avg, "P300", "Cz")
    sm = smooth(np.array(values))
    if sm[(TIMES >= 150) & (TIMES <= 250)].min() <= 0:
        assert n2.amplitude_uv <= 0
    if sm[(TIMES >= 250) & (TIMES <= 350)].max() >= 0:
        assert p3.amplitude_uv >= 0
    assert 150 <= n2.latency_ms <= 250 and 250 <= p3.latency_ms <= 350


def test_window_extremum_earliest_tie():
    w = np.zeros(800)
    w[[420, 430]] = 4.0
    assert window_extremum(TIMES, w, 250, 350, +1) == (320.0, 4.0)


# clusters -------------------------------------------------------------------------------


def test_identical_channels_cluster_equals_single():
    w = _gauss(300, 25, 5.0)
    avg = _avg(np.tile(w, (5, 1)), FRONTAL_CLUSTER)
    assert cluster_amplitude(avg, "frontal", "P300") == pytest.approx(
        detect_component(avg, "P300", "Fz").amplitude_uv)


def test_cluster_mean_of_amplitudes():
    rows = [_gauss(300, 25, a) for a in (1, 2, 3, 4, 5)]
    avg = _avg(rows, PARIETAL_CLUSTER)
    single = [detect_component(avg, "P300", ch).amplitude_uv for ch in PARIETAL_CLUSTER]
    assert cluster_amplitude(avg, "parietal", "P300") == pytest.approx(np.mean(single), abs=1e-12)
    # smoothing trims the peaks by the same factor on every channel
    assert cluster_amplitude(avg, "parietal", "P300") == pytest.approx(3.0, rel=0.01)


def test_missing_cluster_channel():
    with pytest.raises(DataError):
        cluster_amplitude(_avg(np.zeros((1, 800)), ["Fz"]), "frontal", "P300")


def test_parietal_source_gives_larger_parietal_p300():
    m = Montage.default()
    topo = referenced_topography(m, HeadModel(), midline_dipole(36, False, 0.45, 0.1))
    mean = np.outer(topo, _gauss(300, 30, 1.0))
    avg = _avg(mean, m.labels)
    assert cluster_amplitude(avg, "parietal", "P300") > cluster_amplitude(avg, "frontal", "P300")


# topography ------------------------------------------------------------------------------


def _scalp_avg(values):
    m = Montage.default()
    mean = np.zeros((len(m), 800))
    mean[:, 400] = values
    return _avg(mean, m.labels), m


def test_constant_field_fills_grid():
    avg, m = _scalp_avg(np.full(len(Montage.default()), 4.2))
    g = topo_snapshot(avg, 300.0, 67, m)
    inside = g.values[~g.mask]
    np.testing.assert_allclose(inside, 4.2)
    assert g.values.shape == (67, 67)


def test_outside_disk_masked_independent_of_data():
    m = Montage.default()
    rng = np.random.default_rng(5)
    masks = []
    for _ in range(3):
        avg, _ = _scalp_avg(rng.normal(size=len(m)))
        masks.append(topo_snapshot(avg, 300.0, 67, m).mask)
    assert all(np.array_equal(masks[0], k) for k in masks)
    c = np.linspace(-1, 1, 67)
    gx, gy = np.meshgrid(c, c)
    assert masks[0].sum() == np.sum(np.hypot(gx, gy) > 1)
    assert masks[0][0, 0] and not masks[0][33, 33]


def test_single_fz_channel_peaks_at_fz_cell():
    m = Montage.default()
    v = np.zeros(len(m))
    v[m.index("Fz")] = 10.0
    avg, _ = _scalp_avg(v)
    g = topo_snapshot(avg, 300.0, 67, m)
    peak = np.unravel_index(np.nanargmax(g.values), g.values.shape)
    cell = electrode_cell(m.positions[m.index("Fz")], 67)
    assert peak == cell
    assert cell[0] < 33  # front of the head is row 0
    assert g.values[cell] == pytest.approx(10.0, rel=0.01)


def test_idw_exact_hit_and_projection():
    pts = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]])
    assert idw_interpolate(pts, [1.0, 2.0, 3.0], [[0.5, 0.0]])[0] == 2.0
    xy = project_azimuthal(np.array([[0, 0, 1.0], [1.0, 0, 0], [0, -1.0, 0]]))
    np.testing.assert_allclose(xy, [[0, 0], [1, 0], [0, -1]], atol=1e-12)


def test_eog_excluded_and_latency_range():
    m = Montage.default()
    v = np.zeros(len(m))
    v[m.index("VEOG")] = 1000.0
    avg, _ = _scalp_avg(v)
    g = topo_snapshot(avg, 300.0, 33, m)
    np.testing.assert_allclose(g.values[~g.mask], 0.0)
    with pytest.raises(DataError):
        topo_snapshot(avg, 800.0, 33, m)


def test_pgm_and_csv_layout():
    avg, m = _scalp_avg(np.random.default_rng(6).normal(size=34))
    g = topo_snapshot(avg, 300.0, 21, m)
    pgm = g.to_pgm()
    assert pgm.startswith(b"P5\n21 21\n255\n")
    body = np.frombuffer(pgm[len(b"P5\n21 21\n255\n"):], np.uint8).reshape(21, 21)
    assert np.all(body[g.mask] == 0) and body[~g.mask].min() == 1 and body.max() == 255
    rows = g.to_csv().splitlines()
    assert len(rows) == 21 and rows[0].split(",")[0] == ""


# CSV surfaces --------------------------------------------------------------------------


def test_average_csv_round_trip(tmp_path):
    avg = _avg(np.random.default_rng(7).normal(size=(2, 800)), ["Fz", "Pz"])
    (tmp_path / "a.csv").write_text(average_to_csv(avg))
    back = read_average_csv(tmp_path / "a.csv")
    np.testing.assert_array_equal(back.mean, avg.mean)
    assert back.labels == avg.labels and back.window_ms == avg.window_ms


def test_components_csv_round_trip(tmp_path):
    avg = _avg(_gauss(300, 25, 6.0), ["Pz"])
    rows = [("inhibition", "stimulus", detect_component(avg, k, "Pz")) for k in ("N200", "P300")]
    text = components_to_csv(rows)
    assert text.splitlines()[0] == "task,condition,kind,channel,latency_ms,amplitude_uv"
    (tmp_path / "c.csv").write_text(text)
    assert read_components_csv(tmp_path / "c.csv") == rows
