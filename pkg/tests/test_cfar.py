import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otfs_lab.cfar import (
    CfarConfig,
    Detection,
    associate,
    ca_cfar,
    ca_cfar_factor,
    extract_peaks,
    fold_truth,
    parabolic_offset,
)
from otfs_lab.channel import Target, TargetSet, snr_to_gain, synthesize_rx
from otfs_lab.experiments import calibrate_cfar
from otfs_lab.glrt import DetectionGrid, glrt_map
from otfs_lab.maps import DelayDopplerMap
from otfs_lab.modem import generate_frame, heisenberg_samples


def make_map(values, params, periodic=(False, False)):
    n0, n1 = values.shape
    return DelayDopplerMap(
        values=np.asarray(values, float),
        delays=np.arange(n0) * params.sample_period,
        dopplers=(np.arange(n1) - n1 // 2) * params.doppler_resolution,
        params=params,
        periodic=periodic,
    )


def det_at(params, rng_m, vel, value=10.0):
    tau = params.range_to_delay(rng_m)
    nu = params.velocity_to_doppler(vel)
    return Detection(0, 0, tau, nu, value)


def test_config_validation():
    with pytest.raises(ValueError):
        CfarConfig(p_fa=0.0)
    with pytest.raises(ValueError):
        CfarConfig(p_fa=1.0)
    with pytest.raises(ValueError, match="empty"):
        CfarConfig(training=(0, 0))
    assert CfarConfig().n_training == 13 * 13 - 5 * 5
    assert CfarConfig(guard=(1, 0), training=(1, 3)).n_training == 32
    with pytest.raises(ValueError, match="unknown"):
        CfarConfig.from_config({"p_fa": 0.1, "bogus": 1})


@pytest.mark.parametrize("p_fa", [1e-6, 1e-4, 0.1, 0.3])
@pytest.mark.parametrize("periodic", [(False, False), (True, True), (False, True)])
def test_constant_map_never_detects(p_fa, periodic):
    mask, thr = ca_cfar(np.full((40, 30), 3.7), CfarConfig(p_fa=p_fa), periodic)
    assert not mask.any()
    assert np.all(thr > 3.7)


def test_factor_limits_and_monotonicity():
    p_fa = 1e-4
    g = ca_cfar_factor(np.array([8, 32, 128, 512]), p_fa)
    assert np.all(np.diff(g) < 0)
    assert g[-1] == pytest.approx(-np.log(p_fa), rel=0.01)
    assert ca_cfar_factor(10**6, p_fa) == pytest.approx(-np.log(p_fa), rel=1e-4)
    # the analytic design: P(X > g * mean of N_t Exp(1)) = (1 + g/N_t)^-N_t
    for n in (8, 32, 128):
        assert (1 + ca_cfar_factor(n, p_fa) / n) ** (-n) == pytest.approx(p_fa, rel=1e-9)


def test_edge_window_shrinks_and_gamma_adapts():
    vals = np.ones((30, 30))
    _, thr = ca_cfar(vals, CfarConfig(p_fa=1e-3))
    # corners see fewer training cells, so a larger multiplier
    assert thr[0, 0] > thr[15, 15]
    _, thr_wrap = ca_cfar(vals, CfarConfig(p_fa=1e-3), (True, True))
    assert np.allclose(thr_wrap, thr_wrap[0, 0])


def test_h0_calibration_at_one_percent(isi_params):
    rep = calibrate_cfar(isi_params, 1e-2, 1_000_000, seed=3, cfar=CfarConfig(guard=(1, 0), training=(1, 3)))
    assert rep["n_training"] == 32 and rep["n_cells"] >= 1_000_000
    assert 0.5e-2 <= rep["empirical_rate"] <= 2e-2


def test_single_strong_target_one_cluster(isi_params):
    p = isi_params
    grid = DetectionGrid.default(p, doppler_bins=64)
    cfg = CfarConfig()
    hits = 0
    for trial in range(100):
        rng = np.random.default_rng(trial)
        f = generate_frame(p, rng)
        d_bin, j_bin = int(rng.integers(20, 360)), int(rng.integers(-25, 25))
        tgt = Target(snr_to_gain(25, 1.0, rng), d_bin * p.sample_period, j_bin * p.doppler_resolution)
        y = synthesize_rx(f, TargetSet(p, [tgt]), 1.0, rng).samples
        m = glrt_map(y, heisenberg_samples(f), 1.0, grid)
        mask, _ = ca_cfar(m, cfg)
        near = [
            d for d in extract_peaks(mask, m) if abs(d.delay_bin - d_bin) <= 2 and abs(grid.doppler_index[d.doppler_bin] - j_bin) <= 2
        ]
        hits += len(near) == 1 and near[0].delay_bin == d_bin and grid.doppler_index[near[0].doppler_bin] == j_bin
    assert hits >= 99


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-3, 1e6), st.integers(0, 2**31))
def test_cfar_scale_invariance(kappa, seed):
    vals = np.random.default_rng(seed).exponential(size=(32, 24))
    vals[10, 7] = 200.0
    cfg = CfarConfig(p_fa=1e-2, guard=(1, 1), training=(3, 2))
    m1, _ = ca_cfar(vals, cfg, (False, True))
    m2, _ = ca_cfar(kappa * vals, cfg, (False, True))
    assert np.array_equal(m1, m2)


def test_extract_peaks_examples(isi_params):
    vals = np.zeros((10, 10))
    mask = np.zeros_like(vals, bool)
    assert extract_peaks(mask, make_map(vals, isi_params)) == []
    vals[4, 4], vals[4, 5] = 10.0, 9.0
    mask[4, 4] = mask[4, 5] = True
    dets = extract_peaks(mask, make_map(vals, isi_params))
    assert [(d.delay_bin, d.doppler_bin, d.value) for d in dets] == [(4, 4, 10.0)]


def test_extract_peaks_wraps_periodic_axis(isi_params):
    vals = np.ones((8, 8))
    vals[3, 0], vals[3, 7] = 5.0, 6.0
    mask = vals > 2
    wrapped = extract_peaks(mask, make_map(vals, isi_params, (False, True)))
    assert [(d.delay_bin, d.doppler_bin) for d in wrapped] == [(3, 7)]
    flat = extract_peaks(mask, make_map(vals, isi_params, (False, False)))
    assert len(flat) == 2


def test_parabolic_offset():
    assert parabolic_offset(1.0, 2.0, 1.0) == 0.0
    x = 0.3
    f = lambda k: np.exp(-((k - x) ** 2))  # log is an exact parabola
    assert parabolic_offset(f(-1), f(0), f(1)) == pytest.approx(x, abs=1e-12)
    assert parabolic_offset(1.0, 1.0, 1.0) == 0.0


def test_association_examples(isi_params):
    p = isi_params
    ts = TargetSet.from_physical(p, [50, 242], [20, 20], [1, 1])
    empty = associate([], ts)
    assert empty.matches == [None, None] and empty.false_alarm_count == 0
    one = associate([det_at(p, 50, 20)], ts)
    assert one.matches == [0, None] and one.false_alarm_count == 0
    # 242 m folds onto 50 m in the standard interval
    folded_det = det_at(p, 242 - p.delay_to_range(p.symbol_duration), 20)
    fold = associate([folded_det], TargetSet.from_physical(p, [242], [20], [1]), "folded")
    assert fold.matches == [0] and fold.false_alarm_count == 0
    unamb = associate([folded_det], TargetSet.from_physical(p, [242], [20], [1]), "unambiguous")
    assert unamb.matches == [None] and unamb.false_alarm_count == 1
    with pytest.raises(ValueError):
        associate([], ts, "bogus")


def test_folded_prefers_in_interval_target(isi_params):
    p = isi_params
    ts = TargetSet.from_physical(p, [50, 242], [20, 20], [1, 1])
    rep = associate([det_at(p, 50, 20, 100.0)], ts, "folded")
    assert rep.matches == [0, None]


def test_fold_truth_intervals(ici_params):
    p = ici_params
    r, v = fold_truth([10.0, 3100.0], [20.0, 142.0], p)
    v_amb = p.wavelength / (4 * p.symbol_duration)
    assert r[0] == 10.0 and r[1] == pytest.approx(3100.0 - p.propagation_speed / (2 * p.subcarrier_spacing))
    assert v[0] == 20.0 and v[1] == pytest.approx(142.0 - 2 * v_amb)
    assert np.all((-v_amb <= v) & (v < v_amb))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 300), st.floats(-100, 100), st.floats(0.1, 1e4)), max_size=12), st.sampled_from(["folded", "unambiguous"]))
def test_association_conservation(dets, mode):
    from otfs_lab.params import load_params

    p = load_params("isi-regime")
    ts = TargetSet.from_physical(p, [50, 120, 242, 312], [20] * 4, [1] * 4)
    rep = associate([det_at(p, r, v, val) for r, v, val in dets], ts, mode)
    assert rep.n_matched + rep.false_alarm_count == len(dets)
    used = [m for m in rep.matches if m is not None]
    assert len(used) == len(set(used)) <= len(ts)


def test_report_json_line(isi_params):
    import json

    ts = TargetSet.from_physical(isi_params, [50], [20], [1])
    d = Detection(1, 2, 1e-7, 10.0, 5.0, alpha=1 + 2j)
    rec = json.loads(associate([d], ts).to_json_line())
    assert rec["false_alarm_count"] == 1 and rec["detections"][0]["alpha"] == [1.0, 2.0]
