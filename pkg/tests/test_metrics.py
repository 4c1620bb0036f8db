import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mattebench.errors import DimensionMismatch
from mattebench.imagecore import save_image
from mattebench.metrics import (
    MetricsReport,
    connected_components,
    connectivity_error,
    evaluate_dataset,
    evaluate_pair,
    gradient_error,
    mae,
    mean_report,
    mse,
    sad,
    threshold_levels,
)
from oracles import conn_case_8x8, conn_oracle, flood_fill_labels, grad_oracle, step_case_16x16

unit = st.floats(0.0, 1.0, allow_nan=False)
pairs16 = st.tuples(arrays(np.float64, (16, 16), elements=unit), arrays(np.float64, (16, 16), elements=unit))


def test_mse_examples():
    gt = np.full((4, 4), 0.3)
    assert mse(gt, gt) == 0
    assert mse(gt + 0.1, gt) == pytest.approx(0.01)
    assert mse(np.ones((3, 3)), np.zeros((3, 3))) == 1.0


def test_mae_sad_examples():
    gt = np.full((10, 20), 0.5)
    assert mae(gt, gt) == 0 and sad(gt, gt) == 0
    assert mae(gt + 0.1, gt) == pytest.approx(0.1)
    assert sad(gt + 0.1, gt) == pytest.approx(0.1 * 200 / 1000)


def test_mismatch():
    with pytest.raises(DimensionMismatch):
        mse(np.zeros((2, 2)), np.zeros((2, 3)))


@settings(max_examples=40, deadline=None)
@given(pairs16)
def test_pointwise_identities(pair):
    p, g = pair
    assert sad(p, g) * 1000 == pytest.approx(mae(p, g) * p.size, abs=1e-6)
    assert mse(p, g) <= mae(p, g) <= 1
    assert mse(p, g) == mse(g, p) and mae(p, g) == mae(g, p) and sad(p, g) == sad(g, p)


def test_gradient_identity_cases():
    x = np.random.default_rng(1).random((16, 16))
    assert gradient_error(x, x) == 0
    assert gradient_error(np.full((16, 16), 0.2), np.full((16, 16), 0.9)) == pytest.approx(0, abs=1e-20)


def test_gradient_matches_dense_oracle():
    pred, gt = step_case_16x16()
    expected = grad_oracle(pred, gt)
    assert expected > 0
    assert gradient_error(pred, gt) == pytest.approx(expected, abs=1e-6)


def test_gradient_random_matches_oracle():
    rng = np.random.default_rng(5)
    p, g = rng.random((12, 13)), rng.random((12, 13))
    assert gradient_error(p, g, sigma=1.0, q=1.5) == pytest.approx(grad_oracle(p, g, 1.0, 1.5), abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(arrays(np.float64, (16, 16), elements=st.floats(0, 0.5)), arrays(np.float64, (16, 16), elements=st.floats(0, 0.5)), st.floats(0, 0.5))
def test_gradient_shift_invariance(p, g, c):
    assert gradient_error(p + c, g + c) == pytest.approx(gradient_error(p, g), rel=1e-9, abs=1e-12)


def test_gradient_too_small():
    with pytest.raises(DimensionMismatch):
        gradient_error(np.zeros((5, 20)), np.zeros((5, 20)))


def test_connected_components_examples():
    assert connected_components(np.zeros((4, 4), bool)).max() == 0
    full = connected_components(np.ones((4, 4), bool))
    assert set(np.unique(full)) == {1}
    diag = np.array([[True, False], [False, True]])
    np.testing.assert_array_equal(connected_components(diag), [[1, 0], [0, 2]])


def test_connected_components_all_3x3():
    for bits in itertools.product([False, True], repeat=9):
        m = np.array(bits).reshape(3, 3)
        np.testing.assert_array_equal(connected_components(m), flood_fill_labels(m))


def test_connected_components_label_order():
    m = np.zeros((5, 5), bool)
    m[4, 0] = True  # reached last in raster order
    m[0, 3:] = True
    m[2, 1] = True
    lab = connected_components(m)
    assert lab[0, 3] == 1 and lab[2, 1] == 2 and lab[4, 0] == 3


def test_conn_identity_cases():
    x = np.random.default_rng(2).random((8, 8))
    assert connectivity_error(x, x) == 0
    blob = np.zeros((8, 8))
    blob[2:5, 2:6] = 1
    assert connectivity_error(blob, blob.copy()) == 0


def test_conn_matches_oracle_island():
    pred, gt = conn_case_8x8()
    expected = conn_oracle(pred, gt)
    assert expected > 0
    assert connectivity_error(pred, gt) == pytest.approx(expected, abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(arrays(np.float64, (6, 6), elements=unit), arrays(np.float64, (6, 6), elements=unit))
def test_conn_matches_oracle_random(p, g):
    assert connectivity_error(p, g) == pytest.approx(conn_oracle(p, g), abs=1e-9)


def test_threshold_levels():
    lv = threshold_levels(0.1)
    assert len(lv) == 11 and lv[0] == 0 and lv[-1] == pytest.approx(1.0)


def test_evaluate_pair_consistency():
    rng = np.random.default_rng(3)
    p, g = rng.random((16, 16)), rng.random((16, 16))
    r = evaluate_pair(p, g)
    assert r.mse == mse(p, g) and r.mae == mae(p, g) and r.sad == sad(p, g)
    assert r.grad == gradient_error(p, g) and r.conn == connectivity_error(p, g)
    assert r.mse_scaled == 1000 * r.mse and r.mae_scaled == 1000 * r.mae
    assert r.pixel_count == 256
    z = evaluate_pair(g, g)
    assert all(getattr(z, n) == 0 for n in ("mse", "mae", "sad", "grad", "conn"))


def test_evaluate_pair_4x4_small_grad_support():
    # 4x4 is below the default 9x9 derivative-filter support
    rng = np.random.default_rng(4)
    with pytest.raises(DimensionMismatch):
        evaluate_pair(rng.random((4, 4)), rng.random((4, 4)))
    p, g = rng.random((4, 4)), rng.random((4, 4))
    r = evaluate_pair(p, g, sigma=0.3)
    assert r.grad == gradient_error(p, g, sigma=0.3)
    assert r.conn == connectivity_error(p, g)


def test_mean_report():
    a = MetricsReport(0.001, 0.01, 0.1, 0.2, 0.3, 1.0, 10.0, 100)
    b = MetricsReport(0.003, 0.03, 0.3, 0.4, 0.5, 3.0, 30.0, 100)
    m = mean_report([a, b])
    assert m.mse == pytest.approx(0.002)
    assert mean_report([a]) == a
    assert mean_report([a, a]) == a
    assert mean_report([]) is None


def test_evaluate_dataset(tmp_path):
    rng = np.random.default_rng(6)
    pairs = []
    for i in range(3):
        g = rng.random((16, 16))
        p = np.clip(g + rng.normal(0, 0.05, g.shape), 0, 1)
        save_image(g, tmp_path / f"g{i}.png", 16)
        save_image(p, tmp_path / f"p{i}.png", 16)
        pairs.append((f"p{i}", tmp_path / f"p{i}.png", tmp_path / f"g{i}.png"))
    pairs.append(("missing", tmp_path / "nope.png", tmp_path / "g0.png"))
    serial = evaluate_dataset(pairs)
    threaded = evaluate_dataset(pairs, jobs=3)
    assert [r.name for r in threaded.rows] == ["p0", "p1", "p2", "missing"]
    assert len(serial.failures) == 1 and "file-not-found" in serial.failures[0].error
    ok = [r.report for r in serial.rows if r.report]
    for name in ("mse", "mae", "sad", "grad", "conn"):
        assert getattr(serial.aggregate, name) == pytest.approx(np.mean([getattr(r, name) for r in ok]), abs=1e-9)
        assert getattr(threaded.aggregate, name) == getattr(serial.aggregate, name)
