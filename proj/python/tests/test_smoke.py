import itertools
import math

import numpy as np
import pytest
from scipy import stats

import bvqa


def test_tensor_file_round_trip(tmp_path):
    a = np.arange(24, dtype=np.float32).reshape(2, 3, 4) / 7
    path = str(tmp_path / "x.bvqf")
    bvqa.write_tensor(path, a)
    b = bvqa.read_tensor(path)
    assert b.dtype == np.float32
    assert np.array_equal(a, b)
    raw = (tmp_path / "x.bvqf").read_bytes()
    assert raw[:4] == b"BVQF"
    assert len(raw) == 16 + 8 * 3 + 4 * 24


def test_truncated_tensor_file_is_data_error(tmp_path):
    path = tmp_path / "bad.bvqf"
    bvqa.write_tensor(str(path), np.ones(4, dtype=np.float32))
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(bvqa.DataError):
        bvqa.read_tensor(str(path))


def test_gap_gsp_pool_matches_numpy():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 4, 5, 6))
    out = bvqa.gap_gsp_pool(x)
    ref = np.concatenate([x.mean(axis=(1, 2)), x.std(axis=(1, 2))], axis=1)
    np.testing.assert_allclose(out, ref, atol=1e-12)


def test_hysteresis_example():
    np.testing.assert_allclose(bvqa.hysteresis_pool([3.0, 1.0]), [2.1192029, 2.0], atol=1e-6)
    assert bvqa.video_score([3.0, 1.0]) == pytest.approx(2.059601, abs=1e-6)


def test_soft_rank_small_epsilon_is_hard_rank():
    s = np.array([0.3, -1.2, 2.5, 0.9])
    np.testing.assert_allclose(bvqa.soft_rank(s, 1e-3), [3, 4, 1, 2], atol=1e-9)
    np.testing.assert_allclose(bvqa.hard_rank(s), [3, 4, 1, 2])


def test_soft_rank_is_projection_onto_permutahedron():
    rng = np.random.default_rng(1)
    s = rng.normal(size=5)
    eps = 0.7
    r = bvqa.soft_rank(s, eps)
    z = -s / eps
    # Projection optimality against every vertex.
    for perm in itertools.permutations(range(1, 6)):
        assert np.dot(z - r, np.array(perm) - r) <= 1e-9


def test_fidelity_symmetry():
    p = np.array([0.1, 0.5, 0.75])
    q = np.array([0.2, 0.5, 0.25])
    np.testing.assert_array_equal(bvqa.fidelity_loss(p, q), bvqa.fidelity_loss(q, p))
    np.testing.assert_allclose(bvqa.fidelity_loss(p, p), 0.0, atol=1e-15)


def test_pair_probability():
    ref = stats.norm.cdf((2.0 - 1.0) / math.sqrt(0.5**2 + 0.25**2))
    assert bvqa.pair_probability(2.0, 1.0, 0.5, 0.25) == pytest.approx(ref, abs=1e-12)


def test_plcc_loss_and_gradient():
    x = np.array([1.0, 2.0, 4.0, 3.5])
    y = np.array([1.5, 2.0, 3.0, 4.0])
    loss, grad = bvqa.plcc_loss(x, y)
    assert loss == pytest.approx((1 - stats.pearsonr(x, y)[0]) / 2, abs=1e-12)
    h = 1e-6
    for i in range(len(x)):
        d = np.zeros_like(x)
        d[i] = h
        fd = (bvqa.plcc_loss(x + d, y)[0] - bvqa.plcc_loss(x - d, y)[0]) / (2 * h)
        assert grad[i] == pytest.approx(fd, abs=1e-7)


def test_mixed_loss_is_sum_of_parts():
    s = np.array([0.1, 0.7, -0.4, 1.3, 0.2])
    y = np.array([2.0, 3.0, 1.0, 5.0, 2.5])
    mixed, _ = bvqa.mixed_loss(s, y, (1.0, 0.0, 1.0, 0.0), 0.5, 1.0)
    plcc, _ = bvqa.plcc_loss(bvqa.logistic_map(s, (1.0, 0.0, 1.0, 0.0)), y)
    srcc, _ = bvqa.srcc_loss(s, y, 1.0)
    assert mixed == pytest.approx(plcc + 0.5 * srcc, abs=1e-12)


def test_evaluation_and_metrics():
    rng = np.random.default_rng(2)
    mos = rng.uniform(1, 5, size=40)
    pred = mos + rng.normal(scale=0.3, size=40)
    assert bvqa.spearman(pred, mos) == pytest.approx(stats.spearmanr(pred, mos)[0], abs=1e-12)
    assert bvqa.spearman(np.ones(5), np.arange(5.0)) is None
    report = bvqa.evaluate_predictions(pred, mos, ["a"] * 20 + ["b"] * 20)
    assert [d["database_id"] for d in report["databases"]] == ["a", "b"]
    assert report["weighted_srcc"] == pytest.approx(
        np.mean([stats.spearmanr(pred[:20], mos[:20])[0], stats.spearmanr(pred[20:], mos[20:])[0]]), abs=1e-12)


def test_coral_and_ensemble():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(10, 3))
    b = rng.normal(size=(12, 3)) * 2
    ref = np.sum((np.cov(a, rowvar=False) - np.cov(b, rowvar=False)) ** 2) / (4 * 9)
    assert bvqa.coral_distance(a, b) == pytest.approx(ref, rel=1e-12)
    np.testing.assert_allclose(bvqa.ensemble([1.0, 2.0], [3.0, 6.0], 0.25), [2.5, 5.0])


def test_non_finite_input_is_numeric_error():
    with pytest.raises(bvqa.NumericError):
        bvqa.hysteresis_pool([1.0, float("nan")])


def test_gradcheck_passes():
    results = bvqa.run_gradcheck(cases=2, seed=5)
    assert results and all(r["passed"] for r in results)


def test_cli_in_process():
    code, out, _ = bvqa.run_cli(["--help"])
    assert code == 0 and "train" in out
    code, _, err = bvqa.run_cli(["no-such-command"])
    assert code == 2
