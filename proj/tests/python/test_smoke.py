import math

import pytest

import dvitcore


def test_softmax():
    out = dvitcore.softmax([math.log(1), math.log(2), math.log(3)])
    assert out == pytest.approx([1 / 6, 2 / 6, 3 / 6])
    assert sum(dvitcore.softmax([1000.0, 0.0])) == pytest.approx(1.0)


def test_matmul():
    assert dvitcore.matmul([[1, 2], [3, 4]], [[0], [1]]) == [[2.0], [4.0]]


def test_attention_uniform_keys():
    q = [[0.3, -0.2], [1.0, 0.5]]
    k = [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]
    v = [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]
    out = dvitcore.attention(q, k, v)
    for row in out:
        assert row == pytest.approx([3.0, 4.0])


def test_heatmap_round_trip():
    heat, clamped = dvitcore.encode_gaussian([[5.25, 7.75]], 16, 16, 1.5)
    assert not clamped
    assert sum(heat) == pytest.approx(1.0)
    mu = dvitcore.soft_argmax(heat, 1, 16, 16)
    assert mu[0][0] == pytest.approx(5.25, abs=0.1)
    assert mu[0][1] == pytest.approx(7.75, abs=0.1)


def test_losses():
    assert dvitcore.smooth_l1([[0.0, 0.0]], [[0.0, 0.0]], 1.0) == 0.0
    assert dvitcore.smooth_l1([[3.0, 0.0]], [[0.0, 0.0]], 1.0) == pytest.approx(2.5)
    n = 4 * 4
    assert dvitcore.adaptive_wing([0.0] * n, [0.0] * n, 1, 4, 4) == 0.0
    assert dvitcore.adaptive_wing([0.3] * n, [0.0] * n, 1, 4, 4) > 0.0


def test_stage_weights():
    w = dvitcore.stage_weights(8, 1.2)
    assert w[-1] == pytest.approx(1.0)
    assert w[0] / w[-1] == pytest.approx(1.2 ** -7)


def test_metrics():
    assert dvitcore.nme([[0.0, 3.0]], [[4.0, 0.0]], 10.0) == pytest.approx(50.0)
    nmes = [5.0, 15.0, 25.0]
    assert dvitcore.failure_rate(nmes, 10.0) == pytest.approx(200.0 / 3)
    assert 0.0 <= dvitcore.auc_ced(nmes, 10.0) <= 1.0


def test_lr_schedule():
    assert dvitcore.lr_schedule(0, 1e-3) == pytest.approx(1e-3)
    assert dvitcore.lr_schedule(200, 1e-3) == pytest.approx(5e-4)


def test_dimension_error():
    with pytest.raises(dvitcore.DimensionError):
        dvitcore.matmul([[1, 2]], [[1, 2]])


def test_count_parameters_affine_in_blocks():
    counts = [dvitcore.count_parameters("tiny", b) for b in (1, 2, 3, 4)]
    deltas = [b - a for a, b in zip(counts, counts[1:])]
    assert deltas[0] == deltas[1] == deltas[2]
