import numpy as np
import pytest

from dreamopt.data import RobustLogRegData, load_libsvm, parse_libsvm, partition, write_libsvm
from dreamopt.errors import InvalidParameterError, ParseError


def test_parse_basic_rows():
    feats, labels = parse_libsvm(["+1 1:0.5 3:2", "-1 2:1e-1", "0 4:7  # comment", "", "# only"])
    assert np.array_equal(labels, [1.0, -1.0, -1.0])
    expect = np.zeros((3, 4))
    expect[0, [0, 2]] = [0.5, 2.0]
    expect[1, 1] = 0.1
    expect[2, 3] = 7.0
    assert np.array_equal(feats, expect)


def test_parse_fixed_width_and_empty_row():
    feats, labels = parse_libsvm(["1", "-1 2:3"], d_x=5)
    assert feats.shape == (2, 5)
    assert not feats[0].any()


@pytest.mark.parametrize("lines,lineno", [
    (["1 1:2", "2 1:3"], 2),
    (["1 1:2", "-1 0:3"], 2),
    (["1 a:2"], 1),
    (["1 3"], 1),
    (["x 1:1"], 1),
    (["1 1:1", "", "1 9:1"], 3),
])
def test_parse_errors_carry_line_numbers(lines, lineno):
    with pytest.raises(ParseError) as info:
        parse_libsvm(lines, d_x=4)
    assert info.value.lineno == lineno
    assert str(info.value).startswith(f"line {lineno}:")


def test_parse_empty_input():
    with pytest.raises(ParseError):
        parse_libsvm(["# nothing", ""])


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    feats = rng.normal(size=(20, 6)) * (rng.random((20, 6)) < 0.5)
    labels = rng.choice([-1.0, 1.0], size=20)
    path = tmp_path / "x.libsvm"
    write_libsvm(path, feats, labels)
    data = load_libsvm(path, 6)
    assert np.array_equal(data.features, feats)
    assert np.array_equal(data.labels, labels)


def test_bundled_digits_file():
    import os

    here = os.path.dirname(os.path.abspath(__file__))
    data = load_libsvm(os.path.join(here, "data", "digits_binary.libsvm"), 64)
    assert data.features.shape == (1797, 64)
    assert set(np.unique(data.labels)) == {-1.0, 1.0}
    assert data.features.min() >= 0 and data.features.max() <= 1


def test_partition_is_seeded_shuffle_then_split():
    data = RobustLogRegData(np.arange(12.0)[:, None], np.ones(12))
    parts = partition(data, 3, seed=5).partition
    order = np.random.default_rng(5).permutation(12)
    assert np.array_equal(parts, order.reshape(3, 4))
    assert np.array_equal(np.sort(parts.ravel()), np.arange(12))


def test_partition_uneven():
    data = RobustLogRegData(np.arange(10.0)[:, None], np.ones(10))
    with pytest.raises(InvalidParameterError):
        partition(data, 4)
    padded = partition(data, 4, pad=True)
    assert padded.partition.shape == (4, 3)
    assert padded.n_samples == 12
    # the two extra rows duplicate existing samples
    assert set(padded.features[10:, 0]) <= set(range(10))
    with pytest.raises(InvalidParameterError):
        partition(data, 0)


def test_subset():
    data = RobustLogRegData(np.arange(10.0)[:, None], np.arange(10.0))
    sub = data.subset(4, seed=1)
    assert sub.n_samples == 4 and sub.partition is None
    assert np.array_equal(sub.features[:, 0], sub.labels)
    with pytest.raises(InvalidParameterError):
        data.subset(11)
