import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from telekf import dataio
from telekf.errors import DataError


def write_csv(path, text):
    path.write_text(text)
    return path


class TestLoadDataset:
    def test_minimal_two_rows(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "u:a,y:b\n1,2\n3,4\n")
        ds = dataio.load_dataset(p)
        assert ds.n_samples == 2
        assert ds.m_in == 1 and ds.m_out == 1
        np.testing.assert_array_equal(ds.inputs.ravel(), [1, 3])
        np.testing.assert_array_equal(ds.outputs.ravel(), [2, 4])

    def test_jigsaws_scale(self, tmp_path):
        rng = np.random.default_rng(0)
        header = "t," + ",".join(f"u:m{i}" for i in range(3)) + "," + \
            ",".join(f"y:s{i}" for i in range(3))
        lines = [header]
        for k in range(1240):
            vals = [k / 30.0] + list(rng.standard_normal(6))
            lines.append(",".join(str(v) for v in vals))
        p = write_csv(tmp_path / "j.csv", "\n".join(lines) + "\n")
        ds = dataio.load_dataset(p)
        assert ds.n_samples == 1240
        assert ds.m_in == 3 and ds.m_out == 3
        assert ds.dt == pytest.approx(1 / 30)

    def test_nan_is_hard_error(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "u:a,y:b\n1,2\nnan,4\n")
        with pytest.raises(DataError, match="non-finite value at row 2, column 0"):
            dataio.load_dataset(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="cannot open"):
            dataio.load_dataset(tmp_path / "absent.csv")

    def test_column_count_mismatch(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "u:a,y:b\n1,2,3\n4,5,6\n")
        with pytest.raises(DataError, match="fields"):
            dataio.load_dataset(p)

    def test_missing_role_prefix(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "a,y:b\n1,2\n3,4\n")
        with pytest.raises(DataError, match="role prefix"):
            dataio.load_dataset(p)

    def test_single_row_rejected(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "u:a,y:b\n1,2\n")
        with pytest.raises(DataError, match="fewer than 2"):
            dataio.load_dataset(p)

    def test_roundtrip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(1)
        ds = dataio.TrajectoryDataset(inputs=rng.standard_normal((50, 2)),
                                      outputs=rng.standard_normal((50, 3)),
                                      dt=0.01)
        p1 = tmp_path / "a.csv"
        p2 = tmp_path / "b.csv"
        dataio.save_dataset(ds, p1)
        loaded = dataio.load_dataset(p1)
        np.testing.assert_array_equal(loaded.inputs, ds.inputs)
        np.testing.assert_array_equal(loaded.outputs, ds.outputs)
        dataio.save_dataset(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestNormalize:
    def make(self, col, out=None):
        col = np.asarray(col, dtype=float)
        out = col if out is None else np.asarray(out, dtype=float)
        return dataio.TrajectoryDataset(inputs=col.reshape(-1, 1),
                                        outputs=out.reshape(-1, 1))

    def test_basic_channel(self):
        norm, _ = dataio.normalize(self.make([0, 5, 10]))
        np.testing.assert_allclose(norm.inputs.ravel(), [0, 0.5, 1])

    def test_negative_range(self):
        norm, _ = dataio.normalize(self.make([-1, 0, 1]))
        np.testing.assert_allclose(norm.inputs.ravel(), [0, 0.5, 1])

    def test_constant_channel_flagged(self):
        norm, params = dataio.normalize(self.make([3, 3, 3], [0, 1, 2]))
        np.testing.assert_array_equal(norm.inputs.ravel(), [0, 0, 0])
        assert params.inputs.constant[0]
        assert not params.outputs.constant[0]

    def test_idempotent(self, rng):
        ds = dataio.TrajectoryDataset(inputs=rng.standard_normal((40, 2)),
                                      outputs=rng.standard_normal((40, 2)))
        once, _ = dataio.normalize(ds)
        twice, _ = dataio.normalize(once)
        np.testing.assert_array_equal(once.inputs, twice.inputs)
        np.testing.assert_array_equal(once.outputs, twice.outputs)

    def test_params_json_roundtrip(self, rng, tmp_path):
        ds = dataio.TrajectoryDataset(inputs=rng.standard_normal((10, 2)),
                                      outputs=rng.standard_normal((10, 1)))
        _, params = dataio.normalize(ds)
        p = tmp_path / "norm.json"
        params.save(p)
        loaded = dataio.NormalizationParams.load(p)
        np.testing.assert_array_equal(loaded.inputs.mins, params.inputs.mins)
        np.testing.assert_array_equal(loaded.outputs.maxs, params.outputs.maxs)
        assert loaded.inputs.role == "input"


class TestDenormalize:
    def test_known_values(self):
        sc = dataio.ChannelScaling(role="output", names=("a",),
                                   mins=np.array([0.0]), maxs=np.array([10.0]))
        np.testing.assert_allclose(
            dataio.denormalize(np.array([[0.0], [0.5], [1.0]]), sc).ravel(),
            [0, 5, 10])

    def test_symmetric_range(self):
        sc = dataio.ChannelScaling(role="output", names=("a",),
                                   mins=np.array([-2.0]), maxs=np.array([2.0]))
        np.testing.assert_allclose(
            dataio.denormalize(np.array([[0.25]]), sc), [[-1.0]])

    def test_channel_mismatch(self):
        sc = dataio.ChannelScaling(role="output", names=("a",),
                                   mins=np.array([0.0]), maxs=np.array([1.0]))
        with pytest.raises(DataError):
            dataio.denormalize(np.zeros((3, 2)), sc)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (7, 3),
                  elements=st.floats(-1e6, 1e6, allow_nan=False)))
    def test_roundtrip_property(self, x):
        ds = dataio.TrajectoryDataset(inputs=x, outputs=x)
        norm, params = dataio.normalize(ds)
        back = dataio.denormalize(norm.outputs, params.outputs)
        nonconst = ~params.outputs.constant
        # error scales with the channel range, not the individual value
        spans = (params.outputs.maxs - params.outputs.mins)[nonconst]
        scale = np.maximum(spans, 1.0)
        assert np.all(np.abs(back[:, nonconst] - x[:, nonconst]) / scale < 1e-12)


class TestHankel:
    def test_scalar_by_hand(self):
        h = dataio.build_hankel(np.array([1.0, 2, 3, 4, 5]), 2, 3)
        np.testing.assert_array_equal(h.data, [[1, 2, 3], [2, 3, 4]])

    def test_single_column(self):
        h = dataio.build_hankel(np.array([1.0, 2, 3]), 3, 1)
        np.testing.assert_array_equal(h.data, [[1], [2], [3]])

    def test_jigsaws_scale_dimensions(self, rng):
        series = rng.standard_normal((1240, 3))
        h = dataio.build_hankel(series, 20, 1221)
        assert h.data.shape == (60, 1221)
        # independent index walk: entry (s*3+i, j) == series[s+j, i]
        for s in (0, 7, 19):
            for j in (0, 500, 1220):
                for i in range(3):
                    assert h.data[s * 3 + i, j] == series[s + j, i]

    def test_insufficient_samples(self):
        with pytest.raises(DataError, match="too short"):
            dataio.build_hankel(np.arange(4.0), 3, 3)

    def test_antidiagonal_property(self, rng):
        series = rng.standard_normal((30, 2))
        h = dataio.build_hankel(series, 5, 20)
        for s in range(4):
            np.testing.assert_array_equal(h.block_row(s + 1)[:, :-1],
                                          h.block_row(s)[:, 1:])
