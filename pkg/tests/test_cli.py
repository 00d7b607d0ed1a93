import json

import numpy as np
import pytest

from telekf import dataio, sysid
from telekf.cli import main

from conftest import random_stable_system


@pytest.fixture()
def dataset_csv(tmp_path):
    rng = np.random.default_rng(42)
    true = random_stable_system(rng, 2, 2, 2)
    u = rng.standard_normal((800, 2))
    y = sysid.simulate(true, u)
    path = tmp_path / "train.csv"
    dataio.save_dataset(dataio.TrajectoryDataset(inputs=u, outputs=y,
                                                 dt=1 / 30), path)
    return path


@pytest.fixture()
def validation_csv(tmp_path, dataset_csv):
    ds = dataio.load_dataset(dataset_csv)
    # held-out slice of the same trajectory, re-saved as its own file
    held = dataio.TrajectoryDataset(inputs=ds.inputs[400:],
                                    outputs=ds.outputs[400:], dt=ds.dt)
    path = tmp_path / "val.csv"
    dataio.save_dataset(held, path)
    return path


class TestIdentify:
    def test_end_to_end(self, tmp_path, dataset_csv, capsys):
        out = tmp_path / "out"
        rc = main(["identify", "--dataset", str(dataset_csv),
                   "--out", str(out), "--block-rows", "10"])
        assert rc == 0
        assert (out / "model.json").exists()
        assert (out / "singular_values.csv").exists()
        log = json.loads((out / "identify_log.json").read_text())
        # two true states plus one constant-tracking mode: min-max scaling
        # offsets the signals, and the offset shows up as a DC state
        assert log["order"] == 3
        assert "order 3" in capsys.readouterr().out
        model = sysid.StateSpaceModel.load(out / "model.json")
        assert model.order == 3
        assert model.norm_params is not None

    def test_forced_order(self, tmp_path, dataset_csv):
        out = tmp_path / "out"
        rc = main(["identify", "--dataset", str(dataset_csv),
                   "--out", str(out), "--block-rows", "10", "--order", "1"])
        assert rc == 0
        log = json.loads((out / "identify_log.json").read_text())
        assert log["order"] == 1
        assert log["criterion"] == "fixed"

    def test_stamp_in_scree(self, tmp_path, dataset_csv):
        out = tmp_path / "out"
        main(["identify", "--dataset", str(dataset_csv), "--out", str(out),
              "--block-rows", "10"])
        first = (out / "singular_values.csv").read_text().splitlines()[0]
        assert first.startswith("# config_hash=")
        assert "metric_def=" in first

    def test_block_rows_too_large(self, tmp_path, dataset_csv, capsys):
        rc = main(["identify", "--dataset", str(dataset_csv),
                   "--out", str(tmp_path / "o"), "--block-rows", "400"])
        assert rc == 2
        assert "samples" in capsys.readouterr().err


class TestValidate:
    def test_saved_model_roundtrip(self, tmp_path, dataset_csv,
                                   validation_csv, capsys):
        out = tmp_path / "out"
        assert main(["identify", "--dataset", str(dataset_csv),
                     "--out", str(out), "--block-rows", "10"]) == 0
        rc = main(["validate", "--model", str(out / "model.json"),
                   "--validation-dataset", str(validation_csv),
                   "--out", str(out)])
        assert rc == 0
        report = json.loads((out / "fit_report.json").read_text())
        assert len(report["accuracy_pct"]) == 2
        assert all(0.0 <= a <= 100.0 for a in report["accuracy_pct"])
        assert report["metric_def"] == "nrmse_range"
        assert "validation accuracy" in capsys.readouterr().out

    def test_missing_validation_dataset(self, tmp_path, dataset_csv):
        rc = main(["validate", "--dataset", str(dataset_csv),
                   "--out", str(tmp_path / "o"), "--block-rows", "10"])
        assert rc == 1


class TestSweep:
    def test_end_to_end(self, tmp_path, dataset_csv):
        out = tmp_path / "out"
        rc = main(["sweep", "--dataset", str(dataset_csv), "--out", str(out),
                   "--block-rows", "10", "--seed", "7"])
        assert rc == 0
        lines = (out / "sweep_summary.csv").read_text().splitlines()
        assert lines[0].startswith("# config_hash=")
        assert len(lines) == 8  # stamp + header + six scenarios
        assert all(line.endswith("ok") for line in lines[2:])
        # one run export and one report per scenario
        assert len(list(out.glob("*_run.csv"))) == 6
        assert len(list(out.glob("*_report.json"))) == 6

    def test_deterministic(self, tmp_path, dataset_csv):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        cfg = {"dataset": str(dataset_csv), "block_rows": 10,
               "master_seed": 3}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        assert main(["sweep", "--config", str(cfg_path),
                     "--out", str(out1)]) == 0
        assert main(["sweep", "--config", str(cfg_path),
                     "--out", str(out2)]) == 0
        a = (out1 / "sweep_summary.csv").read_text().splitlines()[1:]
        b = (out2 / "sweep_summary.csv").read_text().splitlines()[1:]
        assert a == b

    def test_seed_changes_results(self, tmp_path, dataset_csv):
        outs = []
        for seed in ("1", "2"):
            out = tmp_path / seed
            main(["sweep", "--dataset", str(dataset_csv), "--out", str(out),
                  "--block-rows", "10", "--seed", seed])
            outs.append((out / "sweep_summary.csv").read_text()
                        .splitlines()[2:])
        assert outs[0] != outs[1]

    def test_custom_scenario_list(self, tmp_path, dataset_csv):
        scenarios = [{"nd_ms": 0.0, "nj_ms": 0.0, "np_pct": 0.0,
                      "label": "clean"}]
        sc_path = tmp_path / "scen.json"
        sc_path.write_text(json.dumps(scenarios))
        out = tmp_path / "out"
        rc = main(["sweep", "--dataset", str(dataset_csv), "--out", str(out),
                   "--block-rows", "10", "--scenarios", str(sc_path)])
        assert rc == 0
        lines = (out / "sweep_summary.csv").read_text().splitlines()
        assert len(lines) == 3
        assert lines[2].startswith("clean,")
        assert (out / "clean_run.csv").exists()

    def test_empty_scenario_list(self, tmp_path, dataset_csv):
        sc_path = tmp_path / "scen.json"
        sc_path.write_text("[]")
        out = tmp_path / "out"
        rc = main(["sweep", "--dataset", str(dataset_csv), "--out", str(out),
                   "--block-rows", "10", "--scenarios", str(sc_path)])
        assert rc == 0
        lines = (out / "sweep_summary.csv").read_text().splitlines()
        assert len(lines) == 2  # stamp + header only


class TestImpair:
    def test_export(self, tmp_path, dataset_csv):
        out = tmp_path / "out"
        rc = main(["impair", "--dataset", str(dataset_csv), "--out", str(out),
                   "--scenario-index", "2"])
        assert rc == 0
        lines = (out / "impaired.csv").read_text().splitlines()
        assert lines[1].split(",")[0] == "k"
        assert len(lines) == 802

    def test_bad_index(self, tmp_path, dataset_csv, capsys):
        rc = main(["impair", "--dataset", str(dataset_csv),
                   "--out", str(tmp_path / "o"), "--scenario-index", "9"])
        assert rc == 1
        assert "scenario index" in capsys.readouterr().err


class TestErrors:
    def test_missing_dataset_is_data_error(self, tmp_path):
        rc = main(["identify", "--dataset", str(tmp_path / "nope.csv"),
                   "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_no_dataset_is_config_error(self, tmp_path):
        rc = main(["identify", "--out", str(tmp_path / "o")])
        assert rc == 1

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"datset": "x.csv"}))
        rc = main(["identify", "--config", str(cfg)])
        assert rc == 1
        assert "unknown config keys" in capsys.readouterr().err

    def test_degenerate_data_is_numerical_error(self, tmp_path):
        n = 200
        zeros = np.zeros((n, 1))
        path = tmp_path / "flatline.csv"
        # constant-input records normalize to all-zero input, which cannot
        # excite any dynamics
        dataio.save_dataset(
            dataio.TrajectoryDataset(
                inputs=zeros + 1.0,
                outputs=np.sin(np.arange(n)).reshape(-1, 1)),
            path)
        rc = main(["identify", "--dataset", str(path),
                   "--out", str(tmp_path / "o"), "--block-rows", "5"])
        assert rc == 3


class TestCalibrate:
    def test_end_to_end(self, tmp_path, capsys):
        out = tmp_path / "out"
        rc = main(["calibrate-accuracy", "--out", str(out)])
        assert rc == 0
        doc = json.loads((out / "accuracy_calibration.json").read_text())
        assert doc["best"] in {c["metric_def"] for c in doc["candidates"]}
        assert "best-fitting accuracy formula" in capsys.readouterr().out
