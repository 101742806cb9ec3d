from dataclasses import fields

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from ehmm.core.errors import StorageError, UsageError
from ehmm.core.model import StateSeq
from ehmm.core.rng import RngStream
from ehmm.models import RunConfig
from ehmm.services.chain import ChainRecord
from ehmm.services.storage import CsvStore
from ehmm.services.tanh_model import simulate


@pytest.fixture
def store():
    return CsvStore()


def test_data_round_trip_is_exact(store, tmp_path, demo_params):
    x, y = simulate(demo_params, 25, RngStream(3))
    path = store.write_data(tmp_path / "data.csv", x, y)
    x2, y2 = store.read_data(path)
    assert np.array_equal(x.values, x2.values)
    assert np.array_equal(y.values, y2.values)
    assert path.read_bytes().count(b"\r") == 0
    assert path.read_text().splitlines()[0] == "t,x,y"


def test_missing_file_is_storage_error(store, tmp_path):
    with pytest.raises(StorageError):
        store.read_data(tmp_path / "nope.csv")


def test_missing_columns_is_usage_error(store, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,x\n0,1.0\n")
    with pytest.raises(UsageError):
        store.read_data(path)


def test_unordered_times_rejected(store, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,x,y\n1,1.0,2.0\n0,1.0,2.0\n")
    with pytest.raises(UsageError):
        store.read_data(path)


def test_samples_round_trip(store, tmp_path):
    samples = np.array([[0.1, -0.2, 0.3], [1.5, 2.5, -3.5]])
    rec = ChainRecord.from_samples([4, 6], samples)
    path = store.write_samples(tmp_path / "samples.csv", rec)
    back = store.read_samples(path)
    assert back.sample_iters.tolist() == [4, 6]
    assert np.array_equal(back.samples, samples)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["iter", "t", "x"]
    assert len(frame) == 6


def test_every_per_iteration_series_is_written(store, tmp_path):
    rec = ChainRecord(
        sample_iters=np.array([3], dtype=np.int64),
        samples=np.array([[0.5, -0.5]]),
        log_joint=np.array([-3.0, -2.5, -2.0]),
        switches=np.array([1, 1, 0], dtype=np.int64),
        accept_rate=np.array([0.5, 1.0, 0.0]),
        inner_ops=np.array([8, 8, 8], dtype=np.int64),
        seconds=np.array([0.1, 0.2, 0.3]),
    )
    summary = pd.read_csv(store.write_summary(tmp_path / "summary.csv", rec))
    timing = pd.read_csv(store.write_timing(tmp_path / "timing.csv", rec))
    per_iteration = {f.name for f in fields(ChainRecord)} - {"sample_iters", "samples"}
    assert per_iteration == (set(summary.columns) | set(timing.columns)) - {"iter"}
    assert summary["iter"].tolist() == [1, 2, 3]
    assert summary["switches"].tolist() == [1, 1, 0]
    assert timing["seconds"].tolist() == pytest.approx([0.1, 0.2, 0.3])


def test_empty_samples_file(store, tmp_path):
    path = tmp_path / "samples.csv"
    path.write_text("iter,t,x\n")
    assert store.read_samples(path).n_stored == 0


def test_diag_is_padded(store, tmp_path):
    path = store.write_diag(tmp_path / "diag.csv", {"a": np.arange(3.0), "b": np.array([1.0])})
    lines = path.read_text().splitlines()
    assert lines[0] == "row,a,b"
    assert lines[-1] == "2,2,"


def test_run_config_file(store, tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("# demo\nn = 50\nK = 4\nprobe = 3 7\nstrict = true\n")
    values = store.read_run_config(path)
    cfg = RunConfig(**values)
    assert (cfg.n, cfg.K, cfg.probe, cfg.strict) == (50, 4, [3, 7], True)
    with pytest.raises(StorageError):
        store.read_run_config(tmp_path / "missing.conf")


def test_resolved_config_reloads(store, tmp_path):
    cfg = RunConfig(n=12, sigma=1.25, probe=[1, 2], out=str(tmp_path))
    path = store.write_resolved_config(tmp_path / "config_resolved_sample.txt", cfg, "sample")
    again = RunConfig(**store.read_run_config(path))
    assert again == cfg


def test_run_config_validation():
    with pytest.raises(ValidationError):
        RunConfig(iters=5, burnin=6)
    with pytest.raises(ValidationError):
        RunConfig(init="somewhere")
    with pytest.raises(ValidationError):
        RunConfig(grid_lo=1.0, grid_hi=-1.0)
    with pytest.raises(ValidationError):
        RunConfig(bogus=1)
    assert RunConfig(init="file=x0.csv").init == "file=x0.csv"
    assert RunConfig(dump_pools="").dump_pools is None


def test_run_config_to_flat():
    flat = RunConfig(sigma=2.5, probe=[200, 675], strict=True).to_flat()
    assert flat["sigma"] == "2.5"
    assert flat["probe"] == "200 675"
    assert flat["strict"] == "true"
    assert flat["sampler"] == "ehmm"
    assert flat["data"] == ""


def test_read_states(store, tmp_path):
    path = tmp_path / "x0.csv"
    store.write_frame(pd.DataFrame({"t": [0, 1], "x": [0.5, -0.5]}), path)
    assert store.read_states(path).equals(StateSeq([0.5, -0.5]))
