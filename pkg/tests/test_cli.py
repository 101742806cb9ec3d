import pandas as pd
from click.testing import CliRunner

from ehmm.cli.main import main


def _run(*args):
    runner = CliRunner()
    return runner.invoke(main, ["--log-level", "WARNING", *[str(a) for a in args]])


def _simulate(out, n=40, seed=5):
    result = _run("simulate", "--out", out, "--n", n, "--seed", seed)
    assert result.exit_code == 0, result.output
    return out / "data.csv"


def test_simulate_writes_data(tmp_path):
    path = _simulate(tmp_path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["t", "x", "y"]
    assert frame["t"].tolist() == list(range(40))
    resolved = (tmp_path / "config_resolved_simulate.txt").read_text()
    assert "n = 40" in resolved
    assert "seed = 5" in resolved


def test_full_pipeline(tmp_path):
    _simulate(tmp_path)
    sample = _run("sample", "--out", tmp_path, "--n", 40, "--K", 4, "--iters", 6, "--seed", 3)
    assert sample.exit_code == 0, sample.output
    oracle = _run("oracle", "--out", tmp_path, "--n", 40, "--grid", -5, 5, 200)
    assert oracle.exit_code == 0, oracle.output
    report = _run(
        "report", "--out", tmp_path, "--n", 40, "--probe", 5, "--probe", 20, "--max-lag", 3
    )
    assert report.exit_code == 0, report.output

    samples = pd.read_csv(tmp_path / "samples.csv")
    assert len(samples) == 6 * 40
    summary = pd.read_csv(tmp_path / "summary.csv")
    assert list(summary.columns) == ["iter", "log_joint", "switches", "accept_rate", "inner_ops"]
    assert summary["inner_ops"].tolist() == [2 * 39 * 16] * 6
    assert "seconds" in pd.read_csv(tmp_path / "timing.csv").columns

    diag = pd.read_csv(tmp_path / "diag.csv")
    assert list(diag.columns) == ["row", "oracle_error", "trace_5", "acf_5", "trace_20", "acf_20"]
    assert len(diag) == 40
    assert diag["trace_5"].notna().sum() == 6
    assert diag["oracle_error"].between(0, 1).all()
    summary = pd.read_csv(tmp_path / "diag_summary.csv")
    assert summary["probe"].tolist() == [5, 20]


def test_same_seed_gives_identical_files(tmp_path):
    data = _simulate(tmp_path / "data")
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        result = _run("sample", "--out", out, "--data", data, "--n", 40, "--K", 3, "--iters", 4, "--seed", 9)
        assert result.exit_code == 0, result.output
        outputs.append(((out / "samples.csv").read_bytes(), (out / "summary.csv").read_bytes()))
    assert outputs[0] == outputs[1]


def test_metropolis_sampler(tmp_path):
    _simulate(tmp_path)
    result = _run(
        "sample", "--out", tmp_path, "--n", 40, "--sampler", "metropolis", "--iters", 5, "--burnin", 1, "--thin", 2
    )
    assert result.exit_code == 0, result.output
    samples = pd.read_csv(tmp_path / "samples.csv")
    assert sorted(samples["iter"].unique().tolist()) == [3, 5]
    summary = pd.read_csv(tmp_path / "summary.csv")
    assert summary["accept_rate"].between(0, 1).all()
    assert (summary["inner_ops"] == 0).all()


def test_multiple_chains_write_separate_files(tmp_path):
    _simulate(tmp_path)
    result = _run("sample", "--out", tmp_path, "--n", 40, "--K", 3, "--iters", 3, "--chains", 2)
    assert result.exit_code == 0, result.output
    a = (tmp_path / "samples_chain0.csv").read_bytes()
    b = (tmp_path / "samples_chain1.csv").read_bytes()
    assert a != b
    assert not (tmp_path / "samples.csv").exists()


def test_dump_pools(tmp_path):
    _simulate(tmp_path)
    result = _run("sample", "--out", tmp_path, "--n", 40, "--K", 5, "--iters", 3, "--dump-pools", 2)
    assert result.exit_code == 0, result.output
    pools = pd.read_csv(tmp_path / "pools.csv")
    assert list(pools.columns) == ["iter", "t", "j", "x", "is_current", "is_selected"]
    assert len(pools) == 40 * 5
    assert (pools["iter"] == 2).all()
    per_t = pools.groupby("t")[["is_current", "is_selected"]].sum()
    assert (per_t == 1).all().all()
    assert (pools.loc[pools["is_current"] == 1, "j"] == 0).all()


def test_config_file_and_flag_precedence(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text(f"n = 30\nK = 3\niters = 2\nout = {tmp_path}\n")
    assert _run("simulate", "--config", conf).exit_code == 0
    result = _run("sample", "--config", conf, "--K", 5)
    assert result.exit_code == 0, result.output
    resolved = (tmp_path / "config_resolved_sample.txt").read_text()
    assert "K = 5" in resolved
    assert "n = 30" in resolved


def test_init_variants(tmp_path):
    _simulate(tmp_path)
    zero = _run("sample", "--out", tmp_path, "--n", 40, "--K", 2, "--iters", 1, "--init", "zero")
    assert zero.exit_code == 0, zero.output
    from_file = _run(
        "sample", "--out", tmp_path, "--n", 40, "--K", 2, "--iters", 1, "--init", f"file={tmp_path / 'data.csv'}"
    )
    assert from_file.exit_code == 0, from_file.output


def test_usage_errors_exit_1(tmp_path):
    _simulate(tmp_path)
    assert _run("sample", "--out", tmp_path, "--K", "abc").exit_code == 1
    assert _run("sample", "--out", tmp_path, "--n", 40, "--iters", 2, "--burnin", 3).exit_code == 1
    # n does not match the data file
    assert _run("sample", "--out", tmp_path, "--n", 41).exit_code == 1
    conf = tmp_path / "bad.conf"
    conf.write_text("colour = blue\n")
    assert _run("simulate", "--out", tmp_path, "--config", conf).exit_code == 1


def test_report_probe_out_of_range(tmp_path):
    _simulate(tmp_path)
    assert _run("sample", "--out", tmp_path, "--n", 40, "--K", 2, "--iters", 2).exit_code == 0
    assert _run("oracle", "--out", tmp_path, "--n", 40, "--grid", -5, 5, 100).exit_code == 0
    result = _run("report", "--out", tmp_path, "--n", 40, "--probe", 40)
    assert result.exit_code == 1


def test_missing_data_exits_3(tmp_path):
    result = _run("sample", "--out", tmp_path, "--n", 40)
    assert result.exit_code == 3


def test_strict_narrow_grid_exits_2(tmp_path):
    _simulate(tmp_path)
    result = _run("oracle", "--out", tmp_path, "--n", 40, "--grid", -0.5, 0.5, 50, "--strict")
    assert result.exit_code == 2
    assert not (tmp_path / "oracle.csv").exists()
    relaxed = _run("oracle", "--out", tmp_path, "--n", 40, "--grid", -0.5, 0.5, 50)
    assert relaxed.exit_code == 0


def test_strict_default_grid_fails_on_the_initial_prior(tmp_path):
    _simulate(tmp_path)
    default = _run("oracle", "--out", tmp_path, "--n", 40, "--strict")
    assert default.exit_code == 2
    wide = _run("oracle", "--out", tmp_path, "--n", 40, "--grid", -5, 5, 667, "--strict")
    assert wide.exit_code == 0, wide.output
    assert (tmp_path / "oracle.csv").exists()
