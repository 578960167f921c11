import json
import subprocess
import sys

import numpy as np
import pytest

from noisyabc.errors import ConfigError, DomainError, EvaluationError
from noisyabc.harness.cli import main
from noisyabc.harness.config import ExperimentConfig
from noisyabc.harness.data import DataFormatError, ar1_residuals, ingest_csv, preprocess_log_returns
from noisyabc.harness.experiments import pit_model_check, run_experiment, summary_from_files
from noisyabc.models import GaussianSurrogateModel

SURR = [0.8, 0.5, 0.7]


def _cfg(**over):
    base = dict(name="t", model="gaussian_surrogate", mode="batch", epsilon=0.5, n_particles=20,
                theta_true=SURR, n=15, theta0=[0.5, 0.8, 0.9], iterations=3, average_last=2,
                replicates=2, seed=3, schedule={"a": 0.05})
    base.update(over)
    return base


# -- ingestion -----------------------------------------------------------------
def test_ingest_two_rows(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1.0\n2.0")
    assert ingest_csv(p).values.tolist() == [1.0, 2.0]


def test_ingest_header_and_timestamps(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("date,close\n2001-01-01,1.5\n2001-01-02,1.25\n")
    s = ingest_csv(p)
    assert s.values.tolist() == [1.5, 1.25] and s.timestamps == ["2001-01-01", "2001-01-02"]


def test_ingest_names_bad_row(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("".join(f"{i}.0\n" for i in range(16)) + "oops\n3.0\n")
    with pytest.raises(DataFormatError, match="row 17"):
        ingest_csv(p)


def test_ingest_missing_file(tmp_path):
    with pytest.raises(DataFormatError, match="not found"):
        ingest_csv(tmp_path / "nope.csv")


def test_ingest_empty(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("price\n")
    with pytest.raises(DataFormatError):
        ingest_csv(p)


# -- preprocessing ---------------------------------------------------------------
def test_log_returns():
    assert preprocess_log_returns([1.0, np.exp(0.01)])[0] == pytest.approx(1.0, rel=1e-12)
    assert np.all(preprocess_log_returns(np.full(5, 2.5)) == 0.0)
    assert preprocess_log_returns(np.linspace(1, 2, 3287)).shape == (3286,)
    with pytest.raises(DomainError):
        preprocess_log_returns([1.0, 0.0, 2.0])


def test_ar1_residuals(rng):
    m = 3286
    e = rng.standard_normal(m)
    res, (c, rho) = ar1_residuals(e, return_coefficients=True)
    assert res.shape == (m - 1,) and abs(rho) < 3 / np.sqrt(m)
    x = np.empty(50)
    x[0] = 5.0
    for t in range(1, 50):
        x[t] = 0.3 + 0.7 * x[t - 1]
    assert np.max(np.abs(ar1_residuals(x))) < 1e-10
    with pytest.raises(EvaluationError):
        ar1_residuals(np.ones(10))


# -- configs ---------------------------------------------------------------------
@pytest.mark.parametrize("over,msg", [
    (dict(model="nope"), "unknown model"),
    (dict(mode="fit"), "unknown mode"),
    (dict(epsilon=0), "epsilon"),
    (dict(n_particles=1), "n_particles"),
    (dict(theta0=None), "theta0"),
    (dict(theta0=[0.5, 0.8]), "expects 3"),
    (dict(theta0=[1.5, 0.8, 0.9]), "theta0"),
    (dict(data_path="x.csv"), "exactly one"),
    (dict(bogus=1), "unknown config keys"),
    (dict(schedule={"b": 0.4}), "exponent"),
])
def test_config_errors(over, msg):
    with pytest.raises(ConfigError, match=msg):
        ExperimentConfig.from_dict(_cfg(**over))


def test_relative_data_path_resolves(tmp_path):
    (tmp_path / "p.csv").write_text("1\n2\n3\n4\n")
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps(_cfg(theta_true=None, n=None, data_path="p.csv")))
    assert ExperimentConfig.load(cfg_path).data_path == str(tmp_path / "p.csv")


# -- runs ------------------------------------------------------------------------
def _run(tmp_path, monkeypatch, sub, **over):
    monkeypatch.setenv("NOISYABC_OUTPUT_ROOT", str(tmp_path / sub))
    cfg = ExperimentConfig.from_dict(_cfg(**over))
    return cfg, run_experiment(cfg)


def test_run_is_byte_identical(tmp_path, monkeypatch):
    cfg, _ = _run(tmp_path, monkeypatch, "a", replicates=1)
    _run(tmp_path, monkeypatch, "b", replicates=1)
    files = sorted(p.name for p in (tmp_path / "a" / "t").iterdir())
    assert files == ["replicate_000.csv", "summary.json"]
    for f in files:
        assert (tmp_path / "a" / "t" / f).read_bytes() == (tmp_path / "b" / "t" / f).read_bytes()
    text = (tmp_path / "a" / "t" / "replicate_000.csv").read_text()
    assert text.startswith("# noisyabc ") and cfg.hash() in text.splitlines()[0]


def test_parallel_replicates_match_serial(tmp_path, monkeypatch):
    _run(tmp_path, monkeypatch, "s")
    _run(tmp_path, monkeypatch, "p", workers=2)
    for f in ("replicate_000.csv", "replicate_001.csv"):
        assert (tmp_path / "s" / "t" / f).read_bytes() == (tmp_path / "p" / "t" / f).read_bytes()


def test_summary_recomputed_from_files(tmp_path, monkeypatch):
    cfg, summary = _run(tmp_path, monkeypatch, "a", replicates=3)
    again = summary_from_files(cfg.output_path(), cfg.average_last)
    for key in ("mean", "variance"):
        for name, v in summary["estimates"][key].items():
            assert again[key][name] == pytest.approx(v, rel=1e-12, abs=1e-15)
    on_disk = json.loads((cfg.output_path() / "summary.json").read_text())
    assert on_disk["estimates"]["mean"] == summary["estimates"]["mean"]


def test_disabled_config_needs_force(tmp_path, monkeypatch):
    monkeypatch.setenv("NOISYABC_OUTPUT_ROOT", str(tmp_path))
    cfg = ExperimentConfig.from_dict(_cfg(enabled=False, replicates=1))
    with pytest.raises(ConfigError):
        run_experiment(cfg)
    assert run_experiment(cfg, force=True)["n_failed"] == 0


def test_likelihood_eval_mode(tmp_path, monkeypatch):
    cfg, summary = _run(tmp_path, monkeypatch, "a", mode="likelihood-eval", theta0=None,
                        thetas=[SURR, [0.5, 0.5, 0.7]], n_evals=10)
    rows = (cfg.output_path() / "likelihood_eval.csv").read_text().splitlines()
    assert len(rows) == 2 + 20
    assert [len(summary["likelihood"]), summary["likelihood"][0]["n_failed"]] == [2, 0]


def test_gradient_histogram_mode(tmp_path, monkeypatch):
    cfg, summary = _run(tmp_path, monkeypatch, "a", model="g_and_k", mode="gradient-histogram", theta0=None,
                        theta_true=[2.0, 0.5, 10.0, 2.0], n=400, n_particles=100, epsilon=0.1,
                        replicates=1, histogram_bins=10)
    out = cfg.output_path()
    assert sorted(p.name for p in out.glob("hist_000_*.csv")) == [f"hist_000_{k}.csv" for k in ("A", "B", "g", "k")]
    counts = np.loadtxt(out / "hist_000_g.csv", delimiter=",", skiprows=2)[:, 2]
    assert counts.sum() == 400
    assert set(summary["replicates"][0]["stabilised"]) == {"g", "k", "A", "B"}


# -- PIT -------------------------------------------------------------------------
@pytest.fixture(scope="module")
def pit_data():
    m = GaussianSurrogateModel()
    raw = m.simulate(SURR, 500, np.random.default_rng(21))
    return m, raw + 0.1 * np.random.default_rng(22).standard_normal(raw.shape)


def test_pit_accepts_truth(pit_data):
    m, y = pit_data
    chk = pit_model_check(y, m, SURR, 0.1, 500, seed=1)
    assert chk["ks"] < chk["critical_1pct"] == pytest.approx(1.63 / np.sqrt(500))
    assert np.all(np.diff(chk["pit"]) >= 0) and chk["pit"].min() >= 0 and chk["pit"].max() <= 1
    assert chk["quantiles"][0] == pytest.approx(1 / 501)


def test_pit_rejects_inflated_state_variance(pit_data):
    m, y = pit_data
    chk = pit_model_check(y, m, [0.8, 50.0, 0.7], 0.1, 500, seed=1)
    assert chk["ks"] > chk["critical_1pct"]


# -- CLI -------------------------------------------------------------------------
def test_cli_exit_codes(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("NOISYABC_OUTPUT_ROOT", str(tmp_path))
    good = tmp_path / "good.json"
    good.write_text(json.dumps(_cfg(replicates=1)))
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(_cfg(mode="fit")))
    assert main(["run", str(good)]) == 0
    assert main(["run", str(bad)]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    assert main(["simulate", "gaussian_surrogate", "0.8", "0.5", "3", "1"]) == 2
    assert main(["simulate", "nope", "1", "3", "1"]) == 2
    capsys.readouterr()
    assert main(["simulate", "gaussian_surrogate", "0.8", "0.5", "0.7", "3", "1"]) == 0
    assert len(capsys.readouterr().out.split()) == 3


def test_cli_numerical_failure_exit(tmp_path, monkeypatch):
    monkeypatch.setenv("NOISYABC_OUTPUT_ROOT", str(tmp_path))
    cfg = tmp_path / "c.json"
    # data far from every simulated sample at a tiny epsilon underflows all weights
    cfg.write_text(json.dumps(dict(name="u", model="g_and_k", model_options={"uses_psi": False}, mode="batch",
                                   epsilon=1e-200, n_particles=5, theta_true=[0.0, 0.5, 1e6, 1.0], n=5,
                                   theta0=[0.0, 0.5, 0.0, 1.0], iterations=2)))
    assert main(["run", str(cfg)]) == 3


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "noisyabc", "simulate", "g_and_k", "2", "0.5", "10", "2", "4", "7"],
                         capture_output=True, text=True, check=True)
    assert len(out.stdout.split()) == 4


def test_check_gradients_cli(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(_cfg()))
    assert main(["check-gradients", str(cfg), "--points", "20"]) == 0
    assert all(line.startswith("PASS") for line in capsys.readouterr().out.splitlines())
