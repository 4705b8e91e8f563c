import json

import numpy as np
import pytest

from kdenoise.experiments import Parabola, generate
from kdenoise.experiments.cli import run_command
from kdenoise.measures import save_measure_csv, uniform_measure


@pytest.fixture
def measure_files(tmp_path):
    mu = uniform_measure([[0.0, 0.0], [1.0, 1.0]])
    nu = uniform_measure([[0.0, 0.0], [0.5, 0.5], [1.5, 1.5]])
    pa = tmp_path / "mu.csv"
    pb = tmp_path / "nu.csv"
    save_measure_csv(mu, pa)
    save_measure_csv(nu, pb)
    return str(pa), str(pb)


def test_w2_command(measure_files, capsys, tmp_path):
    pa, pb = measure_files
    code = run_command(["--out", str(tmp_path / "o"), "w2", "--mu", pa, "--nu", pb])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["schema"] == 1
    assert report["w2_squared"] >= 0
    assert (tmp_path / "o" / "report.json").exists()
    assert (tmp_path / "o" / "coupling.csv").read_text().startswith("i,j,mass")


def test_check_kdr_identical_files(measure_files, capsys):
    pa, _ = measure_files
    code = run_command(["check-kdr", "--mu", pa, "--nu", pa])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["dominated"] is True
    assert abs(report["slack"]) <= 1e-9


def test_check_order_command(measure_files, capsys):
    pa, pb = measure_files
    code = run_command(["check-order", "--mu", pa, "--nu", pb])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report) >= {"dominated", "residual", "schema"}


def test_missing_file_exits_2(capsys):
    code = run_command(["w2", "--mu", "/no/such.csv", "--nu", "/no/such.csv"])
    assert code == 2
    err = capsys.readouterr().err
    assert "error" in err


def test_repro_counterexample_1d(capsys):
    code = run_command(["repro", "counterexample-1d"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is True
    np.testing.assert_allclose(report["w2_squared"], [8 / 3, 14 / 3, 14.0], atol=1e-9)


def test_repro_counterexample_2d(capsys):
    code = run_command(["repro", "counterexample-2d"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    np.testing.assert_allclose(report["kdr_slacks"], [0.0, 0.0, -2.0], atol=1e-9)


def test_repro_supplement_a(capsys):
    code = run_command(["repro", "supplement-a"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["quadratic_cost_k"] == pytest.approx(4.5, abs=1e-12)
    assert report["quadratic_cost_m"] == pytest.approx(4.1, abs=1e-12)


def test_repro_instability(capsys):
    code = run_command(["repro", "instability"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["limit_variance"] == pytest.approx(5 / 3, abs=1e-12)


def test_repro_deterministic_bytes(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_command(["--seed", "5", "--out", str(out1), "repro", "counterexample-1d"]) == 0
    assert run_command(["--seed", "5", "--out", str(out2), "repro", "counterexample-1d"]) == 0
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


def test_denoise_subspace_command(tmp_path, capsys):
    nu = generate(Parabola(n=60, noise_sigma=0.05, seed=3))
    p = tmp_path / "data.csv"
    save_measure_csv(nu, p)
    code = run_command([
        "--out", str(tmp_path / "out"), "denoise", "--nu", str(p),
        "--domain", "subspace", "--m", "1",
    ])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["converged"] is True
    assert (tmp_path / "out" / "mu.csv").exists()


def test_denoise_discrete_command(tmp_path, capsys):
    nu = uniform_measure([[0.0], [1.0], [10.0], [11.0]])
    p = tmp_path / "data.csv"
    save_measure_csv(nu, p)
    code = run_command([
        "denoise", "--nu", str(p), "--domain", "discrete", "--m", "2",
    ])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["w2_squared"] == pytest.approx(0.25, abs=1e-9)


def test_generated_measures_pass_invariants(rng):
    # any generator output must be a valid measure (constructor enforces)
    for spec in [Parabola(n=17, noise_sigma=0.2, seed=1)]:
        nu = generate(spec)
        assert abs(nu.weights.sum() - 1.0) <= 1e-12
