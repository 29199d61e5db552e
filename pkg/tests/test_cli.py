"""Command-line behavior: configs, artifacts, exit codes, and the fit utility."""

import json
import math

import numpy as np
import pytest

import oracles
from isothc.cli import (
    FIT_DEFAULTS,
    SIMULATE_DEFAULTS,
    FitResult,
    atomic_write_text,
    cmd_simulate,
    csv_text,
    fit_loglog,
    main,
)
from isothc.focksim import GivensSequence
from isothc.hamiltonian import write_fcidump
from isothc.thc import ThcFactorization


@pytest.fixture()
def toy_fcidump(tmp_path):
    ham = oracles.random_hamiltonian(2, np.random.default_rng(5), scale=0.5)
    path = tmp_path / "toy.fcidump"
    write_fcidump(ham, path)
    return path


def run_factorize(tmp_path, toy_fcidump, *extra):
    outdir = tmp_path / "fac"
    code = main([
        "factorize", "--fcidump", str(toy_fcidump), "--outdir", str(outdir),
        "--restarts", "2", "--rounds-phase1", "40", "--rounds-phase2", "20",
        *extra,
    ])
    return code, outdir


# ---------------------------------------------------------------------------
# log-log fitting


def test_fit_exact_power_law():
    x = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    fit = fit_loglog(x, 3.0 * x**2)
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
    assert fit.points_used == 5
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_slope_invariant_under_y_scaling():
    rng = np.random.default_rng(3)
    x = np.linspace(1.0, 9.0, 8)
    y = x**1.7 * np.exp(rng.normal(scale=0.05, size=8))
    base = fit_loglog(x, y, k_last=5)
    scaled = fit_loglog(x, 40.0 * y, k_last=5)
    assert scaled.slope == pytest.approx(base.slope, abs=1e-12)
    assert scaled.intercept == pytest.approx(base.intercept + math.log(40.0), abs=1e-10)


def test_fit_k_last_takes_tail_after_sorting():
    # unsorted input; the tail by x is {4, 8}, which lies on slope 3
    x = [8.0, 1.0, 4.0]
    y = [8.0**3, 99.0, 4.0**3]
    fit = fit_loglog(x, y, k_last=2)
    assert fit.slope == pytest.approx(3.0, abs=1e-12)
    assert fit.points_used == 2


def test_fit_domain_errors():
    with pytest.raises(ValueError, match="positive"):
        fit_loglog([1.0, 2.0], [1.0, -2.0])
    with pytest.raises(ValueError, match="k_last"):
        fit_loglog([1.0, 2.0], [1.0, 2.0], k_last=3)
    with pytest.raises(ValueError, match="k_last"):
        fit_loglog([1.0, 2.0], [1.0, 2.0], k_last=1)
    with pytest.raises(ValueError, match="at least 2"):
        FitResult(slope=1.0, intercept=0.0, points_used=1, r_squared=1.0)


# ---------------------------------------------------------------------------
# file plumbing


def test_csv_text_is_rfc4180():
    text = csv_text(["a", "b"], [[1, "x,y"], [2, 'q"o']])
    assert text == 'a,b\r\n1,"x,y"\r\n2,"q""o"\r\n'


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "out.json"
    atomic_write_text(target, "{}\n")
    atomic_write_text(target, '{"v": 1}\n')
    assert target.read_text() == '{"v": 1}\n'
    assert [p.name for p in tmp_path.iterdir()] == ["out.json"]


# ---------------------------------------------------------------------------
# factorize command


def test_factorize_writes_artifacts_and_manifest(tmp_path, toy_fcidump):
    code, outdir = run_factorize(tmp_path, toy_fcidump, "--m", "3", "--seed", "1")
    assert code == 0
    thc = ThcFactorization.from_json((outdir / "thc_m3.json").read_text())
    assert thc.n == 2 and thc.m == 3
    lines = (outdir / "metrics.csv").read_text().splitlines()
    assert lines[0] == "m,eps_v,eps_h,l1_vtilde,wall_time"
    assert len(lines) == 2
    manifest = json.loads((outdir / "manifest.json").read_text())
    assert manifest["command"] == "factorize"
    assert manifest["seed"] == 1
    assert manifest["version"]
    assert manifest["inputs"]["fcidump"].endswith("toy.fcidump")


def test_factorize_exact_method_hits_floor(tmp_path, toy_fcidump):
    code, outdir = run_factorize(tmp_path, toy_fcidump, "--m", "4", "--method", "exact")
    assert code == 0
    row = (outdir / "metrics.csv").read_text().splitlines()[1].split(",")
    assert float(row[1]) <= 1e-10


def test_factorize_sweep_one_row_per_m(tmp_path, toy_fcidump):
    code, outdir = run_factorize(tmp_path, toy_fcidump, "--m", "2", "3")
    assert code == 0
    lines = (outdir / "metrics.csv").read_text().splitlines()
    assert [line.split(",")[0] for line in lines[1:]] == ["2", "3"]
    assert (outdir / "thc_m2.json").exists()
    assert (outdir / "thc_m3.json").exists()


def test_factorize_worker_pool_matches_serial(tmp_path, toy_fcidump):
    _, serial = run_factorize(tmp_path / "a", toy_fcidump, "--m", "2", "3")
    _, pooled = run_factorize(tmp_path / "b", toy_fcidump, "--m", "2", "3",
                              "--jobs", "2")
    strip = lambda text: [line.rsplit(",", 1)[0] for line in text.splitlines()]
    # identical up to the wall-time column
    assert strip((serial / "metrics.csv").read_text()) == strip(
        (pooled / "metrics.csv").read_text()
    )
    assert (serial / "thc_m3.json").read_text() == (pooled / "thc_m3.json").read_text()


def test_factorize_report_to_stdout_without_outdir(toy_fcidump, capsys):
    code = main([
        "factorize", "--fcidump", str(toy_fcidump), "--m", "4",
        "--method", "exact",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert out.startswith("m,eps_v,eps_h,l1_vtilde,wall_time")


def test_config_document_merges_and_flags_win(tmp_path, toy_fcidump):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "fcidump": str(toy_fcidump), "m": 2, "method": "exact",
        "outdir": str(tmp_path / "fac"),
    }))
    assert main(["factorize", "--config", str(config), "--m", "3"]) == 0
    assert (tmp_path / "fac" / "thc_m3.json").exists()
    assert not (tmp_path / "fac" / "thc_m2.json").exists()


def test_unknown_config_key_is_a_domain_error(tmp_path, capsys):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"fcidmp": "x"}))
    assert main(["factorize", "--config", str(config)]) == 1
    assert "unknown config key" in capsys.readouterr().err


def test_missing_input_file_exits_two(tmp_path, capsys):
    assert main(["factorize", "--fcidump", str(tmp_path / "nope"), "--m", "2"]) == 2
    assert "error:" in capsys.readouterr().err


def test_malformed_fcidump_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.fcidump"
    bad.write_text("not an integrals file\n")
    assert main(["factorize", "--fcidump", str(bad), "--m", "2"]) == 2
    assert "bad.fcidump" in capsys.readouterr().err


def test_missing_required_parameter_exits_one(toy_fcidump, capsys):
    assert main(["factorize", "--fcidump", str(toy_fcidump)]) == 1
    assert "missing required" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# simulate command


@pytest.fixture()
def factorized(tmp_path, toy_fcidump):
    code, outdir = run_factorize(tmp_path, toy_fcidump, "--m", "4",
                                 "--method", "exact")
    assert code == 0
    return toy_fcidump, outdir / "thc_m4.json"


def test_simulate_writes_scaling_csv_and_sequence(tmp_path, factorized):
    fcidump, thc_path = factorized
    outdir = tmp_path / "sim"
    code = main([
        "simulate", "--fcidump", str(fcidump), "--thc", str(thc_path),
        "--t", "0.05", "--tau", "0.05", "0.025", "--variants", "basic",
        "--initial-state", "11", "--outdir", str(outdir),
    ])
    assert code == 0
    lines = (outdir / "error_scaling.csv").read_text().splitlines()
    assert lines[0] == "variant,tau,steps,error"
    assert [line.split(",")[:3] for line in lines[1:]] == [
        ["basic", "0.05", "1"], ["basic", "0.025", "2"]]
    sequence = GivensSequence.from_json((outdir / "givens_sequence.json").read_text())
    thc = ThcFactorization.from_json(thc_path.read_text())
    np.testing.assert_allclose(
        sequence.single_particle_matrix()[:, : thc.n], thc.u.T.astype(complex),
        atol=1e-10,
    )


def test_simulate_zero_time_gives_zero_errors(factorized, capsys):
    fcidump, thc_path = factorized
    code = main([
        "simulate", "--fcidump", str(fcidump), "--thc", str(thc_path),
        "--t", "0", "--tau", "0.1", "--initial-state", "11",
    ])
    assert code == 0
    rows = capsys.readouterr().out.splitlines()[1:]
    assert [row.split(",")[3] for row in rows] == ["0.000000000000e+00"] * 2


def test_simulate_duplicate_taus_warn_and_collapse(factorized):
    fcidump, thc_path = factorized
    cfg = {**SIMULATE_DEFAULTS, "fcidump": str(fcidump), "thc": str(thc_path),
           "t": 0.05, "tau": [0.05, 0.05], "variants": ["basic"],
           "initial_state": "11"}
    with pytest.warns(UserWarning, match="duplicate tau"):
        output = cmd_simulate(cfg)
    assert len(output.report.splitlines()) == 2


def test_simulate_mode_cap_rejected_before_running(tmp_path, toy_fcidump, capsys):
    # 8 ranks x 2 spin sectors = 16 modes, over the density-matrix cap
    code, outdir = run_factorize(tmp_path, toy_fcidump, "--m", "8",
                                 "--method", "exact")
    assert code == 0
    capsys.readouterr()
    code = main([
        "simulate", "--fcidump", str(toy_fcidump),
        "--thc", str(outdir / "thc_m8.json"),
        "--t", "1", "--tau", "0.1", "--initial-state", "1111", "--spinful",
    ])
    assert code == 1
    assert "cap" in capsys.readouterr().err


def test_simulate_hartree_fock_requires_electron_count(factorized, capsys):
    fcidump, thc_path = factorized
    code = main([
        "simulate", "--fcidump", str(fcidump), "--thc", str(thc_path),
        "--t", "0.05", "--tau", "0.05",
    ])
    assert code == 1
    assert "n_electrons" in capsys.readouterr().err


def test_simulate_rejects_bad_initial_state(factorized, capsys):
    fcidump, thc_path = factorized
    code = main([
        "simulate", "--fcidump", str(fcidump), "--thc", str(thc_path),
        "--t", "0.05", "--tau", "0.05", "--initial-state", "12",
    ])
    assert code == 1
    assert "initial_state" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# estimate command


def test_estimate_prints_comparison_table(capsys):
    code = main(["estimate", "--n", "76", "--m", "450",
                 "--motta-l", "394", "--motta-xi", "51"])
    assert code == 0
    out = capsys.readouterr().out
    assert "655,496" in out and "6,108,576" in out and "Ratio" in out


def test_estimate_json_artifact_has_ratios(tmp_path):
    outdir = tmp_path / "est"
    code = main(["estimate", "--n", "76", "--m", "450", "--motta-l", "394",
                 "--motta-xi", "51", "--eps-rot", "1e-6",
                 "--outdir", str(outdir)])
    assert code == 0
    payload = json.loads((outdir / "estimate.json").read_text())
    assert payload["this_work"]["single_qubit_rotations"] == 655_496
    assert payload["this_work"]["t_gates"] == 32 * 655_496
    assert payload["ratios"]["circuit_depth"] == pytest.approx(46.22, abs=0.01)


def test_estimate_motta_params_come_in_pairs(capsys):
    assert main(["estimate", "--n", "4", "--m", "6", "--motta-l", "3"]) == 1
    assert "motta" in capsys.readouterr().err


def test_estimate_infeasible_rank_exits_one(capsys):
    code = main(["estimate", "--n", "4", "--m", "6",
                 "--motta-l", "3", "--motta-xi", "5"])
    assert code == 1
    assert "xi" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# fit command


@pytest.fixture()
def series_csv(tmp_path):
    path = tmp_path / "series.csv"
    x = np.array([1.0, 2.0, 4.0, 8.0])
    path.write_text("n,value\r\n" + "".join(
        f"{a:g},{2.0 * a**1.5:.12g}\r\n" for a in x))
    return path


def test_fit_command_reads_named_columns(series_csv, capsys):
    code = main(["fit", "--csv", str(series_csv), "--x-column", "n",
                 "--y-column", "value", "--k-last", "3"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["slope"] == pytest.approx(1.5, abs=1e-10)
    assert payload["points_used"] == 3


def test_fit_command_defaults_to_first_two_columns(series_csv, capsys):
    assert main(["fit", "--csv", str(series_csv)]) == 0
    assert json.loads(capsys.readouterr().out)["points_used"] == 4


def test_fit_missing_column_exits_two(series_csv, capsys):
    assert main(["fit", "--csv", str(series_csv), "--y-column", "nope"]) == 2
    assert "nope" in capsys.readouterr().err


def test_fit_nonpositive_values_exit_one(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\r\n1,1\r\n2,-4\r\n")
    assert main(["fit", "--csv", str(path)]) == 1
    assert "positive" in capsys.readouterr().err


def test_fit_writes_manifest_with_outdir(series_csv, tmp_path):
    outdir = tmp_path / "fit"
    assert main(["fit", "--csv", str(series_csv), "--outdir", str(outdir)]) == 0
    manifest = json.loads((outdir / "manifest.json").read_text())
    assert manifest["command"] == "fit"
    assert manifest["inputs"]["csv"].endswith("series.csv")
    assert json.loads((outdir / "fit.json").read_text())["points_used"] == 4
