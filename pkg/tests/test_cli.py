import json

import pytest

from geoperc.cli import main, read_config


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_spectrum_linear(capsys, tmp_path):
    code, out, _ = run(capsys, "spectrum", "--kernel", "linear:5,3", "--d", "3", "--svg", str(tmp_path / "s.svg"))
    data = json.loads(out)
    assert code == 0
    assert abs(data["lambda_phi"] - 1.0) < 1e-8 and abs(data["reconstruction_condition"] - 0.125) < 1e-9
    assert (tmp_path / "s.svg").read_text().startswith("<svg")


def test_spectrum_constant_and_gaussian(capsys):
    _, out, _ = run(capsys, "spectrum", "--kernel", "constant:1", "--d", "3")
    assert all(abs(e["eigenvalue"]) < 1e-10 for e in json.loads(out)["entries"][1:])
    _, out, _ = run(capsys, "spectrum", "--kernel", "gaussian:1", "--d", "2")
    assert abs(json.loads(out)["lambda_phi"] - 0.6065306597126334) < 1e-12


def test_generate_and_reconstruct_from_file(capsys, tmp_path):
    g, pos = tmp_path / "g.csv", tmp_path / "p.csv"
    code, _, _ = run(capsys, "generate", "--n", "800", "--kernel", "linear:80,48", "--seed", "3",
                     "--out", str(g), "--positions", str(pos))
    assert code == 0 and g.read_text().startswith("# n=800 d=3")
    code, out, _ = run(capsys, "reconstruct", "--load", str(g), "--kernel", "linear:80,48",
                       "--positions", str(pos), "--svg", str(tmp_path / "r.svg"))
    rep = json.loads(out)
    assert code == 0 and rep["n"] == 800 and rep["mse"] < 1
    # same seed, generated in-process: identical report
    code, out2, _ = run(capsys, "reconstruct", "--n", "800", "--kernel", "linear:80,48", "--seed", "3")
    assert json.loads(out2) == rep


def test_load_without_kernel(capsys, tmp_path):
    code, _, err = run(capsys, "reconstruct", "--load", str(tmp_path / "g.csv"))
    assert code == 2 and "spectrum required" in err


def test_dense_oracle(capsys):
    code, _, err = run(capsys, "reconstruct", "--n", "50", "--kernel", "linear:20,12", "--seed", "7", "--dense-oracle")
    assert code == 0
    diff = float(err.split("diff=")[1])
    assert diff < 1e-9


def test_reconstruct_determinism(capsys, tmp_path):
    outs = []
    for name in ("a", "b"):
        path = tmp_path / f"{name}.json"
        fac = tmp_path / f"{name}.csv"
        run(capsys, "reconstruct", "--n", "600", "--kernel", "linear:80,48", "--seed", "5", "--out", str(path),
            "--factor-csv", str(fac))
        outs.append((path.read_bytes(), fac.read_bytes()))
    assert outs[0] == outs[1]


def test_sweep(capsys):
    code, out, _ = run(capsys, "reconstruct", "--kernel", "linear:80,48", "--sweep", "n=300,600", "--seeds", "2")
    data = json.loads(out)
    assert code == 0 and len(data["runs"]) == 4 and set(data["median_mse"]) == {"300", "600"}


def test_treeflow_verdict_and_csv(capsys, tmp_path):
    csv_path = tmp_path / "f.csv"
    code, out, _ = run(capsys, "treeflow", "--q", "2", "--beta", "2", "--depth", "3", "--reps", "4",
                       "--out", str(csv_path), "--svg", str(tmp_path / "f.svg"))
    assert code == 0
    assert "zero flow (qλ = 0.736 < 1)" in out
    assert csv_path.read_text().splitlines()[0] == "k,tv_mean,tv_stderr,z_mean,z_var,replicates"
    code, out, _ = run(capsys, "treeflow", "--q", "2", "--lambda", "0.8", "--depth", "2", "--reps", "2")
    assert "KS bound: positive flow" in out


def test_treeflow_node_cap(capsys):
    code, _, err = run(capsys, "treeflow", "--q", "2", "--beta", "1", "--depth", "40")
    assert code == 4 and "reduce depth" in err


def test_treeflow_needs_one_kernel_choice(capsys):
    code, _, err = run(capsys, "treeflow", "--beta", "1", "--lambda", "0.5")
    assert code == 2


def test_thresholds(capsys):
    code, out, _ = run(capsys, "thresholds", "--lambda", "0.5", "--f1", "2")
    assert code == 0 and abs(json.loads(out)["zero_flow_bound"]["q_max"] - 1.00005209) < 1e-8
    code, out, err = run(capsys, "thresholds", "--q", "2", "--lambda", "0.8")
    assert json.loads(out)["ks_positive_flow"] is True and "positive flow" in err
    code, _, err = run(capsys, "thresholds", "--lambda", "1.0")
    assert code == 2 and "lambda" in err
    code, out, _ = run(capsys, "thresholds", "--q", "2", "--beta", "2")
    assert json.loads(out)["gaussian_zero_flow"] is True


def test_dps_check(capsys):
    code, out, _ = run(capsys, "dps-check", "--kernel", "exponential:2", "--d", "3", "--align", "0",
                       "--samples", "200000")
    data = json.loads(out)
    assert code == 0 and abs(data["points"][0]["epsilon"] - 1) < 5e-3
    code, out, _ = run(capsys, "dps-check", "--grid", "3", "--method", "quadrature")
    assert len(json.loads(out)["points"]) == 3


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('# sweep settings\nkernel = "linear:5,3"\nd = 3\n')
    code, out, _ = run(capsys, "spectrum", "--config", str(cfg))
    assert code == 0 and abs(json.loads(out)["lambda_phi"] - 1) < 1e-8
    code, out, _ = run(capsys, "spectrum", "--config", str(cfg), "--d", "5")
    assert abs(json.loads(out)["lambda_phi"] - 0.6) < 1e-8
    assert read_config(cfg) == {"kernel": "linear:5,3", "d": "3"}


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("bogus = 1\n")
    code, _, err = run(capsys, "spectrum", "--config", str(cfg))
    assert code == 2 and "bogus" in err


def test_env_seed_override(capsys, monkeypatch):
    _, a, _ = run(capsys, "reconstruct", "--n", "400", "--kernel", "linear:80,48", "--seed", "1")
    monkeypatch.setenv("GEO_SEED", "9")
    _, b, _ = run(capsys, "reconstruct", "--n", "400", "--kernel", "linear:80,48", "--seed", "1")
    _, c, _ = run(capsys, "reconstruct", "--n", "400", "--kernel", "linear:80,48", "--seed", "9")
    assert a != b and b == c


@pytest.mark.parametrize("argv", [
    ["spectrum", "--kernel", "gaussian:1", "--d", "3"],
    ["generate", "--n", "10", "--kernel", "linear:1,2"],
    ["spectrum", "--kernel", "nope:1"],
])
def test_config_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err.startswith("error:")


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["spectrum"])
    assert exc.value.code == 2
