import hashlib
import json

import numpy as np
import pytest

from polykin.cli import main


def _write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


HOOKEAN = "[run]\nmodel = dumbbell\nengine = sde-inertial\nN = 500\nt_final = 0\n"


def test_t_final_zero_gives_one_row(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "--config", _write(tmp_path, HOOKEAN), "--out", str(out)]) == 0
    lines = (out / "moments.csv").read_text().splitlines()
    assert lines[0] == "# schema_version=1"
    assert lines[1].startswith("t,rho,mean_0")
    assert len(lines) == 3


def test_run_json_hash_matches_config_bytes(tmp_path):
    cfg = _write(tmp_path, HOOKEAN)
    out = tmp_path / "o"
    main(["simulate", "--config", cfg, "--out", str(out)])
    meta = json.loads((out / "run.json").read_text())
    assert meta["config_sha256"] == hashlib.sha256(open(cfg, "rb").read()).hexdigest()
    assert meta["schema_version"] == 1


def test_seed_override_changes_output(tmp_path):
    cfg = _write(tmp_path, HOOKEAN.replace("t_final = 0", "t_final = 0.1"))
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
    assert (tmp_path / "a/moments.csv").read_text() != (tmp_path / "b/moments.csv").read_text()


def test_fene_bad_init_exit_2(tmp_path, capsys):
    text = "[physics]\nspring = fene\nn0 = 2.0\n[init]\nn_init = 3.0, 0, 0\n"
    assert main(["simulate", "--config", _write(tmp_path, text), "--out", str(tmp_path)]) == 2
    assert "n_init" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.ini")]) == 2


def test_sweep_one_epsilon_exit_2(tmp_path, capsys):
    text = "[sweep]\nepsilons = 0.2\nsweep_engine = fp-inertial-reduced\n[physics]\ndim = 1\n"
    assert main(["sweep", "--config", _write(tmp_path, text), "--out", str(tmp_path)]) == 2
    assert "need ≥2 epsilons" in capsys.readouterr().err


def test_sweep_two_epsilons_writes_report(tmp_path):
    text = ("[physics]\ndim = 1\nspring = fene\n[init]\nn_init = 1.0\n[numerics]\nn_cells = 120\nn_modes = 10\n"
            "[sweep]\nepsilons = 0.4, 0.2\nsweep_engine = fp-inertial-reduced\n")
    main(["sweep", "--config", _write(tmp_path, text), "--out", str(tmp_path / "s")])
    rep = json.loads((tmp_path / "s/report.json").read_text())
    assert "fitted_order" in rep
    assert (tmp_path / "s/distances.csv").read_text().startswith("# schema_version=1")


def test_verify_geometry(tmp_path, capsys):
    assert main(["verify", "geometry", "--out", str(tmp_path)]) == 0
    verdicts = json.loads((tmp_path / "verify_geometry.json").read_text())
    assert all(v["passed"] for v in verdicts)


def test_fp_limit_snapshot_sidecar(tmp_path):
    text = "[run]\nengine = fp-limit\nn_samples = 2\n[physics]\ndim = 2\n[numerics]\nn_r = 30\n"
    out = tmp_path / "o"
    assert main(["simulate", "--config", _write(tmp_path, text), "--out", str(out)]) == 0
    rho = np.load(out / "rho.npy")
    side = json.loads((out / "rho.json").read_text())
    assert side["shape"] == list(rho.shape) and side["schema_version"] == 1


def test_steady_rod_onsager(tmp_path):
    text = "[run]\nmodel = rod\nengine = fp-limit\n[physics]\nonsager_strength = 14\n"
    assert main(["steady", "--config", _write(tmp_path, text), "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o/steady.json").read_text())
    assert abs(summary["S"] - summary["S_zonal"]) < 1e-2


def test_threads_must_be_positive(tmp_path):
    assert main(["simulate", "--config", _write(tmp_path, HOOKEAN), "--threads", "0"]) == 2


@pytest.mark.parametrize("engine", ["sde-overdamped", "fp-inertial-reduced"])
def test_other_engines_run(tmp_path, engine):
    text = f"[run]\nengine = {engine}\nn_samples = 2\nN = 300\n[physics]\ndim = 1\n[numerics]\nn_cells = 80\n"
    assert main(["simulate", "--config", _write(tmp_path, text), "--out", str(tmp_path / "o")]) == 0
