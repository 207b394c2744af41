import json
import subprocess
import sys

import pytest

from ensembleqc import cli, selfcheck


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bell_json(capsys):
    code, out, _ = run(capsys, "bell", "--state", "psi-", "--trials", "200", "--seed", "1")
    assert code == 0
    data = json.loads(out)
    assert data["verdicts"]["PsiMinus"] == 200
    assert data["spec"]["seed"] == 1


def test_dj_csv(capsys):
    code, out, _ = run(capsys, "dj", "--oracle", "F4", "--trials", "20", "--seed", "2", "--format", "csv")
    assert code == 0
    header, row = out.strip().splitlines()
    assert dict(zip(header.split(","), row.split(",")))["verdicts.Balanced"] == "20"


def test_out_file(capsys, tmp_path):
    path = tmp_path / "sub" / "result.json"
    code, out, _ = run(capsys, "chi", "--backend", "ideal", "--trials", "5", "--seed", "3", "--out", str(path))
    assert code == 0 and out == ""
    assert json.loads(path.read_text())["n_accepted"] == 5


def test_sweep(capsys):
    code, out, _ = run(
        capsys, "sweep", "--protocol", "bell", "--param", "efficiency",
        "--start", "0.8", "--stop", "1.0", "--step", "0.1", "--trials", "50", "--seed", "4",
    )
    assert code == 0
    assert len(json.loads(out)["rows"]) == 3


@pytest.mark.parametrize(
    "argv",
    [
        ["bell", "--trials", "10"],  # no seed
        ["bell", "--seed", "1", "--state", "chi"],
        ["bell", "--seed", "1", "--eta", "2"],
        ["bell", "--seed", "1", "--trials", "0"],
        ["dj", "--seed", "1", "--oracle", "F9"],
        ["sweep", "--seed", "1", "--protocol", "bell"],
        ["sweep", "--seed", "1", "--protocol", "bell", "--param", "efficiency", "--start", "0.9", "--stop", "0.5", "--step", "0.1"],
        ["bell", "--seed", "1", "--workers", "0"],
        ["teleport", "--seed", "1"],
    ],
)
def test_config_errors_exit_2(capsys, argv):
    # argparse rejects some of these itself (SystemExit), the rest come back as a return code
    try:
        code = cli.main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 2


def test_config_file_with_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('state = "psi+"\ntrials = 30\nseed = 9\nefficiency = 0.5\n')
    code, out, _ = run(capsys, "bell", "--config-file", str(cfg), "--trials", "40")
    assert code == 0
    data = json.loads(out)
    assert data["n_trials"] == 40
    assert data["spec"]["efficiency"] == 0.5
    assert data["spec"]["seed"] == 9


@pytest.mark.parametrize(
    "content",
    ['nonsense = 1\nseed = 1\n', '[table]\nseed = 1\n', 'seed = \n'],
)
def test_bad_config_file(capsys, tmp_path, content):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(content)
    code, _, err = run(capsys, "bell", "--config-file", str(cfg))
    assert code == 2 and "config" in err


def test_missing_config_file(capsys, tmp_path):
    code, _, err = run(capsys, "bell", "--config-file", str(tmp_path / "nope.toml"))
    assert code == 2 and "nope.toml" in err


def test_self_check_passes(capsys):
    code, out, _ = run(capsys, "bell", "--self-check", "--trials", "10", "--seed", "1")
    assert code == 0 and json.loads(out)["n_trials"] == 10


def test_self_check_failure_exit_3(capsys, monkeypatch):
    monkeypatch.setattr(cli, "run_self_check", lambda: ["forced disagreement"])
    code, out, err = run(capsys, "bell", "--self-check", "--seed", "1")
    assert code == 3 and out == "" and "forced disagreement" in err


def test_self_check_components_clean():
    assert selfcheck.bell_agreement_failures() == []
    assert selfcheck.oracle_failures() == []


def test_no_timing_is_byte_stable(capsys):
    argv = ["bell", "--state", "phi-", "--config", "phi", "--eta", "0.7", "--trials", "300", "--seed", "5", "--no-timing"]
    first = run(capsys, *argv)[1]
    second = run(capsys, *argv)[1]
    assert first == second
    assert json.loads(first)["wall_time_seconds"] == 0.0


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "ensembleqc", "dj", "--oracle", "F1", "--trials", "3", "--seed", "0"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["verdicts"]["Constant"] == 3


def test_seed_not_read_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("SEED", "5")
    monkeypatch.setenv("ENSEMBLEQC_SEED", "5")
    code, _, err = run(capsys, "bell", "--trials", "1")
    assert code == 2 and "seed" in err
