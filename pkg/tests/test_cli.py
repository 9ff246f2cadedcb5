import json

import pytest

from sfqlab.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from sfqlab.margin_lab.pcm import synthesize_iv, synthesize_vphi, write_two_column_csv

FAST = ["--circuit", "sd_chain", "--trials", "10", "--step", "0.05"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_help(capsys):
    code, out, _ = run(capsys, "--help")
    assert code == EXIT_OK
    assert "margins" in out and "tsweep" in out


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["margins"],
        ["margins", "--circuit", "alu"],
        ["margins", "--circuit", "sd_chain", "--jobs", "0"],
        ["margins", "--netlist", "/nonexistent.cir"],
    ],
)
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == EXIT_USAGE


def test_margins_json(capsys):
    code, out, _ = run(capsys, "margins", *FAST, "--seed", "3")
    assert code == EXIT_OK
    d = json.loads(out)
    assert d["seed"] == 3
    assert d["config"]["circuit"] == "sd_chain"
    assert d["functional"]


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("SFQLAB_SEED", "17")
    assert json.loads(run(capsys, "margins", *FAST)[1])["seed"] == 17
    assert json.loads(run(capsys, "margins", *FAST, "--seed", "2")[1])["seed"] == 2


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# margins setup\ncircuit = sd_chain\ntrials = 10\nstep = 0.05\ntemp = 2.0\n")
    d = json.loads(run(capsys, "margins", "--config", str(cfg))[1])
    assert d["config"]["temp"] == 2.0
    d = json.loads(run(capsys, "margins", "--config", str(cfg), "--temp", "3.0")[1])
    assert d["config"]["temp"] == 3.0


def test_output_is_schedule_independent(capsys):
    a = run(capsys, "margins", *FAST, "--jobs", "1")[1]
    b = run(capsys, "margins", *FAST, "--jobs", "3")[1]
    assert a == b


def test_tsweep_grid_rows(capsys):
    code, out, _ = run(capsys, "tsweep", *FAST, "--early-stop")
    assert code == EXIT_OK
    rows = out.strip().splitlines()
    assert rows[0].startswith("temperature_K")
    assert len(rows) == 43


def test_pattern_pass_and_fail(capsys):
    assert run(capsys, "pattern", "--circuit", "dmx")[0] == EXIT_OK
    code, out, _ = run(capsys, "pattern", "--circuit", "dmx", "--beta", "0.2")
    assert code == EXIT_FAIL
    assert not json.loads(out)["passed"]


def test_fit_ic(capsys, tmp_path):
    iv = synthesize_iv(40e-6, 10)
    f = tmp_path / "iv.csv"
    f.write_text(write_two_column_csv(iv.current, iv.voltage, ("current", "voltage")))
    code, out, _ = run(capsys, "pcm", "fit-ic", "--in", str(f))
    assert code == EXIT_OK
    assert json.loads(out)["ic_A"] == pytest.approx(40e-6, rel=0.005)


@pytest.mark.parametrize("periods, code", [(4.0, EXIT_OK), (1.9, EXIT_USAGE)])
def test_fit_ind(capsys, tmp_path, periods, code):
    v = synthesize_vphi(12e-12, periods=periods)
    f = tmp_path / "vphi.csv"
    f.write_text(write_two_column_csv(v.coil_current, v.voltage))
    got, out, err = run(capsys, "pcm", "fit-ind", "--in", str(f))
    assert got == code
    if code == EXIT_OK:
        assert json.loads(out)["inductance_H"] == pytest.approx(12e-12, rel=0.01)
    else:
        assert "period" in err


def test_sim_behavioral_pulses(capsys, tmp_path):
    f = tmp_path / "out.csv"
    code, _, _ = run(capsys, "sim", "--circuit", "divider4", "--pulses", str(f))
    assert code == EXIT_OK
    assert f.read_text().startswith("port,time")
