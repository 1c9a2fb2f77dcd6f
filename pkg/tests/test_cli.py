import csv
import io
import json
import math

import pytest

from jjasim import cli
from jjasim.io import csv_text, format_value, json_text, write_outputs


def read_csv(path):
    lines = path.read_text().splitlines()
    comment = json.loads(lines[0][2:]) if lines[0].startswith("# ") else None
    body = [l for l in lines if not l.startswith("#")]
    return comment, list(csv.reader(body))


def test_format_value():
    assert format_value(0.1) == "0.1"
    assert format_value(math.nan) == ""
    assert format_value(True) == "true"
    assert format_value(3) == "3"


def test_csv_text_with_comment_is_deterministic():
    a = csv_text(["x", "y"], [(1, 0.5)], {"b": 1, "a": 2})
    assert a == csv_text(["x", "y"], [(1, 0.5)], {"a": 2, "b": 1})
    assert a.splitlines()[0] == '# {"a": 2, "b": 1}'
    assert json.loads(json_text({"z": 1, "a": [1, 2]}))["a"] == [1, 2]


def test_write_outputs(tmp_path):
    c, j = write_outputs(tmp_path / "o", "exp", ["a"], [(1.5,)], {"k": 1})
    assert c.read_text() == "a\n1.5\n"
    assert json.loads(j.read_text())["artifact_version"]


def test_dd_verify_example(capsys):
    assert cli.main(["dd-verify", "--n", "6", "--lambda", "0.5", "--b", "0.2"]) == 0
    out = capsys.readouterr().out
    assert "effective Hamiltonian equals the rescaled ANNNI chain" in out
    assert "z1 z4" in out


def test_invert_check_example(capsys):
    assert cli.main(["invert-check", "--beta", "0.4", "--n", "12"]) == 0
    out = capsys.readouterr().out
    residual = float(out.split("max residual ")[1].split()[0])
    assert residual < 1e-10


def test_config_errors_are_all_reported(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "spectrum", "params": {"n": "x", "foo": 1, "lambda": "y"}}))
    assert cli.main(["run", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "foo" in err and "n: expected int" in err and "lambda: expected float" in err


def test_unknown_top_level_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "spectrum", "params": {}, "extra": 1}))
    assert cli.main(["run", str(cfg)]) == 2


def test_domain_error_exit_code(capsys):
    assert cli.main(["spectrum", "--n", "6", "--lambda", "1.5", "--max-range", "3"]) == 2


def test_bad_flag_exit_code(capsys):
    assert cli.main(["spectrum", "--bogus", "1"]) == 2


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "spectrum", "params": {"n": 4, "lambda": 0.3}}))
    out = tmp_path / "out"
    assert cli.main(["spectrum", "--config", str(cfg), "--n", "5", "--output", str(out)]) == 0
    meta = json.loads((out / "spectrum.json").read_text())
    assert meta["config"]["params"]["n"] == 5
    assert meta["config"]["params"]["lambda"] == 0.3


def test_itebd_output_schema(tmp_path, capsys):
    out = tmp_path / "it"
    code = cli.main(["itebd-energy", "--lambda", "0.7", "--b", "0.0", "--chi", "4",
                     "--dtau-schedule", "0.1", "--output", str(out)])
    assert code == 0
    comment, rows = read_csv(out / "itebd-energy.csv")
    assert comment["chi"] == 4 and comment["trotter_order"] == 2
    assert "discarded_weight" in comment and comment["dtau_schedule"] == [0.1]
    assert rows[0][:4] == ["lambda", "B", "chi", "energy_per_site"]
    assert float(rows[1][3]) == pytest.approx(-0.7, abs=1e-8)


def test_phase_probabilities_schema(tmp_path, capsys):
    out = tmp_path / "pp"
    assert cli.main(["phase-probabilities", "--lambda-points", "2", "--b-points", "2",
                     "--output", str(out)]) == 0
    _, rows = read_csv(out / "phase-probabilities.csv")
    assert rows[0] == ["N", "lambda", "B", "E_g", "gap", "P_FM", "P_PM", "P_AP"]
    assert len(rows) == 5


def test_output_is_reproducible(tmp_path, capsys):
    for tag in ("a", "b"):
        assert cli.main(["dd-fidelity", "--m", "1", "2", "--output", str(tmp_path / tag)]) == 0
    assert (tmp_path / "a" / "dd-fidelity.csv").read_text() == (tmp_path / "b" / "dd-fidelity.csv").read_text()


def test_point_failures_and_keep_going(monkeypatch, capsys):
    def failing(p, cfg):
        return cli.Result(["x"], [(1,)], {}, [{"error": "boom"}])
    monkeypatch.setitem(cli.RUNNERS, "spectrum", failing)
    assert cli.main(["spectrum"]) == 1
    assert cli.main(["spectrum", "--keep-going"]) == 0


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    assert cli.default_threads() == 3
    monkeypatch.setenv(cli.THREADS_ENV, "junk")
    assert cli.default_threads() == 1


def test_sweep_mode_parsing():
    assert cli._parse_mode("pulsed:4") == ("pulsed", 4.0)
    assert cli._parse_mode("strict")[0] == "strict"
    with pytest.raises(cli.ParameterError):
        cli._parse_mode("pulsed:x")


@pytest.mark.parametrize("figure", cli.FIGURES)
def test_bundles_are_valid(tmp_path, figure):
    out = cli.emit_reproduction_bundle(figure, tmp_path / figure)
    readme = (out / "README.md").read_text()
    assert "Unstated parameters" in readme
    configs = list(out.glob("*.json"))
    assert configs
    for path in configs:
        cfg = cli.load_config(path)
        cli.validate(cfg.experiment, cfg.params)


def test_bundle_command(tmp_path, capsys):
    assert cli.main(["bundle", "fig6", "--output", str(tmp_path / "b")]) == 0
    cfg = json.loads((tmp_path / "b" / "phase_probabilities.json").read_text())
    assert cfg["experiment"] == "phase-probabilities"
    assert cfg["params"]["lambda_points"] == cfg["params"]["b_points"] == 21
