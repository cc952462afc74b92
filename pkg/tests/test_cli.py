import json

import pytest

from quasimarkov.cli import EXIT_NUMERIC, EXIT_OK, EXIT_VALIDATION, main, resolve_config
from quasimarkov.errors import ValidationError

FAST_COMMANDS = {
    "classify": ["--family", "ar1", "--alpha", "0.5"],
    "predict": ["--family", "ma1", "--order", "10", "--interp-window", "20"],
    "simulate": ["--update", "linear", "--a", "0.5", "--b", "1", "--family", "ar1", "--alpha", "0.5",
                 "--window", "2", "--horizon", "20", "--n-paths", "3", "--seed", "9"],
    "couple": ["--family", "ar1", "--alpha", "0.5", "--order", "2", "--U=-1,0", "--V", "0.5,1.5",
               "--n-samples", "5", "--seed", "4"],
    "diagnose": ["--kind", "strong_feller", "--update", "linear", "--family", "white", "--n-samples", "2000",
                 "--seed", "3"],
    "verify-paper": ["--only", "binary-uniform-blocks,ultrafeller-tv-limit"],
}


def _run(tmp_path, name, argv):
    out = tmp_path / name
    code = main([argv[0], *argv[1:], "--out", str(out)])
    return code, out


class TestCommands:
    def test_classify_ar1(self, tmp_path, capsys):
        code, out = _run(tmp_path, "c", ["classify", *FAST_COMMANDS["classify"]])
        assert code == EXIT_OK
        rep = json.loads((out / "classify.json").read_text())
        assert rep["result"]["quasi_markov"] == "yes"
        assert rep["result"]["off_white"] == "yes"
        assert rep["result"]["sigma2"] == pytest.approx(0.75, abs=1e-10)
        assert (out / "classify.csv").read_bytes().startswith(b"lag,covariance\r\n0,1.0\r\n1,0.5\r\n")

    @pytest.mark.parametrize("window, expected", [(None, 256), (12, 12)])
    def test_correlated_noise_window(self, tmp_path, window, expected):
        argv = ["simulate", "--update", "linear", "--family", "ma1", "--horizon", "3"]
        if window is not None:
            argv += ["--window", str(window)]
        code, out = _run(tmp_path, "s", argv)
        assert code == EXIT_OK
        assert json.loads((out / "simulate.json").read_text())["result"]["system"]["window"] == expected

    def test_csv_to_stdout(self, capsys):
        assert main(["predict", "--family", "ar1", "--alpha", "0.5", "--order", "2", "--format", "csv"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "j,coefficient,reflection"
        assert lines[1].startswith("1,0.5")

    def test_verify_paper_prints_table(self, capsys):
        assert main(["verify-paper", "--only", "binary-uniform-blocks"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "binary-uniform-blocks" in out and "PASS" in out

    def test_diagnose_ultrafeller(self, tmp_path):
        code, out = _run(tmp_path, "u", ["diagnose", "--kind", "ultrafeller", "--xs", "1,0.001"])
        assert code == EXIT_OK
        rows = (out / "diagnose.csv").read_text().splitlines()
        assert rows[0] == "x,tv,ci_low,ci_high" and len(rows) == 3

    def test_binary_simulation(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "command": "simulate",
            "system": {"update": {"tag": "binary_example"}, "noise": {"family": "bernoulli", "p": 0.3}},
            "x0": "noise", "horizon": 10, "n_paths": 4, "seed": 1,
        }))
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK


class TestPrecedence:
    def test_flags_override_file_override_defaults(self):
        cfg = resolve_config("predict", {"order": 5, "model": {"family": "ar1", "alpha": 0.2}}, {"alpha": 0.4})
        assert cfg["order"] == 5
        assert cfg["model"] == {"family": "ar1", "alpha": 0.4}
        assert cfg["interp_window"] == 0

    def test_family_flag_replaces_model(self):
        cfg = resolve_config("classify", {"model": {"family": "ar1", "alpha": 0.2}}, {"family": "ma1"})
        assert cfg["model"] == {"family": "ma1"}

    def test_unknown_field(self):
        with pytest.raises(ValidationError):
            resolve_config("classify", {"colour": 1})

    def test_command_mismatch(self):
        with pytest.raises(ValidationError):
            resolve_config("classify", {"command": "predict"})


class TestExitCodes:
    def test_malformed_config_writes_nothing(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text("{not json")
        out = tmp_path / "out"
        assert main(["classify", "--config", str(cfg), "--out", str(out)]) == EXIT_VALIDATION
        assert not out.exists()

    def test_invalid_parameter(self, tmp_path):
        out = tmp_path / "out"
        assert main(["classify", "--family", "ar1", "--alpha", "2", "--out", str(out)]) == EXIT_VALIDATION
        assert not out.exists()

    def test_missing_model(self, tmp_path):
        assert main(["classify", "--out", str(tmp_path / "o")]) == EXIT_VALIDATION

    def test_bad_flag_value(self):
        with pytest.raises(SystemExit) as exc:
            main(["classify", "--max-lag", "many"])
        assert exc.value.code == EXIT_VALIDATION

    def test_numeric_failure_names_rule(self, tmp_path):
        code, out = _run(tmp_path, "n", ["diagnose", "--kind", "ultrafeller", "--xs", "1e-7"])
        assert code == EXIT_NUMERIC
        rep = json.loads((out / "diagnose.json").read_text())
        assert rep["status"] == "numeric_failure"
        assert rep["rule"] == "oscillation-budget"


class TestReplay:
    @pytest.mark.parametrize("command", sorted(FAST_COMMANDS))
    def test_byte_identical_replay(self, tmp_path, command):
        name = command.replace("-", "_")
        code1, out1 = _run(tmp_path, "a", [command, *FAST_COMMANDS[command]])
        code2, out2 = _run(tmp_path, "b", [command, *FAST_COMMANDS[command]])
        assert code1 == code2 == EXIT_OK
        first = (out1 / f"{name}.json").read_bytes()
        assert first == (out2 / f"{name}.json").read_bytes()
        # the embedded config reproduces the report
        code3 = main([command, "--config", str(out1 / f"{name}.json"), "--out", str(tmp_path / "c")])
        assert code3 == EXIT_OK
        assert (tmp_path / "c" / f"{name}.json").read_bytes() == first
