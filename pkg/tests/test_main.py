import asyncio

import numpy as np
import pytest
import ujson

from config import Config
from main import EXIT_INPUT_ERROR, EXIT_OK, build_parser, main


@pytest.fixture(autouse=True)
def restore_config(monkeypatch):
    for name in ("SEED", "N_MAX", "ASCENT_RESTARTS", "JOBS", "LOG_LEVEL", "TOLERANCE_OVERRIDES"):
        monkeypatch.setattr(Config, name, getattr(Config, name))


def write_json(path, payload):
    path.write_text(ujson.dumps(payload), encoding="utf-8")
    return str(path)


def run_cli(capsys, *argv):
    code = asyncio.run(main(list(argv)))
    out = capsys.readouterr().out.strip().splitlines()
    return code, ujson.loads(out[-1])


def test_parser_options_follow_subcommand():
    args = build_parser().parse_args(["verify", "axioms", "--seed", "0x10", "--trials", "3"])
    assert args.seed == 16 and args.trials == 3 and args.suite == "axioms"


def test_norm_command(tmp_path, capsys):
    space = write_json(tmp_path / "space.json", {"tag": "HilbMax", "dim": 2})
    element = write_json(
        tmp_path / "x.json", {"coords": {"rows": 2, "cols": 2, "entries": [1, 0, 0, 1]}}
    )
    code, payload = run_cli(capsys, "norm", space, element, "--restarts", "4")
    assert code == EXIT_OK
    assert payload["lower"] == pytest.approx(np.sqrt(2))
    assert payload["exact"] is True


def test_sbnorm_command(tmp_path, capsys):
    operator = write_json(
        tmp_path / "phi.json",
        {
            "domain": {"tag": "T2", "n": 2},
            "codomain": {"tag": "HilbMax", "dim": 2},
            "matrix": {"rows": 2, "cols": 2, "entries": [3, 0, 0, 4]},
        },
    )
    code, payload = run_cli(capsys, "sbnorm", operator, "--restarts", "4")
    assert code == EXIT_OK
    assert payload["upper"] == pytest.approx(5.0) and payload["level"] == 2
    code, payload = run_cli(capsys, "sbnorm", operator, "--level", "1", "--restarts", "4")
    assert payload["upper"] == pytest.approx(4.0)


def test_free_command_writes_out_file(tmp_path, capsys):
    out = tmp_path / "free.json"
    code, payload = run_cli(capsys, "free", "1", "1", "--out", str(out))
    assert code == EXIT_OK
    assert payload["dim"] == 1 and payload["space"] == {"tag": "T2", "n": 1}
    assert ujson.loads(out.read_text(encoding="utf-8")) == payload


def test_verify_command(capsys):
    code, payload = run_cli(capsys, "verify", "cstar-min", "--trials", "3", "--seed", "7")
    assert code == EXIT_OK
    assert payload["suite_id"] == "cstar-min" and payload["failures"] == []


def test_list_command(capsys):
    code, payload = run_cli(capsys, "list")
    assert code == EXIT_OK
    assert len(payload["suites"]) == 19


def test_malformed_input_exits_with_code_2(tmp_path, capsys):
    space = tmp_path / "space.json"
    space.write_text("{broken", encoding="utf-8")
    element = write_json(tmp_path / "x.json", {"rows": 1, "cols": 1, "entries": [1]})
    code, payload = run_cli(capsys, "norm", str(space), element)
    assert code == EXIT_INPUT_ERROR
    assert payload["error"] == "input_error"


def test_missing_file_exits_with_code_2(tmp_path, capsys):
    code, payload = run_cli(capsys, "cofree", "0")
    assert code == EXIT_INPUT_ERROR
    assert payload["error"] == "dimension_error"
    code, payload = run_cli(capsys, "norm", str(tmp_path / "nope.json"), str(tmp_path / "x.json"))
    assert code == EXIT_INPUT_ERROR


def test_invalid_config_exits_with_code_2(capsys):
    code, payload = run_cli(capsys, "list", "--n-max", "40")
    assert code == EXIT_INPUT_ERROR
    assert "N_MAX" in payload["message"]


def test_tolerance_override_reaches_suite_budget(capsys):
    code, payload = run_cli(capsys, "list", "--tolerance", "smith=0.25", "--tolerance", "axioms=1e-6")
    assert code == EXIT_OK
    tolerances = {s["suite_id"]: s["tolerance"] for s in payload["suites"]}
    assert tolerances["smith"] == 0.25
    assert tolerances["axioms"] == 1e-6
    assert tolerances["cstar-min"] == 1e-12


@pytest.mark.parametrize("override", ["smith=2", "nosuch=0.1", "smith", "smith=abc"])
def test_bad_tolerance_override_exits_with_code_2(capsys, override):
    code, payload = run_cli(capsys, "list", "--tolerance", override)
    assert code == EXIT_INPUT_ERROR
    assert payload["error"] == "input_error"
