import csv
import io
import json
import math

import pytest

from schottky_lax import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def genus1_path():
    return str(cli.reference_path("genus1"))


def test_make_reference_is_byte_stable(capsys, tmp_path):
    for kind in ("genus1", "genus2"):
        code, out, _ = run(capsys, "make-reference", kind)
        assert code == 0
        assert out == cli.reference_path(kind).read_text()
    target = tmp_path / "g.json"
    assert run(capsys, "make-reference", "genus1", "--out", str(target))[0] == 0
    assert target.read_text() == cli.reference_path("genus1").read_text()


def test_make_reference_seed_changes_point(capsys):
    _, a, _ = run(capsys, "make-reference", "genus1", "--seed", "1")
    assert a != cli.reference_path("genus1").read_text()
    assert cli.parse_config(a).samples["seed"] == 1


def test_config_round_trip(genus1):
    again = cli.parse_config(genus1.dumps())
    assert again.dumps() == genus1.dumps()


def test_validate_reference(capsys, genus1_path):
    code, out, _ = run(capsys, "validate", "--config", genus1_path)
    assert code == 0
    obj = json.loads(out)
    assert obj["kappa"] < 0.5


def test_validate_kappa_above_one_exits_2(capsys, tmp_path, genus1_path):
    obj = json.loads(open(genus1_path).read())
    a = math.sqrt(3.75)  # kappa = 2 |q| |g| |g^-1| = 1.2
    obj["phase"]["g"] = [[[[a, 0], [0, 0]], [[0, 0], [1 / a, 0]]]]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(obj))
    code, out, err = run(capsys, "validate", "--config", str(path))
    assert code == 2
    assert "lemma1-criterion" in out + err
    code, _, err = run(capsys, "check", "twist", "--config", str(path))
    assert code == 2 and "lemma1-criterion" in err


def test_check_emits_json_lines(capsys, genus1_path):
    code, out, _ = run(capsys, "check", "twist", "pairing", "--config", genus1_path)
    assert code == 0
    lines = [json.loads(l) for l in out.splitlines()]
    assert [l["check"] for l in lines] == ["twist", "pairing"]
    assert all(l["pass"] for l in lines)


def test_check_tolerance_override_fails(capsys, genus1_path):
    code, out, _ = run(capsys, "check", "--checks", "twist", "--tolerance", "twist=1e-30",
                       "--config", genus1_path)
    assert code == 1 and json.loads(out)["tolerance"] == 1e-30


def test_check_max_word_length_override(capsys, genus1_path):
    code, out, _ = run(capsys, "check", "twist", "--max-word-length", "1", "--config", genus1_path)
    assert code == 1 and not json.loads(out)["pass"]


def test_usage_errors_exit_64(capsys, genus1_path, tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["check", "nonsense", "--config", genus1_path])
    assert exc.value.code == 64
    with pytest.raises(SystemExit) as exc:
        cli.main(["check", "--tolerance", "twist", "--config", genus1_path])
    assert exc.value.code == 64
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 64
    bad = tmp_path / "bad.json"
    bad.write_text('{"algebra": {"kind": "sl", "n": 2},\n  "phase": }')
    code, _, err = run(capsys, "validate", "--config", str(bad))
    assert code == 64 and "line 2" in err
    code, _, err = run(capsys, "validate", "--config", str(tmp_path / "missing.json"))
    assert code == 64


def test_missing_field_is_diagnosed(capsys, tmp_path, genus1_path):
    obj = json.loads(open(genus1_path).read())
    del obj["schottky"]
    path = tmp_path / "c.json"
    path.write_text(json.dumps(obj))
    code, _, err = run(capsys, "validate", "--config", str(path))
    assert code == 64 and "schottky" in err


def test_scan_word_length(capsys, genus1_path):
    code, out, _ = run(capsys, "scan", "--checks", "twist", "--range", "1..4", "--config", genus1_path)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["value"]) for r in rows] == [1, 2, 3, 4]
    res = [float(r["residual"]) for r in rows]
    assert all(b < a for a, b in zip(res, res[1:]))
    assert rows[0]["pass"] == "False" and code == 1


def test_scan_quadrature_nodes(capsys, genus1_path):
    code, out, _ = run(capsys, "scan", "--checks", "pairing,twist", "--parameter", "quadratureNodes",
                       "--range", "16,64", "--config", genus1_path)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert {r["check"] for r in rows} == {"pairing"}
    assert float(rows[1]["residual"]) < float(rows[0]["residual"]) and rows[1]["pass"] == "True"


def test_scan_empty_range_exits_64(genus1_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["scan", "--range", "5..2", "--config", genus1_path])
    assert exc.value.code == 64


def test_log_level_from_environment(monkeypatch, capsys, genus1_path):
    import logging
    monkeypatch.setenv("SCHOTTKY_LOG", "INFO")
    logging.getLogger().handlers.clear()
    code, _, err = run(capsys, "check", "convergence", "--config", genus1_path)
    assert code == 0 and "running convergence" in err
    logging.getLogger().handlers.clear()
