import csv
import io
import json
import subprocess
import sys

import pytest

from qfock.cli import ConfigError, build_config, main, parse_config, parse_range, read_config_text, run


def test_parse_range_forms():
    assert parse_range("1..3") == (1, 2, 3)
    assert parse_range("2,4,8") == (2, 4, 8)
    assert parse_range("5") == (5,)
    with pytest.raises(ValueError):
        parse_range("3..1")


def test_flags_give_valid_config():
    cfg = parse_config(["ao-witness", "--q", "0.5", "--d", "2", "--k", "1..3", "--N", "6"])
    assert cfg.q == 0.5 and cfg.k_range == (1, 2, 3) and cfg.N == 6
    assert "delta" in cfg.defaulted and "q" not in cfg.defaulted


def test_flags_override_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# witness run\nq = 0.3\nd = 3   # alphabet\nk = 1..2\n")
    cfg = parse_config(["ao-witness", "--config", str(path), "--q", "0.5"])
    assert cfg.q == 0.5 and cfg.d == 3 and cfg.k_range == (1, 2)


@pytest.mark.parametrize(
    "text, word",
    [
        ("experiment = gram\nq = 0.5\nbogus = 1\n", "bogus"),
        ("experiment = gram\nq = 1.5\n", "q"),
        ("experiment = gram\nd = 2\n", "q"),
        ("experiment = gram\nq = 0.5\nk = 1..\n", "k"),
    ],
)
def test_config_errors_name_the_field(text, word):
    with pytest.raises(ConfigError, match=word):
        parse_config([], text=text)


def test_config_text_requires_key_value():
    with pytest.raises(ConfigError, match="line 1"):
        read_config_text("q 0.5\n")


def test_cap_checked_before_computation():
    with pytest.raises(ConfigError, match="dense cap"):
        build_config({"experiment": "gram", "q": 0.5, "d": 3, "k": (1, 2, 3, 4, 5, 6, 7, 8)})


def run_main(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cq_zero_prints_one(capsys):
    code, out, _ = run_main(["cq", "--q", "0"], capsys)
    assert code == 0
    assert json.loads(out[out.index("{"):])["rows"][0]["cq"] == 1.0


def test_crossover_operational_error(capsys):
    code, _, err = run_main(["crossover", "--q", "0.3", "--d", "2"], capsys)
    assert code == 1
    assert "q^2 d" in err and "<= 1" in err


def test_bad_flag_exits_one(capsys):
    assert run_main(["gram", "--q", "0.5", "--nope", "1"], capsys)[0] == 1
    assert run_main(["ao-witness", "--q", "1.2"], capsys)[0] == 1


def test_ao_witness_csv_columns(tmp_path, capsys):
    out = tmp_path / "w.csv"
    code, text, _ = run_main(
        ["ao-witness", "--q", "0.5", "--d", "2", "--k", "1..2", "--N", "4", "--format", "csv", "--out", str(out)],
        capsys,
    )
    assert code == 0
    assert "# defaults:" in text
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert rows[0] == ["k", "identity", "restricted", "tensor", "nou", "ok_lower", "ok_upper"]
    assert [r[0] for r in rows[1:]] == ["1", "2"]


def test_ao_witness_json_schema(tmp_path, capsys):
    out = tmp_path / "w.json"
    code, _, _ = run_main(["ao-witness", "--q", "-0.5", "--d", "2", "--k", "1", "--N", "4", "--out", str(out)], capsys)
    data = json.loads(out.read_text())
    assert set(data["params"]) == {"q", "d", "delta", "N"}
    assert list(data["rows"][0]) == ["k", "identity", "restricted", "tensor", "nou", "ok_lower", "ok_upper"]
    assert data["crossover_k"] is None
    assert "flags" in data
    assert code == 0


def test_false_verdict_exits_two(monkeypatch, capsys):
    from qfock import witness

    monkeypatch.setattr(witness, "nou_bound", lambda q, k, d: 0.0)
    code, _, _ = run_main(["ao-witness", "--q", "0.5", "--k", "1", "--N", "3"], capsys)
    assert code == 2


def test_partial_artifact_on_failure(monkeypatch, tmp_path):
    from qfock import witness
    from qfock.qsym import QFockError

    real = witness.witness_row

    def flaky(q, d, k, *a, **kw):
        if k == 2:
            raise QFockError("interrupted")
        return real(q, d, k, *a, **kw)

    monkeypatch.setattr(witness, "witness_row", flaky)
    out = tmp_path / "p.json"
    cfg = build_config({"experiment": "ao-witness", "q": 0.5, "k": (1, 2), "N": 4, "out": str(out)})
    assert run(cfg, stdout=io.StringIO()) == 1
    data = json.loads(out.read_text())
    assert data["partial"] is True and len(data["rows"]) == 1


def test_console_script_runs():
    res = subprocess.run(
        [sys.executable, "-m", "qfock", "gram", "--q", "0.5", "--d", "2", "--k", "1..3", "--format", "csv"],
        capture_output=True, text=True,
    )
    assert res.returncode == 0
    assert "k,dim,min_eig,max_eig,dense_residual" in res.stdout
