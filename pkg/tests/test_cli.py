import csv
import io
import json
import math

import pytest

from wplab import cli
from wplab.cli import ExperimentConfig, UsageError, execute, main, parse_int_list, parse_space, render
from wplab.space_core import SpaceSpec
from wplab.weak_product import BracketInversionError


def run(argv, tmp_path, name="out"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out.read_bytes() if out.exists() else b""


def read_csv(data):
    return list(csv.DictReader(io.StringIO(data.decode())))


# -- parsing helpers -------------------------------------------------------


def test_parse_int_list():
    assert parse_int_list("3") == [3]
    assert parse_int_list("1..4") == [1, 2, 3, 4]
    assert parse_int_list("1,3,8") == [1, 3, 8]
    for bad in ("", "4..1", "a", "1..x"):
        with pytest.raises(UsageError):
            parse_int_list(bad)


def test_parse_space(tmp_path):
    assert parse_space("hardy") == SpaceSpec.hardy()
    assert parse_space("da3") == SpaceSpec.drury_arveson(3)
    f = tmp_path / "space.json"
    f.write_text(json.dumps({"coeffs": [1, 0.5, 0.25], "d": 2}))
    assert parse_space(f"custom:{f}") == SpaceSpec.custom([1, 0.5, 0.25], d=2)
    f.write_text("[1, 1, 10, 0]")
    assert parse_space(f"custom:{f}") == SpaceSpec.custom([1, 1, 10, 0])
    with pytest.raises(UsageError):
        parse_space("bergman")
    with pytest.raises(UsageError):
        parse_space(f"custom:{tmp_path / 'missing.json'}")


def test_empty_grid_rejected():
    with pytest.raises(UsageError):
        ExperimentConfig(command="cnp", space=SpaceSpec.dirichlet(), grid={"N": []})


# -- commands --------------------------------------------------------------


def test_gap_csv_schema_and_values(tmp_path):
    code, data = run(["gap", "--space", "da2", "--n", "1..4", "--trunc", "8"], tmp_path)
    assert code == 0
    assert data.startswith(b"n,N,row_norm,col_norm,ratio,expected_ratio,certificate_ok\r\n")
    rows = read_csv(data)
    assert [int(r["n"]) for r in rows] == [1, 2, 3, 4]
    for r in rows:
        n = int(r["n"])
        assert float(r["ratio"]) == pytest.approx(math.sqrt(n + 1), abs=1e-8)
        assert r["certificate_ok"] == "true"


def test_cnp_dirichlet(tmp_path):
    code, data = run(["cnp", "--space", "dirichlet", "--N", "50"], tmp_path)
    assert code == 0
    rec = json.loads(data)["records"][0]
    assert rec["passed"] is True and len(rec["coefficients"]) == 50


def test_cnp_custom_failure_is_a_result_not_an_error(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text("[1, 1, 10, 0]")
    code, data = run(["cnp", "--space", f"custom:{f}", "--N", "3", "--format", "csv"], tmp_path)
    assert code == 0
    (row,) = read_csv(data)
    assert row["passed"] == "false" and row["first_failure"] == "3"


def test_wp_bracket_contains_oracle(tmp_path):
    code, data = run(["wp", "--space", "hardy", "--h", "(1+z)^2", "--r", "2", "--D", "3"], tmp_path)
    assert code == 0
    doc = json.loads(data)
    (rec,) = doc["records"]
    for key in ("h", "lower", "lower_witness", "upper", "pairs", "h1_oracle", "iters"):
        assert key in rec
    assert rec["h1_oracle"] == pytest.approx(2, abs=1e-9)
    assert rec["lower"] - 1e-8 <= rec["h1_oracle"] <= rec["upper"] + 1e-8


def test_hankel_check_small(tmp_path):
    code, data = run(["hankel-check", "--count", "6", "--points", "3"], tmp_path)
    assert code == 0
    rows = read_csv(data)
    assert len(rows) == 9
    assert {r["kind"] for r in rows} == {"intertwining", "kernel"}
    assert all(r["ok"] == "true" for r in rows)


def test_mult_norm_and_dump(tmp_path):
    dump = tmp_path / "m.json"
    code, data = run(["mult-norm", "--phi", "z", "--trunc", "0..3", "--dump-matrix", str(dump)], tmp_path)
    assert code == 0
    assert [float(r["norm"]) for r in read_csv(data)] == pytest.approx([1] * 4, abs=1e-10)
    doc = json.loads(dump.read_text())
    assert (doc["rows"], doc["cols"], doc["conj_codomain"]) == (5, 4, False)
    assert len(doc["entries"]) == 20


def test_dump_matrix_hankel(tmp_path):
    code, data = run(["dump-matrix", "--kind", "hankel", "--phi", "z^2", "--trunc", "2"], tmp_path)
    assert code == 0
    doc = json.loads(data)
    assert doc["conj_codomain"] is True
    assert [e[0] for e in doc["entries"]] == [0, 0, 1, 0, 1, 0, 1, 0, 0]


# -- determinism and isolation ---------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        ["gap", "--n", "1..3"],
        ["hankel-check", "--count", "10", "--points", "5"],
        ["wp", "--h", "1 + z + z^3/2", "--r", "1,2"],
        ["mult-norm", "--phi", "z1+z2", "--space", "da2", "--trunc", "0..4", "--format", "json"],
    ],
)
def test_reports_are_byte_identical(argv, tmp_path):
    _, a = run(argv, tmp_path, "a")
    _, b = run(argv, tmp_path, "b")
    _, c = run([*argv, "--jobs", "3"], tmp_path, "c")
    assert a == b
    # the worker pool changes neither values nor order; only the config echo
    # would differ, and --jobs is not part of it
    assert a == c


def test_grid_cells_are_isolated(tmp_path):
    # one cell alone gives the same record as inside a larger grid
    _, alone = run(["hankel-check", "--count", "8", "--points", "0", "--format", "json"], tmp_path, "a")
    _, more = run(["hankel-check", "--count", "8", "--points", "4", "--format", "json"], tmp_path, "b")
    assert json.loads(alone)["records"] == json.loads(more)["records"][:8]


def test_timings_only_on_request(tmp_path):
    _, plain = run(["cnp", "--N", "4"], tmp_path, "a")
    _, timed = run(["cnp", "--N", "4", "--timings"], tmp_path, "b")
    assert "wall_times" not in json.loads(plain)
    assert len(json.loads(timed)["wall_times"]) == 1


def test_json_round_trip():
    cfg = ExperimentConfig(command="cnp", space=SpaceSpec.dirichlet(), grid={"N": [3, 5]}, fmt="json")
    report = execute(cfg)
    doc = json.loads(render(report, "json"))
    assert doc["records"] == json.loads(json.dumps(report.records))
    assert doc["config"] == cfg.echo()
    assert doc["tool"] == "wplab"


# -- exit codes ------------------------------------------------------------


def test_usage_errors_exit_1(tmp_path, capsys):
    assert main(["cnp", "--N", "4..1"]) == 1
    assert main(["wp", "--h", "z +"]) == 1
    assert main(["mult-norm", "--phi", "z", "--space", "nowhere"]) == 1
    with pytest.raises(SystemExit) as info:
        main(["gap", "--bogus"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 1


def test_failed_cell_exits_2_and_keeps_other_cells(tmp_path):
    # D = 0 cannot represent a degree-2 target; D = 1 can
    code, data = run(["wp", "--h", "(1+z)^2", "--r", "1", "--D", "0,1", "--format", "csv"], tmp_path)
    assert code == 2
    rows = read_csv(data)
    assert [r["status"] for r in rows] == ["error", "ok"]
    assert "InfeasibleFactorization" in rows[0]["error"]
    assert float(rows[1]["upper"]) == pytest.approx(2, abs=1e-8)


def test_bracket_inversion_exits_3(monkeypatch, tmp_path):
    def broken(*args, **kwargs):
        raise BracketInversionError("lower bound 3.0 exceeds upper bound 2.0")

    monkeypatch.setattr(cli, "wp_bracket", broken)
    code, _ = run(["wp", "--h", "(1+z)^2"], tmp_path)
    assert code == 3
