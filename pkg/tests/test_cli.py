import io
import json
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from metricflow import cli

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, text, name="exp.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run(path, out_dir, **kw):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(path, str(out_dir), out=out, err=err, **kw)
    return code, out.getvalue(), err.getvalue()


def test_empty_rows_give_header_only_csv(tmp_path):
    p = cli.emit([], "csv", tmp_path / "e.csv")
    assert p.read_text() == "suite,flow,param_json,measured,bound,pass,runtime_ms,seed\n"
    assert cli.emit([], "json", tmp_path / "e.json").read_text() == "[]\n"


def test_one_row_csv_is_two_deterministic_lines(tmp_path):
    row = cli.ResultRow("dyadic", "heat", {"m": 0, "n": 3, "t": 0.1}, 0.1, 0.30000000000000004, True, 0.0, 7)
    a = cli.emit([row], "csv", tmp_path / "a.csv").read_bytes()
    b = cli.emit([row], "csv", tmp_path / "b.csv").read_bytes()
    assert a == b
    lines = a.decode().splitlines()
    assert len(lines) == 2
    assert lines[1] == ('dyadic,heat,"{""m"": 0, ""n"": 3, ""t"": 0.1}",0.10000000000000001,'
                        '0.30000000000000004,true,0,7')


finite = st.floats(allow_nan=False, allow_infinity=False)
rows = st.lists(st.builds(
    cli.ResultRow,
    suite=st.sampled_from(cli.SUITES),
    flow=st.sampled_from(["heat", "stop", "split"]),
    params=st.dictionaries(st.text(min_size=1, max_size=5), st.one_of(st.integers(), finite, st.text(max_size=5)),
                           max_size=3),
    measured=finite, bound=finite, passed=st.booleans(), runtime_ms=finite,
    seed=st.integers(min_value=0, max_value=2 ** 31),
), max_size=4)


@given(rows)
def test_json_round_trip(rs):
    assert cli.parse_json(cli.format_json(rs)) == rs


@given(rows)
def test_csv_field_count(rs):
    import csv
    text = cli.format_csv(rs)
    parsed = list(csv.reader(io.StringIO(text)))
    assert len(parsed) == len(rs) + 1
    assert all(len(r) == len(cli.HEADER) for r in parsed)
    for r, row in zip(parsed[1:], rs):
        assert float(r[3]) == row.measured and json.loads(r[2]) == row.params


def test_eps_above_delta_is_a_config_error(tmp_path):
    p = write(tmp_path, 'suite = "euler-error"\n[flow]\nkind = "resolvent"\n[grids]\neps = [2.0]\n')
    code, _, err = run(p, tmp_path)
    assert code == cli.EXIT_CONFIG
    assert "grids.eps" in err


@pytest.mark.parametrize("text,field", [
    ('suite = "nope"\n[flow]\nkind = "heat"\n', "suite"),
    ('suite = "certify"\n[flow]\nkind = "wave"\n', "flow.kind"),
    ('suite = "certify"\n[flow]\nkind = "counterexample"\n', "flow.kind"),
    ('suite = "counterexample-demo"\n[flow]\nkind = "heat"\n', "flow.kind"),
    ('suite = "certify"\n[flow]\nkind = "heat"\n[flow.params]\nbogus = 1\n', "flow.params"),
    ('suite = "certify"\n[flow]\nkind = "heat"\n[grids]\ntau = [0.05]\n', "grids.tau"),
    ('suite = "tangency"\n[flow]\nkind = "heat"\n[grids]\nt = [5.0]\n', "grids.t"),
    ('suite = "dyadic"\n[flow]\nkind = "resolvent"\n[grids]\nt_final = 2.0\nm = [0, 1]\n', "grids.m"),
    ('suite = "certify"\nseed = -1\n[flow]\nkind = "heat"\n', "seed"),
    ('suite = "certify"\n[flow]\nkind = "heat"\n[output]\nformat = "xml"\n', "output.format"),
    ('suite = = "x"', "config"),
])
def test_config_errors_name_the_field(tmp_path, text, field):
    code, _, err = run(write(tmp_path, text), tmp_path)
    assert code == cli.EXIT_CONFIG
    assert err.startswith(f"config error: {field}")


def test_missing_config_file(tmp_path):
    code, _, err = run(tmp_path / "missing.toml", tmp_path)
    assert code == cli.EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path):
    text = ('suite = "tangency"\n[flow]\nkind = "resolvent"\n'
            '[flow.params]\nA = [[1.0, 0.0], [0.0, 1.0]]\n')
    code, _, err = run(write(tmp_path, text), tmp_path)
    # the identity generator is not contractive: rejected while building the flow
    assert code == cli.EXIT_CONFIG
    text = ('suite = "dyadic"\nt0 = 0.0\n[flow]\nkind = "heat"\n[flow.params]\nM = 0.5\n')
    code, _, err = run(write(tmp_path, text, "b.toml"), tmp_path)
    assert code == cli.EXIT_NUMERIC and "NotApplicable" in err


def test_failing_row_gives_exit_one(tmp_path):
    text = 'suite = "certify"\n[flow]\nkind = "resolvent"\n[grids]\nsamples = 4\nalpha_tol = 1e-9\n'
    code, out, _ = run(write(tmp_path, text), tmp_path)
    assert code == cli.EXIT_FAIL
    assert "1 failed" in out


def test_counterexample_demo_rows(tmp_path):
    code, out, _ = run(CONFIGS / "counterexample-demo.toml", tmp_path)
    assert code == 0
    rows = list((tmp_path / "counterexample-demo.csv").read_text().splitlines())
    first = rows[1].split(",")
    assert '""s"": 0.5' in rows[1] and '""t"": 1.0' in rows[1]
    assert abs(float(rows[1].rsplit(",", 5)[-5]) - 0.0606) < 1e-4


def test_seed_env_override(tmp_path, monkeypatch):
    text = 'suite = "certify"\nseed = 5\n[flow]\nkind = "resolvent"\n[grids]\nsamples = 4\n'
    p = write(tmp_path, text)
    monkeypatch.setenv("METRICFLOW_SEED", "99")
    assert run(p, tmp_path)[0] == 0
    body = (tmp_path / "exp.csv").read_text().splitlines()[1:]
    assert all(line.endswith(",99") for line in body)
    monkeypatch.setenv("METRICFLOW_SEED", "abc")
    assert run(p, tmp_path)[0] == cli.EXIT_CONFIG


def test_jobs_do_not_change_output(tmp_path):
    p = CONFIGS / "tangency-resolvent.toml"
    run(p, tmp_path / "a", jobs=1)
    run(p, tmp_path / "b", jobs=4)
    assert (tmp_path / "a" / "tangency-resolvent.csv").read_bytes() == \
        (tmp_path / "b" / "tangency-resolvent.csv").read_bytes()


def test_timing_column(tmp_path):
    text = 'suite = "tangency"\n[flow]\nkind = "resolvent"\n[output]\ntiming = true\n'
    assert run(write(tmp_path, text), tmp_path)[0] == 0
    lines = (tmp_path / "exp.csv").read_text().splitlines()[1:]
    assert any(float(l.split(",")[-2]) > 0 for l in lines)


def test_list_flows_text():
    text = cli.list_flows(io.StringIO())
    assert "heat: " in text and "L=1, ω=C·τ^0.5" in text
    assert "resolvent: " in text and "ω=3M·τ" in text
    assert "counterexample: " in text and "two-step commutation holds, k-step commutation fails" in text


def test_main_dispatch(tmp_path, capsys):
    assert cli.main(["list-flows"]) == 0
    assert "stop" in capsys.readouterr().out
    code = cli.main(["run", str(CONFIGS / "tangency-resolvent.toml"), "--output-dir", str(tmp_path), "--jobs", "2"])
    assert code == 0
    with pytest.raises(SystemExit):
        cli.main(["run", "x.toml", "--jobs", "0"])
