import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from noetherq import cli
from noetherq.formats import (
    InputError, canonical_dumps, fixture_path, list_fixtures, load_dynamics, load_json, parse_chain,
    parse_channel, parse_observable, to_jsonable,
)

CHANNEL_FIXTURES = [name for name in list_fixtures()
                    if any(k in json.loads(fixture_path(name).read_text())
                           for k in ("kraus", "effects", "stages", "pipelines", "superoperator"))]


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj, indent=2))
    return str(p)


def run_main(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


# ---------------------------------------------------------------- parsing

def test_fixture_library_contents():
    names = set(list_fixtures())
    for required in ("identity", "pinching", "transpose", "luders_half", "luders_projection",
                     "unitary_sigma_x", "unitary_phase", "dephasing", "m3_heisenberg",
                     "m3_schrodinger", "counter3"):
        assert required in names


def test_parse_kraus_channel_both_pictures():
    data, src = load_json("fixture:m3_heisenberg")
    h = parse_channel(data, src)
    data, src = load_json("fixture:m3_schrodinger")
    s = parse_channel(data, src)
    assert np.abs(h.heisenberg.matrix - s.heisenberg.matrix).max() <= 1e-12
    assert h.schrodinger.is_trace_preserving() and h.heisenberg.is_unital()


def test_parse_complex_entries(tmp_path):
    path = write(tmp_path, "c.json", {"dim": 2, "kraus": [[[0, [0, -1]], [[0, 1], 0]]]})
    data, src = load_json(path)
    ch = parse_channel(data, src)
    Y = np.array([[0, -1j], [1j, 0]])
    assert np.allclose(ch.kraus.kraus_ops[0], Y)


def test_parse_superoperator_and_pipelines(tmp_path):
    swap = np.eye(4)[[0, 2, 1, 3]].tolist()
    data, src = load_json(write(tmp_path, "s.json", {"dim": 2, "superoperator": swap}))
    ch = parse_channel(data, src)
    X = np.array([[1, 2], [3, 4]], dtype=complex)
    assert np.allclose(ch.schrodinger.apply(X), X.T)
    data, src = load_json("fixture:transpose_mixture")
    ch = parse_channel(data, src)
    assert ch.schrodinger.is_trace_preserving()


def test_parse_chain_and_observables():
    data, src = load_json("fixture:counter3")
    c = parse_chain(data, src)
    assert c.kind == "stochastic_matrix" and c.n_states == 3
    data, src = load_json("fixture:counter3_observable")
    assert np.array_equal(parse_observable(data, src, 3), [1.0, -1.0, 0.0])
    data, src = load_json("fixture:m3_observable")
    assert np.allclose(parse_observable(data, src, 3), np.diag([1, 0, 0.5]))


def test_load_dynamics_dispatches_on_content():
    kind, spec = load_dynamics("fixture:dephasing")
    assert kind == "lindblad" and spec.dim == 2
    kind, ch = load_dynamics("fixture:pinching")
    assert kind == "channel"


@pytest.mark.parametrize("obj, field, line", [
    ('{"dim": 2,\n "kraus": [[[1, 0], [0]]]}', "kraus[0][1]", 2),
    ('{"dim": 2,\n "picture": "interaction",\n "kraus": [[[1, 0], [0, 1]]]}', "picture", 2),
    ('{"dim": 0,\n "kraus": []}', "dim", 1),
    ('{"dim": 2,\n\n "kraus": [[["a", 0], [0, 1]]]}', "kraus[0][0][0]", 3),
    ('{"dim": 3,\n "kraus": [[[1, 0], [0, 1]]]}', "kraus[0]", 2),
    ('{"dim": 2}', None, None),
    ('{"dim": 2,\n "kraus": [[[1, 0], [0, 1]]],\n "effects": [[[1, 0], [0, 1]]]}', "effects", 3),
])
def test_channel_parse_errors_name_line_and_field(tmp_path, obj, field, line):
    data, src = load_json(write(tmp_path, "bad.json", obj))
    with pytest.raises(InputError) as err:
        parse_channel(data, src)
    assert err.value.field == field and err.value.line == line
    if field:
        assert f"field '{field}'" in str(err.value)


def test_kraus_normalization_error_is_reported(tmp_path):
    data, src = load_json(write(tmp_path, "k.json", {"dim": 2, "kraus": [[[2, 0], [0, 1]]]}))
    with pytest.raises(InputError) as err:
        parse_channel(data, src)
    assert err.value.field == "kraus"


def test_json_syntax_errors_carry_the_line(tmp_path):
    with pytest.raises(InputError) as err:
        load_json(write(tmp_path, "x.json", '{\n  "dim": 2,\n  "kraus": [1,,]\n}'))
    assert err.value.line == 3
    with pytest.raises(InputError):
        load_json(str(tmp_path / "missing.json"))
    with pytest.raises(InputError):
        load_json(write(tmp_path, "list.json", "[1, 2]"))


def test_chain_parse_errors(tmp_path):
    data, src = load_json(write(tmp_path, "c.json", {"states": 2, "kind": "markov", "matrix": [[1, 0], [0, 1]]}))
    with pytest.raises(InputError) as err:
        parse_chain(data, src)
    assert err.value.field == "kind"
    data, src = load_json(write(tmp_path, "c2.json", {"states": 2, "matrix": [[1, [0, 1]], [0, 1]]}))
    with pytest.raises(InputError) as err:
        parse_chain(data, src)
    assert err.value.field == "matrix"


# ---------------------------------------------------------------- canonical JSON

def test_canonical_float_formatting():
    assert canonical_dumps(0.1) == "0.10000000000000001"
    assert canonical_dumps(-0.0) == "0"
    assert canonical_dumps(float("nan")) == '"nan"'
    assert canonical_dumps(float("-inf")) == '"-inf"'
    assert canonical_dumps({"b": 1, "a": [True, None]}) == '{\n  "a": [true, null],\n  "b": 1\n}'


def test_to_jsonable_converts_numpy_and_complex():
    doc = to_jsonable({"m": np.array([[1 + 2j, 0], [0, 1]]), "r": np.eye(2), "z": 1j, "b": np.bool_(True),
                       "i": np.int64(3)})
    assert doc["m"] == [[[1.0, 2.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]
    assert doc["r"] == [[1.0, 0.0], [0.0, 1.0]] and doc["z"] == [0.0, 1.0]
    assert doc["b"] is True and doc["i"] == 3
    with pytest.raises(TypeError):
        to_jsonable(object())


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-10**6, 10**6)
    | st.floats(allow_nan=False, allow_infinity=False) | st.text(max_size=8),
    lambda children: st.lists(children, max_size=4) | st.dictionaries(st.text(max_size=6), children, max_size=4),
    max_leaves=20,
)


@given(json_values)
def test_canonical_json_round_trips(doc):
    text = canonical_dumps(doc)
    assert canonical_dumps(json.loads(text)) == text


@pytest.mark.parametrize("argv", [
    ["analyze-channel", "--file", "fixture:m3_heisenberg", "--bases"],
    ["noether", "--channel", "fixture:transpose_mixture", "--observable", "fixture:sz"],
    ["lindblad-constants", "--file", "fixture:dephasing", "--observable", "fixture:sz"],
    ["ergodic", "--file", "fixture:m3_heisenberg", "--bases"],
    ["classical", "--matrix", "fixture:counter3", "--observable", "fixture:counter3_observable"],
    ["dilate", "--file", "fixture:luders_unsharp", "--bases"],
])
def test_emitted_reports_round_trip_byte_identically(argv, capsys):
    code, out, _ = run_main(argv + ["--json"], capsys)
    assert code == 0
    assert canonical_dumps(json.loads(out)) + "\n" == out


# ---------------------------------------------------------------- commands

def test_noether_identity_sz(capsys):
    code, out, _ = run_main(["noether", "--channel", "fixture:identity", "--observable", "fixture:sz", "--json"],
                            capsys)
    assert code == 0
    doc = json.loads(out)
    for section in ("discrete", "measurement", "propagation"):
        if section in doc["result"]:
            assert all(c["holds"] for c in doc["result"][section]["clauses"].values())
    assert "discrete" in doc["result"] and doc["consistent"] is True


def test_analyze_channel_m3(capsys):
    code, out, _ = run_main(["analyze-channel", "--file", "fixture:m3_heisenberg", "--json"], capsys)
    assert code == 0
    st_ = json.loads(out)["result"]["structure"]
    assert st_["fix"]["dimension"] == 4 and st_["constants2"]["dimension"] == 1
    assert st_["fix_is_algebra"] is False
    assert np.allclose(st_["witnesses"][0]["a"], np.diag([1, 0, 0.5]))


def test_classical_counter3(capsys):
    code, out, _ = run_main(["classical", "--matrix", "fixture:counter3", "--observable",
                             "fixture:counter3_observable", "--json"], capsys)
    assert code == 0
    v = json.loads(out)["result"]["verdict"]
    assert v["details"]["U#(O) = O"]["holds"] is True
    assert v["details"]["U#(O^2) = O^2"]["holds"] is False
    assert v["consistent"] is True


@pytest.mark.parametrize("name", CHANNEL_FIXTURES)
def test_every_channel_fixture_analyzes_cleanly(name, capsys):
    code, out, err = run_main(["analyze-channel", "--file", f"fixture:{name}", "--json"], capsys)
    assert code == 0, err
    doc = json.loads(out)
    # every clause carries a residual, every subspace a dimension and tolerance
    for sub in ("fix", "mult_domain", "bimodule", "constants2"):
        if sub in doc["result"]["structure"]:
            assert {"dimension", "rank_tol", "eq_tol"} <= set(doc["result"]["structure"][sub])


def test_transpose_report(capsys):
    code, out, _ = run_main(["analyze-channel", "--file", "fixture:transpose", "--json"], capsys)
    doc = json.loads(out)["result"]
    assert code == 0
    assert doc["flags"]["completely_positive"] is False
    assert math.isclose(doc["choi_min_eigenvalue"], -1.0, abs_tol=1e-12)
    assert doc["positivity"]["2"]["status"] == "violated"


def test_lindblad_and_ergodic_and_dilate(capsys):
    code, out, _ = run_main(["lindblad-constants", "--file", "fixture:dephasing", "--json",
                             "--times", "0.1,1,10"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["result"]["constants"]["dimension"] == 2
    assert doc["request"]["times"] == [0.1, 1.0, 10.0]
    code, out, _ = run_main(["ergodic", "--file", "fixture:dephasing", "--json"], capsys)
    doc = json.loads(out)["result"]
    assert code == 0 and all(doc["checks"].values()) and doc["mode"] == "continuous"
    code, out, _ = run_main(["dilate", "--file", "fixture:luders_unsharp", "--json"], capsys)
    doc = json.loads(out)["result"]
    assert code == 0 and doc["reconstruction_error"] <= 1e-9


def test_text_output(capsys):
    code, out, _ = run_main(["noether", "--channel", "fixture:identity", "--observable", "fixture:sz"], capsys)
    assert code == 0 and "consistent: True" in out and not out.lstrip().startswith("{")


def test_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("NOETHERQ_SEED", "17")
    _, out, _ = run_main(["analyze-channel", "--file", "fixture:transpose", "--json"], capsys)
    assert json.loads(out)["request"]["seed"] == 17
    _, out, _ = run_main(["analyze-channel", "--file", "fixture:transpose", "--json", "--seed", "3"], capsys)
    assert json.loads(out)["request"]["seed"] == 3
    monkeypatch.setenv("NOETHERQ_SEED", "abc")
    code, _, err = run_main(["analyze-channel", "--file", "fixture:transpose"], capsys)
    assert code == 1 and "NOETHERQ_SEED" in err


def test_reports_are_deterministic(capsys):
    argv = ["analyze-channel", "--file", "fixture:transpose_mixture", "--json"]
    assert run_main(argv, capsys)[1] == run_main(argv, capsys)[1]


# ---------------------------------------------------------------- exit codes

def test_input_errors_exit_1(tmp_path, capsys):
    bad = write(tmp_path, "bad.json", '{"dim": 2,\n "kraus": [[[1, 0], [0]]]}')
    code, _, err = run_main(["analyze-channel", "--file", bad], capsys)
    assert code == 1 and "line 2" in err and "kraus[0][1]" in err
    code, _, _ = run_main(["analyze-channel", "--file", str(tmp_path / "nope.json")], capsys)
    assert code == 1
    code, _, err = run_main(["noether", "--channel", "fixture:identity", "--observable", "fixture:m3_observable"],
                            capsys)
    assert code == 1 and "dim" in err
    code, _, _ = run_main(["analyze-channel", "--file", "fixture:identity", "--tol-eq", "-1"], capsys)
    assert code == 1


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["analyze-channel"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["lindblad-constants", "--file", "fixture:dephasing", "--times", "1,-2"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 1


def test_inconsistent_verdict_exits_2(monkeypatch, capsys):
    # a verdict whose clauses disagree is the theorem-violation signal
    real = cli.noether_discrete

    def broken(*args, **kwargs):
        v = real(*args, **kwargs)
        first = next(iter(v.clauses))
        v.clauses[first] = not v.clauses[first]
        return v

    monkeypatch.setattr(cli, "noether_discrete", broken)
    code, out, _ = run_main(["noether", "--channel", "fixture:identity", "--observable", "fixture:sz", "--json"],
                            capsys)
    assert code == 2 and json.loads(out)["consistent"] is False


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "noetherq", "noether", "--channel", "fixture:identity",
                        "--observable", "fixture:sz", "--json"], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["consistent"] is True
