import io
import json
from pathlib import Path

import numpy as np
import pytest

from tsopt.cli import EXIT_DIAG, EXIT_NULL, EXIT_OK, EXIT_USAGE, run
from tsopt.circuit import evaluate
from tsopt.fileformat import encode_pairs, parse_circuit
from tsopt.operations import StatePair

from test_acceptance import _doc, malformed_documents

GOLDEN = Path(__file__).parent / "golden"


def call(*argv):
    buf = io.StringIO()
    code = run([str(a) for a in argv], buf)
    return code, buf.getvalue()


def as_map(dist):
    out = {}
    for labels, p in dist.items():
        out[tuple(sorted(zip(dist.nodes, map(str, labels))))] = p
    return out


def test_eval_classical_golden():
    code, text = call("eval", GOLDEN / "classical_bit_half.json", "--json")
    assert code == EXIT_OK
    doc = json.loads(text)
    expected = json.loads((GOLDEN / "expected.json").read_text())["classical_bit_half"]
    assert np.allclose(doc["table"], expected["table"], atol=1e-9)
    assert doc["tolerances"]["tol"] == 1e-9


def test_eval_text():
    code, text = call("eval", GOLDEN / "qubit_born.json")
    assert code == EXIT_OK and text.strip().splitlines()[0].endswith("p")


def test_eval_null_exit_code():
    code, text = call("eval", GOLDEN / "null_prep_meas.json")
    assert code == EXIT_NULL and "null" in text
    code, _ = call("classify", GOLDEN / "null_prep_meas.json")
    assert code == EXIT_NULL


def test_json_is_byte_identical():
    args = ("eval", GOLDEN / "random_chain2_0.json", "--json")
    assert call(*args)[1] == call(*args)[1]
    assert call("classical-demo", "--p", "0.3", "--q", "0.5", "--json")[1] == \
        call("classical-demo", "--p", "0.3", "--q", "0.5", "--json")[1]


def test_check_ok_and_malformed(tmp_path):
    good = tmp_path / "good.json"
    good.write_text(json.dumps(_doc()))
    assert call("check", good)[0] == EXIT_OK
    for name, text in malformed_documents().items():
        path = tmp_path / f"{name}.json"
        path.write_text(text)
        code, out = call("check", path, "--json")
        assert code == EXIT_DIAG, name
        diag = json.loads(out)["diagnostics"][0]
        assert diag["code"].startswith("E") and diag["line"] is not None, name
        code, out = call("check", path)
        assert code == EXIT_DIAG and str(path) in out


def test_missing_file_and_bad_usage(tmp_path):
    assert call("eval", tmp_path / "nope.json")[0] == EXIT_USAGE
    assert call("frobnicate")[0] == EXIT_USAGE
    assert call("eval", GOLDEN / "qubit_born.json", "--seed", "-1")[0] == EXIT_USAGE
    assert call("classical-demo", "--p", "0.5")[0] == EXIT_USAGE


def test_classify():
    code, text = call("classify", GOLDEN / "random_chain1_nonstandard.json", "--json")
    doc = json.loads(text)
    assert code == EXIT_OK and "non-standard" in doc["operations"].values()
    code, text = call("classify", GOLDEN / "qubit_born.json", "--json")
    assert set(json.loads(text)["operations"].values()) == {"standard"}


@pytest.mark.parametrize("name", ["random_chain2_0", "two_wire_qubits", "qubit_postselected_measurement"])
def test_reverse_then_eval_matches_forward(tmp_path, name):
    path = GOLDEN / f"{name}.json"
    code, text = call("reverse", path)
    assert code == EXIT_OK
    rev = tmp_path / "rev.json"
    rev.write_text(text)
    fwd = as_map(evaluate(parse_circuit(path.read_text())))
    back = as_map(evaluate(parse_circuit(text)))
    assert fwd.keys() == back.keys()
    assert max(abs(fwd[k] - back[k]) for k in fwd) <= 1e-9
    assert call("eval", rev)[0] == EXIT_OK


def test_reverse_with_s_matrix(tmp_path):
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    s = tmp_path / "s.json"
    s.write_text(json.dumps({"kind": "II", "transpose": True,
                             "matrices": {"2": [[[v, 0] for v in row] for row in h]}}))
    path = GOLDEN / "random_chain2_1.json"
    code, text = call("reverse", path, "--s-matrix", s)
    assert code == EXIT_OK
    fwd = as_map(evaluate(parse_circuit(path.read_text())))
    back = as_map(evaluate(parse_circuit(text)))
    assert max(abs(fwd[k] - back[k]) for k in fwd) <= 1e-9
    s.write_text(json.dumps({"kind": "I", "matrices": {"2": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}}))
    assert call("reverse", path, "--s-matrix", s)[0] == EXIT_DIAG


def test_oracle_check():
    code, text = call("oracle-check", GOLDEN / "random_chain3_qutrit.json", "--json")
    doc = json.loads(text)
    assert code == EXIT_OK and doc["agree"] and doc["max_deviation"] <= 1e-9


def test_distance(tmp_path):
    bar = np.diag([0.5, 0.5])
    pairs = [StatePair(np.diag([0.5, 0.0]), bar), StatePair(np.diag([0.0, 0.5]), bar)]
    path = tmp_path / "pairs.json"
    path.write_text(encode_pairs("state", pairs))
    code, text = call("distance", path, "--json")
    doc = json.loads(text)
    assert code == EXIT_OK and doc["exact"] and doc["lower_bound"] == 1.0
    path.write_text('{"kind": "state", "pairs": []}')
    assert call("distance", path)[0] == EXIT_DIAG


def test_classical_demo():
    code, text = call("classical-demo", "--p", "0.5", "--q", "0.5", "--json")
    doc = json.loads(text)
    assert code == EXIT_OK
    assert np.allclose(doc["bit_distribution"], (0.25, 0.75))
    assert all(doc["bayes"]["checks"].values())
    code, text = call("classical-demo", "--p", "0.5", "--q", "2.0")
    assert code == EXIT_DIAG
