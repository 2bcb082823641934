import numpy as np
import pytest

from wsp.certify import certify, wnsp_falsify_real
from wsp.io import (
    FormatError,
    JsonRecord,
    parse_float_list,
    read_matrix,
    read_matrix_csv,
    read_vector,
    read_vector_csv,
    write_matrix_csv,
    write_vector_csv,
)


def test_matrix_csv_round_trip(tmp_path):
    A = np.random.default_rng(0).standard_normal((4, 3))
    p = tmp_path / "A.csv"
    write_matrix_csv(p, A)
    assert np.array_equal(read_matrix_csv(p), A)


def test_vector_csv_round_trip(tmp_path):
    x = np.array([1e-300, -2.5, 1 / 3])
    p = tmp_path / "x.csv"
    write_vector_csv(p, x)
    assert np.array_equal(read_vector_csv(p), x)
    p.write_text("1,2,3\n")
    assert np.array_equal(read_vector_csv(p), [1, 2, 3])


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("1,2\n3,x\n", 2, "not a number"),
        ("1,2\n\n3\n", 3, "expected 2 columns"),
        ("1,nan\n", 1, "non-finite"),
    ],
)
def test_matrix_csv_errors_carry_line(tmp_path, text, line, fragment):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(FormatError, match=fragment) as exc:
        read_matrix_csv(p)
    assert exc.value.line == line
    assert f"bad.csv:{line}" in str(exc.value)


def test_empty_file(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("# only a comment\n")
    with pytest.raises(FormatError, match="no data"):
        read_vector_csv(p)


def test_parse_float_list():
    assert np.array_equal(parse_float_list("1, 1,2"), [1, 1, 2])
    with pytest.raises(ValueError):
        parse_float_list("1,a")


def test_record_round_trip_arrays(tmp_path):
    payload = {"A": np.arange(6.0).reshape(2, 3) / 7, "n": 3, "nested": [{"v": np.array([0.1, -0.0])}]}
    rec = JsonRecord("matrix", payload, {"seed": 1})
    p = tmp_path / "r.json"
    rec.write(p)
    back = JsonRecord.read(p)
    assert back.kind == "matrix" and back.schema_version == rec.schema_version
    assert np.array_equal(back.payload["A"], payload["A"])
    assert np.array_equal(back.payload["nested"][0]["v"], payload["nested"][0]["v"])
    assert back.provenance == {"seed": 1}
    assert np.array_equal(read_matrix(p), payload["A"])


def test_certificate_and_counterexample_records_round_trip():
    rep = certify(np.eye(2), [1, 1], 1)
    rec = JsonRecord.from_json(JsonRecord("certificate", rep.to_dict()).to_json())
    assert rec.payload == rep.to_dict()
    cex = wnsp_falsify_real(np.eye(2), [1, 1], 2).counterexample
    rec = JsonRecord.from_json(JsonRecord("counterexample", cex.to_dict()).to_json())
    assert rec.payload == cex.to_dict()


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("{", "invalid JSON"),
        ("[]", "must be an object"),
        ('{"kind": "matrix", "payload": {}}', "schema_version"),
        ('{"schema_version": "1.0", "kind": "thing", "payload": {}}', "unknown record kind"),
    ],
)
def test_record_errors(text, fragment):
    with pytest.raises(FormatError, match=fragment):
        JsonRecord.from_json(text)


def test_read_vector_from_record(tmp_path):
    p = tmp_path / "s.json"
    JsonRecord("signal", {"x": np.array([1.0, 0.0])}).write(p)
    assert np.array_equal(read_vector(p), [1.0, 0.0])
    with pytest.raises(FormatError, match="no field 'y'"):
        read_vector(p, "y")
