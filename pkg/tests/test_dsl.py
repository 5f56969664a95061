import pytest

from pcell.balls import Ball
from pcell.cells import Cell, CellCondition, Decomposition
from pcell.dsl import (
    DSLError,
    DSLSyntaxError,
    InvalidObjectError,
    MalformedLiteralError,
    UnknownNameError,
    WrongPrimeError,
    parse,
    print_document,
)
from pcell.family_generators import random_document
from pcell.padic import INF, NEG_INF, PAdic
from pcell.serialize import document_from_json, document_json, schema_validator

ONE_CELL = "p=5; A = cell(lower=0, upper=3; lambda=1, n=1, m=1; center=0)"


def test_one_cell_document():
    doc = parse(ONE_CELL)
    assert doc.p == 5 and doc.names() == ["A"]
    assert doc.get("A") == Cell(CellCondition(0, 3, PAdic(5, 1), 1, 1), PAdic(5, 0))


def test_missing_header():
    with pytest.raises(DSLSyntaxError) as e:
        parse("A = cell(lower=0, upper=3; lambda=1, n=1, m=1; center=0)")
    assert e.value.line == 1 and e.value.expected


def test_error_position_and_json():
    text = "p=5;\nA = cell(lower=0, upper=3; lambda=1, n=1 m=1; center=0)"
    with pytest.raises(DSLSyntaxError) as e:
        parse(text)
    err = e.value
    assert err.line == 2 and err.col > 1
    j = err.to_json()
    assert j["kind"] == "syntax" and j["line"] == 2 and j["expected"]


def test_literals_and_bounds():
    doc = parse(
        "p=3;\n"
        "A = cell(lower=-inf, upper=2; lambda=2*p^-1, n=2, m=1; center=-4*p^-2)\n"
        "b = B(7, inf); c = B(1*3^2, 4)"
    )
    a = doc.get("A")
    assert a.lower is None and a.lam == PAdic(3, 2, -1) and a.center == PAdic(3, -4, -2)
    assert doc.get("b") == Ball(PAdic(3, 7), INF)
    assert doc.get("c") == Ball(PAdic(3, 9), 4)
    assert parse("p=3; A = cell(lower=none, upper=none; lambda=0, n=1, m=1; center=2)").get("A").is_zero_cell


def test_comments_and_references():
    doc = parse(
        "# header comment\np=2;  # prime\n"
        "X = cell(lower=0, upper=3; lambda=1, n=1, m=1; center=0);\n"
        "D = decomposition { X, cell(lower=none, upper=none; lambda=0, n=1, m=1; center=0) }\n"
    )
    d = doc.get("D")
    assert isinstance(d, Decomposition) and d.cells[0] == doc.get("X")


def test_unknown_name():
    with pytest.raises(UnknownNameError):
        parse("p=2; D = decomposition { Y }")
    with pytest.raises(UnknownNameError):
        parse("p=2; params {s}; C = cluster({lambda=1, n=1, m=1; t: (0, 2)}, {t: [B(1, 2)]})")


def test_wrong_prime():
    with pytest.raises(WrongPrimeError):
        parse("p=4; A = B(0, 1)")
    with pytest.raises(WrongPrimeError):
        parse("p=5; A = B(3*7^2, 1)")
    with pytest.raises(WrongPrimeError):
        parse("p=5; p=3; A = B(0, 1)")


def test_malformed_literal():
    with pytest.raises(MalformedLiteralError):
        parse("p=5; A = B(3*p^, 1)")


def test_invalid_objects_are_reported():
    with pytest.raises(DSLError):
        parse("p=5; A = cell(lower=0, upper=3; lambda=1, n=0, m=1; center=0)")
    with pytest.raises(DSLError):
        parse("p=5; A = B(0, 1); A = B(1, 1)")


def test_family_syntax():
    doc = parse(
        "p=3;\nparams {s, t};\n"
        "C = cluster({lambda=1, n=1, m=1; s: (0, 2), t: (0, 2)}, {s: [B(1, 2), B(4, 2)], t: [B(1, 2)]});\n"
        "K = classical({lambda=1, n=1, m=1; s: (0, 2), t: (1, 3)}, {s: 1, t: 2});\n"
        "A = array([{lambda=1, n=1, m=1; s: (0, 2), t: (0, 2)}, {lambda=1, n=1, m=1; s: (0, 2), t: (0, 2)}],\n"
        "          {s: [[B(1, 2), B(4, 2)], [B(1, 2), B(4, 2)]], t: [[B(1, 2)], [B(4, 2)]]},\n"
        "          {s: [(0, 1), (1, 0)], t: [(0, 0)]});\n"
        "F = family {s: decomposition { cell(lower=0, upper=2; lambda=1, n=1, m=1; center=0) }, t: decomposition {}}\n"
    )
    assert doc.get("C").order("s") == 2
    assert doc.get("K").center("t") == PAdic(3, 2)
    assert doc.get("A").tuples_at("s") == ((0, 1), (1, 0))
    assert len(doc.get("F").fiber("t").cells) == 0
    again = parse(print_document(doc))
    assert again == doc


def test_round_trip_200_documents():
    for seed in range(200):
        doc = random_document(seed)
        text = print_document(doc)
        back = parse(text)
        assert back == doc, seed
        assert print_document(back) == text


def test_json_round_trip_and_schema():
    v = schema_validator("objects")
    for seed in range(60):
        doc = random_document(seed)
        data = document_json(doc)
        v.validate(data)
        assert document_from_json(data) == doc


def test_signature_neg_inf_token():
    doc = parse("p=2; A = cell(lower=-inf, upper=1; lambda=1, n=1, m=1; center=0)")
    assert doc.get("A").lower is None
    assert NEG_INF < 0


def test_invalid_object_error_kind():
    assert InvalidObjectError.kind == "invalid-object"
