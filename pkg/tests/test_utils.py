import math

import numpy as np
import pytest

from constructions import tensor_from_elementary
from fault_tolerance import DimensionError, InputError
from freeobjects import build_free
from ground import dual_of, lp, opmatrix
from sqoperators import SeqOperator
from sqspaces import (
    ElementColumn,
    NormEstimate,
    Witness,
    cstar_matrix,
    dual_desc,
    hilb_max,
    max_space,
    same_space,
    t2,
)
from constructions import make_dsum_one, make_quotient
from utils import (
    ReportFormatter,
    dumps,
    element_from_json,
    error_to_json,
    estimate_to_json,
    ground_from_json,
    ground_to_json,
    inputs_digest,
    json_float,
    loads,
    matrix_from_json,
    matrix_to_json,
    operator_from_json,
    operator_to_json,
    space_from_json,
    space_to_json,
    tensor_from_json,
    tensor_to_json,
    truncation_to_json,
)


def test_json_float_handles_non_finite():
    assert json_float(1.5) == 1.5
    assert json_float(math.inf) == "inf"
    assert json_float(-math.inf) == "-inf"
    assert json_float(math.nan) == "nan"


def test_loads_rejects_garbage():
    with pytest.raises(InputError):
        loads("{not json")
    assert loads(dumps({"a": [1, 2]})) == {"a": [1, 2]}


def test_inputs_digest_is_stable():
    a = np.arange(4).reshape(2, 2)
    assert inputs_digest(a) == inputs_digest(a.astype(complex))
    assert len(inputs_digest(a)) == 16
    assert inputs_digest(a) != inputs_digest(a.T)


def test_matrix_entries():
    m = matrix_from_json({"rows": 1, "cols": 2, "entries": [3, [0, 4]]})
    np.testing.assert_array_equal(m, [[3, 4j]])
    with pytest.raises(InputError):
        matrix_from_json({"rows": 2, "cols": 2, "entries": [1, 2, 3]})
    with pytest.raises(InputError):
        matrix_from_json({"rows": 1, "cols": 1, "entries": ["x"]})
    with pytest.raises(InputError):
        matrix_from_json({"rows": 1, "entries": [1]})
    np.testing.assert_array_equal(matrix_from_json(matrix_to_json(m)), m)


def test_ground_tags():
    assert ground_from_json({"kind": "lp", "p": "inf", "dim": 3}) == lp("inf", 3)
    assert ground_to_json(dual_of(opmatrix(2, 3))) == {
        "kind": "dual",
        "base": {"kind": "opmatrix", "a": 2, "b": 3},
    }
    with pytest.raises(InputError):
        ground_from_json({"kind": "sobolev"})


@pytest.mark.parametrize(
    "space",
    [
        hilb_max(2),
        t2(3),
        cstar_matrix(2, 3),
        max_space(lp(1, 2)),
        make_dsum_one([t2(1), hilb_max(2)]),
        dual_desc(t2(2)),
        make_quotient(hilb_max(3), np.eye(3)[:, :1]),
    ],
    ids=lambda s: s.describe(),
)
def test_space_descriptors(space):
    assert same_space(space_from_json(space_to_json(space)), space)


def test_space_parse_errors():
    with pytest.raises(InputError):
        space_from_json({"tag": "Banach"})
    with pytest.raises(InputError):
        space_from_json({"tag": "HilbMax"})
    with pytest.raises(InputError):
        space_from_json({"tag": "T2", "n": "three"})


def test_element_file_shapes():
    space = hilb_max(2)
    bare = {"rows": 2, "cols": 1, "entries": [1, 0]}
    assert element_from_json(space, bare).level == 1
    assert element_from_json(space, {"coords": bare}).level == 1
    with pytest.raises(DimensionError):
        element_from_json(space, {"rows": 3, "cols": 1, "entries": [1, 0, 0]})


def test_operator_and_tensor_documents():
    phi = SeqOperator(t2(2), hilb_max(2), np.diag([3.0, 4.0]))
    back = operator_from_json(loads(dumps(operator_to_json(phi))))
    np.testing.assert_array_equal(back.matrix, phi.matrix)
    assert same_space(back.domain, phi.domain)

    x = ElementColumn(hilb_max(2), [[1.0], [0.0]])
    u = tensor_from_elementary(x, x)
    parsed = tensor_from_json(loads(dumps(tensor_to_json(u))))
    np.testing.assert_array_equal(parsed.coords, u.coords)


def test_estimate_document():
    w = np.array([[1.0], [0.0]])
    estimate = NormEstimate.build(1.0, math.inf, Witness.pairing(w), "rank_one").at_level(2)
    payload = estimate_to_json(estimate)
    assert payload["upper"] == "inf" and payload["level"] == 2
    assert payload["witness"]["kind"] == "pairing" and "data" not in payload["witness"]
    full = estimate_to_json(estimate, include_witness=True)
    assert full["witness"]["data"]["W"]["rows"] == 2


def test_truncation_document():
    payload = truncation_to_json(build_free(2, 1))
    assert payload["kind"] == "free" and payload["dim"] == 3
    assert [leaf["offset"] for leaf in payload["leaves"]] == [0, 1]


def test_error_document():
    assert error_to_json(InputError("bad"))["error"] == "input_error"
    assert error_to_json(DimensionError("shape"))["error"] == "dimension_error"
    assert error_to_json(ValueError("x"))["error"] == "input_error"


def test_formatter():
    estimate = NormEstimate.build(1.0, 1.0, Witness.zero(), "frobenius")
    assert "frobenius" in ReportFormatter.format_estimate(estimate)
    assert ReportFormatter.format_summary([]).startswith("✅")
