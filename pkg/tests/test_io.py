"""Instance file round-trips and parse diagnostics."""

import json

import numpy as np
import pytest

from combsqec.io import (
    ParseError,
    decode_matrix,
    encode_matrix,
    export_instance,
    instance_text,
    load_instance,
    parse_instance,
)
from combsqec.library import build_instance, instance_names


@pytest.fixture(params=tuple(instance_names()))
def named(request):
    return build_instance(request.param)


def write_doc(tmp_path, doc, name="case.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture()
def bitflip_doc(tmp_path):
    inst = build_instance("bitflip")
    return json.loads(instance_text(inst.code, inst.errors))


class TestMatrixCodec:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        mat = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        back = decode_matrix(encode_matrix(mat), "x")
        assert np.array_equal(back, mat)

    def test_ragged_rows_rejected(self):
        with pytest.raises(ParseError, match=r"x\[1\]: row length"):
            decode_matrix([[[1, 0], [0, 0]], [[1, 0]]], "x")

    def test_bad_cell_named(self):
        with pytest.raises(ParseError, match=r"x\[0\]\[1\]"):
            decode_matrix([[[1, 0], [1]]], "x")
        with pytest.raises(ParseError, match=r"x\[0\]\[0\]"):
            decode_matrix([[["a", 0]]], "x")

    def test_non_list_rejected(self):
        with pytest.raises(ParseError, match="non-empty list"):
            decode_matrix({"rows": 1}, "x")


class TestRoundTrip:
    def test_reexport_is_byte_identical(self, tmp_path, named):
        path = str(tmp_path / "inst.json")
        export_instance(named.code, named.errors, path)
        doc = load_instance(path)
        assert instance_text(doc.code, doc.errors) == instance_text(
            named.code, named.errors
        )

    def test_digest_is_of_the_written_bytes(self, tmp_path, named):
        path = str(tmp_path / "inst.json")
        digest = export_instance(named.code, named.errors, path)
        assert load_instance(path).digest == digest

    def test_parse_instance_returns_model_pair(self, tmp_path, named):
        path = str(tmp_path / "inst.json")
        export_instance(named.code, named.errors, path)
        code, errors = parse_instance(path)
        assert code.codespace.ambient_dim == named.code.codespace.ambient_dim
        assert errors.rounds == named.errors.rounds
        assert np.allclose(
            code.codespace.basis, named.code.codespace.basis, atol=0
        )

    def test_optimization_block_preserved(self, tmp_path):
        inst = build_instance("spacetime")
        block = {"logical_dim": 2, "memory_structure": [1, 2],
                 "config": {"seed": 7}}
        path = str(tmp_path / "opt.json")
        export_instance(inst.code, inst.errors, path, optimization=block)
        doc = load_instance(path)
        assert doc.optimization == block

    def test_no_block_loads_as_none(self, tmp_path):
        inst = build_instance("bitflip")
        path = str(tmp_path / "plain.json")
        export_instance(inst.code, inst.errors, path)
        assert load_instance(path).optimization is None


class TestDiagnostics:
    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(ParseError, match=r"\(document\): invalid JSON"):
            load_instance(str(path))

    def test_top_level_must_be_object(self, tmp_path):
        with pytest.raises(ParseError, match=r"\(document\)"):
            load_instance(write_doc(tmp_path, []))

    def test_unknown_schema_version(self, tmp_path, bitflip_doc):
        bitflip_doc["schema_version"] = 99
        with pytest.raises(ParseError, match="schema_version: unknown version 99"):
            load_instance(write_doc(tmp_path, bitflip_doc))

    def test_bool_is_not_an_integer(self, tmp_path, bitflip_doc):
        bitflip_doc["schema_version"] = True
        with pytest.raises(ParseError, match="schema_version: expected an integer"):
            load_instance(write_doc(tmp_path, bitflip_doc))

    def test_missing_dims_named(self, tmp_path, bitflip_doc):
        del bitflip_doc["dims"]
        with pytest.raises(ParseError, match="dims: missing"):
            load_instance(write_doc(tmp_path, bitflip_doc))

    def test_non_orthonormal_basis_named(self, tmp_path, bitflip_doc):
        bitflip_doc["codespace"]["basis"][0][0] = [0.7, 0.0]
        with pytest.raises(ParseError, match="codespace.basis.*not orthonormal"):
            load_instance(write_doc(tmp_path, bitflip_doc))

    def test_basis_shape_mismatch_named(self, tmp_path, bitflip_doc):
        bitflip_doc["dims"]["code"] = 3
        with pytest.raises(ParseError, match="codespace.basis: shape"):
            load_instance(write_doc(tmp_path, bitflip_doc))

    def test_bad_kraus_cell_named(self, tmp_path, bitflip_doc):
        bitflip_doc["error_model"]["rounds"][0]["kraus"][0][0][0] = [1.0]
        with pytest.raises(
            ParseError, match=r"error_model.rounds\[0\].kraus\[0\]\[0\]\[0\]"
        ):
            load_instance(write_doc(tmp_path, bitflip_doc))

    def test_bad_env_out_named(self, tmp_path, bitflip_doc):
        bitflip_doc["error_model"]["rounds"][0]["env_out"] = 0
        with pytest.raises(
            ParseError, match=r"error_model.rounds\[0\].env_out"
        ):
            load_instance(write_doc(tmp_path, bitflip_doc))

    def test_env_divisibility_named(self, tmp_path, bitflip_doc):
        bitflip_doc["error_model"]["rounds"][0]["env_out"] = 3
        with pytest.raises(ParseError, match="not divisible by env_out 3"):
            load_instance(write_doc(tmp_path, bitflip_doc))

    def test_overweight_error_model_rejected(self, tmp_path, bitflip_doc):
        kraus = bitflip_doc["error_model"]["rounds"][0]["kraus"]
        kraus.append(kraus[0])
        with pytest.raises(ParseError, match="error_model"):
            load_instance(write_doc(tmp_path, bitflip_doc))

    def test_optimization_must_be_object(self, tmp_path, bitflip_doc):
        bitflip_doc["optimization"] = [1, 2]
        with pytest.raises(ParseError, match="optimization: expected an object"):
            load_instance(write_doc(tmp_path, bitflip_doc))


@pytest.fixture()
def spacetime_doc(tmp_path):
    inst = build_instance("spacetime")
    return json.loads(instance_text(inst.code, inst.errors))


class TestInterrogatorDiagnostics:
    def test_incomplete_instrument_named(self, tmp_path, spacetime_doc):
        rounds = spacetime_doc["interrogator"]["rounds"]
        memory = next(iter(rounds[0]["instruments"]))
        outcome = next(iter(rounds[0]["instruments"][memory]))
        mat = rounds[0]["instruments"][memory][outcome]
        mat[0][0] = [0.5, 0.0]
        with pytest.raises(
            ParseError, match=r"interrogator.rounds\[0\].instruments.*not complete"
        ):
            load_instance(write_doc(tmp_path, spacetime_doc))

    def test_update_entry_must_be_string(self, tmp_path, spacetime_doc):
        rounds = spacetime_doc["interrogator"]["rounds"]
        outcome = next(iter(rounds[0]["update"]))
        memory = next(iter(rounds[0]["update"][outcome]))
        rounds[0]["update"][outcome][memory] = 3
        with pytest.raises(
            ParseError, match=r"interrogator.rounds\[0\].update.*expected a string"
        ):
            load_instance(write_doc(tmp_path, spacetime_doc))

    def test_missing_update_entry_caught(self, tmp_path, spacetime_doc):
        rounds = spacetime_doc["interrogator"]["rounds"]
        outcome = next(iter(rounds[0]["update"]))
        del rounds[0]["update"][outcome]
        with pytest.raises(ParseError, match="interrogator"):
            load_instance(write_doc(tmp_path, spacetime_doc))

    def test_empty_instruments_rejected(self, tmp_path, spacetime_doc):
        spacetime_doc["interrogator"]["rounds"][0]["instruments"] = {}
        with pytest.raises(
            ParseError, match=r"interrogator.rounds\[0\].instruments"
        ):
            load_instance(write_doc(tmp_path, spacetime_doc))
