"""Instance file format: structured JSON with explicit complex encoding.

One document carries a strategic code (codespace basis, per-round
instruments, memory update tables), its error model, and an optional
optimization block.  Complex entries are two-element ``[re, im]`` arrays
and matrices are row-major nested lists, so fixtures diff cleanly.  Parse
failures name the path through the document; model invariant violations
surface the constructor's residual message under that path.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np
import numpy.typing as npt

from .model import (
    CheckInstrument,
    CodeSpace,
    ErrorModel,
    Interrogator,
    MemoryUpdate,
    StrategicCode,
    env_label,
    q_label,
    qp_label,
)
from .tensor import LabeledOperator

__all__ = [
    "SCHEMA_VERSION",
    "InstanceDocument",
    "ParseError",
    "encode_matrix",
    "decode_matrix",
    "export_instance",
    "instance_text",
    "load_instance",
    "parse_instance",
]

SCHEMA_VERSION = 1


class ParseError(ValueError):
    """Malformed instance file; the message starts with the document path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def encode_matrix(mat: npt.NDArray[np.complex128]) -> list[list[list[float]]]:
    arr = np.asarray(mat, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(f"matrices must be two-dimensional, got shape {arr.shape}")
    return [
        [[float(v.real), float(v.imag)] for v in row]
        for row in arr
    ]


def decode_matrix(obj: Any, path: str) -> npt.NDArray[np.complex128]:
    if not isinstance(obj, list) or not obj:
        raise ParseError(path, "expected a non-empty list of rows")
    width = None
    rows = []
    for i, row in enumerate(obj):
        if not isinstance(row, list) or not row:
            raise ParseError(f"{path}[{i}]", "expected a non-empty row list")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"{path}[{i}]", f"row length {len(row)} != {width}")
        out_row = []
        for j, cell in enumerate(row):
            if (
                not isinstance(cell, list)
                or len(cell) != 2
                or not all(isinstance(x, (int, float)) for x in cell)
            ):
                raise ParseError(
                    f"{path}[{i}][{j}]", "complex entries are [re, im] number pairs"
                )
            out_row.append(complex(cell[0], cell[1]))
        rows.append(out_row)
    return np.array(rows, dtype=np.complex128)


def _get(obj: Mapping[str, Any], key: str, path: str, kind: type, what: str) -> Any:
    if not isinstance(obj, Mapping):
        raise ParseError(path, "expected an object")
    if key not in obj:
        raise ParseError(f"{path}.{key}" if path else key, "missing")
    val = obj[key]
    if not isinstance(val, kind) or isinstance(val, bool) and kind is int:
        raise ParseError(f"{path}.{key}" if path else key, f"expected {what}")
    return val


# ----------------------------------------------------------------------
# export
# ----------------------------------------------------------------------


def instance_text(
    code: StrategicCode,
    errors: ErrorModel,
    optimization: Mapping[str, Any] | None = None,
) -> str:
    """Canonical serialized form; identical models give identical bytes."""
    rounds = []
    for r in range(1, code.interrogator.rounds + 1):
        by_memory: dict[str, Any] = {}
        for memory, inst in sorted(code.interrogator.instruments[r - 1].items()):
            by_memory[memory] = {
                o: encode_matrix(op.data) for o, op in sorted(inst.kraus.items())
            }
        update: dict[str, dict[str, str]] = {}
        for (outcome, memory), nxt in sorted(
            code.interrogator.update.tables[r - 1].items()
        ):
            update.setdefault(outcome, {})[memory] = nxt
        rounds.append({"instruments": by_memory, "update": update})
    err_rounds = []
    for r in range(errors.rounds + 1):
        err_rounds.append(
            {
                "kraus": [encode_matrix(op.data) for op in errors.round_ops(r)],
                "env_out": errors.env_dim(r),
            }
        )
    doc: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "dims": {"ambient": code.codespace.ambient_dim, "code": code.codespace.dim},
        "codespace": {"basis": encode_matrix(code.codespace.basis)},
        "interrogator": {"rounds": rounds},
        "error_model": {
            "trace_nonincreasing": errors.require_trace_nonincreasing,
            "rounds": err_rounds,
        },
    }
    if optimization is not None:
        doc["optimization"] = dict(optimization)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def export_instance(
    code: StrategicCode,
    errors: ErrorModel,
    path: str,
    optimization: Mapping[str, Any] | None = None,
) -> str:
    """Write the canonical form to ``path``; returns the content digest."""
    text = instance_text(code, errors, optimization)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ----------------------------------------------------------------------
# parse
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class InstanceDocument:
    """Parsed instance: validated models plus the side-band file fields."""

    code: StrategicCode
    errors: ErrorModel
    optimization: dict[str, Any] | None
    digest: str


def _parse_codespace(doc: Mapping[str, Any]) -> CodeSpace:
    dims = _get(doc, "dims", "", Mapping, "an object")
    ambient = _get(dims, "ambient", "dims", int, "an integer")
    code_dim = _get(dims, "code", "dims", int, "an integer")
    cs = _get(doc, "codespace", "", Mapping, "an object")
    basis_obj = _get(cs, "basis", "codespace", list, "a matrix")
    basis = decode_matrix(basis_obj, "codespace.basis")
    if basis.shape != (ambient, code_dim):
        raise ParseError(
            "codespace.basis",
            f"shape {basis.shape} does not match dims ({ambient}, {code_dim})",
        )
    try:
        return CodeSpace(ambient, basis)
    except ValueError as exc:
        raise ParseError("codespace.basis", str(exc)) from exc


def _parse_interrogator(doc: Mapping[str, Any]) -> Interrogator:
    inter = _get(doc, "interrogator", "", Mapping, "an object")
    rounds_obj = _get(inter, "rounds", "interrogator", list, "a list")
    instruments = []
    tables = []
    for idx, round_obj in enumerate(rounds_obj):
        r = idx + 1
        path = f"interrogator.rounds[{idx}]"
        insts_obj = _get(round_obj, "instruments", path, Mapping, "an object")
        if not insts_obj:
            raise ParseError(f"{path}.instruments", "needs at least one memory state")
        by_memory = {}
        for memory, outcomes_obj in insts_obj.items():
            mpath = f"{path}.instruments[{memory!r}]"
            if not isinstance(outcomes_obj, Mapping) or not outcomes_obj:
                raise ParseError(mpath, "expected outcome -> matrix entries")
            kraus = {}
            for outcome, mat_obj in outcomes_obj.items():
                mat = decode_matrix(mat_obj, f"{mpath}[{outcome!r}]")
                kraus[outcome] = LabeledOperator(
                    ((q_label(r), mat.shape[0]),),
                    ((qp_label(r - 1), mat.shape[1]),),
                    mat,
                )
            try:
                by_memory[memory] = CheckInstrument(r, memory, kraus)
            except ValueError as exc:
                raise ParseError(mpath, str(exc)) from exc
        update_obj = _get(round_obj, "update", path, Mapping, "an object")
        table = {}
        for outcome, per_memory in update_obj.items():
            upath = f"{path}.update[{outcome!r}]"
            if not isinstance(per_memory, Mapping):
                raise ParseError(upath, "expected memory -> next-memory entries")
            for memory, nxt in per_memory.items():
                if not isinstance(nxt, str):
                    raise ParseError(f"{upath}[{memory!r}]", "expected a string")
                table[(outcome, memory)] = nxt
        instruments.append(by_memory)
        tables.append(table)
    try:
        return Interrogator(tuple(instruments), MemoryUpdate(tuple(tables)))
    except (ValueError, KeyError) as exc:
        raise ParseError("interrogator", str(exc)) from exc


def _parse_errors(doc: Mapping[str, Any]) -> ErrorModel:
    em = _get(doc, "error_model", "", Mapping, "an object")
    rounds_obj = _get(em, "rounds", "error_model", list, "a list")
    if not rounds_obj:
        raise ParseError("error_model.rounds", "needs at least round 0")
    tni = em.get("trace_nonincreasing", True)
    if not isinstance(tni, bool):
        raise ParseError("error_model.trace_nonincreasing", "expected a boolean")
    kraus_rounds = []
    env_in = 1
    for r, round_obj in enumerate(rounds_obj):
        path = f"error_model.rounds[{r}]"
        kraus_obj = _get(round_obj, "kraus", path, list, "a list of matrices")
        if not kraus_obj:
            raise ParseError(f"{path}.kraus", "needs at least one operator")
        env_out = round_obj.get("env_out", 1)
        if not isinstance(env_out, int) or isinstance(env_out, bool) or env_out < 1:
            raise ParseError(f"{path}.env_out", "expected a positive integer")
        ops = []
        for k, mat_obj in enumerate(kraus_obj):
            mat = decode_matrix(mat_obj, f"{path}.kraus[{k}]")
            if mat.shape[0] % env_out:
                raise ParseError(
                    f"{path}.kraus[{k}]",
                    f"row count {mat.shape[0]} not divisible by env_out {env_out}",
                )
            if r > 0 and mat.shape[1] % env_in:
                raise ParseError(
                    f"{path}.kraus[{k}]",
                    f"column count {mat.shape[1]} not divisible by the "
                    f"incoming environment dim {env_in}",
                )
            rows = ((qp_label(r), mat.shape[0] // env_out), (env_label(r), env_out))
            cols: tuple[tuple[str, int], ...] = ((q_label(r), mat.shape[1]),)
            if r > 0:
                cols = ((q_label(r), mat.shape[1] // env_in), (env_label(r - 1), env_in))
            ops.append(LabeledOperator(rows, cols, mat))
        kraus_rounds.append(tuple(ops))
        env_in = env_out
    try:
        return ErrorModel(tuple(kraus_rounds), require_trace_nonincreasing=tni)
    except ValueError as exc:
        raise ParseError("error_model", str(exc)) from exc


def load_instance(path: str) -> InstanceDocument:
    """Parse and validate an instance file, keeping the side-band fields."""
    with open(path, "rb") as fh:
        raw = fh.read()
    digest = hashlib.sha256(raw).hexdigest()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError("(document)", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise ParseError("(document)", "top level must be an object")
    version = _get(doc, "schema_version", "", int, "an integer")
    if version != SCHEMA_VERSION:
        raise ParseError(
            "schema_version",
            f"unknown version {version}; this tool reads version {SCHEMA_VERSION}",
        )
    codespace = _parse_codespace(doc)
    interrogator = _parse_interrogator(doc)
    errors = _parse_errors(doc)
    try:
        code = StrategicCode(codespace, interrogator)
    except ValueError as exc:
        raise ParseError("interrogator", str(exc)) from exc
    opt = doc.get("optimization")
    if opt is not None and not isinstance(opt, Mapping):
        raise ParseError("optimization", "expected an object")
    return InstanceDocument(
        code=code,
        errors=errors,
        optimization=dict(opt) if opt is not None else None,
        digest=digest,
    )


def parse_instance(path: str) -> tuple[StrategicCode, ErrorModel]:
    """The model pair of an instance file; see :func:`load_instance`."""
    doc = load_instance(path)
    return doc.code, doc.errors
