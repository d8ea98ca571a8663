"""Dense linear algebra over labeled multipartite systems.

Every operator in the package is a :class:`LabeledOperator`: a dense complex
matrix whose row and column sides each carry an ordered list of named
subsystems with dimensions.  States, Kraus operators, Choi operators and
combs are all instances of the same carrier; the higher layers differ only
in which labels they declare and how they partition them.

The vectorization convention is fixed once here: ``|A>> = sum_j (A|j>) (x) |j>``,
output leg first.  Every Choi and comb index convention in the package
derives from this single choice.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import numpy.typing as npt

__all__ = [
    "LabeledOperator",
    "SpectralResult",
    "dense_cap",
    "tensor_product",
    "partial_trace",
    "partial_transpose",
    "permute_subsystems",
    "vectorize",
    "devectorize",
    "herm_eig",
    "schmidt",
    "entropy",
    "polar",
    "identity_operator",
]

DEFAULT_DENSE_CAP = 4096

Subsystems = tuple[tuple[str, int], ...]


def dense_cap() -> int:
    """Maximum allowed matrix-side dimension, overridable via COMBSQEC_DENSE_CAP."""
    raw = os.environ.get("COMBSQEC_DENSE_CAP")
    if raw is None:
        return DEFAULT_DENSE_CAP
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ValueError(f"COMBSQEC_DENSE_CAP must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise ValueError(f"COMBSQEC_DENSE_CAP must be positive, got {cap}")
    return cap


def _as_subsystems(subsystems: Iterable[tuple[str, int]], side: str) -> Subsystems:
    subs = tuple((str(label), int(dim)) for label, dim in subsystems)
    seen: set[str] = set()
    for label, dim in subs:
        if dim < 1:
            raise ValueError(f"{side} subsystem {label!r} has non-positive dim {dim}")
        if label in seen:
            raise ValueError(f"duplicate {side} subsystem label {label!r}")
        seen.add(label)
    return subs


def _dims_product(subs: Subsystems) -> int:
    return math.prod(dim for _, dim in subs)


@dataclass(frozen=True, eq=False)
class LabeledOperator:
    """Dense complex matrix with named subsystems on each side.

    Args:
        row_subsystems: ordered (label, dim) pairs for the row (output) side.
        col_subsystems: ordered (label, dim) pairs for the column (input) side.
            An empty tuple declares a column vector (column dimension 1).
        data: complex matrix of shape (prod of row dims, prod of col dims).
    """

    row_subsystems: Subsystems
    col_subsystems: Subsystems
    data: npt.NDArray[np.complex128] = field(repr=False)

    def __post_init__(self) -> None:
        rows = _as_subsystems(self.row_subsystems, "row")
        cols = _as_subsystems(self.col_subsystems, "column")
        object.__setattr__(self, "row_subsystems", rows)
        object.__setattr__(self, "col_subsystems", cols)
        mat = np.asarray(self.data, dtype=np.complex128)
        if mat.ndim == 1:
            mat = mat.reshape(-1, 1)
        if mat.ndim != 2:
            raise ValueError(f"data must be a matrix, got ndim={mat.ndim}")
        expected = (_dims_product(rows), _dims_product(cols))
        if mat.shape != expected:
            raise ValueError(
                f"data shape {mat.shape} does not match declared dims {expected} "
                f"(rows {rows}, cols {cols})"
            )
        cap = dense_cap()
        if max(expected) > cap:
            raise ValueError(
                f"dense dimension {max(expected)} exceeds the cap {cap}; "
                "set COMBSQEC_DENSE_CAP to raise it"
            )
        mat = mat.copy()
        mat.flags.writeable = False
        object.__setattr__(self, "data", mat)

    # ------------------------------------------------------------------
    # shape helpers
    # ------------------------------------------------------------------

    @property
    def row_labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.row_subsystems)

    @property
    def col_labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.col_subsystems)

    @property
    def row_dim(self) -> int:
        return self.data.shape[0]

    @property
    def col_dim(self) -> int:
        return self.data.shape[1]

    @property
    def is_vector(self) -> bool:
        return not self.col_subsystems

    def row_dim_of(self, label: str) -> int:
        for name, dim in self.row_subsystems:
            if name == label:
                return dim
        raise ValueError(f"unknown row label {label!r}")

    def col_dim_of(self, label: str) -> int:
        for name, dim in self.col_subsystems:
            if name == label:
                return dim
        raise ValueError(f"unknown column label {label!r}")

    def dagger(self) -> "LabeledOperator":
        return LabeledOperator(self.col_subsystems, self.row_subsystems, self.data.conj().T)

    def relabeled(self, mapping: Mapping[str, str]) -> "LabeledOperator":
        rows = tuple((mapping.get(label, label), dim) for label, dim in self.row_subsystems)
        cols = tuple((mapping.get(label, label), dim) for label, dim in self.col_subsystems)
        return LabeledOperator(rows, cols, self.data)

    def scaled(self, factor: complex) -> "LabeledOperator":
        return LabeledOperator(self.row_subsystems, self.col_subsystems, factor * self.data)

    def trace(self) -> complex:
        if self.row_dim != self.col_dim:
            raise ValueError(f"trace of non-square operator {self.data.shape}")
        return complex(np.trace(self.data))

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))


@dataclass(frozen=True, eq=False)
class SpectralResult:
    """Eigendecomposition of a Hermitian operator, eigenvalues descending."""

    eigenvalues: npt.NDArray[np.float64]
    eigenvectors: npt.NDArray[np.complex128]


def identity_operator(subsystems: Iterable[tuple[str, int]]) -> LabeledOperator:
    subs = tuple(subsystems)
    d = _dims_product(_as_subsystems(subs, "row"))
    return LabeledOperator(subs, subs, np.eye(d, dtype=np.complex128))


def tensor_product(a: LabeledOperator, b: LabeledOperator) -> LabeledOperator:
    """Kronecker product with concatenated subsystem lists, A then B."""
    for side, al, bl in (("row", a.row_labels, b.row_labels), ("column", a.col_labels, b.col_labels)):
        clash = set(al) & set(bl)
        if clash:
            raise ValueError(f"{side} label(s) {sorted(clash)} appear in both operands")
    return LabeledOperator(
        a.row_subsystems + b.row_subsystems,
        a.col_subsystems + b.col_subsystems,
        np.kron(a.data, b.data),
    )


def _axes_view(op: LabeledOperator) -> npt.NDArray[np.complex128]:
    dims = [dim for _, dim in op.row_subsystems] + [dim for _, dim in op.col_subsystems]
    return op.data.reshape(dims or [1])


def partial_trace(op: LabeledOperator, labels: Iterable[str]) -> LabeledOperator:
    """Trace out the named subsystems.

    Each label must appear on both sides with equal dimension; the remaining
    subsystem order is preserved.
    """
    traced = set(labels)
    if not traced:
        return op
    row_names = op.row_labels
    col_names = op.col_labels
    for label in sorted(traced):
        if label not in row_names or label not in col_names:
            raise ValueError(f"label {label!r} not present on both sides")
        if op.row_dim_of(label) != op.col_dim_of(label):
            raise ValueError(
                f"label {label!r} has row dim {op.row_dim_of(label)} != "
                f"col dim {op.col_dim_of(label)}"
            )

    n_row = len(op.row_subsystems)
    arr = _axes_view(op)
    subscripts: list[int] = []
    next_free = 0
    pair_for: dict[str, int] = {}
    for label, _ in op.row_subsystems:
        if label in traced:
            pair_for[label] = next_free
            subscripts.append(next_free)
        else:
            subscripts.append(next_free)
        next_free += 1
    for label, _ in op.col_subsystems:
        if label in traced:
            subscripts.append(pair_for[label])
        else:
            subscripts.append(next_free)
            next_free += 1
    keep = [s for (label, _), s in zip(op.row_subsystems, subscripts[:n_row]) if label not in traced]
    keep += [
        s
        for (label, _), s in zip(op.col_subsystems, subscripts[n_row:])
        if label not in traced
    ]
    out = np.einsum(arr, subscripts, keep)
    rows = tuple(s for s in op.row_subsystems if s[0] not in traced)
    cols = tuple(s for s in op.col_subsystems if s[0] not in traced)
    return LabeledOperator(rows, cols, out.reshape(_dims_product(rows), _dims_product(cols)))


def partial_transpose(op: LabeledOperator, labels: Iterable[str]) -> LabeledOperator:
    """Transpose the named subsystems in place; applying twice restores the input."""
    chosen = set(labels)
    if not chosen:
        return op
    row_names = op.row_labels
    col_names = op.col_labels
    for label in sorted(chosen):
        if label not in row_names or label not in col_names:
            raise ValueError(f"label {label!r} not present on both sides")
        if op.row_dim_of(label) != op.col_dim_of(label):
            raise ValueError(f"label {label!r} is not square across sides")
    n_row = len(op.row_subsystems)
    arr = _axes_view(op)
    perm = list(range(arr.ndim))
    for i, (label, _) in enumerate(op.row_subsystems):
        if label in chosen:
            j = n_row + col_names.index(label)
            perm[i], perm[j] = perm[j], perm[i]
    out = arr.transpose(perm)
    return LabeledOperator(
        op.row_subsystems, op.col_subsystems, out.reshape(op.row_dim, op.col_dim)
    )


def permute_subsystems(
    op: LabeledOperator,
    row_order: Sequence[str],
    col_order: Sequence[str] | None = None,
) -> LabeledOperator:
    """Reorder subsystems into the named label order on each side.

    ``col_order`` defaults to ``row_order`` (the square-operator case).
    """
    if col_order is None:
        col_order = row_order
    if not row_order and not col_order:
        return op
    if sorted(row_order) != sorted(op.row_labels) or sorted(col_order) != sorted(op.col_labels):
        raise ValueError(
            f"permutation {list(row_order)} / {list(col_order)} must cover exactly "
            f"{list(op.row_labels)} / {list(op.col_labels)}"
        )
    n_row = len(op.row_subsystems)
    arr = _axes_view(op)
    perm = [op.row_labels.index(label) for label in row_order]
    perm += [n_row + op.col_labels.index(label) for label in col_order]
    arr = arr.transpose(perm)
    rows = tuple((label, op.row_dim_of(label)) for label in row_order)
    cols = tuple((label, op.col_dim_of(label)) for label in col_order)
    return LabeledOperator(rows, cols, arr.reshape(op.row_dim, op.col_dim))


def vectorize(op: LabeledOperator) -> LabeledOperator:
    """Column vector |A>> = sum_j (A|j>) (x) |j>, output labels first.

    The output carries the row labels followed by the column labels, so the
    two sides must not share a label; relabel one side first if they do.
    """
    clash = set(op.row_labels) & set(op.col_labels)
    if clash:
        raise ValueError(
            f"label(s) {sorted(clash)} appear on both sides; relabel before vectorizing"
        )
    subs = op.row_subsystems + op.col_subsystems
    return LabeledOperator(subs, (), op.data.reshape(-1, 1))


def devectorize(vec: LabeledOperator, row_labels: Sequence[str]) -> LabeledOperator:
    """Inverse of :func:`vectorize` for the declared output-side labels.

    The named labels become the row side (in the vector's order); the rest
    become the column side.
    """
    if not vec.is_vector:
        raise ValueError("devectorize expects a column vector")
    wanted = set(row_labels)
    unknown = wanted - set(vec.row_labels)
    if unknown:
        raise ValueError(f"unknown label(s) {sorted(unknown)} in devectorize")
    rows = tuple(s for s in vec.row_subsystems if s[0] in wanted)
    cols = tuple(s for s in vec.row_subsystems if s[0] not in wanted)
    arr = vec.data.reshape([dim for _, dim in vec.row_subsystems] or [1])
    order = [i for i, s in enumerate(vec.row_subsystems) if s[0] in wanted]
    order += [i for i, s in enumerate(vec.row_subsystems) if s[0] not in wanted]
    arr = arr.transpose(order)
    return LabeledOperator(rows, cols, arr.reshape(_dims_product(rows), _dims_product(cols)))


def herm_eig(op: LabeledOperator, atol: float = 1e-10) -> SpectralResult:
    """Eigendecomposition of a Hermitian operator, eigenvalues descending.

    The input is symmetrized as (A + A†)/2 before decomposition; asymmetry
    beyond ``atol`` (relative to the Frobenius norm) is rejected.
    """
    if op.row_dim != op.col_dim:
        raise ValueError(f"herm_eig expects a square matrix, got {op.data.shape}")
    mat = op.data
    asym = float(np.linalg.norm(mat - mat.conj().T))
    if asym > atol * max(1.0, float(np.linalg.norm(mat))):
        raise ValueError(f"operator is not Hermitian: ||A - A^dag|| = {asym:.3e}")
    mat = (mat + mat.conj().T) / 2
    vals, vecs = np.linalg.eigh(mat)
    order = np.argsort(vals)[::-1]
    return SpectralResult(vals[order].astype(np.float64), vecs[:, order])


def schmidt(
    vec: LabeledOperator, left_labels: Iterable[str]
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.complex128], npt.NDArray[np.complex128]]:
    """Schmidt decomposition of a vector across the named bipartition.

    Returns:
        (coefficients, left_vectors, right_vectors): nonnegative coefficients
        in descending order and orthonormal vector families as matrix columns,
        so that ``sum_k c_k left[:, k] (x) right[:, k]`` reconstructs the input
        with its subsystems reordered to left-then-right label order.
    """
    if not vec.is_vector:
        raise ValueError("schmidt expects a column vector")
    left = set(left_labels)
    unknown = left - set(vec.row_labels)
    if unknown:
        raise ValueError(f"unknown label(s) {sorted(unknown)} in schmidt bipartition")
    left_subs = tuple(s for s in vec.row_subsystems if s[0] in left)
    right_subs = tuple(s for s in vec.row_subsystems if s[0] not in left)
    if not left_subs or not right_subs:
        raise ValueError("schmidt bipartition must be nonempty on both sides")
    arr = vec.data.reshape([dim for _, dim in vec.row_subsystems])
    order = [i for i, s in enumerate(vec.row_subsystems) if s[0] in left]
    order += [i for i, s in enumerate(vec.row_subsystems) if s[0] not in left]
    mat = arr.transpose(order).reshape(_dims_product(left_subs), _dims_product(right_subs))
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    return s.astype(np.float64), u, vh.T


def entropy(rho: LabeledOperator, atol: float = 1e-8) -> float:
    """Von Neumann entropy in bits of a trace-one PSD operator.

    The matrix is normalized internally; eigenvalues at or below 1e-12
    contribute zero, and eigenvalues below ``-atol`` are rejected.
    """
    if rho.row_dim != rho.col_dim:
        raise ValueError(f"entropy expects a square matrix, got {rho.data.shape}")
    tr = float(np.trace(rho.data).real)
    if abs(tr - 1.0) > atol:
        raise ValueError(f"entropy expects trace 1, got {tr:.12f}")
    spec = herm_eig(rho)
    vals = spec.eigenvalues / tr
    if vals.min() < -atol:
        raise ValueError(f"negative eigenvalue {vals.min():.3e} in entropy input")
    vals = vals[vals > 1e-12]
    return float(-np.sum(vals * np.log2(vals))) if vals.size else 0.0


def polar(op: LabeledOperator) -> tuple[LabeledOperator, LabeledOperator]:
    """Polar decomposition A = U P with P = sqrt(A†A).

    U is completed deterministically on A's null directions by pairing the
    SVD's left and right singular vectors, so U is always unitary.
    """
    if op.row_dim != op.col_dim:
        raise ValueError(f"polar expects a square matrix, got {op.data.shape}")
    w, s, vh = np.linalg.svd(op.data)
    unitary = w @ vh
    psd = (vh.conj().T * s) @ vh
    u_op = LabeledOperator(op.row_subsystems, op.col_subsystems, unitary)
    p_op = LabeledOperator(op.col_subsystems, op.col_subsystems, psd)
    return u_op, p_op
