"""Strategic-code data model.

A strategic code pairs a codespace with an interrogator: a sequence of
check-instrument rounds whose instrument choice in round r may depend on a
classical memory state folded from earlier outcomes.  Errors interleave with
the rounds and may carry correlations through an environment chain.

Label conventions are fixed here and used by every higher layer:

* ``Q{r}``   system entering error round r (``Q0`` is the codespace ambient),
* ``Q{r}p``  system leaving error round r and entering check round r+1,
* ``E{r}``   environment leaving error round r (dimension 1 when uncorrelated),
* ``B{r}``   quantum memory between check rounds (quantum-memory variant only).

Check round r maps ``Q{r-1}p -> Q{r}``; error round r maps
``Q{r} (x) E{r-1} -> Q{r}p (x) E{r}`` with no environment input at round 0.
The classical memory alphabet is a set of strings and the initial memory
state is the empty string.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np
import numpy.typing as npt

from .combs import ChoiOperator
from .tensor import (
    LabeledOperator,
    Subsystems,
    dense_cap,
    tensor_product,
    vectorize,
)

__all__ = [
    "INITIAL_MEMORY",
    "CodeSpace",
    "CheckInstrument",
    "MemoryUpdate",
    "Interrogator",
    "ErrorModel",
    "StrategicCode",
    "QMemInterrogator",
    "Trajectory",
    "q_label",
    "qp_label",
    "env_label",
    "mem_label",
    "enumerate_trajectories",
    "count_trajectories",
    "comb_vector",
    "comb_vector_dense",
    "interrogator_operator",
    "compose_K",
    "error_comb",
    "error_comb_vector",
    "qmem_comb_vector",
]

INITIAL_MEMORY = ""

GRAM_ATOL = 1e-10
INSTRUMENT_ATOL = 1e-9
ERROR_NORM_ATOL = 1e-9
TRAJECTORY_CAP = 10**6


def q_label(r: int) -> str:
    """Label of the system entering error round r."""
    return f"Q{r}"


def qp_label(r: int) -> str:
    """Label of the system leaving error round r."""
    return f"Q{r}p"


def env_label(r: int) -> str:
    """Label of the environment leaving error round r."""
    return f"E{r}"


def mem_label(r: int) -> str:
    """Label of the quantum memory between check rounds r and r+1."""
    return f"B{r}"


# ----------------------------------------------------------------------
# domain types
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CodeSpace:
    """Orthonormal basis of the initial codespace inside a d-dimensional ambient.

    Args:
        ambient_dim: dimension d of the ambient Hilbert space.
        basis: complex array of shape (d, k) whose columns are the codewords.
    """

    ambient_dim: int
    basis: npt.NDArray[np.complex128] = field(repr=False)

    def __post_init__(self) -> None:
        mat = np.asarray(self.basis, dtype=np.complex128)
        if mat.ndim == 1:
            mat = mat.reshape(-1, 1)
        if mat.ndim != 2 or mat.shape[0] != self.ambient_dim:
            raise ValueError(
                f"basis must be shaped ({self.ambient_dim}, k), got {mat.shape}"
            )
        if mat.shape[1] < 1:
            raise ValueError("codespace needs at least one basis vector")
        gram = mat.conj().T @ mat
        if np.linalg.norm(gram - np.eye(mat.shape[1])) > GRAM_ATOL:
            raise ValueError("codespace basis is not orthonormal")
        mat = mat.copy()
        mat.flags.writeable = False
        object.__setattr__(self, "basis", mat)

    @property
    def dim(self) -> int:
        """Number of codewords k."""
        return int(self.basis.shape[1])

    @property
    def projector(self) -> npt.NDArray[np.complex128]:
        return self.basis @ self.basis.conj().T

    def vector(self, i: int) -> npt.NDArray[np.complex128]:
        return self.basis[:, i].copy()


@dataclass(frozen=True, eq=False)
class CheckInstrument:
    """One check-instrument round conditioned on a classical memory state.

    Kraus operators map ``Q{round-1}p -> Q{round}`` and must sum to a
    complete instrument: sum of C^dag C equals the identity.
    """

    round_index: int
    memory: str
    kraus: Mapping[str, LabeledOperator]

    def __post_init__(self) -> None:
        if self.round_index < 1:
            raise ValueError("check rounds are numbered from 1")
        if not self.kraus:
            raise ValueError("instrument needs at least one outcome")
        object.__setattr__(self, "kraus", dict(self.kraus))
        out_label = q_label(self.round_index)
        in_label = qp_label(self.round_index - 1)
        first: LabeledOperator | None = None
        for outcome, op in self.kraus.items():
            if first is None:
                first = op
                if op.row_labels != (out_label,) or op.col_labels != (in_label,):
                    raise ValueError(
                        f"round {self.round_index} instrument must map "
                        f"{in_label} -> {out_label}, got {op.col_labels} -> {op.row_labels}"
                    )
            elif (
                op.row_subsystems != first.row_subsystems
                or op.col_subsystems != first.col_subsystems
            ):
                raise ValueError(
                    f"outcome {outcome!r} signature differs within the instrument"
                )
        assert first is not None
        total = sum(op.data.conj().T @ op.data for op in self.kraus.values())
        eye = np.eye(first.col_dim)
        if np.linalg.norm(total - eye) > INSTRUMENT_ATOL * max(1.0, np.sqrt(first.col_dim)):
            raise ValueError(
                f"round {self.round_index} instrument for memory {self.memory!r} "
                "is not complete: sum of C^dag C != I"
            )

    @property
    def outcomes(self) -> tuple[str, ...]:
        return tuple(sorted(self.kraus))

    @property
    def in_dim(self) -> int:
        return next(iter(self.kraus.values())).col_dim

    @property
    def out_dim(self) -> int:
        return next(iter(self.kraus.values())).row_dim


@dataclass(frozen=True, eq=False)
class MemoryUpdate:
    """Per-round classical memory update tables.

    ``tables[r-1]`` maps ``(outcome, previous_memory) -> next_memory`` for
    round r; round-1 keys use the initial memory state (the empty string).
    Totality over each instrument's outcome alphabet is enforced when the
    update is paired with instruments inside an :class:`Interrogator`.
    """

    tables: tuple[Mapping[tuple[str, str], str], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tables", tuple(dict(t) for t in self.tables))

    @property
    def rounds(self) -> int:
        return len(self.tables)

    def next_memory(self, r: int, outcome: str, memory: str) -> str:
        try:
            return self.tables[r - 1][(outcome, memory)]
        except KeyError as exc:
            raise KeyError(
                f"memory update for round {r} has no entry for outcome "
                f"{outcome!r} in memory state {memory!r}"
            ) from exc

    def fold(self, outcomes: Sequence[str]) -> tuple[str, ...]:
        """Memory trajectory (m_1, ..., m_l) induced by an outcome sequence."""
        if len(outcomes) != self.rounds:
            raise ValueError(
                f"expected {self.rounds} outcomes, got {len(outcomes)}"
            )
        memory = INITIAL_MEMORY
        trace: list[str] = []
        for r, outcome in enumerate(outcomes, start=1):
            memory = self.next_memory(r, outcome, memory)
            trace.append(memory)
        return tuple(trace)


@dataclass(frozen=True)
class Trajectory:
    """One outcome sequence together with its induced memory trajectory."""

    outcomes: tuple[str, ...]
    memories: tuple[str, ...]

    @property
    def final_memory(self) -> str:
        return self.memories[-1] if self.memories else INITIAL_MEMORY


@dataclass(frozen=True, eq=False)
class Interrogator:
    """Adaptive check-instrument sequence with classical memory.

    ``instruments[r-1]`` maps each memory state reachable after round r-1 to
    the :class:`CheckInstrument` applied in round r.  Construction validates
    reachability: every reachable memory state has an instrument, every
    instrument outcome has an update-table entry, and all instruments within
    a round share one signature.
    """

    instruments: tuple[Mapping[str, CheckInstrument], ...]
    update: MemoryUpdate

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "instruments", tuple(dict(m) for m in self.instruments)
        )
        if self.update.rounds != len(self.instruments):
            raise ValueError(
                f"update has {self.update.rounds} rounds, "
                f"instruments have {len(self.instruments)}"
            )
        reachable: list[frozenset[str]] = [frozenset((INITIAL_MEMORY,))]
        for r in range(1, len(self.instruments) + 1):
            table = self.instruments[r - 1]
            signature: tuple[Subsystems, Subsystems] | None = None
            nxt: set[str] = set()
            for memory in sorted(reachable[r - 1]):
                inst = table.get(memory)
                if inst is None:
                    raise ValueError(
                        f"no round-{r} instrument for reachable memory state {memory!r}"
                    )
                if inst.round_index != r or inst.memory != memory:
                    raise ValueError(
                        f"instrument filed under round {r}, memory {memory!r} "
                        f"declares round {inst.round_index}, memory {inst.memory!r}"
                    )
                first = next(iter(inst.kraus.values()))
                sig = (first.row_subsystems, first.col_subsystems)
                if signature is None:
                    signature = sig
                elif sig != signature:
                    raise ValueError(
                        f"round-{r} instruments disagree on dims across memory states"
                    )
                for outcome in inst.outcomes:
                    nxt.add(self.update.next_memory(r, outcome, memory))
            reachable.append(frozenset(nxt))
        object.__setattr__(self, "_reachable", tuple(reachable))

    @property
    def rounds(self) -> int:
        return len(self.instruments)

    @property
    def reachable(self) -> tuple[frozenset[str], ...]:
        """Memory states reachable after each round; entry 0 is the initial state."""
        return self._reachable  # type: ignore[attr-defined]

    @property
    def final_memories(self) -> tuple[str, ...]:
        return tuple(sorted(self.reachable[self.rounds]))

    def instrument(self, r: int, memory: str) -> CheckInstrument:
        try:
            return self.instruments[r - 1][memory]
        except KeyError as exc:
            raise KeyError(
                f"no round-{r} instrument for memory state {memory!r}"
            ) from exc


@dataclass(frozen=True, eq=False)
class ErrorModel:
    """Per-round error Kraus lists with an optional environment chain.

    ``kraus_rounds[r]`` holds the operators of error round r.  Round 0 maps
    ``Q0 -> Q0p (x) E0``; round r maps ``Q{r} (x) E{r-1} -> Q{r}p (x) E{r}``.
    Environment dimensions of 1 model uncorrelated rounds.  Each round must
    be trace non-increasing (sum of E^dag E bounded by I); pass
    ``require_trace_nonincreasing=False`` to admit unnormalized operator
    sets, e.g. raw Pauli errors fed to the algebraic checker.
    """

    kraus_rounds: tuple[tuple[LabeledOperator, ...], ...]
    require_trace_nonincreasing: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "kraus_rounds", tuple(tuple(r) for r in self.kraus_rounds)
        )
        if not self.kraus_rounds:
            raise ValueError("error model needs at least round 0")
        for r, ops in enumerate(self.kraus_rounds):
            if not ops:
                raise ValueError(f"error round {r} has no Kraus operators")
            expect_rows = (qp_label(r), env_label(r))
            expect_cols = (q_label(r),) if r == 0 else (q_label(r), env_label(r - 1))
            first = ops[0]
            if first.row_labels != expect_rows or first.col_labels != expect_cols:
                raise ValueError(
                    f"error round {r} must map {expect_cols} -> {expect_rows}, "
                    f"got {first.col_labels} -> {first.row_labels}"
                )
            for op in ops[1:]:
                if (
                    op.row_subsystems != first.row_subsystems
                    or op.col_subsystems != first.col_subsystems
                ):
                    raise ValueError(f"error round {r} operators disagree on dims")
            if r > 0:
                prev_env = self.kraus_rounds[r - 1][0].row_dim_of(env_label(r - 1))
                if first.col_dim_of(env_label(r - 1)) != prev_env:
                    raise ValueError(
                        f"environment dim chain breaks between rounds {r - 1} and {r}"
                    )
            if self.require_trace_nonincreasing:
                total = sum(op.data.conj().T @ op.data for op in ops)
                gap = np.eye(first.col_dim) - total
                low = float(np.linalg.eigvalsh((gap + gap.conj().T) / 2.0)[0])
                if low < -ERROR_NORM_ATOL * max(1.0, float(np.linalg.norm(total))):
                    raise ValueError(
                        f"error round {r} is not trace non-increasing"
                    )

    @property
    def rounds(self) -> int:
        """Number of check rounds the model interleaves with (= l)."""
        return len(self.kraus_rounds) - 1

    def round_ops(self, r: int) -> tuple[LabeledOperator, ...]:
        return self.kraus_rounds[r]

    def q_in_dim(self, r: int) -> int:
        return self.kraus_rounds[r][0].col_dim_of(q_label(r))

    def q_out_dim(self, r: int) -> int:
        return self.kraus_rounds[r][0].row_dim_of(qp_label(r))

    def env_dim(self, r: int) -> int:
        """Dimension of the environment leaving round r."""
        return self.kraus_rounds[r][0].row_dim_of(env_label(r))

    def sequences(self) -> Iterator[tuple[int, ...]]:
        """All error-sequence index tuples e = (e_0, ..., e_l), lexicographic."""
        counts = [len(ops) for ops in self.kraus_rounds]
        seq = [0] * len(counts)
        while True:
            yield tuple(seq)
            pos = len(counts) - 1
            while pos >= 0:
                seq[pos] += 1
                if seq[pos] < counts[pos]:
                    break
                seq[pos] = 0
                pos -= 1
            if pos < 0:
                return


@dataclass(frozen=True, eq=False)
class StrategicCode:
    """A codespace together with its interrogator."""

    codespace: CodeSpace
    interrogator: Interrogator

    def __post_init__(self) -> None:
        if self.interrogator.rounds >= 1:
            inst = self.interrogator.instrument(1, INITIAL_MEMORY)
            if inst.in_dim != self.codespace.ambient_dim:
                raise ValueError(
                    f"round-1 instrument input dim {inst.in_dim} does not match "
                    f"the codespace ambient dim {self.codespace.ambient_dim}"
                )

    @property
    def rounds(self) -> int:
        return self.interrogator.rounds


# ----------------------------------------------------------------------
# trajectory enumeration
# ----------------------------------------------------------------------


def count_trajectories(interrogator: Interrogator) -> int:
    """Number of outcome sequences without materializing them."""
    counts: dict[tuple[int, str], int] = {}

    def count(r: int, memory: str) -> int:
        if r > interrogator.rounds:
            return 1
        key = (r, memory)
        if key not in counts:
            inst = interrogator.instrument(r, memory)
            counts[key] = sum(
                count(r + 1, interrogator.update.next_memory(r, o, memory))
                for o in inst.outcomes
            )
        return counts[key]

    return count(1, INITIAL_MEMORY)


def enumerate_trajectories(
    interrogator: Interrogator, cap: int = TRAJECTORY_CAP
) -> dict[str, tuple[Trajectory, ...]]:
    """All outcome sequences grouped by final memory state.

    Outcomes are expanded in sorted order per round, so listings are
    deterministic.  Raises if the sequence count exceeds ``cap``.
    """
    total = count_trajectories(interrogator)
    if total > cap:
        raise ValueError(
            f"{total} outcome sequences exceed the enumeration cap {cap}"
        )
    grouped: dict[str, list[Trajectory]] = {}

    def walk(r: int, memory: str, outcomes: tuple[str, ...], memories: tuple[str, ...]) -> None:
        if r > interrogator.rounds:
            grouped.setdefault(memory, []).append(Trajectory(outcomes, memories))
            return
        inst = interrogator.instrument(r, memory)
        for o in inst.outcomes:
            nxt = interrogator.update.next_memory(r, o, memory)
            walk(r + 1, nxt, outcomes + (o,), memories + (nxt,))

    walk(1, INITIAL_MEMORY, (), ())
    return {m: tuple(v) for m, v in sorted(grouped.items())}


# ----------------------------------------------------------------------
# comb constructions
# ----------------------------------------------------------------------


def _resolve(interrogator: Interrogator, final_memory: str, outcomes: Sequence[str]) -> tuple[str, ...]:
    """Memory trajectory for ``outcomes``, checked against ``final_memory``."""
    memories = interrogator.update.fold(outcomes)
    final = memories[-1] if memories else INITIAL_MEMORY
    if final != final_memory:
        raise ValueError(
            f"outcome sequence {tuple(outcomes)!r} folds to memory {final!r}, "
            f"not {final_memory!r}"
        )
    return memories


def comb_vector(
    interrogator: Interrogator, final_memory: str, outcomes: Sequence[str]
) -> list[LabeledOperator]:
    """Kraus factors [C^(1), ..., C^(l)] selected by an outcome sequence.

    The vectorized tensor product of the returned factors, taken with the
    round-l factor first, is the interrogator comb vector.
    """
    memories = _resolve(interrogator, final_memory, outcomes)
    factors: list[LabeledOperator] = []
    memory = INITIAL_MEMORY
    for r, outcome in enumerate(outcomes, start=1):
        inst = interrogator.instrument(r, memory)
        try:
            factors.append(inst.kraus[outcome])
        except KeyError as exc:
            raise KeyError(
                f"round-{r} instrument for memory {memory!r} has no outcome {outcome!r}"
            ) from exc
        memory = memories[r - 1]
    return factors


def comb_vector_dense(
    interrogator: Interrogator, final_memory: str, outcomes: Sequence[str]
) -> LabeledOperator:
    """Dense comb vector: vectorized factors tensored round-l first."""
    factors = comb_vector(interrogator, final_memory, outcomes)
    total = 1
    for f in factors:
        total *= f.row_dim * f.col_dim
    if total > dense_cap():
        raise ValueError(
            f"dense comb vector dim {total} exceeds the cap {dense_cap()}; "
            "use the factored comb_vector workflow"
        )
    vec = LabeledOperator((), (), np.ones((1, 1)))
    for f in reversed(factors):
        vec = tensor_product(vec, vectorize(f))
    return vec


def interrogator_operator(interrogator: Interrogator, final_memory: str) -> ChoiOperator:
    """Dense interrogator operator: the PSD sum of comb-vector projectors."""
    trajectories = enumerate_trajectories(interrogator).get(final_memory)
    if trajectories is None:
        raise ValueError(f"no trajectory reaches memory state {final_memory!r}")
    first = comb_vector_dense(interrogator, final_memory, trajectories[0].outcomes)
    total = np.zeros((first.row_dim, first.row_dim), dtype=np.complex128)
    for traj in trajectories:
        v = comb_vector_dense(interrogator, final_memory, traj.outcomes).data
        total += v @ v.conj().T
    inputs = tuple(qp_label(r) for r in range(interrogator.rounds))
    outputs = tuple(q_label(r) for r in range(1, interrogator.rounds + 1))
    op = LabeledOperator(first.row_subsystems, first.row_subsystems, total)
    return ChoiOperator(op, input_labels=inputs, output_labels=outputs)


def compose_K(
    errors: ErrorModel,
    interrogator: Interrogator,
    error_seq: Sequence[int],
    final_memory: str,
    outcomes: Sequence[str],
) -> LabeledOperator:
    """Composed Kraus operator of one trajectory and one error sequence.

    Alternates error rounds with the outcome-selected check Kraus operators,
    as plain matrix products: E_{e_l} (C^(l) (x) I_E) ... (C^(1) (x) I_E) E_{e_0}.
    The result maps ``Q0 -> Q{l}p (x) E{l}``; the environment leg has
    dimension 1 for uncorrelated models.
    """
    l = interrogator.rounds
    if errors.rounds != l:
        raise ValueError(
            f"error model spans {errors.rounds} rounds, interrogator {l}"
        )
    if len(error_seq) != l + 1:
        raise ValueError(f"error sequence must have length {l + 1}")
    factors = comb_vector(interrogator, final_memory, outcomes)
    ops = errors.round_ops(0)
    if not 0 <= error_seq[0] < len(ops):
        raise ValueError(f"error index {error_seq[0]} out of range at round 0")
    current = ops[error_seq[0]].data
    for r in range(1, l + 1):
        check = factors[r - 1].data
        env = errors.env_dim(r - 1)
        lifted = np.kron(check, np.eye(env))
        if lifted.shape[1] != current.shape[0]:
            raise ValueError(
                f"dim mismatch feeding check round {r}: error round {r - 1} "
                f"emits {current.shape[0]}, instrument expects {lifted.shape[1]}"
            )
        current = lifted @ current
        ops = errors.round_ops(r)
        if not 0 <= error_seq[r] < len(ops):
            raise ValueError(f"error index {error_seq[r]} out of range at round {r}")
        err = ops[error_seq[r]].data
        if err.shape[1] != current.shape[0]:
            raise ValueError(
                f"dim mismatch feeding error round {r}: check round {r} "
                f"emits {current.shape[0]}, error expects {err.shape[1]}"
            )
        current = err @ current
    rows = (
        (qp_label(l), errors.q_out_dim(l)),
        (env_label(l), errors.env_dim(l)),
    )
    cols = ((q_label(0), errors.q_in_dim(0)),)
    return LabeledOperator(rows, cols, current)


def error_comb_vector(errors: ErrorModel, error_seq: Sequence[int]) -> LabeledOperator:
    """Dense comb vector of one error sequence, environment chain contracted.

    Subsystem order is (Q0, Q0p, Q1, Q1p, ..., Ql, Qlp, El); the final
    environment stays open so correlated models keep their purification leg.
    """
    l = errors.rounds
    if len(error_seq) != l + 1:
        raise ValueError(f"error sequence must have length {l + 1}")
    ops = errors.round_ops(0)
    op0 = ops[error_seq[0]]
    dq, de = errors.q_out_dim(0), errors.env_dim(0)
    # axes: (q0, q0p, e0)
    cur = op0.data.reshape(dq, de, errors.q_in_dim(0)).transpose(2, 0, 1)
    subs: list[tuple[str, int]] = [
        (q_label(0), errors.q_in_dim(0)),
        (qp_label(0), dq),
    ]
    for r in range(1, l + 1):
        op = errors.round_ops(r)[error_seq[r]]
        dq_in, de_in = errors.q_in_dim(r), errors.env_dim(r - 1)
        dq_out, de_out = errors.q_out_dim(r), errors.env_dim(r)
        block = op.data.reshape(dq_out, de_out, dq_in, de_in)
        # contract the shared environment, then append (q_r, q_rp, e_r)
        cur = np.tensordot(cur, block, axes=([cur.ndim - 1], [3]))
        cur = np.moveaxis(cur, (cur.ndim - 3, cur.ndim - 2, cur.ndim - 1), (cur.ndim - 2, cur.ndim - 1, cur.ndim - 3))
        subs.extend([(q_label(r), dq_in), (qp_label(r), dq_out)])
    subs.append((env_label(l), errors.env_dim(l)))
    return LabeledOperator(tuple(subs), (), cur.reshape(-1, 1))


def error_comb(errors: ErrorModel) -> ChoiOperator:
    """Dense error comb: the PSD sum over all error sequences."""
    total_dim = errors.env_dim(errors.rounds)
    for r in range(errors.rounds + 1):
        total_dim *= errors.q_in_dim(r) * errors.q_out_dim(r)
    if total_dim > dense_cap():
        raise ValueError(
            f"dense error comb dim {total_dim} exceeds the cap {dense_cap()}"
        )
    total: np.ndarray | None = None
    subs: Subsystems | None = None
    for seq in errors.sequences():
        v = error_comb_vector(errors, seq)
        if total is None:
            total = np.zeros((v.row_dim, v.row_dim), dtype=np.complex128)
            subs = v.row_subsystems
        total += v.data @ v.data.conj().T
    assert total is not None and subs is not None
    inputs = tuple(q_label(r) for r in range(errors.rounds + 1))
    outputs = tuple(qp_label(r) for r in range(errors.rounds + 1))
    outputs += (env_label(errors.rounds),)
    op = LabeledOperator(subs, subs, total)
    return ChoiOperator(op, input_labels=inputs, output_labels=outputs)


# ----------------------------------------------------------------------
# quantum-memory variant (construction only)
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QMemInterrogator:
    """Check rounds whose Kraus operators carry quantum-memory legs.

    Round r operators map ``B{r-1} (x) Q{r-1}p -> B{r} (x) Q{r}``, keyed by
    memory state then outcome as in the classical case.  ``carrier`` is the
    entangled codestate vector on (B0, Q0) that seeds the chain; it is what
    a zero-round interrogation returns.
    """

    instruments: tuple[Mapping[str, Mapping[str, LabeledOperator]], ...]
    update: MemoryUpdate
    carrier: LabeledOperator | None = None

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "instruments",
            tuple({m: dict(k) for m, k in table.items()} for table in self.instruments),
        )
        if self.update.rounds != len(self.instruments):
            raise ValueError("update rounds do not match instrument rounds")
        mem_dim = None if self.carrier is None else self.carrier.row_dim_of(mem_label(0))
        for r, table in enumerate(self.instruments, start=1):
            for memory, kraus in sorted(table.items()):
                for outcome, op in sorted(kraus.items()):
                    expect_rows = (mem_label(r), q_label(r))
                    expect_cols = (mem_label(r - 1), qp_label(r - 1))
                    if op.row_labels != expect_rows or op.col_labels != expect_cols:
                        raise ValueError(
                            f"round {r} memory-leg Kraus must map {expect_cols} -> "
                            f"{expect_rows}, got {op.col_labels} -> {op.row_labels}"
                        )
                    b_in = op.col_dim_of(mem_label(r - 1))
                    if mem_dim is not None and b_in != mem_dim:
                        raise ValueError(
                            f"memory-leg dim mismatch at round {r}: expected "
                            f"{mem_dim}, got {b_in}"
                        )
                mem_dims = {
                    op.row_dim_of(mem_label(r)) for op in kraus.values()
                }
                if len(mem_dims) != 1:
                    raise ValueError(f"round {r} outcomes disagree on memory dim")
            dims = {
                op.row_dim_of(mem_label(r))
                for table_kraus in table.values()
                for op in table_kraus.values()
            }
            if len(dims) != 1:
                raise ValueError(f"round {r} memory dims differ across memory states")
            mem_dim = dims.pop()

    @property
    def rounds(self) -> int:
        return len(self.instruments)


def qmem_comb_vector(
    interrogator: QMemInterrogator, final_memory: str, outcomes: Sequence[str]
) -> LabeledOperator:
    """Comb vector of a quantum-memory interrogation.

    Intermediate memory legs are contracted between consecutive rounds; the
    initial memory B0, the final memory B{l}, the check outputs Q1..Ql and
    the vectorized inputs Q0p..Q{l-1}p all stay open.  With every memory
    dimension 1 this reduces to the classical dense comb vector.
    """
    l = interrogator.rounds
    if l == 0:
        if interrogator.carrier is None:
            raise ValueError("zero-round quantum-memory interrogator needs a carrier")
        if outcomes:
            raise ValueError("zero rounds admit no outcomes")
        return interrogator.carrier
    memories = interrogator.update.fold(outcomes)
    final = memories[-1]
    if final != final_memory:
        raise ValueError(
            f"outcome sequence {tuple(outcomes)!r} folds to memory {final!r}, "
            f"not {final_memory!r}"
        )
    chain: list[LabeledOperator] = []
    memory = INITIAL_MEMORY
    for r, outcome in enumerate(outcomes, start=1):
        table = interrogator.instruments[r - 1]
        try:
            chain.append(table[memory][outcome])
        except KeyError as exc:
            raise KeyError(
                f"round-{r} quantum-memory Kraus missing for memory {memory!r}, "
                f"outcome {outcome!r}"
            ) from exc
        memory = memories[r - 1]
    dims = [
        (
            op.row_dim_of(mem_label(r)),
            op.row_dim_of(q_label(r)),
            op.col_dim_of(mem_label(r - 1)),
            op.col_dim_of(qp_label(r - 1)),
        )
        for r, op in enumerate(chain, start=1)
    ]
    # axes after round r: (b_r, q_r, q_{r-1}, ..., q_1, b_0, j_0, ..., j_{r-1})
    b1, q1, b0, j0 = dims[0]
    cur = chain[0].data.reshape(b1, q1, b0, j0)
    for r in range(2, l + 1):
        br, qr, br_prev, jr_prev = dims[r - 1]
        block = chain[r - 1].data.reshape(br, qr, br_prev, jr_prev)
        cur = np.tensordot(block, cur, axes=([2], [0]))
        cur = np.moveaxis(cur, 2, cur.ndim - 1)
    subs: list[tuple[str, int]] = [(mem_label(l), dims[-1][0]), (q_label(l), dims[-1][1])]
    for r in range(l - 1, 0, -1):
        subs.append((q_label(r), dims[r - 1][1]))
    subs.append((mem_label(0), dims[0][2]))
    for r in range(l):
        subs.append((qp_label(r), dims[r][3]))
    return LabeledOperator(tuple(subs), (), cur.reshape(-1, 1))
