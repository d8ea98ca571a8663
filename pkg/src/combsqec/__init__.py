"""Spatio-temporal quantum error correction as quantum combs.

Strategic codes pair an initial codespace with an adaptive sequence of check
instruments driven by a classical memory.  This package represents both the
checks and temporally correlated noise as quantum combs, decides exact
correctability through two independent necessary-and-sufficient checkers,
synthesizes decoders from both proofs, and optimizes error-adapted
approximate codes by see-saw coordinate ascent on entanglement fidelity.
"""

from combsqec.combs import (
    ChoiOperator,
    CombReport,
    CombSignature,
    choi_from_kraus,
    is_cptp,
    kraus_from_choi,
    link_product,
    random_cptp_choi,
    validate_comb,
)
from combsqec.conditions import (
    ConditionReport,
    Decoder,
    JointState,
    LambdaTensor,
    RecoveryRecord,
    RecoveryReport,
    check_algebraic,
    check_corollary_all_outcomes,
    check_info,
    check_static_kl,
    joint_state,
    lambda_tensor,
    synth_decoder_algebraic,
    synth_decoder_schmidt,
    verify_recovery,
)
from combsqec.io import (
    InstanceDocument,
    ParseError,
    export_instance,
    instance_text,
    load_instance,
    parse_instance,
)
from combsqec.library import (
    NamedInstance,
    bitflip_code,
    build_instance,
    hexagon_honeycomb,
    instance_names,
    random_instance,
    spacetime_toy_circuit,
)
from combsqec.model import (
    CheckInstrument,
    CodeSpace,
    ErrorModel,
    INITIAL_MEMORY,
    Interrogator,
    MemoryUpdate,
    StrategicCode,
    Trajectory,
    comb_vector,
    comb_vector_dense,
    compose_K,
    count_trajectories,
    enumerate_trajectories,
    error_comb,
    error_comb_vector,
    interrogator_operator,
)
from combsqec.optimize import (
    OptimizationState,
    OptimizerConfig,
    TraceRecord,
    coordinate_step,
    ent_fidelity,
    initial_state,
    project_cptp,
    seesaw,
    static_biconvex,
)
from combsqec.tensor import (
    LabeledOperator,
    SpectralResult,
    dense_cap,
    devectorize,
    entropy,
    herm_eig,
    identity_operator,
    partial_trace,
    partial_transpose,
    polar,
    schmidt,
    tensor_product,
    vectorize,
)

__version__ = "0.1.0"
