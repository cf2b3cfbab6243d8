"""Truncated q-deformed Fock spaces, Wick operators and tensor-norm witnesses."""

from .qsym import (
    BudgetExceeded,
    DenseCapExceeded,
    GramLevel,
    NotPositiveDefinite,
    Permutation,
    QFockError,
    inversion_count,
    pq_apply,
    pq_dense,
    pq_factored,
)
from .fock import (
    FockOperator,
    FockVector,
    InsufficientTruncation,
    QContext,
    TruncatedFock,
    annihilation,
    creation,
    field,
    q_adjoint,
    q_inner,
)
from .wick import phi_m, right_wick, three_summands, trace, wick, wick_star
from .witness import (
    ao_witness_report,
    cq,
    crossover_k,
    nou_bound,
    operator_norm,
    restricted_witness_norm,
    tensor_min_norm,
)

__version__ = "0.1.0"
