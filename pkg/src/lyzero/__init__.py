"""Exact partition functions and Lee-Yang zeros of Blume-Capel / dilute Ising models."""

from .engines import (
    brute_force_partition,
    chain_transfer_partition,
    hierarchical_partition,
    operator_partition,
    partition,
)
from .expsum import (
    ExpSum,
    FugacityPolynomial,
    apply_quadratic_exponential,
    eval_expsum,
    expsum_from_measure,
    restrict_to_diagonal,
)
from .models import (
    CouplingMatrix,
    HierarchySpec,
    ModelInstance,
    SpinMeasure,
    blume_capel_measure,
    coupling_chain,
    coupling_dense,
    coupling_hierarchical,
    dilute_measure,
    ising_measure,
    theta_from_delta,
)
from .structure import MatchingReport, bottleneck_matching, pair_partition_condition_ii
from .theorem import (
    TwoSpinKernel,
    bound_condition_i,
    bound_condition_ii,
    corollary_bounds,
    epsilon_pm,
    omega_pm,
    sharpness_scan,
    two_spin_kernel_value,
    verify_theorem1,
)
from .zeros import LeeYangVerdict, ZeroSet, classify, find_zeros, zero_trajectory

__all__ = [
    "CouplingMatrix",
    "ExpSum",
    "FugacityPolynomial",
    "HierarchySpec",
    "LeeYangVerdict",
    "MatchingReport",
    "ModelInstance",
    "SpinMeasure",
    "TwoSpinKernel",
    "ZeroSet",
    "apply_quadratic_exponential",
    "blume_capel_measure",
    "bottleneck_matching",
    "bound_condition_i",
    "bound_condition_ii",
    "brute_force_partition",
    "chain_transfer_partition",
    "classify",
    "corollary_bounds",
    "coupling_chain",
    "coupling_dense",
    "coupling_hierarchical",
    "dilute_measure",
    "epsilon_pm",
    "eval_expsum",
    "expsum_from_measure",
    "find_zeros",
    "hierarchical_partition",
    "ising_measure",
    "omega_pm",
    "operator_partition",
    "pair_partition_condition_ii",
    "partition",
    "restrict_to_diagonal",
    "sharpness_scan",
    "theta_from_delta",
    "two_spin_kernel_value",
    "verify_theorem1",
    "zero_trajectory",
]

__version__ = "0.1.0"
