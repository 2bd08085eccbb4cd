"""Dynamical entropy of quantum Markov chains on finite CAR algebras."""

from carq.dynamics import (
    Automorphism,
    ChainState,
    EnumerationCapError,
    Partition,
    Scenario,
    chain_joint_state,
    map_E_e,
    transition_expectation,
    umegaki_step,
    validate_partition,
)
from carq.fock import (
    FockSystem,
    antisymmetrizer,
    build_fock_system,
    creation_via_antisymmetrizer,
    even_part,
    parity_automorphism,
    verify_car_relations,
)
from carq.kernel import (
    EntropySeries,
    KernelTable,
    classical_oracle_kernel,
    entropy_series,
    gamma_word,
    kernel_table,
    kernel_tables,
    rate_estimate,
)
from carq.linalg import (
    hermitian_eig,
    kron,
    partial_trace,
    shannon_entropy,
    von_neumann_entropy,
)
from carq.model import two_level_scenario
from carq.optimize import PartitionFamily, rotated_basis_family, sup_over_family

__version__ = "0.1.0"
