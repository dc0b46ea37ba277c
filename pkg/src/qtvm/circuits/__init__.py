"""Program generators: teleportation, Ising quenches, reversible arithmetic."""

from .arithmetic import (
    adder_instructions,
    build_adder,
    build_subtractor,
    build_times2_mod_n,
    doubler_layout,
    subtractor_instructions,
    times2_mod_n_instructions,
)
from .shor import (
    ShorSpec,
    build_shor_order_finding,
    convergent_denominators,
    extract_order,
    factors_from_order,
)
from .teleport import build_teleportation
from .tfim import (
    TfimQuenchSpec,
    build_tfim_quench,
    hamiltonian_matrix,
    tfim_quench_source,
    zz_rotation,
)

__all__ = [
    "ShorSpec",
    "TfimQuenchSpec",
    "adder_instructions",
    "build_adder",
    "build_shor_order_finding",
    "build_subtractor",
    "build_teleportation",
    "build_tfim_quench",
    "build_times2_mod_n",
    "convergent_denominators",
    "doubler_layout",
    "extract_order",
    "factors_from_order",
    "hamiltonian_matrix",
    "subtractor_instructions",
    "tfim_quench_source",
    "times2_mod_n_instructions",
    "zz_rotation",
]
