"""Clifford groups, randomized benchmarking and HEAT."""
from .clifford import (CX, NATIVE_1Q, CliffordElement, CliffordGroup, clifford_group,
                       decompose_clifford, sample_clifford, sequence_unitary, tableau)
from .rb import (IdealGateSet, PulseGateSet, RBFitError, RBResult, RBSpec, depolarizing_gateset,
                 run_purity_rb, run_rb, sequence_purities)
from .heat import (HEAT_PAULIS, HEAT_ROWS, BlindnessReport, HeatResult, HeatSpec,
                   build_heat_sequence, heat_blindness_demo, heat_gate_unitary, response_matrix,
                   run_heat)

__all__ = [
    "CX", "NATIVE_1Q", "CliffordElement", "CliffordGroup", "clifford_group", "decompose_clifford",
    "sample_clifford", "sequence_unitary", "tableau",
    "IdealGateSet", "PulseGateSet", "RBFitError", "RBResult", "RBSpec", "depolarizing_gateset",
    "run_purity_rb", "run_rb", "sequence_purities",
    "HEAT_PAULIS", "HEAT_ROWS", "BlindnessReport", "HeatResult", "HeatSpec", "build_heat_sequence",
    "heat_blindness_demo", "heat_gate_unitary", "response_matrix", "run_heat",
]
