"""Differentiable quantum architecture search over density-matrix mixtures."""

from .densmat import (
    DensityMatrix,
    NoiseKind,
    NoiseSpec,
    PureState,
    apply_1q_gate,
    apply_cnot,
    apply_noise,
    expectation_diag,
    fidelity,
    measurement_probs,
    pure_to_density,
)
from .difftape import GradientBundle, Tape, backward, record_forward
from .regopt import AdamCosine, EntropyScheduleCfg, angle_penalty, entropy_term, schedule
from .searchspace import (
    ArchLogits,
    GateId,
    GateSet,
    SuperCircuitStructure,
    arch_probability,
    discretize,
    forward_macro,
    forward_micro,
    gate_probs,
    gate_set_for,
    init_logits,
    init_theta,
    simulate_discrete,
)

__version__ = "0.1.0"
