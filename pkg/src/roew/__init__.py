"""Robust entanglement-witness training from noisy two-qubit measurement data.

Pipeline: generate labeled two-qubit states, extract noisy Pauli
expectation features with per-sample moments, train a distributionally
robust chance-constrained SVM per Bell group, rebuild the hyperplanes as
Hermitian witness operators, and verify them against product states.
"""

from .drsvm import (
    RobustParams,
    SolverConfig,
    SvmModel,
    kappa,
    kkt_report,
    robust_margin,
    train_hinge_l1,
    train_robust,
    train_roew_binary,
    train_soft_margin,
)
from .evalx import (
    MetricsReport,
    RocCurve,
    SplitConfig,
    SweepConfig,
    metrics,
    roc,
    run_algorithm1,
    run_sweep,
    split,
)
from .measure import (
    GaussianNoise,
    MomentSample,
    ShotNoise,
    estimate_moments,
    noisy_features,
    pauli_features,
)
from .states import (
    BellLabel,
    LabeledState,
    bell_state,
    generate_states,
    ppt_separable,
    product_state,
    random_entangled,
    random_separable,
    werner_state,
)
from .witness import (
    VerificationReport,
    WitnessOperator,
    classify,
    expectation,
    reference_witness,
    verify_witness,
    witness_from_model,
)

__version__ = "0.1.0"
