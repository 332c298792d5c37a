"""Simulation and optimal control of spin ensembles coupled to a lossy cavity."""

from .core import (
    DensityMatrix,
    Operator,
    SpaceSpec,
    SpinBasis,
    SystemParams,
    basis_state,
    build_collective,
    build_controls,
    build_h0,
    build_mode_ops,
    build_spin_ops,
    commutator,
    dicke_states,
    excitation_number,
    expectation,
    partial_trace_cavity,
    state_label_index,
)
from .dynamics import (
    BumpPulseSpec,
    ConvergenceError,
    LeakageError,
    PulsePackage,
    PulseSequence,
    SequenceEvaluator,
    Trajectory,
    TruncationWarning,
    apply_rotation,
    apply_squeeze,
    bump_waveform,
    effective_coupling_first_order,
    free_evolve,
    propagate_sequence,
    rotation_operator,
    simulate_bump_pulse,
    squeeze_operator,
)
from .merit import (
    MeritReport,
    MeritSpec,
    cooperativity,
    cumulant_measure,
    fidelity,
    g2,
    jpjm,
    jpjm_corr,
    jpjm_corr_norm,
    jpjm_norm,
    merit_report,
)
from .controllability import (
    AlgebraGrowth,
    GeneratorSet,
    is_controllable,
    lie_algebra_growth,
)
from .optimize import (
    Bounds,
    OptimizerConfig,
    OptRun,
    PreOptConfig,
    ScanResult,
    evaluate_sequence_merit,
    jaya_optimize,
    kappa_continuation,
    preoptimize,
    robustness_scan,
    sequence_objective,
)
from .sequences import (
    ANTISYMMETRIC_TWO_SPIN,
    NONCLASSICAL_FOUR_SPIN,
    PUBLISHED_SEQUENCES,
    SYMMETRIC_TWO_SPIN,
    PublishedSequence,
)

__version__ = "0.1.0"
