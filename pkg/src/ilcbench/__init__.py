"""Iterative learning control toolkit for repeated motion tasks.

Discrete LTI signals and systems, a simulated belt-driven printer axis,
bounded-derivative motion profiles, reproducible-error analysis,
frequency-domain and basis-function ILC, and a JSON-driven batch runner.
"""

from .errors import *  # noqa: F401,F403
from .filters import (
    NoncausalFilter,
    apply_noncausal,
    band_mask,
    design_inverse_L,
    design_Q,
    lowpass_prototype,
    zero_phase,
    zero_phase_magnitude,
)
from .ilc import (
    ConvergenceReport,
    TrialHistory,
    asymptotic_error,
    asymptotic_feedforward,
    check_convergence,
    check_convergence_mimo,
    finite_record_gain,
    ilc_update,
    ilc_update_mimo,
    lifted_contraction_oracle,
    run_ilc,
    run_ilc_mimo,
)
from .ilc_basis import (
    BasisSpec,
    ReferenceChangeReport,
    build_basis,
    demonstrate_reference_change,
    feedforward_from_params,
    run_basis_ilc,
    update_params,
)
from .plant_lab import (
    CoupledScenario,
    PrinterParams,
    Scenario,
    TaskResult,
    coupled_printer_scenario,
    default_printer_scenario,
    pd_controller,
    printer_models,
    printer_reference,
    run_task,
    run_task_mimo,
)
from .repro import ErrorEnsemble, PerformanceReport, collect_ensemble, decompose, performance_bound, sample_mean
from .signal_lti import (
    ContinuousModal,
    Frf,
    LiftedOperator,
    Mode,
    Signal,
    TransferFunction,
    closed_loop_maps,
    default_grid,
    discretize_zoh,
    freq_response,
    impulse_response,
    lifted_matrix,
    make_modal_plant,
    simulate,
)
from .trajectory import Bounds, MotionProfile, fourth_order_profile, third_order_profile

__version__ = "0.1.0"
