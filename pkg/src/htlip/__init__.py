"""Footstep-stabilized pendulum locomotion on a vertically moving surface.

Submodules: `surface` (surface motion models and stiffness-bound
estimators), `dynamics` (hybrid pendulum model), `stability` (step-to-step
certificates), `controller` (QP gain selection and reference gaits),
`simulate` (closed-loop runs and Monte Carlo), `cli` (command line).

The hot numerical kernels run from a compiled extension when available;
set HTLIP_PURE_PYTHON=1 to force the pure-Python fallback.
"""

__version__ = "0.1.0"

from ._backend import backend_name
from .dynamics import (HtLipState, ModelParams, TransitionMatrix,
                       integrate_phase, reset_map, stiffness, stm_numeric,
                       stm_supremum)
from .errors import ConfigError, ValidationError
from .stability import (GainK, StabilityReport, certify_gain, certify_matrix,
                        closed_loop_matrix, deadbeat_gain,
                        sweep_stability_region)
from .controller import (FootstepCommand, FootstepController, QpProblem,
                         QpSolution, ReferenceGait, build_qp, compute_footstep,
                         kkt_residuals, make_reference, solve_qp)
from .simulate import (Disturbance, RandomizationSpec, Scenario, SimResult,
                       StepLog, err_norm, inject_push, monte_carlo,
                       run_scenario)
from .surface import (AccelBoundEstimate, MotionProfile, estimate_fbar,
                      estimate_fbar_causal, eval_pitch, eval_vertical,
                      make_profile)

__all__ = [
    "AccelBoundEstimate", "ConfigError", "Disturbance", "FootstepCommand",
    "FootstepController", "GainK", "HtLipState", "ModelParams",
    "MotionProfile", "QpProblem", "QpSolution", "RandomizationSpec",
    "ReferenceGait", "Scenario", "SimResult", "StabilityReport", "StepLog",
    "TransitionMatrix", "ValidationError", "backend_name", "build_qp",
    "certify_gain", "certify_matrix", "closed_loop_matrix",
    "compute_footstep", "deadbeat_gain", "err_norm", "estimate_fbar",
    "estimate_fbar_causal", "eval_pitch", "eval_vertical", "inject_push",
    "integrate_phase", "kkt_residuals", "make_profile", "make_reference",
    "monte_carlo", "reset_map", "run_scenario", "solve_qp", "stiffness",
    "stm_numeric", "stm_supremum", "sweep_stability_region",
]
