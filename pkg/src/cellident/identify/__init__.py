"""Identification pipelines for the slow and fast parameter groups."""
from .aging import REFERENCE_AGING, AgingCoefficients, AgingFitError, AgingState, apply_aging, fit_aging
from .objectives import OBJECTIVE_MODES, STATIC, AlignmentError, objective_value, segment_cost
from .sso import (EmptyScheduleError, IdentificationResult, SsoConfig, SsoSchedule, SsoStep, SsoStepError,
                  baseline_joint_pso, build_sso_schedule, pulse_rmse, sso_identify)
from .static import (MacroCharacteristics, PoorFitWarning, StaticIdentified, StoichLimits,
                     WindowInfeasibleError, derive_macro, identify_quasi_static, solve_stoich_limits)
