"""Operator splitting for delay equations ``u' = Bu + Phi u_t``.

The state is a head vector plus a sampled history on ``[-1, 0]``; the
generator splits into the undelayed flow and the pure delay flow, which are
recombined either by exact sub-flows or by resolvents. Implicit Euler on the
whole generator serves as a baseline.
"""

__version__ = "0.1.0"

from .errors import (DelaySplitError, DimensionError, GridError, NonFiniteError, NumericalError,
                     UnsupportedParameterError)
from .state import (DelayState, HistorySegment, d_norm, e_norm, history_norm,
                    interpolate_history, make_state, regrid, shift_append)
from .generator import LinearGenerator, apply_B, dissipativity_estimate, resolvent_B, semigroup_apply
from .kernel import (DelayKernel, Density, Nonlinearity, evaluate_phi, exp_weighted_kernel,
                     gamma_bound, tau)
from .splitting import (SCHEMES, SplitScheme, crandall_liggett_apply, lie_split, resolvent_A1,
                        resolvent_A2, resolvent_G, sequential_split, step_T1, step_T2)
from .reference import ReferenceConfig, exact_scalar_oracle, reference_solve
from .analysis import (ConvergenceReport, ErrorRow, contraction_probe, convergence_study,
                       global_error, local_error_probe, order_fit, variation_weighted_norm)

__all__ = [name for name in dir() if not name.startswith("_")]
