"""Online adaptive reduced-order models with adaptive sampling."""

from .adeim import (AdeimUpdate, SamplingSet, adaptive_sampling, adeim_update, assemble_surrogate_state,
                    compute_adeim_update, uniform_sampling)
from .driver import (AadeimConfig, RunRecord, compute_error, run_aadeim, run_full, run_full_svd_variant,
                     run_static_rom)
from .errors import AadeimError, ConfigError, ModelDivergenceError, NonFiniteError, SingularMatrixError
from .models import AdvectionModel, BurgersModel, NewtonConfig, Trajectory, make_model, solve_full_model
from .rom import ReducedBasis, deim_project, pod_basis, qdeim_points

__version__ = "0.1.0"
