"""Training-free analysis of noise conditioning in denoising generative models.

The package evaluates, for a finite dataset, the posterior over noise levels
``p(t|z)``, the optimal denoiser outputs with and without the noise level, the
accumulated error bound between the two samplers, and oracle sampling runs.
"""

__version__ = "0.1.0"

from .bounds import (
    BoundEstimate, accumulate_bound, bound_for_plan, bound_pipeline, estimate_delta, estimate_lipschitz,
    verify_step_recursion,
)
from .dataset import (
    Dataset, DatasetStats, NoisyPoint, corrupt, dataset_stats, load_cifar10, load_raw_tensor, save_raw_tensor,
    synth_points, synth_single_point,
)
from .errors import DegenerateNoiseError, DomainError, MalformedFileError, NoSupportError
from .mixture import MixtureEval, log_p_z_given_t, posterior_weighted_mean
from .posterior import PosteriorConfig, PosteriorEval, brute_force_posterior, posterior_grid, posterior_profile
from .sampler import PairedDivergence, SamplerRun, paired_divergence, run_sampler
from .schedules import (
    EdmPrecondition, SamplerPlan, ScheduleSpec, TimeGrid, edm_precondition_to_unified, eval_train_schedule,
    make_time_grid, sample_time_prior, sampler_coefficients,
)
from .targets import EffectiveTargetEval, effective_target_cond, effective_target_uncond, target_gap
from .theory import ValidationReport, reproduce_bound_table, concentration_table, validate_target_gap, validate_variance_scaling
