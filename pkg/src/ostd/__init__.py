"""Online random-feature Gaussian-process TD value estimation."""

from .errors import IllConditionedError, InvalidArgumentError, NumericError
from .kernels import KernelFamily, KernelSpec, RFMap, approx_kernel, exact_kernel, feature_map, sample_frequencies
from .exact import TrajectoryBatch, batch_posterior, batch_predict, batch_predict_rf
from .posterior import OSGPTD, PosteriorState, TransitionFeatures, gradient_form_step, init, predict, update
from .ensemble import OSEGPTD, EnsembleState, ensemble_predict, init_ensemble, step
from .environments import (PuddleWorldConfig, RandomWalkConfig, Trajectory, gen_puddle_world,
                           gen_random_walk)
from .config import ConfigError, ExperimentConfig, load_config, parse_config

__version__ = "0.1.0"

__all__ = [
    "IllConditionedError", "InvalidArgumentError", "NumericError",
    "KernelFamily", "KernelSpec", "RFMap", "approx_kernel", "exact_kernel", "feature_map",
    "sample_frequencies", "TrajectoryBatch", "batch_posterior", "batch_predict", "batch_predict_rf",
    "OSGPTD", "PosteriorState", "TransitionFeatures", "gradient_form_step", "init", "predict", "update",
    "OSEGPTD", "EnsembleState", "ensemble_predict", "init_ensemble", "step",
    "PuddleWorldConfig", "RandomWalkConfig", "Trajectory", "gen_puddle_world", "gen_random_walk",
    "ConfigError", "ExperimentConfig", "load_config", "parse_config",
]
