"""Variance-exploding Gaussian bridge diffusion on synthetic inverse problems."""

from .bridge import (
    BridgeState,
    TrainingPair,
    perturbation_weight,
    perturbed_state,
    perturbed_target,
    sample_marginal,
)
from .metrics import EvalReport, energy_distance, mse, per_step_errors, perception_distance, si_sdr
from .model import (
    AdamState,
    EmaState,
    MlpSpec,
    ModelParameters,
    adam_update,
    ema_update,
    forward,
    init_adam,
    init_ema,
    init_params,
    load_checkpoint,
    loss_and_gradients,
    save_checkpoint,
)
from .sampler import SamplerConfig, SamplerKind, Trajectory, ode_step, sample_trajectory, sde_step
from .schedule import BridgeCoefficients, NoiseSchedule
from .seeding import named_stream
from .tasks import LinearGaussianTask, MixtureTask
from .training import (
    ConditioningStrategy,
    DivergenceError,
    TrainConfig,
    TrainingStrategy,
    train,
    train_predictor,
    training_step,
)

__version__ = "0.1.0"
