"""First-order reverse samplers for the variance-exploding bridge.

Both samplers walk a descending uniform time grid from 1 to t_min, call a
data predictor at each step, and define the solution as the prediction made
at the last step (the remaining noise scale at t_min is negligible).

The SDE step is

    x_t = r x_tau + (1 - r) x0_hat + sigma_t sqrt(1 - r) z,   r = sigma2_t / sigma2_tau,

which reproduces the bridge marginal exactly when x0_hat is the true clean
endpoint (the composition test in the suite pins this).  The deterministic
ODE step is the mean-consistent first-order form

    x_t = (sigma_t sbar_t)/(sigma_tau sbar_tau) x_tau
        + [sbar2_t - sbar_tau sbar_t sigma_t / sigma_tau] / sigma2_1 * x0_hat
        + [sigma2_t - sigma_tau sigma_t sbar_t / sbar_tau] / sigma2_1 * x1,

with sbar the complementary standard deviation; from tau = 1 (where sbar
vanishes) the step degenerates to the marginal-mean limit form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .bridge import BridgeState
from .schedule import NoiseSchedule


class SamplerKind(Enum):
    SDE = "SDE"
    ODE = "ODE"


@dataclass(frozen=True)
class SamplerConfig:
    """Step count, sampler family, and time grid of one reverse pass."""

    n_steps: int = 50
    kind: SamplerKind = SamplerKind.SDE
    t_min: float | None = None  # defaults to the schedule's t_eps
    grid: str = "uniform"

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.t_min is not None and not 0.0 < self.t_min < 1.0:
            raise ValueError(f"t_min must lie in (0, 1), got {self.t_min}")
        if self.grid != "uniform":
            raise ValueError(f"unknown grid {self.grid!r}")

    def times(self, schedule: NoiseSchedule) -> np.ndarray:
        """Descending grid from 1 to the effective t_min, n_steps + 1 points."""
        t_min = self.t_min if self.t_min is not None else schedule.t_eps
        return np.linspace(1.0, t_min, self.n_steps + 1)


@dataclass
class Trajectory:
    """States visited and predictions made along one reverse pass."""

    states: list[BridgeState] = field(default_factory=list)
    predictions: list[np.ndarray] = field(default_factory=list)
    final: np.ndarray | None = None


# Predictor signature: (state, t, condition) -> clean-data estimate.
Predictor = Callable[[np.ndarray, float, np.ndarray], np.ndarray]


def sde_step(
    x_tau: np.ndarray,
    tau: float,
    t: float,
    x0_hat: np.ndarray,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
) -> np.ndarray:
    """One stochastic step from time tau down to time t."""
    if not t < tau:
        raise ValueError(f"step requires t < tau, got t={t}, tau={tau}")
    s2_tau = schedule.sigma2(tau)
    if s2_tau == 0.0:
        raise ZeroDivisionError("sde_step from tau = 0 (sigma2 vanishes)")
    s2_t = schedule.sigma2(t)
    r = s2_t / s2_tau
    noise_std = math.sqrt(s2_t * (1.0 - r))
    z = rng.standard_normal(np.shape(x_tau))
    return r * np.asarray(x_tau, dtype=float) + (1.0 - r) * np.asarray(x0_hat, dtype=float) + noise_std * z


def ode_step(
    x_tau: np.ndarray,
    tau: float,
    t: float,
    x0_hat: np.ndarray,
    x1: np.ndarray,
    schedule: NoiseSchedule,
) -> np.ndarray:
    """One deterministic step from time tau down to time t."""
    if not t < tau:
        raise ValueError(f"step requires t < tau, got t={t}, tau={tau}")
    s2_1 = schedule.sigma2_1
    s2_t = schedule.sigma2(t)
    s2_tau = schedule.sigma2(tau)
    sb2_t = s2_1 - s2_t
    sb2_tau = s2_1 - s2_tau

    x_tau = np.asarray(x_tau, dtype=float)
    x0_hat = np.asarray(x0_hat, dtype=float)
    x1 = np.asarray(x1, dtype=float)

    if sb2_tau <= 0.0:
        # From tau = 1 the carry-over coefficient is 0/0; the limit is the
        # marginal mean between x0_hat and x1.
        return (sb2_t / s2_1) * x0_hat + (s2_t / s2_1) * x1

    s_t, s_tau = math.sqrt(s2_t), math.sqrt(s2_tau)
    sb_t, sb_tau = math.sqrt(sb2_t), math.sqrt(sb2_tau)
    c_carry = (s_t * sb_t) / (s_tau * sb_tau)
    c_clean = (sb2_t - sb_tau * sb_t * s_t / s_tau) / s2_1
    c_meas = (s2_t - s_tau * s_t * sb_t / sb_tau) / s2_1
    return c_carry * x_tau + c_clean * x0_hat + c_meas * x1


def sample_trajectory_batch(
    predictor: Predictor,
    starts: np.ndarray,
    conditions: np.ndarray,
    config: SamplerConfig,
    schedule: NoiseSchedule,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run reverse passes for a whole batch at once.

    starts and conditions are (B, d).  Returns (times, states, predictions)
    with states (n_steps + 1, B, d) and predictions (n_steps, B, d); the
    solution batch is predictions[-1].
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    conditions = np.atleast_2d(np.asarray(conditions, dtype=float))
    if starts.shape != conditions.shape:
        raise ValueError(f"starts/conditions shape mismatch: {starts.shape} vs {conditions.shape}")
    if config.kind is SamplerKind.SDE and rng is None:
        raise ValueError("SDE sampling needs a random stream")

    times = config.times(schedule)
    states = np.empty((len(times),) + starts.shape)
    preds = np.empty((config.n_steps,) + starts.shape)
    x = starts.copy()
    states[0] = x
    for i in range(config.n_steps):
        tau, t = times[i], times[i + 1]
        x0_hat = np.asarray(predictor(x, float(tau), conditions), dtype=float)
        if x0_hat.shape != x.shape:
            raise ValueError(f"predictor returned shape {x0_hat.shape}, expected {x.shape}")
        preds[i] = x0_hat
        if config.kind is SamplerKind.SDE:
            x = sde_step(x, float(tau), float(t), x0_hat, schedule, rng)
        else:
            x = ode_step(x, float(tau), float(t), x0_hat, starts, schedule)
        states[i + 1] = x
    return times, states, preds


def sample_trajectory(
    predictor: Predictor,
    y: np.ndarray,
    condition: np.ndarray,
    config: SamplerConfig,
    schedule: NoiseSchedule,
    init: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> Trajectory:
    """Reverse pass for a single measurement vector.

    Starts at init if given (else y), records every prediction, and defines
    the final solution as the last prediction.
    """
    y = np.asarray(y, dtype=float)
    start = y if init is None else np.asarray(init, dtype=float)
    if start.shape != y.shape:
        raise ValueError(f"init shape {start.shape} does not match y shape {y.shape}")
    times, states, preds = sample_trajectory_batch(
        predictor, start[None, :], np.asarray(condition, dtype=float)[None, :], config, schedule, rng
    )
    traj = Trajectory()
    traj.states = [BridgeState(x_t=states[i, 0], t=float(times[i])) for i in range(len(times))]
    traj.predictions = [preds[i, 0] for i in range(config.n_steps)]
    traj.final = preds[-1, 0]
    return traj
