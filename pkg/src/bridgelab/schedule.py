"""Variance-exploding noise schedule and closed-form bridge coefficients.

The forward process has zero drift and diffusion g^2(t) = c * k^(2t), so the
accumulated variance has the closed form

    sigma2(t) = c * (k^(2t) - 1) / (2 * ln k),

where the natural logarithm is the only base for which
d(sigma2)/dt = g^2(t).  With zero drift, alpha_t = bar_alpha_t = 1, and the
pinned Gaussian marginal between endpoints x0 (clean) and x1 (measurement)
has mean weights

    w_x0 = bar_sigma2_t / sigma2_1,     w_x1 = sigma2_t / sigma2_1,

with bar_sigma2_t = sigma2_1 - sigma2_t, and variance

    var_marginal = sigma2_t * bar_sigma2_t / sigma2_1.

The variance uses squared quantities throughout; this is the only convention
consistent with the one-step SDE sampler (see tests for the composition
check that discriminates it).
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class NoiseSchedule:
    """Constants of the variance-exploding schedule.

    c: diffusion scale, > 0.
    k: exponential base, > 1.
    t_eps: minimal process time used during training/sampling, in (0, 1).
    """

    c: float = 0.40
    k: float = 2.6
    t_eps: float = 1e-4

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.k > 1:
            raise ValueError(f"k must exceed 1, got {self.k}")
        if not 0 < self.t_eps < 1:
            raise ValueError(f"t_eps must lie in (0, 1), got {self.t_eps}")

    def sigma2(self, t: float) -> float:
        """Accumulated variance sigma2(t) = c (k^(2t) - 1) / (2 ln k).

        Strictly increasing on [0, 1] with sigma2(0) = 0.
        """
        _check_time(t)
        return self.c * (self.k ** (2.0 * t) - 1.0) / (2.0 * math.log(self.k))

    @property
    def sigma2_1(self) -> float:
        """Total variance at the measurement end, sigma2(1)."""
        return self.c * (self.k**2 - 1.0) / (2.0 * math.log(self.k))

    def coefficients(self, t: float) -> "BridgeCoefficients":
        """All marginal coefficients of the pinned bridge at time t."""
        _check_time(t)
        s2_t = self.sigma2(t)
        s2_1 = self.sigma2_1
        bar_s2_t = s2_1 - s2_t
        return BridgeCoefficients(
            t=t,
            alpha_t=1.0,
            bar_alpha_t=1.0,
            sigma2_t=s2_t,
            bar_sigma2_t=bar_s2_t,
            sigma2_1=s2_1,
            w_x0=bar_s2_t / s2_1,
            w_x1=s2_t / s2_1,
            var_marginal=s2_t * bar_s2_t / s2_1,
        )


@dataclass(frozen=True)
class BridgeCoefficients:
    """Marginal mean weights and variance of the pinned bridge at one time."""

    t: float
    alpha_t: float
    bar_alpha_t: float
    sigma2_t: float
    bar_sigma2_t: float
    sigma2_1: float
    w_x0: float
    w_x1: float
    var_marginal: float


def _check_time(t: float) -> None:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"time must lie in [0, 1], got {t}")
