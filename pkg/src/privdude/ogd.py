"""Projected online gradient steps over the dual box and regret measurement.

The dual player receives a loss vector ``l_t`` each round and moves toward it,
``lam <- clip(lam + eta * l_t, 0, box_hi)``. Its payoff in round ``t`` is
``<lam_t, l_t>``, so regret compares the realized payoff to the best fixed
point of the box in hindsight.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .privacy import TAIL_CONSTANT


@dataclass(frozen=True)
class OgdConfig:
    eta: float
    box_hi: float
    k: int
    X: float
    T: int

    def __post_init__(self):
        if not self.eta > 0:
            raise ParameterError(f"eta must be positive, got {self.eta}")
        if not self.box_hi > 0:
            raise ParameterError(f"box_hi must be positive, got {self.box_hi}")
        if self.k < 1 or self.T < 1:
            raise ParameterError("k and T must be at least 1")

    @property
    def diameter(self) -> float:
        """Euclidean diameter bound of the dual box."""
        return self.box_hi * math.sqrt(self.k)


@dataclass(frozen=True)
class OgdHistory:
    """Rows are rounds: ``iterates[t]`` is the point played against ``losses[t]``."""

    iterates: np.ndarray
    losses: np.ndarray
    noisy_losses: np.ndarray
    box_hi: float

    @property
    def T(self) -> int:
        return len(self.iterates)


def project_box(lam, box_hi: float) -> np.ndarray:
    return np.clip(np.asarray(lam, dtype=float), 0.0, box_hi)


def step(lam, noisy_loss, config: OgdConfig) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    noisy_loss = np.asarray(noisy_loss, dtype=float)
    if lam.shape != (config.k,) or noisy_loss.shape != (config.k,):
        raise DimensionError(f"expected length {config.k}, got {lam.shape} and {noisy_loss.shape}")
    return project_box(lam + config.eta * noisy_loss, config.box_hi)


def run_ogd(losses, config: OgdConfig, noise_std: float = 0.0,
            rng: np.random.Generator | None = None) -> OgdHistory:
    """Play ``config.T`` rounds starting from zero.

    ``losses`` is either a ``(T, k)`` array or a callable ``(t, lam) -> loss``
    for adaptive adversaries.
    """
    k, T = config.k, config.T
    if noise_std < 0:
        raise ParameterError(f"noise_std must be nonnegative, got {noise_std}")
    if noise_std > 0 and rng is None:
        raise ParameterError("a noisy run needs an rng")
    adaptive = callable(losses)
    if not adaptive:
        losses = np.asarray(losses, dtype=float)
        if losses.shape != (T, k):
            raise DimensionError(f"losses must have shape {(T, k)}, got {losses.shape}")
    iterates = np.empty((T, k))
    true = np.empty((T, k))
    noisy = np.empty((T, k))
    noise = rng.standard_normal((T, k)) * noise_std if noise_std > 0 else np.zeros((T, k))
    lam = np.zeros(k)
    for t in range(T):
        iterates[t] = lam
        true[t] = losses(t, lam.copy()) if adaptive else losses[t]
        noisy[t] = true[t] + noise[t]
        lam = np.clip(lam + config.eta * noisy[t], 0.0, config.box_hi)
    return OgdHistory(iterates, true, noisy, config.box_hi)


def empirical_regret(history: OgdHistory) -> float:
    """Average regret against the best fixed box point, on the true losses."""
    if history.T == 0:
        raise ParameterError("empty history")
    mean_loss = history.losses.mean(axis=0)
    # The best fixed point sits at a corner: box_hi where the summed loss is positive.
    best = history.box_hi * np.clip(mean_loss, 0.0, None).sum()
    realized = np.einsum("tk,tk->", history.iterates, history.losses) / history.T
    return float(best - realized)


def _noisy_magnitude(config: OgdConfig, noise_std: float, beta: float, factor: float) -> float:
    if noise_std == 0:
        return config.X
    if not 0 < beta < 1:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    tail = math.sqrt(math.log(2.0 * config.T * config.k / beta) / TAIL_CONSTANT)
    return config.X + factor * noise_std * tail


def regret_bound(config: OgdConfig, noise_std: float, beta: float) -> float:
    """High-probability average regret bound for noisy losses with per-coordinate
    magnitude ``X`` and Gaussian noise of standard deviation ``noise_std``."""
    scale = config.diameter * math.sqrt(config.k) / math.sqrt(config.T)
    return scale * _noisy_magnitude(config, noise_std, beta, 2.0)


def theorem_step_size(config: OgdConfig, noise_std: float, beta: float) -> float:
    """Step size that balances the two regret terms for noisy losses."""
    norm = math.sqrt(config.k) * _noisy_magnitude(config, noise_std, beta, 1.0)
    return config.diameter / (math.sqrt(config.T) * norm)


def zinkevich_bound(config: OgdConfig) -> float:
    """Noiseless average regret bound for losses with ``|l_j| <= X``."""
    x_norm = config.X * math.sqrt(config.k)
    return config.diameter ** 2 / (2.0 * config.eta * config.T) + config.eta * x_norm ** 2 / 2.0


__all__ = [
    "OgdConfig", "OgdHistory", "project_box", "step", "run_ogd",
    "empirical_regret", "regret_bound", "theorem_step_size", "zinkevich_bound",
]
