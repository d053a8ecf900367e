"""Optimal continuous-discrete filter and its mean-field reference process.

The filter propagates the conditional mean and covariance of the linear
diffusion between sampling times (exact Lyapunov flow) and applies the
Kalman correction at every clock arrival:

    mean+ = mean + K (y - C mean),      K = P C' (C P C' + V)^{-1}
    cov+  = cov - K C cov

The mean-field reference is a single auxiliary diffusion driven by fresh
copies of the process and measurement noises whose jump gain is coupled
through the optimal covariance; its conditional mean and covariance satisfy
the same recursions as the optimal pair, which is what the ensemble filter
approximates with finitely many particles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .models import LinearGaussianModel, ObservationEvent, PoissonClock
from .rng import RngStream
from .sde import OUTransition, build_grid, psd_sqrt

__all__ = [
    "FilterState",
    "MeanFieldState",
    "OptimalFilter",
    "kalman_gain",
    "run_optimal",
    "run_mean_field",
]

logger = logging.getLogger(__name__)

_ASYM_WARN = 1e-12


def _symmetrize(P: np.ndarray, where: str) -> np.ndarray:
    drift = np.max(np.abs(P - P.T), initial=0.0)
    if drift > _ASYM_WARN * max(1.0, np.max(np.abs(P), initial=0.0)):
        logger.warning("covariance asymmetry %.3e after %s", drift, where)
    return 0.5 * (P + P.T)


def kalman_gain(cov: np.ndarray, C: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Gain ``cov C' (C cov C' + V)^{-1}`` via an SPD solve, never an inverse."""
    S = C @ cov @ C.T + V
    if S.shape == (1, 1):
        return (C @ cov).T / S[0, 0]
    return cho_solve(cho_factor(0.5 * (S + S.T)), C @ cov).T


@dataclass(eq=False)
class FilterState:
    """Posterior mean and covariance of the optimal filter at time t."""

    t: float
    mean: np.ndarray
    cov: np.ndarray


@dataclass(eq=False)
class MeanFieldState:
    """Mean-field sample S with its conditional mean and covariance.

    ``Q`` equals the optimal covariance (the two satisfy identical
    recursions when initialized alike), and ``S_hat`` the optimal mean.
    """

    t: float
    S: np.ndarray
    S_hat: np.ndarray
    Q: np.ndarray


class OptimalFilter:
    """Stateless predict/update engine bound to one model.

    Methods return new :class:`FilterState` values; instances hold only the
    model and a transition cache, so many filters can run concurrently.
    """

    def __init__(self, model: LinearGaussianModel):
        self.model = model
        self.trans = OUTransition(model)

    def initial_state(self) -> FilterState:
        return FilterState(t=0.0, mean=self.model.x0_mean.copy(), cov=self.model.x0_cov.copy())

    def predict(self, state: FilterState, dt: float) -> FilterState:
        """Exact flow of mean and covariance over an event-free interval."""
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        Phi, Sigma = self.trans.factors(dt)
        mean = Phi @ state.mean
        cov = _symmetrize(Phi @ state.cov @ Phi.T + Sigma, "predict")
        return FilterState(t=state.t + dt, mean=mean, cov=cov)

    def update(self, state: FilterState, event: ObservationEvent) -> FilterState:
        """Kalman correction at a sampling time; contracts the covariance."""
        if event.y.shape != (self.model.p,):
            raise ValueError(f"observation has shape {event.y.shape}, expected ({self.model.p},)")
        if abs(event.time - state.t) > 1e-9:
            raise ValueError(f"event time {event.time} does not match state time {state.t}")
        K = kalman_gain(state.cov, self.model.C, self.model.V)
        mean = state.mean + K @ (event.y - self.model.C @ state.mean)
        cov = _symmetrize(state.cov - K @ self.model.C @ state.cov, "update")
        return FilterState(t=state.t, mean=mean, cov=cov)


def _check_events(clock: PoissonClock, events) -> None:
    times = np.array([e.time for e in events], dtype=float)
    if times.size != clock.jump_times.size or not np.array_equal(times, clock.jump_times):
        raise ValueError("events are inconsistent with the clock jump times")


def run_optimal(
    model: LinearGaussianModel,
    clock: PoissonClock,
    events,
    grid_dt: float,
) -> list[FilterState]:
    """Run the optimal filter over the event-aligned grid.

    Returns one :class:`FilterState` per grid point; at jump times the
    recorded value is the post-update state.
    """
    _check_events(clock, events)
    flt = OptimalFilter(model)
    grid = build_grid(clock.horizon, grid_dt, clock.jump_times)
    state = flt.initial_state()
    out = [state]
    ev = 0
    for k in range(1, len(grid)):
        dt = grid[k] - grid[k - 1]
        if dt > 0:
            state = flt.predict(state, dt)
        if ev < len(events) and events[ev].time == grid[k]:
            state = flt.update(state, events[ev])
            ev += 1
        out.append(state)
    return out


def run_mean_field(
    model: LinearGaussianModel,
    clock: PoissonClock,
    events,
    optimal: list[FilterState],
    grid_dt: float,
    rng: RngStream,
) -> list[MeanFieldState]:
    """Simulate the mean-field reference on the same grid as ``optimal``.

    The sample S is propagated exactly with an independent process-noise
    copy; at each jump it receives the shared observation perturbed by a
    fresh measurement-noise copy, with gain computed from the pre-update
    optimal covariance (the coupling covariance Q is taken equal to P).
    """
    _check_events(clock, events)
    grid = build_grid(clock.horizon, grid_dt, clock.jump_times)
    if len(optimal) != len(grid):
        raise ValueError("optimal states do not cover the event-aligned grid")
    trans = OUTransition(model)
    gen = rng.generator
    Lv = np.linalg.cholesky(model.V)
    L0 = psd_sqrt(model.x0_cov)

    S = model.x0_mean + L0 @ gen.standard_normal(model.n)
    out = [MeanFieldState(t=0.0, S=S, S_hat=optimal[0].mean, Q=optimal[0].cov)]
    ev = 0
    for k in range(1, len(grid)):
        dt = grid[k] - grid[k - 1]
        if dt > 0:
            Phi, _ = trans.factors(dt)
            S = Phi @ S + trans.sqrt_factor(dt) @ gen.standard_normal(model.n)
        if ev < len(events) and events[ev].time == grid[k]:
            # gain from the pre-update covariance, reconstructed exactly
            if dt > 0:
                Phi, Sigma = trans.factors(dt)
                Q_pre = Phi @ optimal[k - 1].cov @ Phi.T + Sigma
            else:
                Q_pre = optimal[k - 1].cov
            K = kalman_gain(0.5 * (Q_pre + Q_pre.T), model.C, model.V)
            nu = Lv @ gen.standard_normal(model.p)
            S = S + K @ (events[ev].y - model.C @ S - nu)
            ev += 1
        out.append(MeanFieldState(t=grid[k], S=S, S_hat=optimal[k].mean, Q=optimal[k].cov))
    return out
