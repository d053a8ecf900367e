"""M-particle ensemble filter with perturbed shared observations.

Each particle follows the state dynamics with its own process noise copy;
at every sampling time all particles receive the same measurement ``y``,
individually perturbed by fresh draws ``nu_l ~ N(0, V)``:

    S_l+ = S_l + K (y - C S_l - nu_l)

with the gain K computed once per jump from the pre-update empirical
covariance.  Empirical statistics use the 1/M normalization and are always
recomputed exactly from the particle array, never updated incrementally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import LinearGaussianModel, ObservationEvent, PoissonClock
from .optimal import kalman_gain
from .rng import RngStream
from .sde import OUTransition, build_grid, psd_sqrt

__all__ = [
    "EnsembleState",
    "init_ensemble",
    "empirical_gain",
    "ensemble_predict",
    "ensemble_update",
    "run_ensemble",
]


@dataclass(eq=False)
class EnsembleState:
    """Particle array with its empirical mean and covariance.

    ``ddof`` selects the covariance normalization 1/(M - ddof); the default
    0 matches the ensemble definition, 1 is the optional Bessel correction.
    """

    t: float
    particles: np.ndarray
    emp_mean: np.ndarray
    emp_cov: np.ndarray
    ddof: int = 0

    @property
    def M(self) -> int:
        return self.particles.shape[0]


def _stats(particles: np.ndarray, ddof: int):
    M = particles.shape[0]
    mean = particles.mean(axis=0)
    d = particles - mean
    cov = d.T @ d / (M - ddof)
    return mean, 0.5 * (cov + cov.T)


def _make_state(t: float, particles: np.ndarray, ddof: int) -> EnsembleState:
    mean, cov = _stats(particles, ddof)
    return EnsembleState(t=t, particles=particles, emp_mean=mean, emp_cov=cov, ddof=ddof)


def init_ensemble(
    model: LinearGaussianModel,
    M: int,
    rng: RngStream,
    bessel_correction: bool = False,
) -> EnsembleState:
    """Draw M particles i.i.d. from the prior ``N(x0_mean, x0_cov)``.

    Particle l draws from ``rng.child(l)``, so enlarging the ensemble never
    changes the noise seen by existing particles.
    """
    if M < 2:
        raise ValueError(f"M must be at least 2 (empirical covariance undefined), got {M}")
    L0 = psd_sqrt(model.x0_cov)
    particles = np.empty((M, model.n))
    for ell in range(M):
        particles[ell] = model.x0_mean + L0 @ rng.child(ell).generator.standard_normal(model.n)
    return _make_state(0.0, particles, 1 if bessel_correction else 0)


def empirical_gain(state: EnsembleState, model: LinearGaussianModel) -> np.ndarray:
    """Gain from the empirical covariance; well posed even when it is singular."""
    return kalman_gain(state.emp_cov, model.C, model.V)


def ensemble_predict(
    state: EnsembleState,
    model: LinearGaussianModel,
    dt: float,
    rng: RngStream,
    trans: OUTransition | None = None,
) -> EnsembleState:
    """Advance every particle exactly by dt with its own noise stream."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if trans is None:
        trans = OUTransition(model)
    Phi, _ = trans.factors(dt)
    L = trans.sqrt_factor(dt)
    M, n = state.particles.shape
    noise = np.empty((M, n))
    for ell in range(M):
        noise[ell] = rng.child(ell).generator.standard_normal(n)
    particles = state.particles @ Phi.T + noise @ L.T
    return _make_state(state.t + dt, particles, state.ddof)


def ensemble_update(
    state: EnsembleState,
    event: ObservationEvent,
    model: LinearGaussianModel,
    rng: RngStream,
) -> EnsembleState:
    """Jump correction with the shared y and per-particle fresh perturbations."""
    if abs(event.time - state.t) > 1e-9:
        raise ValueError(f"event time {event.time} does not match ensemble time {state.t}")
    K = empirical_gain(state, model)  # gain from the pre-update covariance
    Lv = np.linalg.cholesky(model.V)
    M = state.M
    nu = np.empty((M, model.p))
    for ell in range(M):
        nu[ell] = Lv @ rng.child(ell).generator.standard_normal(model.p)
    innovation = event.y - state.particles @ model.C.T - nu
    particles = state.particles + innovation @ K.T
    return _make_state(state.t, particles, state.ddof)


def run_ensemble(
    model: LinearGaussianModel,
    clock: PoissonClock,
    events,
    M: int,
    grid_dt: float,
    rng: RngStream,
    bessel_correction: bool = False,
) -> list[EnsembleState]:
    """Run the ensemble over the event-aligned grid, recording every point."""
    times = np.array([e.time for e in events], dtype=float)
    if times.size != clock.jump_times.size or not np.array_equal(times, clock.jump_times):
        raise ValueError("events are inconsistent with the clock jump times")
    grid = build_grid(clock.horizon, grid_dt, clock.jump_times)
    trans = OUTransition(model)
    state = init_ensemble(model, M, rng, bessel_correction)
    out = [state]
    ev = 0
    for k in range(1, len(grid)):
        dt = grid[k] - grid[k - 1]
        if dt > 0:
            state = ensemble_predict(state, model, dt, rng, trans)
        if ev < len(events) and events[ev].time == grid[k]:
            state = ensemble_update(state, events[ev], model, rng)
            ev += 1
        out.append(state)
    return out
