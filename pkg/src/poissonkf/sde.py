"""Exact simulation of the linear state process and its sampling clock.

Between sampling times the linear SDE ``dx = A x dt + G dw`` has an exact
one-step transition ``x' = Phi x + w`` with ``Phi = expm(A dt)`` and
``w ~ N(0, Sigma(dt))``, ``Sigma(dt) = int_0^dt expm(A s) G G' expm(A' s) ds``.
``Sigma`` is computed with the block matrix-exponential construction
(:func:`ou_transition`), so simulation carries no time-discretization error:
the grid spacing only controls where the path is recorded.  Clock jump times
are inserted into the grid exactly, which keeps measurement updates at their
true arrival times.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .models import LinearGaussianModel, ObservationEvent, PoissonClock, StateTrajectory
from .rng import Role, RngStream

__all__ = [
    "sample_clock",
    "build_grid",
    "ou_transition",
    "OUTransition",
    "exact_ou_step",
    "euler_maruyama_step",
    "simulate_state",
    "psd_sqrt",
]


def psd_sqrt(S: np.ndarray) -> np.ndarray:
    """Factor L with L L' = S for symmetric positive semidefinite S."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape == (1, 1):
        return np.sqrt(np.maximum(S, 0.0))
    if not S.any():
        return np.zeros_like(S)
    w, U = np.linalg.eigh(S)
    w = np.clip(w, 0.0, None)
    return U * np.sqrt(w)


def ou_transition(A: np.ndarray, GGT: np.ndarray, dt: float):
    """Exact transition pair ``(Phi, Sigma)`` for the linear SDE over dt.

    Uses the closed scalar form for 1-d systems and the augmented
    block-matrix exponential otherwise.
    """
    n = A.shape[0]
    if n == 1:
        a = A[0, 0]
        g2 = GGT[0, 0]
        phi = np.exp(a * dt)
        if a == 0.0:
            sig = g2 * dt
        else:
            sig = g2 * np.expm1(2.0 * a * dt) / (2.0 * a)
        return np.array([[phi]]), np.array([[sig]])
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = -A
    M[:n, n:] = GGT
    M[n:, n:] = A.T
    E = expm(M * dt)
    Phi = E[n:, n:].T
    Sigma = Phi @ E[:n, n:]
    return Phi, 0.5 * (Sigma + Sigma.T)


class OUTransition:
    """Per-model cache of exact transition factors keyed by step size.

    Event-aligned grids reuse a handful of distinct spacings, so caching
    avoids recomputing matrix exponentials; the noise factor is computed
    lazily because covariance propagation never samples.
    """

    def __init__(self, model: LinearGaussianModel):
        self.model = model
        self._ggt = model.G @ model.G.T
        self._cache: dict[float, tuple] = {}
        self._sqrt: dict[float, np.ndarray] = {}

    def factors(self, dt: float):
        """Return ``(Phi, Sigma)`` for step dt."""
        hit = self._cache.get(dt)
        if hit is None:
            hit = ou_transition(self.model.A, self._ggt, dt)
            self._cache[dt] = hit
        return hit

    def sqrt_factor(self, dt: float) -> np.ndarray:
        """Factor L with ``L L' = Sigma(dt)``, for sampling."""
        L = self._sqrt.get(dt)
        if L is None:
            L = psd_sqrt(self.factors(dt)[1])
            self._sqrt[dt] = L
        return L


def sample_clock(lam: float, horizon: float, rng: RngStream) -> PoissonClock:
    """Draw one Poisson clock of intensity ``lam`` on ``[0, horizon]``.

    Jump times are cumulative sums of i.i.d. Exponential(lam) inter-arrival
    draws truncated at the horizon, so the event count is Poisson with mean
    ``lam * horizon``.  A zero horizon yields an empty clock.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    gen = rng.generator
    times = []
    t = 0.0
    chunk = max(16, int(lam * horizon + 6.0 * np.sqrt(lam * horizon + 1.0)))
    while t <= horizon:
        gaps = gen.exponential(scale=1.0 / lam, size=chunk)
        arr = t + np.cumsum(gaps)
        inside = arr[arr <= horizon]
        times.append(inside)
        if inside.size < arr.size:
            break
        t = arr[-1]
        chunk = 32
    jump_times = np.concatenate(times) if times else np.empty(0)
    return PoissonClock(lam=lam, horizon=horizon, jump_times=jump_times)


def build_grid(horizon: float, grid_dt: float, jump_times=None) -> np.ndarray:
    """Uniform grid of spacing <= grid_dt with every jump time inserted."""
    if grid_dt <= 0:
        raise ValueError(f"grid_dt must be positive, got {grid_dt}")
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    n_steps = max(1, int(np.ceil(horizon / grid_dt - 1e-12)))
    grid = np.linspace(0.0, horizon, n_steps + 1)
    if jump_times is not None and len(jump_times):
        grid = np.union1d(grid, np.asarray(jump_times, dtype=float))
    return grid


def exact_ou_step(model: LinearGaussianModel, x, dt: float, rng: RngStream, trans: OUTransition | None = None):
    """Advance the state by dt with the exact one-step distribution."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if trans is None:
        trans = OUTransition(model)
    Phi, _ = trans.factors(dt)
    L = trans.sqrt_factor(dt)
    x = np.asarray(x, dtype=float)
    return Phi @ x + L @ rng.generator.standard_normal(model.n)


def euler_maruyama_step(model: LinearGaussianModel, x, dt: float, rng: RngStream):
    """One Euler-Maruyama step ``x + A x dt + G sqrt(dt) xi``.

    Kept as an order-1 cross-check of :func:`exact_ou_step`; the library
    itself always steps exactly.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    xi = rng.generator.standard_normal(model.m)
    return x + model.A @ x * dt + model.G @ xi * np.sqrt(dt)


def simulate_state(
    model: LinearGaussianModel,
    clock: PoissonClock,
    grid_dt: float,
    rng: RngStream,
) -> StateTrajectory:
    """Simulate one state path and its noisy observations at the clock times.

    The initial state is drawn from ``N(x0_mean, x0_cov)`` using ``rng``
    (state-noise role); measurement noises come from the sibling stream with
    ``Role.MEASUREMENT_NOISE``, so the observed world is unchanged by how the
    state path is consumed downstream.
    """
    grid = build_grid(clock.horizon, grid_dt, clock.jump_times)
    meas_rng = rng.sibling(Role.MEASUREMENT_NOISE)
    trans = OUTransition(model)
    L0 = psd_sqrt(model.x0_cov)
    Lv = np.linalg.cholesky(model.V)

    x = model.x0_mean + L0 @ rng.generator.standard_normal(model.n)
    states = np.empty((len(grid), model.n))
    states[0] = x
    events: list[ObservationEvent] = []
    jump_set = set(clock.jump_times.tolist())

    for k in range(1, len(grid)):
        dt = grid[k] - grid[k - 1]
        if dt > 0:
            x = exact_ou_step(model, x, dt, rng, trans)
        states[k] = x
        if grid[k] in jump_set:
            nu = Lv @ meas_rng.generator.standard_normal(model.p)
            events.append(ObservationEvent(time=grid[k], y=model.C @ x + nu, measurement_noise=nu))

    return StateTrajectory(grid=grid, states=states, events=events)
