"""Model and event containers for linear diffusions with Poisson-sampled output.

The state process is the linear SDE ``dx = A x dt + G dw`` observed at the
arrival times of a Poisson counter through ``y = C x + v`` with
``v ~ N(0, V)``.  :class:`LinearGaussianModel` carries the system matrices and
the Gaussian initial law; :class:`PoissonClock` carries one realized set of
sampling times; :class:`StateTrajectory` holds one simulated path together
with its :class:`ObservationEvent` list.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LinearGaussianModel",
    "PoissonClock",
    "ObservationEvent",
    "StateTrajectory",
]

logger = logging.getLogger(__name__)

_SYM_TOL = 1e-10


def _as_matrix(x, name) -> np.ndarray:
    a = np.atleast_2d(np.asarray(x, dtype=float))
    if a.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got shape {a.shape}")
    return a


def _check_symmetric(a, name):
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if np.max(np.abs(a - a.T), initial=0.0) > _SYM_TOL * max(1.0, np.max(np.abs(a), initial=0.0)):
        raise ValueError(f"{name} must be symmetric")


@dataclass(eq=False)
class LinearGaussianModel:
    """System matrices and initial distribution of the linear diffusion.

    Parameters
    ----------
    A : (n, n) array
        Drift matrix.
    G : (n, m) array
        Diffusion input matrix.
    C : (p, n) array
        Observation map.
    V : (p, p) array
        Measurement noise covariance; must be symmetric positive definite so
        that ``C P C' + V`` is always invertible.
    x0_mean : (n,) array
        Mean of the Gaussian initial state.
    x0_cov : (n, n) array
        Covariance of the initial state; symmetric positive semidefinite
        (zero is allowed, giving a deterministic start).
    """

    A: np.ndarray
    G: np.ndarray
    C: np.ndarray
    V: np.ndarray
    x0_mean: np.ndarray
    x0_cov: np.ndarray

    def __post_init__(self):
        self.A = _as_matrix(self.A, "A")
        self.G = _as_matrix(self.G, "G")
        self.C = _as_matrix(self.C, "C")
        self.V = _as_matrix(self.V, "V")
        self.x0_mean = np.atleast_1d(np.asarray(self.x0_mean, dtype=float))
        self.x0_cov = _as_matrix(self.x0_cov, "x0_cov")

        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got shape {self.A.shape}")
        if self.G.shape[0] != n:
            raise ValueError(f"G has {self.G.shape[0]} rows, expected {n}")
        if self.C.shape[1] != n:
            raise ValueError(f"C has {self.C.shape[1]} columns, expected {n}")
        p = self.C.shape[0]
        if self.V.shape != (p, p):
            raise ValueError(f"V has shape {self.V.shape}, expected ({p}, {p})")
        if self.x0_mean.shape != (n,):
            raise ValueError(f"x0_mean has shape {self.x0_mean.shape}, expected ({n},)")
        if self.x0_cov.shape != (n, n):
            raise ValueError(f"x0_cov has shape {self.x0_cov.shape}, expected ({n}, {n})")

        _check_symmetric(self.V, "V")
        _check_symmetric(self.x0_cov, "x0_cov")
        if np.min(np.linalg.eigvalsh(self.V)) <= 0:
            raise ValueError("V must be positive definite")
        if np.min(np.linalg.eigvalsh(self.x0_cov)) < -_SYM_TOL:
            raise ValueError("x0_cov must be positive semidefinite")

        if not self._controllable():
            logger.warning("(A, G) is not controllable; covariance may become singular")

    def _controllable(self) -> bool:
        n = self.n
        blocks = [self.G]
        for _ in range(n - 1):
            blocks.append(self.A @ blocks[-1])
        ctrb = np.hstack(blocks)
        return np.linalg.matrix_rank(ctrb) == n

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.G.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @classmethod
    def scalar(cls, A: float, G: float, C: float, V: float, x0_mean: float = 0.0, P0: float = 1.0):
        """Convenience constructor for one-dimensional systems."""
        return cls(A=[[A]], G=[[G]], C=[[C]], V=[[V]], x0_mean=[x0_mean], x0_cov=[[P0]])


@dataclass(eq=False)
class PoissonClock:
    """Realized sampling times of a Poisson counter on ``[0, horizon]``.

    ``jump_times`` must be strictly increasing and contained in
    ``(0, horizon]``; ``lam`` is the intensity that generated them.
    """

    lam: float
    horizon: float
    jump_times: np.ndarray

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.horizon < 0:
            raise ValueError(f"horizon must be nonnegative, got {self.horizon}")
        self.jump_times = np.atleast_1d(np.asarray(self.jump_times, dtype=float))
        if self.jump_times.size:
            if np.any(np.diff(self.jump_times) <= 0):
                raise ValueError("jump_times must be strictly increasing")
            if self.jump_times[0] <= 0 or self.jump_times[-1] > self.horizon:
                raise ValueError("jump_times must lie in (0, horizon]")

    @property
    def n_events(self) -> int:
        return int(self.jump_times.size)

    def count_at(self, t: float) -> int:
        """Counter value N_t = number of jump times <= t."""
        return int(np.searchsorted(self.jump_times, t, side="right"))


@dataclass(eq=False)
class ObservationEvent:
    """One sampled measurement: ``y = C x(time) + measurement_noise``.

    The realized noise draw is retained so a comparison run can be replayed
    and audited exactly.
    """

    time: float
    y: np.ndarray
    measurement_noise: np.ndarray

    def __post_init__(self):
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        self.measurement_noise = np.atleast_1d(np.asarray(self.measurement_noise, dtype=float))


@dataclass(eq=False)
class StateTrajectory:
    """A simulated state path on an event-aligned grid.

    ``grid`` contains every clock jump time exactly once; ``states[k]`` is the
    state at ``grid[k]``; ``events`` are in increasing time order, one per
    jump time.
    """

    grid: np.ndarray
    states: np.ndarray
    events: list = field(default_factory=list)

    def state_at(self, t: float) -> np.ndarray:
        k = int(np.searchsorted(self.grid, t))
        if k >= len(self.grid) or self.grid[k] != t:
            raise ValueError(f"time {t} is not a grid point")
        return self.states[k]
