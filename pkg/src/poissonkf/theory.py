"""Scalar convergence theory: expectation ODEs, feasibility, ultimate bound.

For a scalar system the expected optimal covariance ``P(t) = E[P_t]`` and the
expected empirical covariance ``Q(t) = E[Q^M_t]`` of an M-particle ensemble
satisfy closed ordinary differential equations

    dP/dt = (2A - lam) P + G^2 + lam P phi(P)
    dQ/dt = (2A - lam) Q + G^2 + lam Q phi(Q) - G^2/M + (lam/M) K(Q)^2 V

with ``phi(P) = V / (P C^2 + V)`` and gain ``K(Q) = Q C / (Q C^2 + V)``.
When the mean sampling rate satisfies ``lam > 2A / (1 - gamma_bar^2)`` the
gap ``E = Q - P`` admits the ultimate bound

    limsup |E| <= (G^2 + lam V / C^2) / (M (lam (1 - gamma_bar^2) - 2A))

where ``gamma_bar`` is an explicit uniform bound on phi along both
trajectories.  This module evaluates all of these quantities numerically,
together with the supporting algebraic identity of phi and the covariance
lower bounds behind gamma_bar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "InfeasibleRegimeError",
    "ScalarModel",
    "ExpectationTrajectory",
    "TheoremReport",
    "phi",
    "phi_product_identity_residual",
    "expected_cov_odes",
    "expected_mean_odes",
    "gamma_bar",
    "check_sampling_rate",
    "ultimate_bound",
    "covariance_lower_bounds",
]


class InfeasibleRegimeError(ValueError):
    """Raised when a quantity is requested outside its feasibility regime."""


@dataclass(eq=False)
class ScalarModel:
    """Scalar system and filter parameters used by the theory layer.

    ``G`` and ``C`` must be nonzero (the covariance lower bounds degenerate
    otherwise) and ``V`` positive.  ``Q0M`` defaults to ``P0``: with i.i.d.
    prior initialization ``E[Q^M_0] = (1 - 1/M) P0 <= P0`` and the smaller of
    the two only tightens gamma_bar, so P0 is the conservative default.
    """

    A: float
    G: float
    C: float
    V: float
    lam: float
    M: int
    P0: float = 1.0
    Q0M: float | None = None

    def __post_init__(self):
        if self.G == 0:
            raise ValueError("G must be nonzero")
        if self.C == 0:
            raise ValueError("C must be nonzero")
        if self.V <= 0:
            raise ValueError(f"V must be positive, got {self.V}")
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.M < 2:
            raise ValueError(f"M must be at least 2, got {self.M}")
        if self.P0 <= 0:
            raise ValueError(f"P0 must be positive, got {self.P0}")
        if self.Q0M is None:
            self.Q0M = self.P0
        if self.Q0M <= 0:
            raise ValueError(f"Q0M must be positive, got {self.Q0M}")

    @property
    def G_M(self) -> float:
        """Effective ensemble diffusion coefficient G sqrt(1 - 1/M)."""
        return self.G * math.sqrt(1.0 - 1.0 / self.M)


@dataclass(eq=False)
class ExpectationTrajectory:
    """Expectation ODE solutions sampled on a uniform grid."""

    grid: np.ndarray
    P_cal: np.ndarray
    Q_cal: np.ndarray
    E_cal: np.ndarray
    Xhat_cal: np.ndarray | None = None
    Shat_cal: np.ndarray | None = None
    chi: np.ndarray | None = None


@dataclass(eq=False)
class TheoremReport:
    """Feasibility verdict and ultimate bound for one scalar model.

    ``lambda_min`` is the sampling-rate threshold (zero when A <= 0);
    ``ultimate_bound`` is None when the rate condition fails.  The two
    Appendix-style sufficient inequalities are reported separately:
    ``ineq_noise`` is ``2V(lam-2A)(AV - G_M^2 C^2) < G_M^4 C^4`` and
    ``ineq_rate`` is ``lam > 2A (1 - V^2/((min(P0,Q0M) C^2 + V)^2))^{-1}``.
    """

    gamma_bar: float
    lambda_min: float
    feasible: bool
    ultimate_bound: float | None
    ineq_noise: bool
    ineq_rate: bool

    def as_dict(self) -> dict:
        return {
            "gamma_bar": None if math.isnan(self.gamma_bar) else self.gamma_bar,
            "lambda_min": self.lambda_min,
            "feasible": self.feasible,
            "ultimate_bound": "infeasible" if self.ultimate_bound is None else self.ultimate_bound,
            "ineq_noise": self.ineq_noise,
            "ineq_rate": self.ineq_rate,
        }


def phi(P: float, C: float, V: float) -> float:
    """Innovation attenuation ``V / (P C^2 + V)``, in (0, 1] for P >= 0."""
    if V <= 0:
        raise ValueError(f"V must be positive, got {V}")
    if P < 0:
        raise ValueError(f"P must be nonnegative, got {P}")
    return V / (P * C * C + V)


def phi_product_identity_residual(P1: float, P2: float, C: float, V: float) -> float:
    """|phi(P1) P1 - phi(P2) P2 - phi(P1)(P1 - P2) phi(P2)|.

    In the scalar case the difference is an exact identity, so the residual
    is pure floating-point noise (< 1e-12 relative to max(1, |P1|, |P2|)).
    """
    f1 = phi(P1, C, V)
    f2 = phi(P2, C, V)
    return abs(f1 * P1 - f2 * P2 - f1 * (P1 - P2) * f2)


def _gain(Q: float, C: float, V: float) -> float:
    return Q * C / (Q * C * C + V)


def _cov_rhs(model: ScalarModel, P: float, Q: float):
    A, G, C, V, lam, M = model.A, model.G, model.C, model.V, model.lam, model.M
    g2 = G * G
    dP = (2.0 * A - lam) * P + g2 + lam * P * phi(P, C, V)
    KM = _gain(Q, C, V)
    dQ = (2.0 * A - lam) * Q + g2 + lam * Q * phi(Q, C, V) - g2 / M + (lam / M) * KM * KM * V
    return dP, dQ


def expected_cov_odes(model: ScalarModel, horizon: float, dt: float = 1e-3) -> ExpectationTrajectory:
    """Integrate the expected covariance ODEs with classical RK4.

    Fixed step ``dt``; the grid has ``round(horizon/dt)`` uniform steps and
    the trajectory records every step.
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n_steps = max(1, int(round(horizon / dt)))
    h = horizon / n_steps
    grid = np.linspace(0.0, horizon, n_steps + 1)
    P = np.empty(n_steps + 1)
    Q = np.empty(n_steps + 1)
    P[0], Q[0] = model.P0, model.Q0M
    p, q = model.P0, model.Q0M
    for k in range(n_steps):
        k1p, k1q = _cov_rhs(model, p, q)
        k2p, k2q = _cov_rhs(model, p + 0.5 * h * k1p, q + 0.5 * h * k1q)
        k3p, k3q = _cov_rhs(model, p + 0.5 * h * k2p, q + 0.5 * h * k2q)
        k4p, k4q = _cov_rhs(model, p + h * k3p, q + h * k3q)
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        P[k + 1], Q[k + 1] = p, q
    return ExpectationTrajectory(grid=grid, P_cal=P, Q_cal=Q, E_cal=Q - P)


def expected_mean_odes(
    model: ScalarModel,
    P_cal: np.ndarray,
    Q_cal: np.ndarray,
    x0_mean: float,
    horizon: float,
    dt: float = 1e-3,
    xhat0: float | None = None,
    shat0: float | None = None,
):
    """Integrate the expected-mean ODEs for the optimal and ensemble filters.

    Both means see the expected observation ``E[y_t] = C exp(A t) x0_mean``
    and relax through their respective gains ``K(P)`` and ``K(Q)``:

        dXhat/dt = A Xhat + lam K(P) (E[y] - C Xhat)
        dShat/dt = A Shat + lam K(Q) (E[y] - C Shat)

    ``xhat0``/``shat0`` are the filter-mean initial conditions and default to
    ``x0_mean``.  In that unbiased case both means equal ``exp(A t) x0_mean``
    identically (the gain terms cancel) and ``chi`` vanishes; an offset
    initialization decays at gain-dependent rates, which is what separates
    ensemble sizes.  ``P_cal``/``Q_cal`` must come from
    :func:`expected_cov_odes` on the same (horizon, dt) grid.  Returns
    ``(Xhat_cal, Shat_cal, chi)`` with ``chi = Xhat_cal - Shat_cal``.
    Midpoint covariance values are taken as neighbor averages, accurate to
    the same order as the stored trajectory.
    """
    n_steps = max(1, int(round(horizon / dt)))
    if len(P_cal) != n_steps + 1 or len(Q_cal) != n_steps + 1:
        raise ValueError(
            f"P_cal/Q_cal length {len(P_cal)}/{len(Q_cal)} does not match the grid ({n_steps + 1} points)"
        )
    h = horizon / n_steps
    A, C, lam = model.A, model.C, model.lam
    if xhat0 is None:
        xhat0 = x0_mean
    if shat0 is None:
        shat0 = x0_mean

    def rhs(x, s, t, P, Q):
        ey = C * math.exp(A * t) * x0_mean
        dx = A * x + lam * _gain(P, C, model.V) * (ey - C * x)
        ds = A * s + lam * _gain(Q, C, model.V) * (ey - C * s)
        return dx, ds

    X = np.empty(n_steps + 1)
    S = np.empty(n_steps + 1)
    X[0], S[0] = xhat0, shat0
    x, s = float(xhat0), float(shat0)
    for k in range(n_steps):
        t = k * h
        Pm = 0.5 * (P_cal[k] + P_cal[k + 1])
        Qm = 0.5 * (Q_cal[k] + Q_cal[k + 1])
        k1x, k1s = rhs(x, s, t, P_cal[k], Q_cal[k])
        k2x, k2s = rhs(x + 0.5 * h * k1x, s + 0.5 * h * k1s, t + 0.5 * h, Pm, Qm)
        k3x, k3s = rhs(x + 0.5 * h * k2x, s + 0.5 * h * k2s, t + 0.5 * h, Pm, Qm)
        k4x, k4s = rhs(x + h * k3x, s + h * k3s, t + h, P_cal[k + 1], Q_cal[k + 1])
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        s += h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        X[k + 1], S[k + 1] = x, s
    return X, S, X - S


def gamma_bar(model: ScalarModel) -> float:
    """Uniform attenuation bound controlling the contraction rate.

    gamma_bar = max of
        V^2 / (min(P0, Q0M) C^2 + V)^2
        V^2 (lam - 2A)^2 / ((1 - 1/M) G^2 C^2 + V (lam - 2A))^2

    Requires ``lam > max(0, 2A)`` so the second branch is a valid bound.
    """
    if model.lam <= max(0.0, 2.0 * model.A):
        raise InfeasibleRegimeError(
            f"gamma_bar requires lambda > max(0, 2A) = {max(0.0, 2.0 * model.A)}, got {model.lam}"
        )
    C2, V = model.C * model.C, model.V
    tilde = model.lam - 2.0 * model.A
    b1 = V * V / (min(model.P0, model.Q0M) * C2 + V) ** 2
    gm2 = model.G_M * model.G_M
    b2 = (V * tilde) ** 2 / (gm2 * C2 + V * tilde) ** 2
    return max(b1, b2)


def check_sampling_rate(model: ScalarModel) -> TheoremReport:
    """Evaluate the rate condition and both sufficient inequalities.

    Never raises: outside the ``lam > 2A`` regime the report carries
    ``gamma_bar = nan`` and ``feasible = False``.
    """
    C2, V = model.C * model.C, model.V
    gm2 = model.G_M * model.G_M
    tilde = model.lam - 2.0 * model.A
    ineq_noise = 2.0 * V * tilde * (model.A * V - gm2 * C2) < gm2 * gm2 * C2 * C2
    denom = 1.0 - V * V / (min(model.P0, model.Q0M) * C2 + V) ** 2
    ineq_rate = model.A <= 0 or model.lam > 2.0 * model.A / denom

    try:
        gb = gamma_bar(model)
    except InfeasibleRegimeError:
        return TheoremReport(
            gamma_bar=float("nan"),
            lambda_min=2.0 * model.A,
            feasible=False,
            ultimate_bound=None,
            ineq_noise=ineq_noise,
            ineq_rate=ineq_rate,
        )
    lambda_min = 2.0 * model.A / (1.0 - gb * gb) if model.A > 0 else 0.0
    feasible = model.lam > lambda_min
    bound = None
    if feasible:
        bound = (model.G**2 + model.lam * V / C2) / (model.M * (model.lam * (1.0 - gb * gb) - 2.0 * model.A))
    return TheoremReport(
        gamma_bar=gb,
        lambda_min=lambda_min,
        feasible=feasible,
        ultimate_bound=bound,
        ineq_noise=ineq_noise,
        ineq_rate=ineq_rate,
    )


def ultimate_bound(model: ScalarModel) -> float:
    """Asymptotic bound on |E[Q^M] - E[P]|; requires a feasible rate."""
    report = check_sampling_rate(model)
    if not report.feasible or report.ultimate_bound is None:
        raise InfeasibleRegimeError(
            f"sampling rate lambda={model.lam} violates the feasibility condition (lambda_min={report.lambda_min})"
        )
    return report.ultimate_bound


def covariance_lower_bounds(model: ScalarModel) -> tuple[float, float]:
    """Lower bounds min(P0, G^2/(lam-2A)) and min(Q0M, G_M^2/(lam-2A))."""
    tilde = model.lam - 2.0 * model.A
    if tilde <= 0:
        raise InfeasibleRegimeError(f"covariance lower bounds require lambda > 2A, got lambda={model.lam}, A={model.A}")
    return (
        min(model.P0, model.G**2 / tilde),
        min(model.Q0M, model.G_M**2 / tilde),
    )
