"""Integration of the degenerate gradient flow xdot = -S(t) x.

The flow is integrated in spherical form: with x = r*omega, ||omega|| = 1,

    d(log r)/dt = -omega^T S omega,
    omega'      = -S omega + (omega^T S omega) omega,

so the radius lives in log space and never underflows, and the running
cost int omega^T S omega dt is -log r(t) for free.  The integrator is an
embedded Runge-Kutta 5(4) pair (Dormand-Prince coefficients) that lands
exactly on signal segment boundaries, so discontinuous piecewise controls
are integrated without order loss.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import CubicSpline

__all__ = [
    "IntegrationError",
    "Trajectory",
    "DecayReport",
    "adaptive_rk45",
    "integrate_flow",
    "fundamental_matrix",
    "cost_J",
    "decay_rate",
]


class IntegrationError(RuntimeError):
    """Raised when the adaptive step size underflows."""


# Dormand-Prince 5(4) tableau, FSAL form
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_E = _B5 - _B4

_MAX_STEPS = 2_000_000


def adaptive_rk45(f, t0: float, t1: float, y0: NDArray, tol: float = 1e-9,
                  breakpoints=(), post_step=None):
    """Integrate y' = f(t, y) from t0 to t1, recording every accepted step.

    breakpoints are mandatory landing times (the step never crosses one),
    used to align with discontinuities of f.  post_step, if given, maps an
    accepted (t, y) to a corrected y (e.g. renormalization); the correction
    magnitude is accumulated and returned.

    Returns (ts, ys, drift) with ts shape (m,), ys shape (m, len(y0)).
    """
    y = np.asarray(y0, dtype=float).copy()
    span = t1 - t0
    if span <= 0:
        raise ValueError("need t0 < t1")
    bps = sorted(b for b in set(float(b) for b in breakpoints) if t0 < b < t1)
    bps.append(t1)

    ts = [t0]
    ys = [y.copy()]
    drift = 0.0
    t = t0
    h = span / 100.0
    k1 = f(t, y)
    ks = [None] * 7
    steps = 0
    bi = 0
    while t < t1 - 1e-14 * max(1.0, abs(t1)):
        if steps >= _MAX_STEPS:
            raise IntegrationError(f"step budget exhausted at t={t:.6g}")
        target = bps[bi]
        h = min(h, target - t)
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow at t={t:.6g} (h={h:.3e})")
        ks[0] = k1
        for i in range(1, 7):
            yi = y + h * sum(a * ks[j] for j, a in enumerate(_A[i]))
            ks[i] = f(t + _C[i] * h, yi)
        y5 = y + h * sum(b * ks[j] for j, b in enumerate(_B5) if b != 0.0)
        err_vec = h * sum(e * ks[j] for j, e in enumerate(_E) if e != 0.0)
        scale = tol + tol * np.maximum(np.abs(y), np.abs(y5))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        steps += 1
        if err <= 1.0:
            t = t + h
            y = y5
            if post_step is not None:
                y_new = post_step(t, y)
                drift += float(np.max(np.abs(y_new - y)))
                y = y_new
            at_break = abs(t - target) <= 1e-13 * max(1.0, abs(target))
            if at_break:
                t = target
                bi += 1
                k1 = f(t, y)  # f may jump here; FSAL value is stale
            else:
                k1 = ks[6] if post_step is None else f(t, y)
            ts.append(t)
            ys.append(y.copy())
        factor = 0.9 * err ** -0.2 if err > 0 else 5.0
        h = h * min(5.0, max(0.2, factor))
    return np.array(ts), np.array(ys), drift


@dataclass(frozen=True)
class Trajectory:
    """Time-sampled spherical state (t, omega, log_r) with interpolation.

    Samples sit at accepted integrator steps; omega has unit norm at each
    sample and log_r is non-increasing for PSD controls.
    """

    ts: NDArray[np.float64]
    omegas: NDArray[np.float64]
    log_r: NDArray[np.float64]
    interpolation: str = "cubic"
    renorm_drift: float = 0.0

    @cached_property
    def _omega_spline(self) -> CubicSpline:
        return CubicSpline(self.ts, self.omegas, axis=0)

    @cached_property
    def _logr_spline(self) -> CubicSpline:
        return CubicSpline(self.ts, self.log_r)

    @property
    def dim(self) -> int:
        return self.omegas.shape[1]

    def omega(self, t: float | NDArray) -> NDArray[np.float64]:
        return self._omega_spline(t)

    def log_radius(self, t: float | NDArray):
        return self._logr_spline(t)

    @property
    def cost(self) -> float:
        """Accumulated cost int omega^T S omega dt over the full span."""
        return float(-self.log_r[-1] + self.log_r[0])

    def to_csv(self, path: str) -> None:
        header = "t," + ",".join(f"omega_{i + 1}" for i in range(self.dim)) + ",log_r"
        table = np.column_stack([self.ts, self.omegas, self.log_r])
        np.savetxt(path, table, delimiter=",", header=header, comments="")


@dataclass(frozen=True)
class DecayReport:
    """Exponential decay rate of the flow for a given control.

    rate is -log(spectral radius of the period map)/period for the
    monodromy method, or a log-norm regression slope for the slope method.
    finite_horizon marks slope estimates on aperiodic signals, where the
    asymptotic rate is only approximated on the available span.
    """

    rate: float
    horizon: float
    method: str
    contraction_per_period: float | None = None
    slope_rate: float | None = None
    finite_horizon: bool = False


def _omega_rhs(signal):
    def f(t, y):
        omega = y[:-1]
        s_om = signal.matrix(t) @ omega
        q = float(omega @ s_om)
        out = np.empty_like(y)
        out[:-1] = -s_om + q * omega
        out[-1] = -q
        return out
    return f


def _renormalize(t, y):
    out = y.copy()
    nrm = np.linalg.norm(out[:-1])
    out[:-1] /= nrm
    return out


def integrate_flow(signal, omega0, t0: float | None = None, t1: float | None = None,
                   tol: float = 1e-9) -> Trajectory:
    """Solve the spherical system for omega(t) and log r(t) on [t0, t1]."""
    omega0 = np.asarray(omega0, dtype=float)
    if abs(np.linalg.norm(omega0) - 1.0) > 1e-9:
        raise ValueError("omega0 must be a unit vector")
    if t0 is None:
        t0 = signal.t_start
    if t1 is None:
        t1 = signal.horizon
    y0 = np.concatenate([omega0, [0.0]])
    bps = signal.breakpoints(t0, t1)
    ts, ys, drift = adaptive_rk45(_omega_rhs(signal), t0, t1, y0, tol=tol,
                                  breakpoints=bps, post_step=_renormalize)
    return Trajectory(ts, ys[:, :-1], ys[:, -1], renorm_drift=drift)


def fundamental_matrix(signal, t0: float, t1: float, tol: float = 1e-9) -> NDArray:
    """Phi(t1, t0) for xdot = -S(t) x, integrated column-block as one system."""
    n = signal.dim

    def f(t, y):
        return (-signal.matrix(t) @ y.reshape(n, n)).ravel()

    bps = signal.breakpoints(t0, t1)
    _, ys, _ = adaptive_rk45(f, t0, t1, np.eye(n).ravel(), tol=tol, breakpoints=bps)
    return ys[-1].reshape(n, n)


def cost_J(signal, omega0, T: float | None = None, tol: float = 1e-9) -> float:
    """int_0^T omega^T S omega dt along the flow started at omega0."""
    t0 = signal.t_start
    t1 = t0 + T if T is not None else signal.horizon
    traj = integrate_flow(signal, omega0, t0, t1, tol=tol)
    return traj.cost


def decay_rate(signal, n_periods: int = 10, horizon: float | None = None,
               tol: float = 1e-9) -> DecayReport:
    """Asymptotic decay rate of ||Phi(t, 0)||.

    Periodic signals use the monodromy matrix (exact up to integration
    error) and also report the slope-regression diagnostic over n_periods
    period maps with per-period renormalization.  Aperiodic signals need
    an explicit horizon and get a slope estimate only, flagged as a
    finite-horizon surrogate.
    """
    if signal.period is not None:
        P = signal.period
        phi = fundamental_matrix(signal, signal.t_start, signal.t_start + P, tol=tol)
        rho = float(np.max(np.abs(np.linalg.eigvals(phi))))
        rate = -np.log(rho) / P
        # slope diagnostic: accumulate log||Phi^k|| with renormalization
        logs = np.empty(n_periods + 1)
        logs[0] = 0.0
        m = np.eye(signal.dim)
        acc = 0.0
        for k in range(1, n_periods + 1):
            m = phi @ m
            nrm = np.linalg.norm(m, 2)
            acc += np.log(nrm)
            m = m / nrm
            logs[k] = acc
        ks = np.arange(n_periods + 1) * P
        slope = float(np.polyfit(ks, logs, 1)[0])
        return DecayReport(rate=float(rate), horizon=n_periods * P, method="monodromy",
                           contraction_per_period=rho, slope_rate=-slope)
    if horizon is None:
        horizon = signal.horizon - signal.t_start
    edges = np.linspace(signal.t_start, signal.t_start + horizon, n_periods + 1)
    m = np.eye(signal.dim)
    logs = np.empty(n_periods + 1)
    logs[0] = 0.0
    acc = 0.0
    for k in range(n_periods):
        phi = fundamental_matrix(signal, float(edges[k]), float(edges[k + 1]), tol=tol)
        m = phi @ m
        nrm = np.linalg.norm(m, 2)
        acc += np.log(nrm)
        m = m / nrm
        logs[k + 1] = acc
    slope = float(np.polyfit(edges - edges[0], logs, 1)[0])
    return DecayReport(rate=-slope, horizon=float(horizon), method="slope",
                       slope_rate=-slope, finite_horizon=True)
