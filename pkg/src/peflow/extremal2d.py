"""Synthesis of the planar worst-case rank-one control.

The optimal control S = cc^T in dimension 2 is parametrized by angles:
omega = (cos(theta/2), sin(theta/2)) for the state, c = (cos(phi/2),
sin(phi/2)) for the control axis, with the adjoint reduced to a single
scalar eta via p = eta * omega_perp.  Along an extremal the angle phi
obeys a pendulum equation whose half-periods are complete elliptic
integrals, which turns synthesis into two scalar root-finding problems:

  1. solve_shape:       K_plus(phi0)/K_minus(phi0) = a/b   ->  (phi0, nu)
  2. solve_multipliers: nu(alpha, d(alpha)) = nu            ->  (alpha, d)

after which the extremal dynamics are integrated on [0, T=a+b] and
reflected into a 2T-periodic signal.  All maps involved are strictly
monotone, so plain bisection is exact to machine precision.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import CubicSpline

from .flow import adaptive_rk45
from .signals import RankOneSignal, Segment, gram, reflect_extend

__all__ = [
    "ExtremalParams",
    "Extremal2DState",
    "ExtremalTrajectory",
    "ExtremalReport",
    "elliptic_K",
    "elliptic_E",
    "K_plus",
    "K_minus",
    "solve_shape",
    "solve_multipliers",
    "solve_params",
    "initial_conditions",
    "integrate_extremal",
    "build_optimal_control",
    "cost_closed_form",
    "verify_extremal",
]

_GL200 = np.polynomial.legendre.leggauss(200)
_GL5 = np.polynomial.legendre.leggauss(5)


def _agm_pair(x: float) -> tuple[float, float]:
    # AGM iteration for K(x) with the companion sum for E(x).  The loop is
    # capped and uses a break-on-small-c test instead of `while c > eps`:
    # near x ~ 1e-8 the gap a-b can stall at half an ulp of 1 (~5.5e-17),
    # which is below no fixed threshold reachable by further iterations.
    a, b, c = 1.0, float(np.sqrt((1.0 - x) * (1.0 + x))), x
    csum = 0.5 * c * c
    pow2 = 1.0
    for _ in range(60):
        if abs(c) < 1e-17:
            break
        a, b, c = 0.5 * (a + b), float(np.sqrt(a * b)), 0.5 * (a - b)
        pow2 *= 2.0
        csum += 0.5 * pow2 * c * c
    K = np.pi / (2.0 * a)
    return K, K * (1.0 - csum)


def elliptic_K(x: float) -> float:
    """Complete elliptic integral of the first kind, modulus convention."""
    x = float(x)
    if not 0.0 <= x < 1.0:
        raise ValueError(f"elliptic_K needs x in [0, 1), got {x}")
    return _agm_pair(x)[0]


def elliptic_E(x: float) -> float:
    """Complete elliptic integral of the second kind, modulus convention."""
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"elliptic_E needs x in [0, 1], got {x}")
    if x == 1.0:
        return 1.0
    return _agm_pair(x)[1]


def K_plus(phi0: float) -> float:
    """Pendulum half-period integral 2*sqrt(2)*(K(cos(phi0/2)) - E(cos(phi0/2)))."""
    if not 0.0 < phi0 < np.pi:
        raise ValueError("phi0 must lie in (0, pi)")
    m = np.cos(phi0 / 2)
    K, E = _agm_pair(m)
    return 2.0 * np.sqrt(2.0) * (K - E)


def K_minus(phi0: float) -> float:
    """Companion integral 2*sqrt(2)*E(cos(phi0/2))."""
    if not 0.0 < phi0 < np.pi:
        raise ValueError("phi0 must lie in (0, pi)")
    return 2.0 * np.sqrt(2.0) * _agm_pair(np.cos(phi0 / 2))[1]


@dataclass(frozen=True)
class ExtremalParams:
    """Synthesis parameters for the planar extremal with kappa oscillation arcs.

    Invariants enforced at construction: T = a + b, the pendulum frequency
    relation nu = sqrt((1-alpha+d)/(2(alpha+d))), the half-period equations
    a = nu*kappa*K_plus(phi0) and b = nu*kappa*K_minus(phi0), and the
    turning-angle relation cos phi0 = -1 + 2d(1+d)/((alpha+d)(1-alpha+d)).
    """

    a: float
    b: float
    T: float
    alpha: float
    d: float
    nu: float
    phi0: float
    kappa: int = 1

    def __post_init__(self) -> None:
        if abs(self.T - (self.a + self.b)) > 1e-12 * (self.a + self.b):
            raise ValueError("T must equal a + b")
        if not (0.0 < self.alpha < 1.0 and self.d > 0.0):
            raise ValueError("need alpha in (0,1) and d > 0")
        nu_chk = np.sqrt((1 - self.alpha + self.d) / (2 * (self.alpha + self.d)))
        if abs(nu_chk - self.nu) > 1e-10 * max(1.0, self.nu):
            raise ValueError(f"nu inconsistent with (alpha, d): {self.nu} vs {nu_chk}")
        cos_chk = -1 + 2 * self.d * (1 + self.d) / (
            (self.alpha + self.d) * (1 - self.alpha + self.d))
        if abs(cos_chk - np.cos(self.phi0)) > 1e-10:
            raise ValueError("phi0 inconsistent with (alpha, d)")
        a_chk = self.nu * self.kappa * K_plus(self.phi0)
        b_chk = self.nu * self.kappa * K_minus(self.phi0)
        if abs(a_chk - self.a) > 1e-8 * self.a or abs(b_chk - self.b) > 1e-8 * self.b:
            raise ValueError(f"(a, b) inconsistent with (nu, kappa, phi0): "
                             f"got ({a_chk}, {b_chk}) vs ({self.a}, {self.b})")

    @property
    def mu_bar(self) -> float:
        return 1.0 / (1.0 - self.alpha + self.d)


@dataclass(frozen=True)
class Extremal2DState:
    """Angle-space state (theta, eta, phi) of the extremal system."""

    theta: float
    eta: float
    phi: float


def solve_shape(a: float, b: float) -> tuple[float, float]:
    """Solve K_plus(phi0)/K_minus(phi0) = a/b for phi0, then nu = b/K_minus.

    The ratio decreases strictly from +inf (phi0 -> 0) to 0 (phi0 -> pi),
    so bisection with kappa = 1 is exact.  Requires 0 < a < b.
    """
    if not 0.0 < a < b:
        raise ValueError(f"solve_shape needs 0 < a < b, got ({a}, {b})")
    target = a / b

    def ratio(phi0: float) -> float:
        return K_plus(phi0) / K_minus(phi0)

    lo, hi = 1e-3, np.pi - 1e-9
    while ratio(lo) <= target:
        lo *= 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if ratio(mid) > target:
            lo = mid
        else:
            hi = mid
    phi0 = 0.5 * (lo + hi)
    nu = b / K_minus(phi0)
    if abs(nu * K_plus(phi0) - a) > 1e-10 * a:
        raise ArithmeticError(f"shape solve residual too large for (a, b)=({a}, {b})")
    return float(phi0), float(nu)


def _d_of_alpha(alpha: float, cot2: float) -> float:
    return 0.5 * (-1.0 + np.sqrt(1.0 + 4.0 * cot2 * alpha * (1.0 - alpha)))


def solve_multipliers(phi0: float, nu: float) -> tuple[float, float]:
    """Recover the multipliers (alpha, d) from (phi0, nu).

    The turning-angle relation pins d as a function of alpha through
    d(alpha) = (-1 + sqrt(1 + 4 cot^2(phi0/2) alpha(1-alpha)))/2, and
    nu(alpha, d(alpha)) decreases strictly from +inf to 0, so bisection
    on alpha is exact.
    """
    if not 0.0 < phi0 < np.pi:
        raise ValueError("phi0 must lie in (0, pi)")
    if nu <= 0:
        raise ValueError("nu must be positive")
    half = phi0 / 2
    cot2 = (np.cos(half) / np.sin(half)) ** 2

    def nu_of(alpha: float) -> float:
        d = _d_of_alpha(alpha, cot2)
        return np.sqrt((1.0 - alpha + d) / (2.0 * (alpha + d)))

    lo, hi = 1e-15, 1.0 - 1e-15
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if nu_of(mid) > nu:
            lo = mid
        else:
            hi = mid
    alpha = 0.5 * (lo + hi)
    d = _d_of_alpha(alpha, cot2)
    cos_chk = -1.0 + 2.0 * d * (1.0 + d) / ((alpha + d) * (1.0 - alpha + d))
    if abs(cos_chk - np.cos(phi0)) > 1e-10:
        raise ArithmeticError("multiplier solve failed the turning-angle residual")
    if abs(nu_of(alpha) - nu) > 1e-10 * max(1.0, nu):
        raise ArithmeticError("multiplier solve failed the frequency residual")
    return float(alpha), float(d)


def solve_params(a: float, b: float) -> ExtremalParams:
    """Full parameter solve (a, b) -> ExtremalParams with kappa = 1."""
    phi0, nu = solve_shape(a, b)
    alpha, d = solve_multipliers(phi0, nu)
    return ExtremalParams(a=a, b=b, T=a + b, alpha=alpha, d=d, nu=nu, phi0=phi0)


def initial_conditions(alpha: float, d: float) -> Extremal2DState:
    """State at a turning time: eta = 0, theta and phi from (alpha, d).

    cos theta0 = 1 - 2d(1-alpha)/(alpha+d) with sin theta0 < 0 (the mirror
    solution is canonicalized away), and phi0 in (0, pi) so that
    sin theta0 * sin phi0 < 0.
    """
    if not (0.0 < alpha < 1.0 and d > 0.0):
        raise ValueError("need alpha in (0,1) and d > 0")
    ct = 1.0 - 2.0 * d * (1.0 - alpha) / (alpha + d)
    cp = -1.0 + 2.0 * d * (1.0 + d) / ((alpha + d) * (1.0 - alpha + d))
    for name, val in (("cos theta0", ct), ("cos phi0", cp)):
        if abs(val) > 1.0 + 1e-12:
            raise ValueError(f"{name} = {val} outside [-1, 1] beyond roundoff")
    ct = min(1.0, max(-1.0, ct))
    cp = min(1.0, max(-1.0, cp))
    theta0 = -np.arccos(ct)
    phi0 = np.arccos(cp)
    return Extremal2DState(theta=float(theta0), eta=0.0, phi=float(phi0))


@dataclass(frozen=True)
class ExtremalTrajectory:
    """Integrated extremal (theta, eta, phi) with the running cost J.

    states has one row (theta, eta, phi) per accepted step; cost holds the
    accumulated int cos^2((theta-phi)/2) dt.
    """

    ts: NDArray[np.float64]
    states: NDArray[np.float64]
    cost: NDArray[np.float64]

    @cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(self.ts, np.column_stack([self.states, self.cost]), axis=0)

    def theta(self, t):
        return self._spline(t)[..., 0]

    def eta(self, t):
        return self._spline(t)[..., 1]

    def phi(self, t):
        return self._spline(t)[..., 2]

    def cost_at(self, t):
        return self._spline(t)[..., 3]

    def omega(self, t) -> NDArray[np.float64]:
        half = 0.5 * self.theta(t)
        return np.stack([np.cos(half), np.sin(half)], axis=-1)

    def c(self, t) -> NDArray[np.float64]:
        half = 0.5 * self.phi(t)
        return np.stack([np.cos(half), np.sin(half)], axis=-1)

    @property
    def span(self) -> float:
        return float(self.ts[-1] - self.ts[0])

    @property
    def mu(self) -> float:
        """Total cost over the integrated span."""
        return float(self.cost[-1])


def integrate_extremal(params: ExtremalParams, tol: float = 1e-9) -> ExtremalTrajectory:
    """Integrate the reduced extremal system on [0, T].

    thetadot = sin(theta - phi)
    etadot   = -(sin(theta - phi) + 2 eta cos(theta - phi)) / 2
    phidot   = 2 eta / (1 - alpha + d)

    started at the turning state of initial_conditions, with the running
    cost accumulated as a fourth component.  eta(T) must return to zero;
    a large residual signals inconsistent parameters and raises.
    """
    den = 1.0 - params.alpha + params.d
    state0 = initial_conditions(params.alpha, params.d)
    y0 = np.array([state0.theta, 0.0, state0.phi, 0.0])

    def f(t, y):
        delta = y[0] - y[2]
        s, c = np.sin(delta), np.cos(delta)
        return np.array([s, -0.5 * (s + 2.0 * y[1] * c), 2.0 * y[1] / den,
                         0.5 * (1.0 + c)])

    ts, ys, _ = adaptive_rk45(f, 0.0, params.T, y0, tol=tol)
    eta_T = abs(float(ys[-1, 1]))
    if eta_T > max(100.0 * tol, 1e-10):
        raise ArithmeticError(f"eta(T) = {eta_T:.3e} does not vanish; "
                              "parameters are inconsistent with the boundary conditions")
    return ExtremalTrajectory(ts, ys[:, :3], ys[:, 3])


def _axis_hopping_rank_one(a: float) -> tuple[RankOneSignal, NDArray, float]:
    # a = b boundary: the pendulum family degenerates; the optimal control
    # hops between the two coordinate axes with unit amplitude.  Built over
    # one full 2T window to keep the 2T-periodic output shape.
    T = 2.0 * a
    segs = []
    for j in range(4):
        angle = 0.0 if j % 2 == 0 else np.pi
        segs.append(Segment(j * a, (j + 1) * a, np.array([angle])))
    sig = RankOneSignal(tuple(segs), dim=2, period=2 * T)
    return sig, np.array([1.0, 0.0]), a


def build_optimal_control(a: float, b: float, samples: int = 2048,
                          tol: float = 1e-10) -> tuple[RankOneSignal, NDArray, float]:
    """Synthesize the 2T-periodic worst-case control for window bounds (a, b).

    Returns (signal, omega0, mu): the control as a rank-one angle signal
    with period 2T, the worst initial direction, and the per-window cost
    mu = J over [0, T].  The case a = b falls outside the pendulum family
    and is served by the axis-hopping control (cost exactly a).
    """
    if not 0.0 < a <= b:
        raise ValueError(f"need 0 < a <= b, got ({a}, {b})")
    if abs(a - b) <= 1e-12 * b:
        return _axis_hopping_rank_one(a)

    params = solve_params(a, b)
    traj = integrate_extremal(params, tol=tol)
    T = params.T

    ts = np.linspace(0.0, T, samples)
    phis = traj.phi(ts)
    half_signal = RankOneSignal((Segment(0.0, T, phis),), dim=2)

    om0 = traj.omega(0.0)
    omT = traj.omega(T)
    signs = np.empty(2)
    for i in range(2):
        if abs(om0[i]) <= 1e-6:
            raise ArithmeticError("reflection sign ambiguous: omega_i(0) numerically zero")
        signs[i] = np.sign(omT[i] / om0[i])
    D = np.diag(signs)

    signal = reflect_extend(half_signal, D, tol=1e-6)
    return signal, om0, traj.mu


def cost_closed_form(alpha: float, d: float) -> float:
    """Extremal cost as a one-dimensional quadrature in the angle eps = theta - phi - pi.

    J = 2 * int_0^{eps_bar} sin^2(eps/2) deps
            / sqrt(2 mu_bar (cos eps - cos eps_bar) - cos^2 eps + cos^2 eps_bar)

    with mu_bar = 1/(1-alpha+d) and cos eps_bar = 1 - 2d/(1-alpha+d).  The
    endpoint singularity is removed by eps = eps_bar * sin(psi) before
    Gauss-Legendre quadrature.  Only turning angles eps_bar in (0, pi/2)
    are accepted.
    """
    if not (0.0 < alpha < 1.0 and d > 0.0):
        raise ValueError("need alpha in (0,1) and d > 0")
    mu_bar = 1.0 / (1.0 - alpha + d)
    cos_eb = 1.0 - 2.0 * d / (1.0 - alpha + d)
    if not 0.0 < cos_eb < 1.0:
        raise ValueError(f"turning angle outside (0, pi/2): cos eps_bar = {cos_eb}")
    eps_bar = np.arccos(cos_eb)

    x, w = _GL200
    psi = 0.25 * np.pi * (x + 1.0)
    wpsi = 0.25 * np.pi * w
    eps = eps_bar * np.sin(psi)
    arg = 2.0 * mu_bar * (np.cos(eps) - cos_eb) - np.cos(eps) ** 2 + cos_eb ** 2
    arg = np.maximum(arg, 1e-300)
    integrand = np.sin(eps / 2.0) ** 2 * (eps_bar * np.cos(psi)) / np.sqrt(arg)
    return float(2.0 * np.dot(wpsi, integrand))


@dataclass(frozen=True)
class ExtremalReport:
    """Named extremality residuals with the measured cost.

    passed reflects the six primary residuals (seam, transversality, Mc,
    spectrum_drift, gram, quasi_periodicity); further diagnostics (adjoint,
    trace, hamiltonian, nsd_violation, pendulum_energy) are included in
    residuals but carry the same tolerance.
    """

    residuals: dict[str, float]
    mu: float
    passed: bool

    PRIMARY = ("seam", "transversality", "Mc", "spectrum_drift", "gram",
               "quasi_periodicity")


def verify_extremal(traj: ExtremalTrajectory, params: ExtremalParams,
                    tol: float = 1e-6, samples: int = 2001) -> ExtremalReport:
    """Check the full set of extremality conditions along a trajectory.

    At sampled times the matrix M = diag(alpha, -d) - (omega p^T + p omega^T
    + omega omega^T) must kill the control axis (Mc = 0), stay negative
    semi-definite with constant spectrum {alpha-d-1, 0}, and the scalar
    adjoint must satisfy pdot = Sp - (omega^T S omega) p - omegadot with
    p(0) = p(T) = 0.  The Gram over [0, T] must equal diag(a, b).
    """
    al, d = params.alpha, params.d
    T = params.T
    ts = np.linspace(0.0, T, samples)
    th = traj.theta(ts)
    eta = traj.eta(ts)
    ph = traj.phi(ts)

    half_th = 0.5 * th
    omega = np.stack([np.cos(half_th), np.sin(half_th)], axis=-1)
    operp = np.stack([-np.sin(half_th), np.cos(half_th)], axis=-1)
    half_ph = 0.5 * ph
    c = np.stack([np.cos(half_ph), np.sin(half_ph)], axis=-1)
    p = eta[:, None] * operp

    # exact derivatives from the reduced dynamics, no numerical differencing
    delta = th - ph
    sd, cd = np.sin(delta), np.cos(delta)
    th_dot = sd
    eta_dot = -0.5 * (sd + 2.0 * eta * cd)
    om_dot = 0.5 * th_dot[:, None] * operp
    p_dot = eta_dot[:, None] * operp - 0.5 * (eta * th_dot)[:, None] * omega

    PQ = np.diag([al, -d])
    outer = (omega[:, :, None] * p[:, None, :] + p[:, :, None] * omega[:, None, :]
             + omega[:, :, None] * omega[:, None, :])
    M = PQ[None, :, :] - outer

    Mc = np.einsum("kij,kj->ki", M, c)
    eigs = np.linalg.eigvalsh(M)
    target = np.sort([al - d - 1.0, 0.0])
    ct_om = np.einsum("ki,ki->k", c, omega)
    adj_rhs = c * np.einsum("ki,ki->k", c, p)[:, None] - (ct_om ** 2)[:, None] * p - om_dot
    phi_dot = 2.0 * eta / (1.0 - al + d)
    energy = params.nu ** 2 * phi_dot ** 2 + np.cos(ph)

    # Gram of c over [0, T] by composite Gauss-Legendre on the spline
    edges = np.linspace(0.0, T, 513)
    mids = 0.5 * (edges[:-1] + edges[1:])
    halfw = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mids[:, None] + halfw[:, None] * _GL5[0][None, :]).ravel()
    wq = (halfw[:, None] * _GL5[1][None, :]).ravel()
    cq = traj.c(nodes)
    G = np.einsum("k,ki,kj->ij", wq, cq, cq)

    omega0, omegaT = omega[0], omega[-1]
    signs = np.where(np.abs(omega0) > 1e-6, np.sign(omegaT * omega0), 1.0)
    seam = min(float(np.linalg.norm(s * signs * c[0] - c[-1])) for s in (1.0, -1.0))

    residuals = {
        "seam": seam,
        "transversality": float(max(abs(eta[0]), abs(eta[-1]))),
        "Mc": float(np.max(np.linalg.norm(Mc, axis=1))),
        "spectrum_drift": float(np.max(np.abs(eigs - target[None, :]))),
        "gram": float(np.max(np.abs(G - np.diag([params.a, params.b]))) / (params.a + params.b)),
        "quasi_periodicity": float(np.max(np.abs(omegaT ** 2 - omega0 ** 2))),
        "adjoint": float(np.max(np.linalg.norm(p_dot - adj_rhs, axis=1))),
        "trace": float(np.max(np.abs(np.trace(M, axis1=1, axis2=2) - (al - d - 1.0)))),
        "hamiltonian": float(np.max(np.abs(0.5 * np.einsum("ki,ki->k", c, Mc)))),
        "nsd_violation": float(max(np.max(eigs), 0.0)),
        "pendulum_energy": float(np.max(np.abs(energy - np.cos(params.phi0)))),
    }
    passed = all(residuals[k] < tol for k in ExtremalReport.PRIMARY)
    mu = float(traj.cost_at(T))
    return ExtremalReport(residuals=residuals, mu=mu, passed=passed)
