"""Brute-force estimation of the planar optimal cost mu(a, b, 2).

Independent of the pendulum synthesis: the control is piecewise constant,
one unit vector c_j per equal subinterval of [0, a+b], parametrized by a
single direction angle each.  J(cc^T, omega0) is minimized directly over
(omega0 angle, c angles) by multi-started Nelder-Mead under a quadratic
feasibility penalty, coarse-to-fine in the segment count.

With the trace normalized (T = a + b), the 2x2 window Gram has eigenvalue
pair (lam, T - lam), so admissibility a*I <= G <= b*I reduces to the
single scalar condition lam_min >= a.  Infeasible iterates are repaired
by dilating the doubled angles about their circular mean, which spreads
the directions and raises lam_min monotonically.

The optimizer propagates x(t) through each constant segment in closed
form (exact, no ODE error); the final reported value is recomputed with
flow.cost_J on the assembled signal so the cost definition has a single
source of truth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize

from .flow import cost_J
from .signals import RankOneSignal, Segment

__all__ = ["OracleResult", "sample_admissible", "brute_force_mu2"]

FEAS_TOL = 1e-6
_SAMPLE_BUDGET = 500


@dataclass(frozen=True)
class OracleResult:
    """Best control found by the direct search.

    mu_hat is an upper estimate of mu(a, b, 2) (a lower estimate of the
    true value only up to discretization in N); control is the winning
    piecewise-constant signal, feasible within constraint_residual.
    """

    mu_hat: float
    control: RankOneSignal
    omega0: NDArray[np.float64]
    constraint_residual: float
    seeds_used: int


def _make_funcs(a: float, b: float, N: int):
    """Closed-form cost/feasibility evaluators for N-segment angle vectors."""
    T = a + b
    dt = T / N
    decay = math.exp(-dt) - 1.0
    half = 0.5 * T

    def lam_min(psis) -> float:
        g11 = 0.0
        g12 = 0.0
        for p in psis:
            cp = math.cos(p)
            sp = math.sin(p)
            g11 += cp * cp
            g12 += cp * sp
        g11 *= dt
        g12 *= dt
        return half - math.hypot(g11 - half, g12)

    def cost(x) -> float:
        xs = x.tolist() if isinstance(x, np.ndarray) else list(x)
        xr = math.cos(xs[0])
        xi = math.sin(xs[0])
        for p in xs[1:]:
            cr = math.cos(p)
            ci = math.sin(p)
            f = decay * (xr * cr + xi * ci)
            xr += f * cr
            xi += f * ci
        return -0.5 * math.log(xr * xr + xi * xi)

    def objective(x, w: float) -> float:
        xs = x.tolist() if isinstance(x, np.ndarray) else list(x)
        lam = lam_min(xs[1:])
        gap_lo = max(0.0, a - lam)
        gap_hi = max(0.0, (T - lam) - b)  # == gap_lo under trace normalization
        return cost(xs) + w * (gap_lo * gap_lo + gap_hi * gap_hi)

    return lam_min, cost, objective


def _dilate(psis: NDArray, s: float) -> NDArray:
    """Scale angle deviations about the doubled-angle circular mean by s.

    The Gram depends on the directions only through their doubled angles,
    so the mean is taken there; s > 1 spreads the directions apart.
    """
    two = 2.0 * psis
    m = 0.5 * math.atan2(float(np.sum(np.sin(two))), float(np.sum(np.cos(two))))
    dev = 0.5 * np.angle(np.exp(2j * (psis - m)))
    return m + s * dev


def _project_feasible(psis: NDArray, lam_min, a: float,
                      margin: float = 1e-9) -> NDArray:
    """Dilate toward lam_min >= a + margin, best effort.

    If some expansion reaches the target, bisection returns the least
    dilation that does.  At the boundary case a = b the target a + margin
    is unattainable (lam_min <= (a+b)/2 always), so the best dilation
    found is returned instead and the caller decides whether its residual
    is acceptable.
    """
    lam_here = lam_min(psis.tolist())
    if lam_here >= a + margin:
        return psis
    best_s, best_lam = 1.0, lam_here
    s_hi = 1.0
    reached = False
    for _ in range(40):
        s_hi *= 1.5
        lam = lam_min(_dilate(psis, s_hi).tolist())
        if lam > best_lam:
            best_lam, best_s = lam, s_hi
        if lam >= a + margin:
            reached = True
            break
    if reached:
        s_lo = 1.0
        for _ in range(100):
            mid = 0.5 * (s_lo + s_hi)
            if lam_min(_dilate(psis, mid).tolist()) >= a + margin:
                s_hi = mid
            else:
                s_lo = mid
        return _dilate(psis, s_hi)
    return psis if best_s == 1.0 else _dilate(psis, best_s)


def _signal_from_angles(psis: NDArray, T: float) -> RankOneSignal:
    # direction angle psi -> stored half-angle convention phi = 2 psi
    N = len(psis)
    segs = tuple(Segment(j * T / N, (j + 1) * T / N, np.array([2.0 * psis[j]]))
                 for j in range(N))
    return RankOneSignal(segs, dim=2)


def _repair_last_pair(psis: NDArray, a: float, T: float) -> NDArray | None:
    """Re-aim the last two directions to place the Gram exactly inside [a, b].

    With dt = T/N, lam_min = T/2 - (dt/2)|sum_j exp(2i psi_j)|, so
    feasibility is |sum_j exp(2i psi_j)| <= (b-a)/dt.  Two free unit
    phasors can cancel any excess up to magnitude 2.
    """
    N = len(psis)
    if N < 2:
        return None
    dt = T / N
    u = complex(np.sum(np.exp(2j * psis[:-2])))
    rho_max = max(0.0, (T - 2.0 * a) / dt) * (1.0 - 1e-12)
    target = u / abs(u) * min(abs(u), rho_max) if abs(u) > 0 else 0.0j
    z = target - u
    if abs(z) > 2.0:
        return None
    spread = math.acos(min(1.0, abs(z) / 2.0))
    base = np.angle(z) if abs(z) > 0 else 0.0
    out = psis.copy()
    out[-2] = 0.5 * (base + spread)
    out[-1] = 0.5 * (base - spread)
    return out


def sample_admissible(a: float, b: float, N: int, rng_seed: int = 0) -> RankOneSignal:
    """Random feasible piecewise-constant control on N equal segments.

    Uniform random directions, repaired when the Gram eigenvalue falls
    below a: first by dilation about the circular mean (shape-preserving),
    then by re-aiming the last two directions (exact), and redrawn when
    neither lands in the feasible set.  Raises after a fixed rejection
    budget (e.g. N = 1 can never be feasible: a rank-one Gram has
    eigenvalues {a+b, 0}).
    """
    if not 0.0 < a <= b:
        raise ValueError("need 0 < a <= b")
    if N < 1:
        raise ValueError("need N >= 1")
    T = a + b
    lam_min, _, _ = _make_funcs(a, b, N)
    rng = np.random.default_rng(rng_seed)
    for _ in range(_SAMPLE_BUDGET):
        psis = rng.uniform(0.0, 2.0 * np.pi, size=N)
        fixed = _project_feasible(psis, lam_min, a, margin=0.0)
        if lam_min(fixed.tolist()) >= a - 1e-12:
            return _signal_from_angles(fixed, T)
        repaired = _repair_last_pair(fixed, a, T)
        if repaired is not None and lam_min(repaired.tolist()) >= a - 1e-9:
            return _signal_from_angles(repaired, T)
    raise RuntimeError(f"no feasible control found in {_SAMPLE_BUDGET} draws "
                       f"for (a, b, N) = ({a}, {b}, {N})")


def _upsample(z: NDArray, n_new: int) -> NDArray:
    """Piecewise-constant refinement of the angle vector (first entry is omega0)."""
    psis = z[1:]
    idx = (np.arange(n_new) * len(psis)) // n_new
    return np.concatenate([[z[0]], psis[idx]])


def _levels(N: int) -> list[int]:
    out = [N]
    while out[-1] // 2 >= 5:
        out.append(out[-1] // 2)
    return out[::-1]


def brute_force_mu2(a: float, b: float, N: int = 40, n_seeds: int = 20,
                    penalty_weight: float = 1e4, rng_seed: int = 0) -> OracleResult:
    """Direct minimization of J over piecewise-constant rank-one controls.

    Coarse-to-fine: each seed is optimized at a ladder of segment counts
    (ending at N), upsampling the best point between levels; a second pass
    at the full resolution raises the penalty weight, and the winner is
    projected exactly onto the feasible set before the final evaluation.
    """
    if not 0.0 < a <= b:
        raise ValueError("need 0 < a <= b")
    if N < 4:
        raise ValueError("need N >= 4")
    T = a + b
    rng = np.random.default_rng(rng_seed)
    levels = _levels(N)
    funcs = {Nl: _make_funcs(a, b, Nl) for Nl in levels}

    best_z: NDArray | None = None
    best_cost = np.inf
    used = 0
    for _ in range(n_seeds):
        # random start at the coarsest level, as feasible as dilation allows
        # (at a = b exact feasibility is a measure-zero set; the penalty
        # term drives the remaining gap to zero during optimization)
        lam0, _, _ = funcs[levels[0]]
        start, start_lam = None, -np.inf
        for _ in range(50):
            psis = rng.uniform(0.0, 2.0 * np.pi, size=levels[0])
            fixed = _project_feasible(psis, lam0, a, margin=0.0)
            lam = lam0(fixed.tolist())
            if lam > start_lam:
                start, start_lam = fixed, lam
            if lam >= a - FEAS_TOL:
                break
        z = np.concatenate([[rng.uniform(0.0, 2.0 * np.pi)], start])

        for Nl in levels:
            if len(z) - 1 != Nl:
                z = _upsample(z, Nl)
            _, _, obj = funcs[Nl]
            res = minimize(obj, z, args=(penalty_weight,), method="Nelder-Mead",
                           options={"adaptive": True, "xatol": 1e-9, "fatol": 1e-12,
                                    "maxfev": 300 * (Nl + 1)})
            z = res.x
        # escalate the penalty so the iterate hugs the constraint surface
        _, _, obj = funcs[N]
        res = minimize(obj, z, args=(1e4 * penalty_weight,), method="Nelder-Mead",
                       options={"adaptive": True, "xatol": 1e-10, "fatol": 1e-13,
                                "maxfev": 120 * (N + 1)})
        z = res.x

        lamN, costN, _ = funcs[N]
        fixed = _project_feasible(z[1:], lamN, a, margin=1e-12)
        if lamN(fixed.tolist()) < a - FEAS_TOL:
            continue
        z = np.concatenate([[z[0]], fixed])
        used += 1
        c = costN(z)
        if c < best_cost:
            best_cost = c
            best_z = z

    if best_z is None:
        raise RuntimeError(f"no feasible local minimum over {n_seeds} seeds "
                           f"for (a, b, N) = ({a}, {b}, {N})")

    lamN, _, _ = funcs[N]
    lam = lam_final = lamN(best_z[1:].tolist())
    residual = max(0.0, a - lam, (T - lam_final) - b)
    control = _signal_from_angles(best_z[1:], T)
    omega0 = np.array([math.cos(best_z[0]), math.sin(best_z[0])])
    mu_hat = cost_J(control, omega0, T=T, tol=1e-9)
    return OracleResult(mu_hat=float(mu_hat), control=control, omega0=omega0,
                        constraint_residual=float(residual), seeds_used=used)
