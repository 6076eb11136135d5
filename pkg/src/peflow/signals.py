"""Signal models for rank-one and matrix-valued excitation controls.

A control signal is a piecewise-smooth map t -> S(t) into positive
semi-definite symmetric matrices.  Two concrete representations are used
throughout:

* :class:`RankOneSignal` stores a unit vector c(t) and represents
  S = c c^T.  In dimension 2 the vector is encoded by a single angle
  phi(t) through c = (cos(phi/2), sin(phi/2)); in higher dimension by
  sampled unit vectors.
* :class:`MatrixSignal` stores sampled symmetric matrices directly.

Both types are segmented: each segment carries a uniform sample grid on
[t0, t1] interpolated with a cubic spline, except single-sample segments
which are exact constants (used for piecewise-constant controls).
Instances are immutable after construction.
"""
from __future__ import annotations

import json
import os
from bisect import bisect_right
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import CubicSpline

__all__ = [
    "Segment",
    "RankOneSignal",
    "MatrixSignal",
    "PEWindowReport",
    "gram",
    "verify_int",
    "verify_pe",
    "normalize_trace",
    "embed_signal",
    "axis_hopping_control",
    "reflect_extend",
    "compose_block_control",
    "time_rescale",
    "signal_to_dict",
    "signal_from_dict",
    "save_signal",
    "load_signal",
]

PSD_TOL = 1e-10
UNIT_TOL = 1e-12

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True)
class Segment:
    """One sampled piece of a signal on [t0, t1].

    data holds samples on the uniform grid linspace(t0, t1, m):
    shape (m,) for 2D angles, (m, n) for unit vectors, (m, n, n) for
    matrices.  m == 1 means the segment is constant.
    """

    t0: float
    t1: float
    data: NDArray[np.float64]

    def __post_init__(self) -> None:
        if not self.t1 > self.t0:
            raise ValueError(f"segment [{self.t0}, {self.t1}] is empty")
        object.__setattr__(self, "data", np.asarray(self.data, dtype=float))

    @cached_property
    def _spline(self) -> CubicSpline | None:
        if len(self.data) < 2:
            return None
        ts = np.linspace(self.t0, self.t1, len(self.data))
        return CubicSpline(ts, self.data, axis=0)

    def values(self, t: float | NDArray) -> NDArray[np.float64]:
        """Interpolated raw samples at t (scalar or array)."""
        if self._spline is None:
            base = self.data[0]
            if np.ndim(t) == 0:
                return base
            return np.broadcast_to(base, np.shape(t) + base.shape).copy()
        return self._spline(t)


def _as_segments(segments) -> tuple[Segment, ...]:
    segs = tuple(segments)
    if not segs:
        raise ValueError("signal needs at least one segment")
    for prev, nxt in zip(segs, segs[1:]):
        if abs(nxt.t0 - prev.t1) > 1e-12 * max(1.0, abs(prev.t1)):
            raise ValueError(f"segments do not tile: gap between {prev.t1} and {nxt.t0}")
    return segs


class _SegmentedSignal:
    """Shared segment bookkeeping: lookup, horizon, periodic wrapping."""

    segments: tuple[Segment, ...]
    period: float | None

    @property
    def t_start(self) -> float:
        return self.segments[0].t0

    @property
    def horizon(self) -> float:
        return self.segments[-1].t1

    @cached_property
    def _starts(self) -> list[float]:
        return [s.t0 for s in self.segments]

    def _local(self, t: float) -> tuple[Segment, float]:
        if self.period is not None:
            t = self.t_start + (t - self.t_start) % self.period
        elif t < self.t_start - 1e-9 or t > self.horizon + 1e-9:
            raise ValueError(f"t={t} outside signal horizon [{self.t_start}, {self.horizon}]")
        idx = bisect_right(self._starts, t) - 1
        idx = min(max(idx, 0), len(self.segments) - 1)
        seg = self.segments[idx]
        return seg, min(max(t, seg.t0), seg.t1)

    def breakpoints(self, t0: float, t1: float) -> NDArray[np.float64]:
        """Segment boundaries (periodically unrolled) that fall inside (t0, t1)."""
        bounds = np.array([s.t0 for s in self.segments] + [self.horizon])
        if self.period is None:
            inner = bounds
        else:
            k0 = np.floor((t0 - self.t_start) / self.period)
            k1 = np.ceil((t1 - self.t_start) / self.period)
            shifts = np.arange(k0, k1 + 1)[:, None] * self.period
            inner = (bounds[None, :] + shifts).ravel()
        inner = inner[(inner > t0 + 1e-12) & (inner < t1 - 1e-12)]
        return np.unique(inner)


@dataclass(frozen=True)
class RankOneSignal(_SegmentedSignal):
    """Unit-vector signal c(t) defining the rank-one control S = cc^T.

    Fields:
        segments: ordered, gap-free segments; angle samples (dim 2) or
            unit-vector samples (dim n).
        dim: ambient dimension n >= 1.
        period: optional period for cyclic evaluation.
    """

    segments: tuple[Segment, ...] = field()
    dim: int = 2
    period: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", _as_segments(self.segments))
        for seg in self.segments:
            if seg.data.ndim == 1:
                if self.dim != 2:
                    raise ValueError("angle samples require dim == 2")
            elif seg.data.ndim == 2:
                if seg.data.shape[1] != self.dim:
                    raise ValueError("vector samples do not match dim")
                norms = np.linalg.norm(seg.data, axis=1)
                if np.max(np.abs(norms - 1.0)) > UNIT_TOL:
                    raise ValueError("vector samples must have unit norm")
            else:
                raise ValueError("rank-one segment data must be angles (m,) or vectors (m,n)")

    def c(self, t: float) -> NDArray[np.float64]:
        """Unit vector c(t)."""
        seg, tt = self._local(t)
        vals = seg.values(tt)
        if vals.ndim == 0:
            half = 0.5 * float(vals)
            return np.array([np.cos(half), np.sin(half)])
        v = np.asarray(vals, dtype=float)
        return v / np.linalg.norm(v)

    def c_many(self, ts: NDArray) -> NDArray[np.float64]:
        """Vectorized c over a time array, shape (len(ts), dim)."""
        out = np.empty((len(ts), self.dim))
        for i, t in enumerate(np.asarray(ts, dtype=float)):
            out[i] = self.c(t)
        return out

    def matrix(self, t: float) -> NDArray[np.float64]:
        """S(t) = c(t) c(t)^T."""
        v = self.c(t)
        return np.outer(v, v)

    def as_matrix_signal(self, samples_per_segment: int = 512) -> MatrixSignal:
        """Resample into an explicit MatrixSignal."""
        segs = []
        for seg in self.segments:
            m = 1 if len(seg.data) == 1 else samples_per_segment
            ts = np.linspace(seg.t0, seg.t1, max(m, 1)) if m > 1 else np.array([seg.t0])
            mats = np.stack([self.matrix(t) for t in ts])
            segs.append(Segment(seg.t0, seg.t1, mats))
        return MatrixSignal(tuple(segs), dim=self.dim, period=self.period)


@dataclass(frozen=True)
class MatrixSignal(_SegmentedSignal):
    """Sampled symmetric positive semi-definite matrix signal S(t).

    Every sample must be symmetric with eigenvalues >= -1e-10.
    """

    segments: tuple[Segment, ...] = field()
    dim: int = 2
    period: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", _as_segments(self.segments))
        for seg in self.segments:
            if seg.data.ndim != 3 or seg.data.shape[1:] != (self.dim, self.dim):
                raise ValueError("matrix segment data must have shape (m, n, n)")
            sym_err = np.max(np.abs(seg.data - np.swapaxes(seg.data, 1, 2)))
            if sym_err > 1e-9:
                raise ValueError(f"matrix samples not symmetric (max asymmetry {sym_err:.2e})")
            lo = np.min(np.linalg.eigvalsh(seg.data))
            if lo < -PSD_TOL:
                raise ValueError(f"matrix samples not PSD (min eigenvalue {lo:.2e})")

    def matrix(self, t: float) -> NDArray[np.float64]:
        seg, tt = self._local(t)
        m = np.asarray(seg.values(tt), dtype=float)
        return 0.5 * (m + m.T)

    def trace(self, t: float) -> float:
        return float(np.trace(self.matrix(t)))


@dataclass(frozen=True)
class PEWindowReport:
    """Windowed Gram eigenvalue check a*I <= int_t^{t+T} S <= b*I."""

    window_start: float
    gram_eigen_min: float
    gram_eigen_max: float
    satisfies: bool


def _piece_quadrature(signal, u0: float, u1: float, seg_len: float, subintervals: int):
    """Yield (node, weight) pairs of composite 5-point Gauss-Legendre on [u0, u1].

    The subinterval size is tied to the owning segment's length so that
    resolution matches the sample density regardless of how the window
    cuts the segment.
    """
    n_sub = max(1, int(np.ceil((u1 - u0) / seg_len * subintervals)))
    edges = np.linspace(u0, u1, n_sub + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return nodes, weights


def gram(signal: RankOneSignal | MatrixSignal, t0: float, t1: float,
         subintervals: int = 256) -> NDArray[np.float64]:
    """Windowed Gram matrix int_{t0}^{t1} S(tau) dtau.

    Composite Gauss-Legendre quadrature aligned to segment boundaries, so
    piecewise-constant signals integrate exactly and smooth segments get
    spectral accuracy.
    """
    if not t1 > t0:
        raise ValueError("need t0 < t1")
    if signal.period is None and (t0 < signal.t_start - 1e-9 or t1 > signal.horizon + 1e-9):
        raise ValueError("integration window outside the horizon of an aperiodic signal")
    cuts = np.concatenate([[t0], signal.breakpoints(t0, t1), [t1]])
    total = np.zeros((signal.dim, signal.dim))
    for u0, u1 in zip(cuts[:-1], cuts[1:]):
        seg, _ = signal._local(0.5 * (u0 + u1))
        nodes, weights = _piece_quadrature(signal, u0, u1, seg.t1 - seg.t0, subintervals)
        if isinstance(signal, RankOneSignal):
            cs = signal.c_many(nodes)
            total += np.einsum("k,ki,kj->ij", weights, cs, cs)
        else:
            mats = np.stack([signal.matrix(t) for t in nodes])
            total += np.einsum("k,kij->ij", weights, mats)
    return 0.5 * (total + total.T)


def verify_int(signal, a: float, b: float, T: float, tol: float = 1e-6) -> PEWindowReport:
    """Check a*I <= int_0^T S <= b*I on the leading window."""
    if not 0 < a <= b:
        raise ValueError("need 0 < a <= b")
    g = gram(signal, signal.t_start, signal.t_start + T)
    ev = np.linalg.eigvalsh(g)
    lo, hi = float(ev[0]), float(ev[-1])
    return PEWindowReport(signal.t_start, lo, hi, bool(a - tol <= lo and hi <= b + tol))


def verify_pe(signal, a: float, b: float, T: float, window_starts,
              tol: float = 1e-6) -> list[PEWindowReport]:
    """Windowed PE checks at the given start times."""
    if not 0 < a <= b:
        raise ValueError("need 0 < a <= b")
    reports = []
    for t in window_starts:
        if signal.period is None and t + T > signal.horizon + 1e-9:
            raise ValueError(f"window [{t}, {t + T}] exceeds horizon of aperiodic signal")
        g = gram(signal, t, t + T)
        ev = np.linalg.eigvalsh(g)
        lo, hi = float(ev[0]), float(ev[-1])
        reports.append(PEWindowReport(float(t), lo, hi, bool(a - tol <= lo and hi <= b + tol)))
    return reports


def normalize_trace(signal: MatrixSignal, a: float | None = None,
                    eps_rel: float = 1e-8, n_out: int = 2048) -> MatrixSignal:
    """Reparametrize time so the trace becomes constant, preserving the Gram.

    With F(t) = int_0^t Tr S, the new clock is s = T*F(t)/F(T) and the
    output is S(t(s)) * F(T) / (T * Tr S(t(s))), which has constant trace
    F(T)/T and the same integral over [0, T].  When `a` is given, the
    signal is first mixed as a/(a+eps) * (S + eps*I/T) with eps = eps_rel*a
    to keep the trace positive without lowering the Gram floor below a.
    """
    T0, T1 = signal.t_start, signal.horizon
    T = T1 - T0
    n = signal.dim

    if a is not None:
        eps = eps_rel * a
        mixed = []
        for seg in signal.segments:
            data = (a / (a + eps)) * (seg.data + (eps / T) * np.eye(n))
            mixed.append(Segment(seg.t0, seg.t1, data))
        signal = MatrixSignal(tuple(mixed), dim=n, period=signal.period)

    grid = np.linspace(T0, T1, n_out + 1)
    traces = np.array([signal.trace(t) for t in grid])
    if np.min(traces) <= 1e-300:
        raise ValueError("trace vanishes on the grid; normalize_trace needs Tr S > 0 a.e.")
    # cumulative trace mass F on the grid by per-cell Gauss-Legendre
    cell_mass = np.empty(n_out)
    for i in range(n_out):
        mid = 0.5 * (grid[i] + grid[i + 1])
        half = 0.5 * (grid[i + 1] - grid[i])
        nodes = mid + half * _GL_NODES
        cell_mass[i] = half * np.dot(_GL_WEIGHTS, [signal.trace(t) for t in nodes])
    F = np.concatenate([[0.0], np.cumsum(cell_mass)])
    total = F[-1]

    s_grid = np.linspace(0.0, T, n_out + 1)
    t_of_s = np.interp(s_grid * total / T, F, grid - T0) + T0
    mats = np.stack([
        signal.matrix(t) * total / (T * signal.trace(t)) for t in t_of_s
    ])
    seg = Segment(T0, T1, mats)
    return MatrixSignal((seg,), dim=n, period=signal.period)


def embed_signal(signal: MatrixSignal, m: int, a: float, T: float) -> MatrixSignal:
    """Block-diagonal extension diag(S, (a/T) I_{m-n}) into dimension m."""
    n = signal.dim
    if m < n:
        raise ValueError(f"target dimension {m} below signal dimension {n}")
    if m == n:
        return signal
    pad = (a / T) * np.eye(m - n)
    segs = []
    for seg in signal.segments:
        k = len(seg.data)
        out = np.zeros((k, m, m))
        out[:, :n, :n] = seg.data
        out[:, n:, n:] = pad
        segs.append(Segment(seg.t0, seg.t1, out))
    return MatrixSignal(tuple(segs), dim=m, period=signal.period)


def axis_hopping_control(a: float, T: float, n: int) -> MatrixSignal:
    """Piecewise-constant control (a n / T) e_j e_j^T on the j-th of n subintervals.

    Its Gram over [0, T] is a*I_n, and the trajectory started at e_1 stays
    at e_1 with cost exactly a.
    """
    if a <= 0 or T <= 0 or n < 1:
        raise ValueError("need a > 0, T > 0, n >= 1")
    segs = []
    for j in range(n):
        mat = np.zeros((1, n, n))
        mat[0, j, j] = a * n / T
        segs.append(Segment(j * T / n, (j + 1) * T / n, mat))
    return MatrixSignal(tuple(segs), dim=n, period=T)


def _angle_transform(sD: NDArray) -> tuple[float, float]:
    """Map the componentwise signs (s1, s2) of sigma*D to (mult, offset) with
    angle' = mult * angle + offset, acting on half-angle vectors."""
    s1, s2 = sD[0], sD[1]
    if s1 > 0 and s2 > 0:
        return 1.0, 0.0
    if s1 > 0 and s2 < 0:
        return -1.0, 0.0
    if s1 < 0 and s2 > 0:
        return -1.0, 2.0 * np.pi
    return 1.0, 2.0 * np.pi


def reflect_extend(c: RankOneSignal, D: NDArray, tol: float = 1e-6) -> RankOneSignal:
    """Extend c from [0, T] to a 2T-periodic signal by c_*(t) = sigma*D*c(t-T).

    D is a diagonal +-1 matrix matching the endpoint symmetry; the branch
    sigma in {+1, -1} is chosen so the extension is continuous at the seam
    (both signs describe the same rank-one control).  Raises if neither
    branch matches within tol.
    """
    D = np.asarray(D, dtype=float)
    diag = np.diag(D)
    if D.shape != (c.dim, c.dim) or np.max(np.abs(D - np.diag(diag))) > 0 \
            or np.max(np.abs(np.abs(diag) - 1.0)) > 1e-12:
        raise ValueError("D must be a diagonal +-1 matrix of the signal dimension")
    T0, T1 = c.t_start, c.horizon
    T = T1 - T0
    c0, cT = c.c(T0), c.c(T1)
    r_plus = float(np.linalg.norm(D @ c0 - cT))
    r_minus = float(np.linalg.norm(D @ c0 + cT))
    if min(r_plus, r_minus) > tol:
        raise ValueError(f"seam mismatch beyond tolerance: |Dc(0)-c(T)|={r_plus:.2e}, "
                         f"|Dc(0)+c(T)|={r_minus:.2e}")
    sigma = 1.0 if r_plus <= r_minus else -1.0
    sD = sigma * diag

    segs = list(c.segments)
    for seg in c.segments:
        if seg.data.ndim == 1:
            mult, off = _angle_transform(sD)
            data = mult * seg.data + off
        else:
            data = seg.data * sD[None, :]
        segs.append(Segment(seg.t0 + T, seg.t1 + T, data))
    return RankOneSignal(tuple(segs), dim=c.dim, period=2 * T)


def compose_block_control(S0: MatrixSignal, S1: MatrixSignal | None, T: float,
                          samples_per_segment: int = 512) -> MatrixSignal:
    """Time-compress two controls into complementary diagonal blocks.

    Output on [0, T]: 2*diag(S0(2t), 0) for t in [0, T/2] and
    2*diag(0, S1(2t - T)) for t in [T/2, T].  Gram over [0, T] is the
    block-diagonal combination of the input Grams.
    """
    n0 = S0.dim
    n1 = S1.dim if S1 is not None else 0
    n = n0 + n1
    segs = []
    for seg in S0.segments:
        k = 1 if len(seg.data) == 1 else samples_per_segment
        t0, t1 = seg.t0 / 2, seg.t1 / 2
        ts = np.linspace(seg.t0, seg.t1, k) if k > 1 else np.array([seg.t0])
        out = np.zeros((k, n, n))
        for i, u in enumerate(ts):
            out[i, :n0, :n0] = 2.0 * S0.matrix(u)
        segs.append(Segment(t0, t1, out))
    if S1 is not None:
        for seg in S1.segments:
            k = 1 if len(seg.data) == 1 else samples_per_segment
            t0, t1 = T / 2 + seg.t0 / 2, T / 2 + seg.t1 / 2
            ts = np.linspace(seg.t0, seg.t1, k) if k > 1 else np.array([seg.t0])
            out = np.zeros((k, n, n))
            for i, u in enumerate(ts):
                out[i, n0:, n0:] = 2.0 * S1.matrix(u)
            segs.append(Segment(t0, t1, out))
    return MatrixSignal(tuple(segs), dim=n)


def time_rescale(signal: MatrixSignal, lam: float,
                 samples_per_segment: int = 512) -> MatrixSignal:
    """Class-preserving time change S~(s) = lam * S(lam * s).

    Maps a signal with window bounds (a, b, T) to one with bounds
    (a, b, T/lam): the windowed Gram integrals are unchanged.
    """
    if lam <= 0:
        raise ValueError("need lam > 0")
    segs = []
    for seg in signal.segments:
        k = 1 if len(seg.data) == 1 else samples_per_segment
        ts = np.linspace(seg.t0, seg.t1, k) if k > 1 else np.array([seg.t0])
        data = np.stack([lam * signal.matrix(t) for t in ts])
        segs.append(Segment(seg.t0 / lam, seg.t1 / lam, data))
    period = signal.period / lam if signal.period is not None else None
    return MatrixSignal(tuple(segs), dim=signal.dim, period=period)


def signal_to_dict(signal: RankOneSignal | MatrixSignal) -> dict:
    """Serializable document {dim, period, segments: [{t0, t1, kind, data}]}."""
    segs = []
    for seg in signal.segments:
        if isinstance(signal, RankOneSignal):
            if seg.data.ndim != 1:
                raise ValueError("only angle-encoded rank-one signals serialize directly; "
                                 "convert vector signals with as_matrix_signal()")
            kind: Literal["angles", "matrices"] = "angles"
        else:
            kind = "matrices"
        segs.append({"t0": seg.t0, "t1": seg.t1, "kind": kind, "data": seg.data.tolist()})
    return {"dim": signal.dim, "period": signal.period, "segments": segs}


def signal_from_dict(doc: dict) -> RankOneSignal | MatrixSignal:
    kinds = {s["kind"] for s in doc["segments"]}
    if kinds == {"angles"}:
        segs = tuple(Segment(s["t0"], s["t1"], np.asarray(s["data"], dtype=float))
                     for s in doc["segments"])
        return RankOneSignal(segs, dim=doc["dim"], period=doc["period"])
    if kinds == {"matrices"}:
        segs = tuple(Segment(s["t0"], s["t1"], np.asarray(s["data"], dtype=float))
                     for s in doc["segments"])
        return MatrixSignal(segs, dim=doc["dim"], period=doc["period"])
    raise ValueError(f"unsupported or mixed segment kinds: {sorted(kinds)}")


def save_signal(signal, path: str) -> None:
    """Atomic JSON write (temp file then rename)."""
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(signal_to_dict(signal), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def load_signal(path: str) -> RankOneSignal | MatrixSignal:
    with open(path) as fh:
        return signal_from_dict(json.load(fh))
