"""Proximity and reflected-proximity operators.

For direction ``i`` the proximity operator is::

    P_i(u) = argmin_x f_i(x) + 1/2 ||A_i x - u||_E^2

and the reflected operator acting on the scaled state is::

    D_i(u) = 2 E^{1/2} A_i P_i(E^{-1/2} u) - u  -/+  E^{1/2} b

with ``-`` for direction 1 and ``+`` for direction 2.
"""

from collections import namedtuple
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from ._validation import as_vector, finite_or_none, is_diagonal, psd_tol
from .exceptions import (
    BreakpointAmbiguity,
    InvalidPiecewise,
    SingularSystem,
    UnsupportedCombination,
    ValidationError,
)
from .problem import PiecewiseLinear1DArray, Quadratic, WeightedL1

__all__ = [
    "ProxContext",
    "Segment",
    "StaircaseOperator",
    "make_context",
    "prox_point",
    "reflected_prox",
    "reflected_jacobian",
    "staircase_build",
    "staircase_slope",
    "coordinate_staircase",
]

JUNCTION_TOL = 1e-9


class ProxContext:
    """Operator pair ``(P_i, D_i)`` of one direction of a :class:`SplitProblem`.

    Factorisations are computed once, on construction.
    """

    def __init__(self, problem, i):
        if i not in (1, 2):
            raise ValueError("direction index must be 1 or 2")
        self.problem = problem
        self.i = i
        self.f = problem.f(i)
        self.A = problem.A(i)
        self.F = problem.E_half @ self.A
        self.sign = -1.0 if i == 1 else 1.0
        self.offset = self.sign * (problem.E_half @ problem.b)
        if isinstance(self.f, Quadratic):
            self.kind = "quadratic"
            K = self.f.Q + self.A.T @ problem.E @ self.A
            K = 0.5 * (K + K.T)
            w = np.linalg.eigvalsh(K)
            if w[0] <= psd_tol(K) * max(1.0, K.shape[0]):
                raise SingularSystem(
                    f"direction {i}: Q + A^T E A is singular (min eigenvalue {w[0]:.3e})")
            self._K = K
            self._factor = sla.cho_factor(K)
        elif isinstance(self.f, (WeightedL1, PiecewiseLinear1DArray)):
            A, E = self.A, problem.E
            if not (is_diagonal(A) and is_diagonal(E)) or np.any(np.diag(A) == 0):
                raise UnsupportedCombination(
                    f"direction {i}: {self.f.kind} needs a square diagonal A{i} with nonzero "
                    "diagonal and a diagonal E")
            self.kind = "separable"
            self.a = np.diag(A).copy()
            self.e = np.diag(E).copy()
            pw = self.f.as_piecewise() if isinstance(self.f, WeightedL1) else self.f
            self._pw = pw
            # optimality 0 in df(x) + e a (a x - u): breakpoint k is active when
            # e a u lies in [curv x_k + m_k, curv x_k + m_{k+1}]
            curv = self.e * self.a ** 2
            self._curv = curv
            self._lo = [c * xk + mk[:-1] for c, xk, mk in zip(curv, pw.breakpoints, pw.slopes)]
            self._hi = [c * xk + mk[1:] for c, xk, mk in zip(curv, pw.breakpoints, pw.slopes)]
        else:
            raise UnsupportedCombination(f"no proximity solver for {type(self.f).__name__}")

    @property
    def m(self):
        return self.problem.m

    def prox(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "quadratic":
            rhs = self.f.c + self.A.T @ (self.problem.E @ u)
            return sla.cho_solve(self._factor, rhs)
        if isinstance(self.f, WeightedL1):
            t = self.e * self.a * u
            return np.sign(t) * np.maximum(np.abs(t) - self.f.w, 0.0) / self._curv
        return self._prox_piecewise(u)

    def _prox_piecewise(self, u):
        t = self.e * self.a * u
        x = np.empty_like(t)
        pw = self._pw
        for j, tj in enumerate(t):
            xk, mk = pw.breakpoints[j], pw.slopes[j]
            k = int(np.searchsorted(self._hi[j], tj, side="left"))
            if k < xk.shape[0] and self._lo[j][k] <= tj:
                x[j] = xk[k]
            else:
                x[j] = (tj - mk[k]) / self._curv[j]
        return x

    def reflect(self, u):
        u = np.asarray(u, dtype=float)
        x = self.prox(self.problem.E_inv_half @ u)
        return 2.0 * (self.F @ x) - u + self.offset

    def jacobian(self, u=None):
        """Derivative of ``D_i``; constant for quadratics, diagonal for separable kinds.

        Raises :class:`BreakpointAmbiguity` when a coordinate of ``u`` sits on a
        staircase junction.
        """
        if self.kind == "quadratic":
            return 2.0 * self.F @ sla.cho_solve(self._factor, self.F.T) - np.eye(self.m)
        if u is None:
            raise ValueError("the derivative of a non-smooth operator depends on u")
        u = as_vector(u, "u", self.m)
        slopes = np.empty(self.m)
        bad = []
        for j in range(self.m):
            s = staircase_slope(coordinate_staircase(self, j), u[j], atol=JUNCTION_TOL)
            if isinstance(s, tuple):
                bad.append(j)
            else:
                slopes[j] = s
        if bad:
            raise BreakpointAmbiguity(
                f"coordinates {bad} lie within {JUNCTION_TOL} of a staircase junction", bad)
        return np.diag(slopes)


def make_context(problem, i):
    return ProxContext(problem, i)


def prox_point(ctx, u):
    """``argmin_x f_i(x) + 1/2 ||A_i x - u||_E^2``."""
    return ctx.prox(as_vector(u, "u", ctx.m))


def reflected_prox(ctx, u):
    return ctx.reflect(as_vector(u, "u", ctx.m))


def reflected_jacobian(ctx, u=None):
    return ctx.jacobian(u)


Segment = namedtuple("Segment", "lo hi slope intercept")


@dataclass(frozen=True, eq=False)
class StaircaseOperator:
    """Piecewise-linear reflected operator of a 1-D piecewise-linear function.

    ``segments`` tile the real line in increasing ``u``; on each segment
    ``D(u) = slope * u + intercept``.
    """

    segments: tuple
    breakpoints: np.ndarray
    slopes: np.ndarray
    a: float
    eps: float
    offset: float = 0.0

    @property
    def junctions(self):
        return np.array([s.hi for s in self.segments[:-1]])

    def _locate(self, u):
        return np.searchsorted(self.junctions, u, side="right")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        idx = self._locate(u)
        slope = np.array([s.slope for s in self.segments])[idx]
        icpt = np.array([s.intercept for s in self.segments])[idx]
        return slope * u + icpt

    def to_dict(self):
        return {
            "a": self.a,
            "eps": self.eps,
            "offset": self.offset,
            "breakpoints": self.breakpoints.tolist(),
            "slopes": self.slopes.tolist(),
            "segments": [
                {"lo": finite_or_none(s.lo), "hi": finite_or_none(s.hi),
                 "slope": s.slope, "intercept": s.intercept}
                for s in self.segments
            ],
        }


def staircase_build(breakpoints, slopes, a, eps, offset=0.0):
    """Build the staircase shape of ``D`` for ``f`` piecewise linear in one variable.

    A smooth piece with slope ``m_j`` maps ``u = s x + m_j / s`` to
    ``s x - m_j / s`` (``s = sqrt(eps) a``), a +1-sloped segment.  Each
    breakpoint ``x_k`` contributes the -1-sloped segment ``D(u) = 2 s x_k - u``
    between ``s x_k + m_{k-1}/s`` and ``s x_k + m_k/s``.
    """
    xk = np.asarray(breakpoints, dtype=float).reshape(-1)
    mk = np.asarray(slopes, dtype=float).reshape(-1)
    if mk.shape[0] != xk.shape[0] + 1:
        raise InvalidPiecewise("slope count must equal breakpoint count + 1")
    if np.any(np.diff(xk) <= 0):
        raise InvalidPiecewise("breakpoints must be strictly increasing")
    if np.any(np.diff(mk) < 0):
        raise InvalidPiecewise("slopes must be non-decreasing")
    if a == 0:
        raise ValidationError("a must be nonzero")
    if not eps > 0:
        raise ValidationError("eps must be positive")

    s = np.sqrt(eps) * a
    inf = np.inf
    segs = []
    edges = np.concatenate([[-inf], xk, [inf]])
    for j, m in enumerate(mk):
        ends = [s * edges[j] + m / s, s * edges[j + 1] + m / s]
        # s * (+-inf) is well defined; avoid inf - inf by construction
        lo, hi = min(ends), max(ends)
        segs.append(Segment(lo, hi, 1.0, -2.0 * m / s + offset))
    for k, x in enumerate(xk):
        ends = [s * x + mk[k] / s, s * x + mk[k + 1] / s]
        lo, hi = min(ends), max(ends)
        if hi > lo:
            segs.append(Segment(lo, hi, -1.0, 2.0 * s * x + offset))
    segs.sort(key=lambda sg: (sg.lo, sg.hi))
    merged = [segs[0]]
    for sg in segs[1:]:
        prev = merged[-1]
        if sg.slope == prev.slope and sg.intercept == prev.intercept:
            merged[-1] = Segment(prev.lo, sg.hi, prev.slope, prev.intercept)
        else:
            merged.append(sg)
    return StaircaseOperator(
        segments=tuple(merged),
        breakpoints=xk,
        slopes=mk,
        a=float(a),
        eps=float(eps),
        offset=float(offset),
    )


def staircase_slope(op, u, atol=1e-12):
    """Slope of the active segment, or ``(left, right)`` at a junction."""
    u = float(u)
    j = op.junctions
    if j.size:
        k = int(np.argmin(np.abs(j - u)))
        if abs(j[k] - u) <= atol * (1.0 + abs(u)):
            return (op.segments[k].slope, op.segments[k + 1].slope)
    return op.segments[int(op._locate(u))].slope


def coordinate_staircase(ctx, j):
    """Staircase of coordinate ``j`` for a separable direction."""
    if ctx.kind != "separable":
        raise UnsupportedCombination("staircases exist only for separable non-smooth directions")
    pw = ctx._pw
    return staircase_build(
        pw.breakpoints[j], pw.slopes[j], ctx.a[j], ctx.e[j], offset=ctx.offset[j])
