"""Two-block split problems and the small function library they are built from.

A :class:`SplitProblem` describes::

    minimize   f1(x1) + f2(x2)
    subject to A1 x1 = A2 x2 + b

with an augmentation matrix ``E`` (symmetric positive definite) weighting the
quadratic penalty of the augmented Lagrangian.
"""

from dataclasses import dataclass
from functools import cached_property
import json

import numpy as np

from ._validation import (
    as_matrix,
    as_vector,
    check_square,
    frozen,
    is_symmetric,
    min_eig,
    psd_tol,
    sym_sqrt,
)
from .exceptions import InvalidPiecewise, ValidationError

__all__ = [
    "SeparableFunction",
    "Quadratic",
    "WeightedL1",
    "PiecewiseLinear1DArray",
    "CurvatureBounds",
    "SplitProblem",
    "curvature_bounds",
    "validate_problem",
    "function_from_dict",
    "problem_from_dict",
    "load_problem",
]


class SeparableFunction:
    """Common interface of the supported function kinds."""

    kind = None

    @property
    def dim(self):
        raise NotImplementedError

    def __call__(self, x):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Quadratic(SeparableFunction):
    """``f(x) = 1/2 x^T Q x - c^T x + const``."""

    Q: np.ndarray
    c: np.ndarray
    const: float = 0.0

    kind = "quadratic"

    def __post_init__(self):
        Q = check_square(as_matrix(self.Q, "Q"), "Q")
        if not is_symmetric(Q):
            raise ValidationError("Q must be symmetric")
        c = as_vector(self.c, "c", Q.shape[0])
        object.__setattr__(self, "Q", frozen(0.5 * (Q + Q.T)))
        object.__setattr__(self, "c", frozen(c))
        object.__setattr__(self, "const", float(self.const))

    @property
    def dim(self):
        return self.Q.shape[0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q @ x - self.c @ x + self.const)

    def to_dict(self):
        return {"kind": self.kind, "Q": self.Q.tolist(), "c": self.c.tolist(),
                "const": self.const}


@dataclass(frozen=True, eq=False)
class WeightedL1(SeparableFunction):
    """``f(x) = sum_j w_j |x_j|`` with non-negative weights."""

    w: np.ndarray

    kind = "weighted_l1"

    def __post_init__(self):
        w = as_vector(self.w, "w")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValidationError("WeightedL1 weights must be finite and non-negative")
        object.__setattr__(self, "w", frozen(w))

    @property
    def dim(self):
        return self.w.shape[0]

    def __call__(self, x):
        return float(np.sum(self.w * np.abs(np.asarray(x, dtype=float))))

    def as_piecewise(self):
        """The same function written as per-coordinate breakpoints and slopes."""
        return PiecewiseLinear1DArray(
            breakpoints=[[0.0]] * self.dim,
            slopes=[[-wj, wj] for wj in self.w],
        )

    def to_dict(self):
        return {"kind": self.kind, "w": self.w.tolist()}


@dataclass(frozen=True, eq=False)
class PiecewiseLinear1DArray(SeparableFunction):
    """Sum of convex piecewise-linear functions, one per coordinate.

    Coordinate ``j`` has breakpoints ``x_1 < ... < x_K`` and slopes
    ``m_0 <= ... <= m_K``; ``m_0`` applies left of ``x_1``.  The function is
    normalised so that ``f_j(x) = m_0 x + sum_k (m_k - m_{k-1}) max(x - x_k, 0)``.
    """

    breakpoints: tuple
    slopes: tuple

    kind = "piecewise_linear"

    def __post_init__(self):
        if len(self.breakpoints) != len(self.slopes):
            raise InvalidPiecewise("need one breakpoint list and one slope list per coordinate")
        bps, sls = [], []
        for j, (xk, mk) in enumerate(zip(self.breakpoints, self.slopes)):
            xk = np.asarray(xk, dtype=float).reshape(-1)
            mk = np.asarray(mk, dtype=float).reshape(-1)
            if mk.shape[0] != xk.shape[0] + 1:
                raise InvalidPiecewise(
                    f"coordinate {j}: slope count must equal breakpoint count + 1")
            if np.any(np.diff(xk) <= 0):
                raise InvalidPiecewise(f"coordinate {j}: breakpoints must be strictly increasing")
            if np.any(np.diff(mk) < 0):
                raise InvalidPiecewise(f"coordinate {j}: slopes must be non-decreasing")
            if not (np.all(np.isfinite(xk)) and np.all(np.isfinite(mk))):
                raise InvalidPiecewise(f"coordinate {j}: non-finite breakpoint or slope")
            bps.append(frozen(xk))
            sls.append(frozen(mk))
        object.__setattr__(self, "breakpoints", tuple(bps))
        object.__setattr__(self, "slopes", tuple(sls))

    @property
    def dim(self):
        return len(self.breakpoints)

    def __call__(self, x):
        x = as_vector(x, "x", self.dim)
        total = 0.0
        for xj, xk, mk in zip(x, self.breakpoints, self.slopes):
            total += mk[0] * xj + np.sum(np.diff(mk) * np.maximum(xj - xk, 0.0))
        return float(total)

    def to_dict(self):
        return {
            "kind": self.kind,
            "breakpoints": [b.tolist() for b in self.breakpoints],
            "slopes": [s.tolist() for s in self.slopes],
        }


@dataclass(frozen=True, eq=False)
class CurvatureBounds:
    """Strong-convexity bound ``C`` and smoothness bound ``S`` of a function.

    ``C_zero`` records that ``C`` is exactly zero; ``S_infinite`` records an
    unbounded smoothness constant, in which case ``S`` is ``None``.
    """

    C: np.ndarray
    S: np.ndarray = None
    C_zero: bool = False
    S_infinite: bool = False

    def __post_init__(self):
        C = check_square(as_matrix(self.C, "C"), "C")
        object.__setattr__(self, "C", frozen(0.5 * (C + C.T)))
        if self.S_infinite:
            object.__setattr__(self, "S", None)
        else:
            if self.S is None:
                raise ValidationError("S is required unless S_infinite is set")
            S = check_square(as_matrix(self.S, "S"), "S")
            if S.shape != C.shape:
                raise ValidationError("S and C must have the same shape")
            object.__setattr__(self, "S", frozen(0.5 * (S + S.T)))
        object.__setattr__(self, "C_zero", bool(self.C_zero or not np.any(self.C)))

    @classmethod
    def smooth(cls, C, S):
        return cls(C=C, S=S)

    @classmethod
    def nonsmooth(cls, C):
        return cls(C=C, S=None, S_infinite=True)

    @property
    def dim(self):
        return self.C.shape[0]

    def is_ordered(self, tol=None):
        """True when ``S - C`` is positive semidefinite (always, if ``S`` is infinite)."""
        if self.S_infinite:
            return True
        tol = psd_tol(self.S, self.C) if tol is None else tol
        return min_eig(self.S - self.C) >= -tol


def curvature_bounds(f):
    """Curvature bounds of a library function.

    Quadratics have ``C = S = Q``; the piecewise-linear kinds have zero
    curvature almost everywhere and an unbounded second derivative at their
    breakpoints, so ``C = 0`` and ``S`` is infinite.
    """
    if isinstance(f, Quadratic):
        return CurvatureBounds(C=f.Q, S=f.Q)
    if isinstance(f, (WeightedL1, PiecewiseLinear1DArray)):
        n = f.dim
        return CurvatureBounds(C=np.zeros((n, n)), S=None, C_zero=True, S_infinite=True)
    raise TypeError(f"unsupported function type {type(f).__name__}")


@dataclass(frozen=True, eq=False)
class SplitProblem:
    f1: SeparableFunction
    f2: SeparableFunction
    A1: np.ndarray
    A2: np.ndarray
    b: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        A1 = as_matrix(self.A1, "A1")
        A2 = as_matrix(self.A2, "A2")
        E = check_square(as_matrix(self.E, "E"), "E")
        b = as_vector(self.b, "b")
        for name, val in (("A1", A1), ("A2", A2), ("b", b), ("E", E)):
            object.__setattr__(self, name, frozen(val))

    @property
    def m(self):
        return self.b.shape[0]

    @property
    def n1(self):
        return self.A1.shape[1]

    @property
    def n2(self):
        return self.A2.shape[1]

    def f(self, i):
        return self.f1 if i == 1 else self.f2

    def A(self, i):
        return self.A1 if i == 1 else self.A2

    @cached_property
    def _E_roots(self):
        return sym_sqrt(self.E)

    @property
    def E_half(self):
        return self._E_roots[0]

    @property
    def E_inv_half(self):
        return self._E_roots[1]

    def objective(self, x1, x2):
        return self.f1(x1) + self.f2(x2)

    def constraint_residual(self, x1, x2):
        return self.A1 @ x1 - self.A2 @ x2 - self.b

    def to_dict(self):
        return {
            "A1": self.A1.tolist(),
            "A2": self.A2.tolist(),
            "b": self.b.tolist(),
            "E": self.E.tolist(),
            "f1": self.f1.to_dict(),
            "f2": self.f2.to_dict(),
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def validate_problem(p):
    """List the violated invariants of a problem; an empty list means valid."""
    issues = []
    m = p.b.shape[0]
    if p.E.shape != (m, m):
        issues.append(f"dimension mismatch: E has shape {p.E.shape}, expected ({m}, {m})")
    for i in (1, 2):
        A, f = p.A(i), p.f(i)
        if A.shape[0] != m:
            issues.append(f"dimension mismatch: A{i} has {A.shape[0]} rows, expected {m}")
        if A.shape[1] != f.dim:
            issues.append(
                f"dimension mismatch: A{i} has {A.shape[1]} columns but f{i} has dimension {f.dim}")
    if p.E.shape[0] == p.E.shape[1]:
        if not is_symmetric(p.E):
            issues.append("E not symmetric")
        elif min_eig(p.E) <= psd_tol(p.E):
            issues.append("E not positive definite")
    if issues:
        return issues
    for i in (1, 2):
        A = p.A(i)
        cb = curvature_bounds(p.f(i))
        if not cb.is_ordered():
            issues.append(f"f{i}: S not >= C")
        M = A.T @ p.E @ A
        # g_i = f_i + 1/2 ||x||_M^2 must be convex
        if min_eig(cb.C + M) < -psd_tol(cb.C, M):
            issues.append(f"f{i} + q_M{i} not convex")
    return issues


def function_from_dict(d):
    kind = d.get("kind")
    if kind == "quadratic":
        return Quadratic(Q=d["Q"], c=d["c"], const=d.get("const", 0.0))
    if kind == "weighted_l1":
        return WeightedL1(w=d["w"])
    if kind == "piecewise_linear":
        return PiecewiseLinear1DArray(breakpoints=d["breakpoints"], slopes=d["slopes"])
    raise ValidationError(f"unknown function kind {kind!r}")


def problem_from_dict(d):
    missing = [k for k in ("A1", "A2", "b", "E", "f1", "f2") if k not in d]
    if missing:
        raise ValidationError(f"problem document is missing keys {missing}")
    return SplitProblem(
        f1=function_from_dict(d["f1"]),
        f2=function_from_dict(d["f2"]),
        A1=d["A1"],
        A2=d["A2"],
        b=d["b"],
        E=d["E"],
    )


def load_problem(path_or_file):
    if hasattr(path_or_file, "read"):
        return problem_from_dict(json.load(path_or_file))
    with open(path_or_file) as fh:
        return problem_from_dict(json.load(fh))
