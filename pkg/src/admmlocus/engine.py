"""Relaxed ADMM in scaled-variable form and as a Douglas-Rachford state recursion.

Scaled updates, with relaxation ``q`` (``q = 1/2`` is plain ADMM)::

    x1+ = P1(A2 x2 + b - lt)
    y+  = 2q A1 x1+ + (1 - 2q)(A2 x2 + b)
    x2+ = P2(y+ - b + lt)
    lt+ = lt + y+ - A2 x2+ - b

The state ``z = E^{1/2}(lt + A2 x2)`` then follows
``z+ = (1 - q) z + q D1(D2(z))``.
"""

from dataclasses import dataclass, field, replace
import json
import weakref

import numpy as np

from ._validation import as_vector
from .exceptions import NonFinite, ValidationError
from .prox import make_context

__all__ = [
    "AdmmConfig",
    "AdmmState",
    "IterationRecord",
    "RunResult",
    "contexts",
    "state_from_z",
    "step_scaled",
    "step_unscaled",
    "step_dr",
    "recover_primal",
    "run",
]

_CONTEXTS = weakref.WeakKeyDictionary()


def contexts(p):
    """Prox contexts of both directions, built once per problem object."""
    ctx = _CONTEXTS.get(p)
    if ctx is None:
        ctx = (make_context(p, 1), make_context(p, 2))
        _CONTEXTS[p] = ctx
    return ctx


@dataclass(frozen=True)
class AdmmConfig:
    """Iteration settings.

    ``tol_primal=None`` disables the constraint-residual stop; ``tol_state``
    stops on ``||z+ - z||``.  ``seed`` is used only for ``z0="random"``.
    """

    q: float = 1.0
    max_iters: int = 1000
    tol_primal: float = None
    tol_state: float = 1e-10
    record_history: bool = False
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.q) or self.q == 0:
            raise ValidationError("q must be a finite nonzero real")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValidationError("max_iters must be an integer >= 1")
        for name in ("tol_primal", "tol_state"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ValidationError(f"{name} must be non-negative")


@dataclass(frozen=True, eq=False)
class AdmmState:
    z: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    y: np.ndarray
    lambda_tilde: np.ndarray
    iteration: int = 0


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    state_delta: float
    constraint_residual: float
    objective: float
    z: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {
            "iteration": self.iteration,
            "state_delta": self.state_delta,
            "constraint_residual": self.constraint_residual,
            "objective": self.objective,
        }


@dataclass(frozen=True, eq=False)
class RunResult:
    z: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    iterations: int
    reason: str
    history: list
    q: float

    @property
    def converged(self):
        return self.reason in ("state_tol", "primal_tol")

    def deltas(self):
        return np.array([r.state_delta for r in self.history])

    def to_dict(self, include_history=True):
        d = {
            "termination": self.reason,
            "converged": self.converged,
            "iterations": self.iterations,
            "q": self.q,
            "z": self.z.tolist(),
            "x1": self.x1.tolist(),
            "x2": self.x2.tolist(),
        }
        if include_history:
            d["history"] = [r.to_dict() for r in self.history]
        return d

    def to_json(self, **kwargs):
        kwargs.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kwargs)


def state_from_z(p, z, iteration=0) -> AdmmState:
    """Scaled-variable state matching a recursion state ``z``.

    ``x2 = P2(E^{-1/2} z)``, ``lt = E^{-1/2} z - A2 x2`` and ``y`` is set to
    ``A2 x2 + b``; ``x1`` is the value the next step will produce.
    """
    c1, c2 = contexts(p)
    z = as_vector(z, "z", p.m)
    w = p.E_inv_half @ z
    x2 = c2.prox(w)
    x1 = c1.prox(p.E_inv_half @ c2.reflect(z))
    return AdmmState(z=z.copy(), x1=x1, x2=x2, y=p.A2 @ x2 + p.b,
                     lambda_tilde=w - p.A2 @ x2, iteration=iteration)


def step_scaled(p, cfg: AdmmConfig, s: AdmmState) -> AdmmState:
    c1, c2 = contexts(p)
    q, b = cfg.q, p.b
    lt = s.lambda_tilde
    a2x2 = p.A2 @ s.x2
    x1 = c1.prox(a2x2 + b - lt)
    y = 2.0 * q * (p.A1 @ x1) + (1.0 - 2.0 * q) * (a2x2 + b)
    x2 = c2.prox(y - b + lt)
    lt_new = lt + y - p.A2 @ x2 - b
    z = p.E_half @ (y - b + lt)
    return AdmmState(z=z, x1=x1, x2=x2, y=y, lambda_tilde=lt_new, iteration=s.iteration + 1)


def step_unscaled(p, s: AdmmState) -> AdmmState:
    """One step of plain ADMM (no relaxation)."""
    c1, c2 = contexts(p)
    b, lt = p.b, s.lambda_tilde
    x1 = c1.prox(p.A2 @ s.x2 + b - lt)
    a1x1 = p.A1 @ x1
    x2 = c2.prox(a1x1 - b + lt)
    lt_new = lt + a1x1 - p.A2 @ x2 - b
    z = p.E_half @ (a1x1 - b + lt)
    return AdmmState(z=z, x1=x1, x2=x2, y=a1x1, lambda_tilde=lt_new, iteration=s.iteration + 1)


def step_dr(p, cfg: AdmmConfig, z):
    """``(1 - q) z + q D1(D2(z))``."""
    c1, c2 = contexts(p)
    z = np.asarray(z, dtype=float)
    return (1.0 - cfg.q) * z + cfg.q * c1.reflect(c2.reflect(z))


def recover_primal(p, z):
    """``x2 = P2(E^{-1/2} z)`` and ``x1 = P1(E^{-1/2} D2(z))``."""
    c1, c2 = contexts(p)
    z = as_vector(z, "z", p.m)
    x2 = c2.prox(p.E_inv_half @ z)
    x1 = c1.prox(p.E_inv_half @ c2.reflect(z))
    return x1, x2


def _initial_z(p, cfg, z0):
    if z0 is None:
        return np.zeros(p.m)
    if isinstance(z0, str):
        if z0 != "random":
            raise ValidationError(f"unknown initialisation {z0!r}")
        return np.random.default_rng(cfg.seed).standard_normal(p.m)
    return as_vector(z0, "z0", p.m).copy()


def run(p, cfg: AdmmConfig, z0=None) -> RunResult:
    """Iterate :func:`step_dr` until a tolerance or ``max_iters`` is reached.

    Parameters
    ----------
    z0 : array_like, "random" or None
        Initial state; zeros by default.

    Raises
    ------
    NonFinite
        When an iterate contains NaN or Inf.
    """
    z = _initial_z(p, cfg, z0)
    history = []
    need_primal = cfg.record_history or cfg.tol_primal is not None
    reason = "max_iters"
    k = 0
    for k in range(1, int(cfg.max_iters) + 1):
        z_new = step_dr(p, cfg, z)
        if not np.all(np.isfinite(z_new)):
            raise NonFinite(f"iterate {k} is not finite", k)
        delta = float(np.linalg.norm(z_new - z))
        if not np.isfinite(delta):
            raise NonFinite(f"iterate {k} overflowed", k)
        z = z_new
        res = None
        if need_primal:
            x1, x2 = recover_primal(p, z)
            res = float(np.linalg.norm(p.constraint_residual(x1, x2)))
            if cfg.record_history:
                history.append(IterationRecord(k, delta, res, p.objective(x1, x2), z.copy()))
        if delta <= cfg.tol_state:
            reason = "state_tol"
            break
        if cfg.tol_primal is not None and res <= cfg.tol_primal:
            reason = "primal_tol"
            break
    x1, x2 = recover_primal(p, z)
    return RunResult(z=z, x1=x1, x2=x2, iterations=k, reason=reason, history=history, q=cfg.q)


def with_q(cfg: AdmmConfig, q) -> AdmmConfig:
    return replace(cfg, q=q)
