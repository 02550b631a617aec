"""Weighted Lasso benchmark: instance generation, locus prediction, measured rates.

The problem ``min 1/2 ||Omega x - o||^2 + ||w o x||_1`` is split with
``A1 = A2 = I``, ``b = 0`` and ``E = eps I``.  Direction 1 then has slopes
``h(lambda / eps)`` for the eigenvalues ``lambda`` of ``Omega^T Omega``, and
direction 2 (the l1 term) has slopes ``+1`` or ``-1``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from .bounds import AlphaBox, h_map
from .engine import AdmmConfig, contexts, run
from .exceptions import InsufficientHistory, ValidationError
from .locus import LocusParams, locus_contains, locus_params, map_to_R, optimal_q, rho_max
from .problem import Quadratic, SplitProblem, WeightedL1

__all__ = [
    "LassoInstance",
    "LocalSpectrum",
    "RateReport",
    "gen_lasso",
    "lasso_levels",
    "lasso_bounds",
    "fit_rate",
    "local_jacobian",
    "local_jacobian_eigs",
    "lasso_experiment",
]

DELTA_FLOOR = 1e-13
MIN_HISTORY = 20


@dataclass(frozen=True, eq=False)
class LassoInstance:
    Omega: sparse.csr_matrix
    o: np.ndarray
    w: np.ndarray
    eps: float = 1.0
    seed: int = None

    @property
    def rows(self):
        return self.Omega.shape[0]

    @property
    def cols(self):
        return self.Omega.shape[1]

    @cached_property
    def gram(self):
        return (self.Omega.T @ self.Omega).toarray()

    @cached_property
    def problem(self) -> SplitProblem:
        n = self.cols
        eye = np.eye(n)
        f1 = Quadratic(self.gram, self.Omega.T @ self.o, const=0.5 * float(self.o @ self.o))
        return SplitProblem(f1=f1, f2=WeightedL1(self.w), A1=eye, A2=eye,
                            b=np.zeros(n), E=self.eps * eye)

    def eig_range(self):
        lam = np.linalg.eigvalsh(self.gram)
        return float(lam[0]), float(lam[-1])


def gen_lasso(rows=300, cols=200, nnz_per_row=10, eps=1.0, seed=0) -> LassoInstance:
    """Random sparse weighted Lasso instance.

    Every row of ``Omega`` has ``nnz_per_row`` standard normal entries in
    distinct random columns; ``o`` is standard normal and ``w`` is uniform
    on ``[0, 1]``.
    """
    if rows < 1 or cols < 1:
        raise ValidationError("rows and cols must be positive")
    if not 1 <= nnz_per_row <= cols:
        raise ValidationError("nnz_per_row must lie in [1, cols]")
    if not eps > 0:
        raise ValidationError("eps must be positive")
    rng = np.random.default_rng(seed)
    idx = np.argsort(rng.random((rows, cols)), axis=1)[:, :nnz_per_row]
    idx.sort(axis=1)
    vals = rng.standard_normal((rows, nnz_per_row))
    indptr = np.arange(0, rows * nnz_per_row + 1, nnz_per_row)
    Omega = sparse.csr_matrix((vals.ravel(), idx.ravel(), indptr), shape=(rows, cols))
    o = rng.standard_normal(rows)
    w = rng.uniform(0.0, 1.0, cols)
    return LassoInstance(Omega=Omega, o=o, w=w, eps=float(eps), seed=seed)


def lasso_levels(lam_min, lam_max, eps=1.0):
    """``(p_bar1, n_bar1, p_low1, n_low1)`` of the quadratic direction."""
    hi, lo = h_map(lam_min / eps), h_map(lam_max / eps)
    return max(hi, 0.0), max(-lo, 0.0), max(lo, 0.0), max(-hi, 0.0)


def lasso_bounds(inst: LassoInstance):
    """Slope box and locus constants of a Lasso instance.

    Returns
    -------
    box : AlphaBox
    lp : LocusParams
    """
    lam_min, lam_max = inst.eig_range()
    pb1, nb1, pl1, nl1 = lasso_levels(lam_min, lam_max, inst.eps)
    box = AlphaBox(n_bar=(nb1, 1.0), n_low=(nl1, 0.0), p_low=(pl1, 0.0), p_bar=(pb1, 1.0))
    return box, locus_params(box)


def fit_rate(history) -> float:
    """Geometric rate fitted to the tail of the step sizes ``||z_k - z_{k-1}||``.

    Uses the steps before the first one at or below ``1e-13`` and fits a
    least-squares line to ``log delta`` over the last third of them.

    Parameters
    ----------
    history : sequence of IterationRecord or of floats
    """
    d = np.array([getattr(r, "state_delta", r) for r in history], dtype=float)
    bad = np.flatnonzero(~(d > DELTA_FLOOR))
    if bad.size:
        d = d[:bad[0]]
    if d.size < MIN_HISTORY:
        raise InsufficientHistory(
            f"need {MIN_HISTORY} steps above {DELTA_FLOOR:g}, have {d.size}")
    tail = d[d.size - max(d.size // 3, 2):]
    k = np.arange(tail.size, dtype=float)
    slope = np.polyfit(k, np.log(tail), 1)[0]
    return float(np.exp(slope))


def local_jacobian(p: SplitProblem, cfg: AdmmConfig, z_star):
    """Jacobian ``(1 - q) I + q J1 J2`` of the recursion at ``z_star``.

    ``J2`` is read from the staircase of the non-smooth direction at
    ``z_star`` and ``J1`` from the quadratic direction at ``D2(z_star)``.

    Returns
    -------
    N, R : ndarray
        ``J1 J2`` and the relaxed matrix.
    """
    c1, c2 = contexts(p)
    z_star = np.asarray(z_star, dtype=float)
    J2 = c2.jacobian(z_star)
    J1 = c1.jacobian(c2.reflect(z_star)) if c1.kind == "separable" else c1.jacobian()
    N = J1 @ J2
    return N, (1.0 - cfg.q) * np.eye(p.m) + cfg.q * N


@dataclass(frozen=True, eq=False)
class LocalSpectrum:
    eig_N: np.ndarray
    eig_R: np.ndarray

    @property
    def radius(self):
        return float(np.max(np.abs(self.eig_R)))


def local_jacobian_eigs(p: SplitProblem, cfg: AdmmConfig, z_star) -> LocalSpectrum:
    """Eigenvalues of the local iteration matrix at a limit point.

    Raises
    ------
    BreakpointAmbiguity
        If a coordinate sits on a staircase junction.
    """
    N, R = local_jacobian(p, cfg, z_star)
    return LocalSpectrum(eig_N=np.linalg.eigvals(N), eig_R=np.linalg.eigvals(R))


@dataclass(frozen=True, eq=False)
class RateReport:
    """Predicted versus measured convergence of one Lasso run."""

    empirical_rate: float
    rho_max: float
    mu: float
    q: float
    q_opt: float
    lam_min: float
    lam_max: float
    lam_star_max: float
    local: LocalSpectrum
    params: LocusParams
    iterations: int
    converged: bool
    contained: bool
    rate_ok: bool
    rate_slack: float = 0.02
    history: list = field(default=None, repr=False)

    def to_dict(self, include_history=False):
        d = {
            "empirical_rate": self.empirical_rate,
            "rho_max": self.rho_max,
            "mu": self.mu,
            "q": self.q,
            "q_opt": self.q_opt,
            "lam_min": self.lam_min,
            "lam_max": self.lam_max,
            "lam_star_max": self.lam_star_max,
            "iterations": self.iterations,
            "converged": self.converged,
            "locus": self.params.to_dict(),
            "local_eigs": [{"re": float(v.real), "im": float(v.imag)} for v in self.local.eig_R],
            "checks": {"contained": self.contained, "rate_ok": self.rate_ok,
                       "rate_slack": self.rate_slack},
        }
        if include_history and self.history is not None:
            d["history"] = [r.to_dict() for r in self.history]
        return d


def lasso_experiment(inst: LassoInstance, q=1.0, max_iters=20000, tol_state=1e-12,
                     tol=1e-8, rate_slack=0.02) -> RateReport:
    """Run the solver to its limit and compare the measured rate with the locus bound."""
    p = inst.problem
    cfg = AdmmConfig(q=q, max_iters=max_iters, tol_state=tol_state, record_history=True)
    res = run(p, cfg)
    box, lp = lasso_bounds(inst)
    lam_min, lam_max = inst.eig_range()
    loc = local_jacobian_eigs(p, cfg, res.z)
    r_locus = map_to_R(lp, q)
    contained = all(locus_contains(lp, v, tol) for v in loc.eig_N) and \
        all(r_locus.contains(v, tol) for v in loc.eig_R)
    rate = fit_rate(res.history)
    rmax = float(rho_max(lp, q))
    mu1 = max(box.n_bar[0], box.p_bar[0])
    mu = (1.0 - q) + q * mu1  # direction 2 has unit Lipschitz constant
    return RateReport(
        empirical_rate=rate, rho_max=rmax, mu=float(mu), q=float(q),
        q_opt=optimal_q(lp).q, lam_min=lam_min, lam_max=lam_max,
        lam_star_max=loc.radius, local=loc, params=lp, iterations=res.iterations,
        converged=res.converged, contained=bool(contained),
        rate_ok=bool(rate <= rmax + rate_slack), rate_slack=rate_slack, history=res.history)
