"""Lipschitz bounds of the reflected operators and contraction factors.

For a direction with curvature bounds ``C <= Hess f <= S`` the derivative of
``D_i`` is sandwiched between ``L_i = V_i^T diag(ell_i) V_i`` and
``U_i = V_i^T diag(nu_i) V_i`` with ``ell = h(s~)``, ``nu = h(c~)`` and
``h(x) = (1 - x) / (1 + x)``.  Directions outside the range of ``E^{1/2} A_i``
contribute eigenvalue ``-1``.

The iteration matrix of the relaxed recursion is::

    R(alpha) = (1 - q) I + q V1^T diag(alpha1) V1 V2^T diag(alpha2) V2

with each ``alpha_i`` ranging over the box ``[ell_i, nu_i]``.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

from ._validation import finite_or_none
from .exceptions import NonCommuting, ValidationError
from .problem import CurvatureBounds, Quadratic, SplitProblem, curvature_bounds

__all__ = [
    "h_map",
    "DirectionModel",
    "SpectralModel",
    "DirectionSpectrum",
    "BoundSpectrum",
    "AlphaBox",
    "JointBound",
    "build_spectral_model",
    "bound_spectrum",
    "mu_single",
    "mu_separable",
    "mu_joint",
    "rho_joint",
    "n_matrix",
    "r_matrix",
    "optimal_scalar_tuning",
    "scalar_example_spectrum",
    "contraction_report",
]

PINV_RTOL = 1e-12
EXACT_LIMIT = 16
N_STARTS = 32
N_SAMPLES = 1024
_CHUNK = 2048


def h_map(x):
    """``h(x) = (1 - x) / (1 + x)`` extended with ``h(inf) = -1`` and ``h(-1) = inf``.

    Accepts scalars or arrays; a scalar input gives a Python float.
    """
    arr = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (1.0 - arr) / (1.0 + arr)
    out = np.where(np.isposinf(arr), -1.0, out)
    out = np.where(arr == -1.0, np.inf, out)
    if np.any(arr < -1.0):
        raise ValidationError("h is defined for x >= -1 only")
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class DirectionModel:
    """Normalised curvature data of one direction.

    ``St`` is ``None`` when the smoothness bound is infinite.  ``U_r`` and
    ``W_r`` hold the leading singular vectors of ``F = E^{1/2} A`` so that
    ``Ft = U_r W_r^T`` and ``M^{-1/2} = W_r diag(1/sv) W_r^T``.
    """

    i: int
    F: np.ndarray
    M: np.ndarray
    Ft: np.ndarray
    St: np.ndarray
    Ct: np.ndarray
    rank: int
    sv: np.ndarray
    U_r: np.ndarray
    U_perp: np.ndarray
    W_r: np.ndarray
    bounds: CurvatureBounds

    @property
    def m(self):
        return self.F.shape[0]

    @property
    def S_infinite(self):
        return self.bounds.S_infinite

    @property
    def projector(self):
        return self.Ft @ self.Ft.T


@dataclass(frozen=True, eq=False)
class SpectralModel:
    d1: DirectionModel
    d2: DirectionModel

    def __getitem__(self, i):
        return self.d1 if i == 1 else self.d2

    @property
    def m(self):
        return self.d1.m


def _direction_model(i, F, cb):
    m, n = F.shape
    U, sv, Wt = np.linalg.svd(F, full_matrices=True)
    r = int(np.sum(sv > PINV_RTOL * sv[0])) if sv.size and sv[0] > 0 else 0
    U_r, U_perp, W_r = U[:, :r], U[:, r:], Wt[:r].T
    sv_r = sv[:r]
    Mih = (W_r / sv_r) @ W_r.T
    if cb.dim != n:
        raise ValidationError(f"direction {i}: curvature bounds have dimension {cb.dim}, expected {n}")
    Ct = Mih @ cb.C @ Mih
    St = None if cb.S_infinite else Mih @ cb.S @ Mih
    return DirectionModel(
        i=i, F=F, M=F.T @ F, Ft=U_r @ W_r.T, St=St, Ct=Ct, rank=r, sv=sv_r,
        U_r=U_r, U_perp=U_perp, W_r=W_r, bounds=cb)


def build_spectral_model(p: SplitProblem, bounds=None) -> SpectralModel:
    """Normalise the curvature bounds of both directions.

    Parameters
    ----------
    p : SplitProblem
    bounds : pair of CurvatureBounds, optional
        Overrides ``curvature_bounds(p.f1)``, ``curvature_bounds(p.f2)``;
        useful for looser (e.g. diagonal) bounds or for functions whose
        curvature is only known through bounds.
    """
    if bounds is None:
        bounds = (curvature_bounds(p.f1), curvature_bounds(p.f2))
    dirs = []
    for i, cb in zip((1, 2), bounds):
        F = p.E_half @ p.A(i)
        dirs.append(_direction_model(i, F, cb))
    return SpectralModel(*dirs)


@dataclass(frozen=True, eq=False)
class DirectionSpectrum:
    """``ell``, ``nu`` and the rows-as-eigenvectors basis ``V`` of one direction."""

    ell: np.ndarray
    nu: np.ndarray
    V: np.ndarray
    kernel_count: int

    @property
    def L(self):
        return (self.V.T * self.ell) @ self.V

    @property
    def U(self):
        return (self.V.T * self.nu) @ self.V

    def to_dict(self):
        return {
            "ell": [finite_or_none(v) for v in self.ell],
            "nu": [finite_or_none(v) for v in self.nu],
            "kernel_count": self.kernel_count,
        }


@dataclass(frozen=True, eq=False)
class BoundSpectrum:
    s1: DirectionSpectrum
    s2: DirectionSpectrum

    def __getitem__(self, i):
        return self.s1 if i == 1 else self.s2

    @property
    def m(self):
        return self.s1.V.shape[0]

    def L(self, i):
        return self[i].L

    def U(self, i):
        return self[i].U

    def to_dict(self):
        return {"direction1": self.s1.to_dict(), "direction2": self.s2.to_dict()}


def _commutation_gap(d: DirectionModel):
    if d.St is None or d.rank == 0:
        return 0.0, 0.0
    cb = d.bounds
    Mp = (d.W_r / d.sv ** 2) @ d.W_r.T
    a = cb.S @ Mp @ cb.C
    gap = np.linalg.norm(a - a.T)  # C M+ S is the transpose of S M+ C
    scale = np.linalg.norm(cb.S) * np.linalg.norm(Mp) * np.linalg.norm(cb.C)
    return gap, scale


def _joint_eigh(Cr, Sr, tol=1e-9):
    """Eigenbasis of ``Cr`` refined within repeated eigenvalues by ``Sr``."""
    c, Q = np.linalg.eigh(Cr)
    if Sr is None or c.size == 0:
        return c, Q
    Q = Q.copy()
    start = 0
    scale = 1.0 + np.max(np.abs(c))
    while start < c.size:
        stop = start + 1
        while stop < c.size and c[stop] - c[start] <= tol * scale:
            stop += 1
        if stop - start > 1:
            blk = Q[:, start:stop]
            _, R = np.linalg.eigh(blk.T @ Sr @ blk)
            Q[:, start:stop] = blk @ R
        start = stop
    return c, Q


def _direction_spectrum(d: DirectionModel, tol):
    gap, scale = _commutation_gap(d)
    if gap > tol * max(1.0, scale):
        raise NonCommuting(
            f"direction {d.i}: S M^+ C - C M^+ S has norm {gap:.3e}; "
            "use diagonal curvature bounds instead")
    Wr, r = d.W_r, d.rank
    Cr = Wr.T @ d.Ct @ Wr
    Cr = 0.5 * (Cr + Cr.T)
    Sr = None
    if d.St is not None:
        Sr = Wr.T @ d.St @ Wr
        Sr = 0.5 * (Sr + Sr.T)
    c, Q = _joint_eigh(Cr, Sr)
    nu = h_map(np.maximum(c, -1.0)) if r else np.empty(0)
    if Sr is None:
        ell = -np.ones(r)
    else:
        s = np.einsum("ij,jk,ki->i", Q.T, Sr, Q)
        ell = h_map(np.maximum(s, -1.0)) if r else np.empty(0)
    kern = d.m - r
    V = np.vstack([(d.U_r @ Q).T, d.U_perp.T])
    ell = np.concatenate([np.atleast_1d(ell), -np.ones(kern)])
    nu = np.concatenate([np.atleast_1d(nu), -np.ones(kern)])
    return DirectionSpectrum(ell=ell, nu=nu, V=V, kernel_count=kern)


def bound_spectrum(sm: SpectralModel, tol=1e-9) -> BoundSpectrum:
    """Eigen-decompose the bound matrices ``L_i`` and ``U_i``.

    Raises
    ------
    NonCommuting
        If the normalised bounds of a direction do not share an eigenbasis.
    """
    return BoundSpectrum(_direction_spectrum(sm.d1, tol), _direction_spectrum(sm.d2, tol))


@dataclass(frozen=True, eq=False)
class AlphaBox:
    """Slope ranges ``alpha_i in [-n_bar_i, -n_low_i] U [p_low_i, p_bar_i]``.

    Each field is a pair (direction 1, direction 2).
    """

    n_bar: tuple
    n_low: tuple
    p_low: tuple
    p_bar: tuple

    def __post_init__(self):
        vals = {}
        for name in ("n_bar", "n_low", "p_low", "p_bar"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if v.shape != (2,):
                raise ValidationError(f"{name} needs one value per direction")
            if np.any(v < 0) or np.any(np.isnan(v)):
                raise ValidationError(f"{name} must be non-negative")
            vals[name] = v
            object.__setattr__(self, name, tuple(float(t) for t in v))
        if np.any(vals["n_low"] > vals["n_bar"]) or np.any(vals["p_low"] > vals["p_bar"]):
            raise ValidationError("need n_low <= n_bar and p_low <= p_bar")

    def level(self, name, i):
        return getattr(self, name)[i - 1]

    @classmethod
    def from_bound_spectrum(cls, bs: BoundSpectrum):
        """Tightest box containing every coordinate range ``[ell_k, nu_k]``."""
        nb, nl, pl, pb = [], [], [], []
        for i in (1, 2):
            ell, nu = bs[i].ell, bs[i].nu
            pb.append(max(0.0, float(np.max(nu))))
            nb.append(max(0.0, float(-np.min(ell))))
            straddle = np.any((ell <= 0) & (nu >= 0))
            pos = ell > 0
            neg = nu < 0
            pl.append(0.0 if straddle or not pos.any() else float(np.min(ell[pos])))
            nl.append(0.0 if straddle or not neg.any() else float(np.min(-nu[neg])))
            # ell == nu up to rounding can put a low level a few ulps past its bar
            nl[-1], pl[-1] = min(nl[-1], nb[-1]), min(pl[-1], pb[-1])
        return cls(n_bar=nb, n_low=nl, p_low=pl, p_bar=pb)

    def to_dict(self):
        return {"n_bar": list(self.n_bar), "n_low": list(self.n_low),
                "p_low": list(self.p_low), "p_bar": list(self.p_bar)}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(n_bar=d["n_bar"], n_low=d.get("n_low", (0.0, 0.0)),
                       p_low=d.get("p_low", (0.0, 0.0)), p_bar=d["p_bar"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed alpha box: {exc}") from None


def mu_single(bs: BoundSpectrum, i) -> float:
    """``max(-min ell_i, max nu_i)``: Lipschitz constant of ``D_i``."""
    s = bs[i]
    return float(max(-np.min(s.ell), np.max(s.nu)))


def mu_separable(bs: BoundSpectrum, q) -> float:
    """``(1 - q) + q mu_1 mu_2``, an upper bound on :func:`mu_joint` for ``0 < q <= 1``."""
    return float((1.0 - q) + q * mu_single(bs, 1) * mu_single(bs, 2))


def n_matrix(bs: BoundSpectrum, alpha1, alpha2):
    V1, V2 = bs.s1.V, bs.s2.V
    return (V1.T * alpha1) @ V1 @ (V2.T * alpha2) @ V2


def r_matrix(bs: BoundSpectrum, q, alpha1, alpha2):
    return (1.0 - q) * np.eye(bs.m) + q * n_matrix(bs, alpha1, alpha2)


@dataclass(frozen=True)
class JointBound:
    """Result of :func:`mu_joint` / :func:`rho_joint`.

    ``heuristic`` is True when the search was not exhaustive, in which case
    ``value`` is only a lower estimate of the true maximum.
    """

    value: float
    heuristic: bool
    alpha1: tuple
    alpha2: tuple

    def __float__(self):
        return self.value

    def to_dict(self):
        return {"value": self.value, "heuristic": self.heuristic}


class _Reduced:
    """``V1 R(alpha) V1^T`` in the basis of direction 1, with ``G = V1 V2^T``.

    ``||R|| = ||(1-q) G + q diag(a1) G diag(a2)||`` and
    ``eig(R) = eig((1-q) I + q diag(a1) G diag(a2) G^T)``.
    """

    def __init__(self, bs, q):
        self.G = bs.s1.V @ bs.s2.V.T
        self.q = q
        self.lo = (bs.s1.ell, bs.s2.ell)
        self.hi = (bs.s1.nu, bs.s2.nu)
        self.m = self.G.shape[0]

    def norms(self, a1, a2):
        G, q = self.G, self.q
        out = np.empty(a1.shape[0])
        for s in range(0, a1.shape[0], _CHUNK):
            b1, b2 = a1[s:s + _CHUNK], a2[s:s + _CHUNK]
            R = (1.0 - q) * G + q * (b1[:, :, None] * G[None] * b2[:, None, :])
            out[s:s + _CHUNK] = np.linalg.norm(R, ord=2, axis=(1, 2))
        return out

    def radii(self, a1, a2):
        G, q = self.G, self.q
        GT = G.T
        out = np.empty(a1.shape[0])
        eye = np.eye(self.m)
        for s in range(0, a1.shape[0], _CHUNK):
            b1, b2 = a1[s:s + _CHUNK], a2[s:s + _CHUNK]
            N = (b1[:, :, None] * G[None] * b2[:, None, :]) @ GT
            out[s:s + _CHUNK] = np.max(np.abs(np.linalg.eigvals((1.0 - q) * eye + q * N)), axis=1)
        return out

    def free(self, tol=1e-14):
        return [np.flatnonzero(self.hi[k] - self.lo[k] > tol) for k in (0, 1)]

    def vertices(self):
        f1, f2 = self.free()
        nfree = f1.size + f2.size
        base1, base2 = self.lo[0].copy(), self.lo[1].copy()
        bits = np.array(list(product((0, 1), repeat=nfree)), dtype=bool).reshape(2 ** nfree, nfree)
        a1 = np.repeat(base1[None], bits.shape[0], axis=0)
        a2 = np.repeat(base2[None], bits.shape[0], axis=0)
        a1[:, f1] = np.where(bits[:, :f1.size], self.hi[0][f1], self.lo[0][f1])
        a2[:, f2] = np.where(bits[:, f1.size:], self.hi[1][f2], self.lo[1][f2])
        return a1, a2

    def samples(self, rng, n):
        u1 = rng.random((n, self.m))
        u2 = rng.random((n, self.m))
        return (self.lo[0] + u1 * (self.hi[0] - self.lo[0]),
                self.lo[1] + u2 * (self.hi[1] - self.lo[1]))

    def random_vertex(self, rng):
        return tuple(np.where(rng.random(self.m) < 0.5, self.hi[k], self.lo[k]) for k in (0, 1))


def _coordinate_ascent(red, a1, a2, max_sweeps=50):
    best = red.norms(a1[None], a2[None])[0]
    free = red.free()
    for _ in range(max_sweeps):
        improved = False
        for k, idx in enumerate(free):
            for j in idx:
                cur = [a1.copy(), a2.copy()]
                cur[k][j] = red.hi[k][j] if cur[k][j] == red.lo[k][j] else red.lo[k][j]
                val = red.norms(cur[0][None], cur[1][None])[0]
                if val > best + 1e-15:
                    best, a1, a2 = val, cur[0], cur[1]
                    improved = True
        if not improved:
            break
    return best, a1, a2


def _check_finite_box(bs):
    for i in (1, 2):
        if not (np.all(np.isfinite(bs[i].ell)) and np.all(np.isfinite(bs[i].nu))):
            return False
    return True


def mu_joint(bs: BoundSpectrum, q, seed=0) -> JointBound:
    """Contraction factor ``max ||R(alpha)||`` over the slope box.

    ``||R||`` is convex in each ``alpha_i`` for the other fixed, so the
    maximum sits on a vertex of the box.  Up to 16 free coordinates the
    vertices are enumerated; beyond that the best of a coordinate ascent
    from 32 random vertices and 1024 interior samples is returned with
    ``heuristic=True``.
    """
    if not _check_finite_box(bs):
        return JointBound(np.inf, False, (), ())
    red = _Reduced(bs, q)
    f1, f2 = red.free()
    if f1.size + f2.size <= EXACT_LIMIT:
        a1, a2 = red.vertices()
        vals = red.norms(a1, a2)
        k = int(np.argmax(vals))
        return JointBound(float(vals[k]), False, tuple(a1[k]), tuple(a2[k]))
    rng = np.random.default_rng(seed)
    best = (-np.inf, None, None)
    for _ in range(N_STARTS):
        v = _coordinate_ascent(red, *red.random_vertex(rng))
        if v[0] > best[0]:
            best = v
    s1, s2 = red.samples(rng, N_SAMPLES)
    vals = red.norms(s1, s2)
    k = int(np.argmax(vals))
    if vals[k] > best[0]:
        best = (vals[k], s1[k], s2[k])
    return JointBound(float(best[0]), True, tuple(best[1]), tuple(best[2]))


def rho_joint(bs: BoundSpectrum, q, seed=0, n_samples=N_SAMPLES) -> JointBound:
    """Largest spectral radius of ``R(alpha)`` found over vertices and interior samples.

    Always a lower estimate of the true maximum over the box; ``heuristic``
    records whether the vertex set was enumerated in full.
    """
    if not _check_finite_box(bs):
        return JointBound(np.inf, False, (), ())
    red = _Reduced(bs, q)
    rng = np.random.default_rng(seed)
    f1, f2 = red.free()
    exhaustive = f1.size + f2.size <= EXACT_LIMIT
    if exhaustive:
        v1, v2 = red.vertices()
    else:
        picks = [red.random_vertex(rng) for _ in range(N_SAMPLES)]
        v1 = np.array([p[0] for p in picks])
        v2 = np.array([p[1] for p in picks])
    s1, s2 = red.samples(rng, n_samples)
    a1 = np.vstack([v1, s1])
    a2 = np.vstack([v2, s2])
    vals = red.radii(a1, a2)
    k = int(np.argmax(vals))
    return JointBound(float(vals[k]), not exhaustive, tuple(a1[k]), tuple(a2[k]))


def optimal_scalar_tuning(sigma, beta):
    """Best augmentation and relaxation for the scalar strongly convex / smooth pair.

    Direction 1 is ``beta``-smooth with no strong convexity, direction 2 is
    ``sigma``-strongly convex and non-smooth, ``A = I`` and ``E = gamma I``.

    Returns
    -------
    gamma, q, mu : float
        ``gamma = sqrt(sigma beta)`` and the resulting optimal relaxation
        and contraction factor.
    """
    sigma, beta = float(sigma), float(beta)
    if sigma < 0 or not beta > 0:
        raise ValidationError("need sigma >= 0 and beta > 0")
    t = np.sqrt(sigma / beta)
    gamma = np.sqrt(sigma * beta)
    if sigma <= beta:
        H1 = 2.0 / (1.0 + t) - 1.0
        mu = 1.0 / (1.0 + 2.0 * t)
    else:
        H1 = 2.0 / (1.0 + 0.5 * t + 0.5 / t) - 1.0
        mu = 1.0 / (1.0 + t + 1.0 / t)
    q = 2.0 / (3.0 - H1)
    return float(gamma), float(q), float(mu)


def scalar_example_spectrum(sigma, beta, gamma, m=1) -> BoundSpectrum:
    """Bound spectrum of the scalar family used by :func:`optimal_scalar_tuning`.

    Direction 1: ``C = 0``, ``S = beta I``; direction 2: ``C = sigma I``,
    ``S`` infinite; ``A1 = A2 = I`` and ``E = gamma I`` in dimension ``m``.
    """
    eye = np.eye(m)
    p = SplitProblem(
        f1=Quadratic(np.zeros((m, m)), np.zeros(m)),
        f2=Quadratic(np.zeros((m, m)), np.zeros(m)),
        A1=eye, A2=eye, b=np.zeros(m), E=gamma * eye)
    cbs = (CurvatureBounds(C=np.zeros((m, m)), S=beta * eye),
           CurvatureBounds(C=sigma * eye, S=None, S_infinite=True))
    return bound_spectrum(build_spectral_model(p, bounds=cbs))


def contraction_report(p: SplitProblem, q, seed=0, bounds=None):
    """JSON-ready summary of all contraction factors of a problem."""
    bs = bound_spectrum(build_spectral_model(p, bounds=bounds))
    mj = mu_joint(bs, q, seed=seed)
    rj = rho_joint(bs, q, seed=seed)
    return {
        "q": float(q),
        "spectrum": bs.to_dict(),
        "mu1": mu_single(bs, 1),
        "mu2": mu_single(bs, 2),
        "mu_separable": mu_separable(bs, q),
        "mu_joint": finite_or_none(mj.value),
        "mu_joint_heuristic": mj.heuristic,
        "rho_joint": finite_or_none(rj.value),
        "alpha_box": AlphaBox.from_bound_spectrum(bs).to_dict(),
    }

