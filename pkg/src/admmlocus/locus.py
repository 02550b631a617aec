"""Eigenvalue loci of ``N(alpha) = V1^T diag(alpha1) V1 V2^T diag(alpha2) V2``.

Two-level case
    Each ``alpha_i`` takes the value ``p_bar_i`` on ``p_i`` coordinates and
    ``-n_bar_i`` on the remaining ``n_i``.  With ``G = V2 V1^T`` the spectrum is
    known in closed form from the cosines ``c`` of the CS decomposition of
    ``G``: every cosine gives the pair::

        lambda = k1 c^2 - k2 +/- sqrt((k1 c^2 - k2)^2 - r_bar^2)

    and the unpaired coordinates give real eigenvalues ``-p_bar1 n_bar2`` and
    ``n_bar1 n_bar2`` (after reduction to the ordering ``p2 <= p1 <= n1 <= n2``).

General box
    For ``alpha_i in [-n_bar_i, -n_low_i] U [p_low_i, p_bar_i]`` real
    eigenvalues lie in ``[-n_bar, -n_low] U [p_low, p_bar]`` and complex ones
    in the annulus ``r_low <= |lambda| <= r_bar``.

The relaxed iteration matrix ``R = (1 - q) I + q N`` has the affinely mapped
locus.
"""

from collections import namedtuple
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cossin
from scipy.optimize import linear_sum_assignment

from ._validation import is_orthogonal
from .bounds import AlphaBox
from .exceptions import DegenerateCounts, NotOrthogonal, StructureMismatch, ValidationError

__all__ = [
    "LevelSpec",
    "LocusParams",
    "RLocus",
    "CSFactors",
    "OptimalQ",
    "canonicalize",
    "closed_form_pairs",
    "theorem1_eigs",
    "level_matrix",
    "locus_params",
    "locus_contains",
    "locus_to_dict",
    "map_to_R",
    "rho_max",
    "optimal_q",
    "cs_decompose",
    "verify_H_structure",
    "multiset_distance",
]

REAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LevelSpec:
    """Two-level slope pattern and the coupling matrix ``G = V2 V1^T``.

    ``G`` rows follow direction 2 (its ``p2`` positive coordinates first),
    columns follow direction 1 (``p1`` positive coordinates first).
    """

    p_bar1: float
    n_bar1: float
    p_bar2: float
    n_bar2: float
    p1: int
    n1: int
    p2: int
    n2: int
    G: np.ndarray

    def __post_init__(self):
        G = np.array(self.G, dtype=float)
        m = G.shape[0] if G.ndim == 2 else -1
        if not is_orthogonal(G, tol=1e-10):
            raise NotOrthogonal("G must be a square orthogonal matrix")
        if self.p1 + self.n1 != m or self.p2 + self.n2 != m:
            raise ValidationError(f"counts must satisfy p_i + n_i = m = {m}")
        if min(self.p1, self.n1, self.p2, self.n2) < 0:
            raise ValidationError("counts must be non-negative")
        levels = (self.p_bar1, self.n_bar1, self.p_bar2, self.n_bar2)
        if min(levels) < 0 or not np.all(np.isfinite(levels)):
            raise ValidationError("levels must be finite and non-negative")
        G.setflags(write=False)
        object.__setattr__(self, "G", G)
        for name in ("p1", "n1", "p2", "n2"):
            object.__setattr__(self, name, int(getattr(self, name)))
        for name in ("p_bar1", "n_bar1", "p_bar2", "n_bar2"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def m(self):
        return self.G.shape[0]

    @property
    def levels(self):
        return self.p_bar1, self.n_bar1, self.p_bar2, self.n_bar2

    @property
    def counts(self):
        return self.p1, self.n1, self.p2, self.n2

    def blocks(self):
        """``G1 (p2 x p1), G2 (p2 x n1), G3 (n2 x p1), G4 (n2 x n1)``."""
        G, p1, p2 = self.G, self.p1, self.p2
        return G[:p2, :p1], G[:p2, p1:], G[p2:, :p1], G[p2:, p1:]

    def H(self, i):
        if i == 1:
            return np.concatenate([np.full(self.p1, self.p_bar1), np.full(self.n1, -self.n_bar1)])
        return np.concatenate([np.full(self.p2, self.p_bar2), np.full(self.n2, -self.n_bar2)])


def level_matrix(ls: LevelSpec):
    """``N`` for the two-level pattern, taking ``V1 = I`` and ``V2 = G``."""
    G = ls.G
    return (ls.H(1)[:, None] * G.T) @ (ls.H(2)[:, None] * G)


Canonical = namedtuple("Canonical", "spec sign transposed")


def canonicalize(ls: LevelSpec) -> Canonical:
    """Reduce to ``p2 <= p1 <= n1 <= n2`` by similarity and sign changes.

    The eigenvalues of the original ``N`` are ``sign`` times those of the
    returned spec.  Steps: swap the two directions (``G -> G^T``) when
    direction 2 has the larger minority count; then, per direction, exchange
    the positive and negative roles (reordering ``G`` and flipping the sign of
    ``N``) when the positive count is the larger one.
    """
    pb1, nb1, pb2, nb2 = ls.levels
    p1, n1, p2, n2 = ls.counts
    G = ls.G
    sign = 1.0
    transposed = False
    if min(p2, n2) > min(p1, n1):
        pb1, nb1, p1, n1, pb2, nb2, p2, n2 = pb2, nb2, p2, n2, pb1, nb1, p1, n1
        G = G.T
        transposed = True
    if p2 > n2:
        G = np.vstack([G[p2:], G[:p2]])
        pb2, nb2, p2, n2 = nb2, pb2, n2, p2
        sign = -sign
    if p1 > n1:
        G = np.hstack([G[:, p1:], G[:, :p1]])
        pb1, nb1, p1, n1 = nb1, pb1, n1, p1
        sign = -sign
    if not (p2 <= p1 <= n1 <= n2):
        raise DegenerateCounts(f"reduction left counts p1={p1}, n1={n1}, p2={p2}, n2={n2}")
    spec = LevelSpec(pb1, nb1, pb2, nb2, p1, n1, p2, n2, G)
    return Canonical(spec, sign, transposed)


def _k_constants(pb1, nb1, pb2, nb2):
    k1 = 0.5 * (pb1 + nb1) * (pb2 + nb2)
    k2 = 0.5 * (pb1 * nb2 + nb1 * pb2)
    r_bar = np.sqrt(pb1 * nb1 * pb2 * nb2)
    return k1, k2, r_bar


def _pair(c, k1, k2, r_bar):
    mid = k1 * c * c - k2
    root = np.sqrt(complex(mid * mid - r_bar * r_bar))
    return complex(mid) + root, complex(mid) - root


def closed_form_pairs(ls: LevelSpec):
    """Closed-form spectrum split into cosine pairs and unpaired eigenvalues.

    Returns
    -------
    pairs : list of (c, lambda_plus, lambda_minus)
        In the original sign convention.
    leftovers : ndarray
        Real eigenvalues not attached to a cosine.
    """
    can = canonicalize(ls)
    cs = can.spec
    pb1, nb1, pb2, nb2 = cs.levels
    k1, k2, r_bar = _k_constants(pb1, nb1, pb2, nb2)
    G1 = cs.blocks()[0]
    c = np.clip(np.linalg.svd(G1, compute_uv=False), 0.0, 1.0) if G1.size else np.empty(0)
    pairs = []
    for ci in c:
        a, b = _pair(ci, k1, k2, r_bar)
        pairs.append((float(ci), can.sign * a, can.sign * b))
    q1 = cs.p1 - cs.p2
    q2 = cs.n2 - cs.p1
    left = np.concatenate([np.full(q1, -pb1 * nb2), np.full(q2, nb1 * nb2)]) * can.sign
    return pairs, left


def theorem1_eigs(ls: LevelSpec):
    """Full eigenvalue multiset of ``N`` in the two-level case, as a complex array."""
    pairs, left = closed_form_pairs(ls)
    out = [v for _, a, b in pairs for v in (a, b)]
    return np.concatenate([np.asarray(out, dtype=complex), left.astype(complex)])


def multiset_distance(a, b):
    """Largest deviation under the best one-to-one matching of two eigenvalue sets."""
    a = np.asarray(a, dtype=complex).reshape(-1)
    b = np.asarray(b, dtype=complex).reshape(-1)
    if a.size != b.size:
        return np.inf
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


@dataclass(frozen=True)
class LocusParams:
    """Constants describing the eigenvalue locus of ``N(alpha)``.

    ``n_hat`` and ``p_hat`` are the smaller counterparts of ``n_bar`` and
    ``p_bar``; ``c_low`` and ``c_high`` split the cosines into the real
    negative, complex, and real positive regimes.
    """

    n_bar: float
    p_bar: float
    r_bar: float
    n_hat: float
    p_hat: float
    n_low: float
    p_low: float
    r_low: float
    k1: float
    k2: float
    c_low: float
    c_high: float

    def to_dict(self):
        return dict(self.__dict__)


def _params(pb1, nb1, pb2, nb2, pl1=0.0, nl1=0.0, pl2=0.0, nl2=0.0):
    k1, k2, r_bar = _k_constants(pb1, nb1, pb2, nb2)
    a, b = np.sqrt(pb1 * nb2), np.sqrt(nb1 * pb2)
    if k1 > 0:
        c_low = abs(a - b) / np.sqrt(2.0 * k1)
        c_high = min(1.0, (a + b) / np.sqrt(2.0 * k1))
    else:
        c_low = c_high = 0.0
    return LocusParams(
        n_bar=float(max(pb1 * nb2, nb1 * pb2)),
        p_bar=float(max(pb1 * pb2, nb1 * nb2)),
        r_bar=float(r_bar),
        n_hat=float(min(pb1 * nb2, nb1 * pb2)),
        p_hat=float(min(pb1 * pb2, nb1 * nb2)),
        n_low=float(min(pl1 * nl2, nl1 * pl2)),
        p_low=float(min(pl1 * pl2, nl1 * nl2)),
        r_low=float(np.sqrt(pl1 * pl2 * nl1 * nl2)),
        k1=float(k1),
        k2=float(k2),
        c_low=float(c_low),
        c_high=float(c_high),
    )


def locus_params(box) -> LocusParams:
    """Locus constants of an :class:`AlphaBox` (or of a :class:`LevelSpec`)."""
    if isinstance(box, LevelSpec):
        return _params(*box.levels)
    if not isinstance(box, AlphaBox):
        raise TypeError("expected an AlphaBox or a LevelSpec")
    (nb1, nb2), (nl1, nl2) = box.n_bar, box.n_low
    (pl1, pl2), (pb1, pb2) = box.p_low, box.p_bar
    return _params(pb1, nb1, pb2, nb2, pl1, nl1, pl2, nl2)


def locus_contains(lp: LocusParams, lam, tol=REAL_TOL) -> bool:
    lam = complex(lam)
    if abs(lam.imag) <= tol * (1.0 + abs(lam)):
        x = lam.real
        return (-lp.n_bar - tol <= x <= -lp.n_low + tol) or (lp.p_low - tol <= x <= lp.p_bar + tol)
    return lp.r_low - tol <= abs(lam) <= lp.r_bar + tol


@dataclass(frozen=True)
class RLocus:
    """Image of a locus under ``lambda -> (1 - q) + q lambda``."""

    q: float
    real_intervals: tuple
    center: float
    inner: float
    outer: float

    def contains(self, lam, tol=REAL_TOL):
        lam = complex(lam)
        if abs(lam.imag) <= tol * (1.0 + abs(lam)):
            return any(lo - tol <= lam.real <= hi + tol for lo, hi in self.real_intervals)
        d = abs(lam - self.center)
        return self.inner - tol <= d <= self.outer + tol

    def to_dict(self):
        return {
            "q": self.q,
            "real_intervals": [list(iv) for iv in self.real_intervals],
            "circle": {"center": self.center, "inner": self.inner, "outer": self.outer},
        }


def map_to_R(obj, q):
    """Apply ``lambda -> (1 - q) + q lambda`` to eigenvalues or to a whole locus."""
    q = float(q)
    if isinstance(obj, LocusParams):
        def f(x):
            return (1.0 - q) + q * x
        ivs = []
        for lo, hi in ((-obj.n_bar, -obj.n_low), (obj.p_low, obj.p_bar)):
            a, b = f(lo), f(hi)
            ivs.append((min(a, b), max(a, b)))
        return RLocus(q=q, real_intervals=tuple(ivs), center=1.0 - q,
                      inner=abs(q) * obj.r_low, outer=abs(q) * obj.r_bar)
    lam = np.asarray(obj)
    return (1.0 - q) + q * lam


def locus_to_dict(lp: LocusParams, eigs=None):
    d = {
        "real_intervals": [[-lp.n_bar, -lp.n_low], [lp.p_low, lp.p_bar]],
        "circle": {"inner": lp.r_low, "outer": lp.r_bar},
        "params": lp.to_dict(),
    }
    if eigs is not None:
        d["eigs"] = [{"re": float(np.real(v)), "im": float(np.imag(v))} for v in np.ravel(eigs)]
    return d


def rho_max(lp: LocusParams, q):
    """Upper bound ``max(|1 - q - q n_bar|, |1 - q + q p_bar|)`` on the spectral radius of ``R``."""
    q = np.asarray(q, dtype=float)
    return np.maximum(np.abs(1.0 - q - q * lp.n_bar), np.abs(1.0 - q + q * lp.p_bar))


OptimalQ = namedtuple("OptimalQ", "q rho convergent")


def optimal_q(lp: LocusParams) -> OptimalQ:
    """Relaxation minimising :func:`rho_max`.

    For ``p_bar < 1`` this is ``q = 2 / (2 + n_bar - p_bar)``; for
    ``p_bar >= 1`` no relaxation gives a bound below one and ``(0, 1, False)``
    is returned.
    """
    if lp.p_bar >= 1.0:
        return OptimalQ(0.0, 1.0, False)
    den = 2.0 + lp.n_bar - lp.p_bar
    return OptimalQ(2.0 / den, (lp.p_bar + lp.n_bar) / den, True)


@dataclass(frozen=True, eq=False)
class CSFactors:
    """``G = A M B`` with ``A``, ``B`` block-orthogonal and ``M`` the structured core.

    Core layout, with ``r = p2``: columns ``[C | Q1 | SC | Q2]`` of widths
    ``(r, q1, r, q2)``; rows ``[top (r) | S (r) | Q1 (q1) | Q2 (q2)]``::

        [ C  0  -S  0 ]
        [ S  0   C  0 ]
        [ 0  I   0  0 ]
        [ 0  0   0  I ]
    """

    A: np.ndarray
    M: np.ndarray
    B: np.ndarray
    c: np.ndarray
    s: np.ndarray
    p1: int
    n1: int
    p2: int
    n2: int

    @property
    def q1(self):
        return self.p1 - self.p2

    @property
    def q2(self):
        return self.n2 - self.p1

    @property
    def A1(self):
        return self.A[:self.p2, :self.p2]

    @property
    def A2(self):
        return self.A[self.p2:, self.p2:]

    @property
    def B1(self):
        return self.B[:self.p1, :self.p1]

    @property
    def B2(self):
        return self.B[self.p1:, self.p1:]

    def reassemble(self):
        return self.A @ self.M @ self.B


def _core(c, s, q1, q2):
    r = c.size
    m = 2 * r + q1 + q2
    M = np.zeros((m, m))
    i = np.arange(r)
    M[i, i] = c
    M[i, r + q1 + i] = -s
    M[r + i, i] = s
    M[r + i, r + q1 + i] = c
    M[2 * r + np.arange(q1), r + np.arange(q1)] = 1.0
    M[2 * r + q1 + np.arange(q2), 2 * r + q1 + np.arange(q2)] = 1.0
    return M


def cs_decompose(G, p1, n1, p2, n2, tol=1e-9) -> CSFactors:
    """CS decomposition of ``G`` for the canonical ordering ``p2 <= p1 <= n1 <= n2``.

    Raises
    ------
    NotOrthogonal
        If ``||G^T G - I|| > 1e-8``.
    DegenerateCounts
        If the counts are not in canonical order.
    StructureMismatch
        If the permuted LAPACK core does not have the documented form.
    """
    G = np.asarray(G, dtype=float)
    if not is_orthogonal(G, tol=1e-8):
        raise NotOrthogonal("G is not orthogonal to 1e-8")
    m = G.shape[0]
    if p1 + n1 != m or p2 + n2 != m or not (0 <= p2 <= p1 <= n1 <= n2):
        raise DegenerateCounts(f"counts p1={p1}, n1={n1}, p2={p2}, n2={n2} are not canonical")
    r, q1, q2 = p2, p1 - p2, n2 - p1
    if r == 0:
        return CSFactors(A=G.copy(), M=np.eye(m), B=np.eye(m), c=np.empty(0), s=np.empty(0),
                         p1=p1, n1=n1, p2=p2, n2=n2)
    u, core, vdh = cossin(G, p=p2, q=p1)
    # LAPACK order: columns [C, Q1, Q2, SC], rows [top | Q2, S, Q1]
    cols = np.r_[0:r + q1, r + q1 + q2:m, r + q1:r + q1 + q2]
    rows = np.r_[0:r, r + q2:2 * r + q2, 2 * r + q2:m, r:r + q2]
    M = core[np.ix_(rows, cols)]
    A = u[:, rows]
    B = vdh[cols, :]
    c = np.clip(np.diag(M)[:r], 0.0, 1.0)
    s = np.clip(M[r + np.arange(r), np.arange(r)], 0.0, 1.0)
    expect = _core(c, s, q1, q2)
    err = np.max(np.abs(M - expect))
    if err > tol:
        raise StructureMismatch(f"core deviates from the canonical form by {err:.3e}", "core")
    return CSFactors(A=A, M=expect, B=B, c=c, s=s, p1=p1, n1=n1, p2=p2, n2=n2)


def _h0(c, s, pb1, nb1, pb2, nb2):
    return np.array([
        [(c * c * pb1 - s * s * nb1) * pb2, -c * s * (pb1 + nb1) * nb2],
        [c * s * (pb1 + nb1) * pb2, (c * c * nb1 - s * s * pb1) * nb2],
    ])


def verify_H_structure(cs: CSFactors, levels, tol=1e-9):
    """Check that ``H = M H1 M^T H2`` splits into 2x2 and scalar blocks.

    ``levels`` is ``(p_bar1, n_bar1, p_bar2, n_bar2)``.  Block ``i`` pairs
    rows ``i`` and ``r + i``; its eigenvalues must equal the closed-form pair
    for ``c_i``.  The unpaired rows carry ``-p_bar1 n_bar2`` (``q1`` of them)
    and ``n_bar1 n_bar2`` (``q2`` of them).

    Returns
    -------
    dict
        ``blocks`` (per cosine: c, closed-form and block eigenvalues, error),
        ``scalars`` and ``max_error``.
    """
    pb1, nb1, pb2, nb2 = (float(v) for v in levels)
    r, q1, q2 = cs.p2, cs.q1, cs.q2
    h1 = np.concatenate([np.full(cs.p1, pb1), np.full(cs.n1, -nb1)])
    h2 = np.concatenate([np.full(cs.p2, pb2), np.full(cs.n2, -nb2)])
    H = (cs.M * h1) @ cs.M.T * h2
    k1, k2, r_bar = _k_constants(pb1, nb1, pb2, nb2)
    mask = np.zeros(H.shape, dtype=bool)
    report = {"blocks": [], "scalars": [], "max_error": 0.0}
    worst = 0.0
    for i in range(r):
        idx = [i, r + i]
        blk = H[np.ix_(idx, idx)]
        mask[np.ix_(idx, idx)] = True
        ref = _h0(cs.c[i], cs.s[i], pb1, nb1, pb2, nb2)
        closed = _pair(cs.c[i], k1, k2, r_bar)
        got = np.linalg.eigvals(blk)
        err = max(np.max(np.abs(blk - ref)), multiset_distance(got, closed))
        worst = max(worst, err)
        report["blocks"].append({
            "index": i, "c": float(cs.c[i]),
            "closed_form": [[z.real, z.imag] for z in closed],
            "block": [[complex(z).real, complex(z).imag] for z in got],
            "error": float(err),
        })
        if err > tol:
            raise StructureMismatch(f"2x2 block {i} deviates by {err:.3e}", i)
    scal = [(2 * r + j, -pb1 * nb2) for j in range(q1)]
    scal += [(2 * r + q1 + j, nb1 * nb2) for j in range(q2)]
    for j, val in scal:
        mask[j, j] = True
        err = abs(H[j, j] - val)
        worst = max(worst, err)
        report["scalars"].append({"index": j, "value": float(H[j, j]), "expected": val})
        if err > tol:
            raise StructureMismatch(f"scalar block {j} is {H[j, j]:.6g}, expected {val:.6g}", j)
    off = float(np.max(np.abs(H[~mask]), initial=0.0))
    if off > tol:
        raise StructureMismatch(f"entries outside the block pattern reach {off:.3e}", "off-diagonal")
    report["max_error"] = float(max(worst, off))
    return report
