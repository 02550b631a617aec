"""scikit-learn style wrapper: weighted Lasso regression solved by relaxed ADMM."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .engine import AdmmConfig, run
from .exceptions import InsufficientHistory, ValidationError
from .lasso import fit_rate, lasso_levels
from .locus import locus_params, optimal_q, rho_max
from .bounds import AlphaBox
from .problem import Quadratic, SplitProblem, WeightedL1


class WeightedLassoADMM(RegressorMixin, BaseEstimator):
    """Minimise ``1/2 ||X b - y||^2 + alpha * sum_j w_j |b_j|`` with relaxed ADMM.

    Parameters
    ----------
    alpha : float
        Overall penalty scale.
    weights : array-like of shape (n_features,), optional
        Per-feature weights ``w_j >= 0``; all ones when omitted.
    eps : float
        Augmentation ``E = eps I``.
    q : float or "auto"
        Relaxation; ``"auto"`` picks the value minimising the predicted
        spectral-radius bound.
    max_iter, tol : int, float
        Iteration cap and state-change tolerance.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    n_iter_ : int
    converged_ : bool
    q_ : float
        Relaxation actually used.
    rho_max_ : float
        Predicted bound on the asymptotic rate.
    rate_ : float or None
        Measured asymptotic rate, when enough iterations were recorded.
    """

    def __init__(self, alpha=1.0, weights=None, eps=1.0, q=1.0, max_iter=5000, tol=1e-10):
        self.alpha = alpha
        self.weights = weights
        self.eps = eps
        self.q = q
        self.max_iter = max_iter
        self.tol = tol

    def _problem(self, X, y):
        n = X.shape[1]
        w = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (n,):
            raise ValidationError(f"weights must have shape ({n},)")
        if self.alpha < 0 or not self.eps > 0:
            raise ValidationError("need alpha >= 0 and eps > 0")
        eye = np.eye(n)
        f1 = Quadratic(X.T @ X, X.T @ y, const=0.5 * float(y @ y))
        return SplitProblem(f1=f1, f2=WeightedL1(self.alpha * w), A1=eye, A2=eye,
                            b=np.zeros(n), E=self.eps * eye)

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        p = self._problem(X, y)
        lam = np.linalg.eigvalsh(X.T @ X)
        pb1, nb1, pl1, nl1 = lasso_levels(max(lam[0], 0.0), lam[-1], self.eps)
        lp = locus_params(AlphaBox(n_bar=(nb1, 1.0), n_low=(nl1, 0.0),
                                   p_low=(pl1, 0.0), p_bar=(pb1, 1.0)))
        if self.q == "auto":
            best = optimal_q(lp)
            q = best.q if best.convergent else 1.0
        else:
            q = float(self.q)
        cfg = AdmmConfig(q=q, max_iters=self.max_iter, tol_state=self.tol, record_history=True)
        res = run(p, cfg)
        self.coef_ = res.x2
        self.n_iter_ = res.iterations
        self.converged_ = res.converged
        self.q_ = q
        self.rho_max_ = float(rho_max(lp, q))
        try:
            self.rate_ = fit_rate(res.history)
        except InsufficientHistory:
            self.rate_ = None
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_
