"""Input coercion and numerical checks shared by all modules."""

import numpy as np

from .exceptions import ValidationError


def psd_tol(*mats):
    """Absolute tolerance for semidefinite checks: 1e-10 * (1 + max|entry|)."""
    scale = 0.0
    for a in mats:
        a = np.asarray(a)
        if a.size:
            scale = max(scale, float(np.max(np.abs(a))))
    return 1e-10 * (1.0 + scale)


def as_vector(x, name="x", length=None):
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {v.shape}")
    if length is not None and v.shape[0] != length:
        raise ValidationError(f"{name} must have length {length}, got {v.shape[0]}")
    return v


def as_matrix(a, name="A"):
    """Coerce scalars and 2-D array-likes to a float matrix."""
    m = np.asarray(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise ValidationError(f"{name} must be two-dimensional, got shape {m.shape}")
    return m


def check_square(a, name="A"):
    if a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {a.shape}")
    return a


def is_symmetric(a, tol=None):
    tol = psd_tol(a) if tol is None else tol
    return a.shape[0] == a.shape[1] and bool(np.max(np.abs(a - a.T), initial=0.0) <= tol)


def min_eig(a):
    """Smallest eigenvalue of the symmetric part of ``a``."""
    if a.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(0.5 * (a + a.T))[0])


def is_diagonal(a):
    return a.shape[0] == a.shape[1] and not np.any(a - np.diag(np.diag(a)))


def is_orthogonal(g, tol=1e-8):
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        return False
    return bool(np.max(np.abs(g.T @ g - np.eye(g.shape[0])), initial=0.0) <= tol)


def frozen(a):
    """Return a read-only copy so dataclass fields stay immutable."""
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def sym_sqrt(e):
    """Symmetric PSD square root and inverse square root of an SPD matrix."""
    if is_diagonal(e):
        d = np.diag(e)
        return np.diag(np.sqrt(d)), np.diag(1.0 / np.sqrt(d))
    w, v = np.linalg.eigh(0.5 * (e + e.T))
    return (v * np.sqrt(w)) @ v.T, (v / np.sqrt(w)) @ v.T


def finite_or_none(x):
    """JSON helper: infinities become None."""
    x = float(x)
    return x if np.isfinite(x) else None
