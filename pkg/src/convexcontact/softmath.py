"""Smoothed vector norms for regularized friction.

The soft norm

    soft_norm(x, eps) = sqrt(|x|^2 + eps^2) - eps

is a convex, twice differentiable replacement for the Euclidean norm.  Its
gradient (the soft unit vector) and its Hessian remain bounded and continuous
at x = 0, which is exactly where a sticking contact sits.  All three
quantities below are exact derivatives of each other:

    d soft_norm / dx  = soft_unit
    d soft_unit / dx  = soft_norm_hessian

Inputs are tangential-velocity vectors of dimension 1 (planar worlds) or
2 (spatial worlds); `eps` carries the same units as `x`.
"""

from __future__ import annotations

import numpy as np

__all__ = ["soft_norm", "soft_unit", "soft_norm_hessian"]


def _as_vector(x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.size not in (1, 2):
        raise ValueError(f"expected a vector of dimension 1 or 2, got shape {x.shape}")
    return x


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not eps > 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    return eps


def soft_norm(x, eps) -> float:
    """sqrt(|x|^2 + eps^2) - eps, exactly zero at x = 0."""
    x = _as_vector(x)
    eps = _check_eps(eps)
    nx2 = float(x @ x)
    # Cancellation-free form: equals sqrt(nx2 + eps^2) - eps but returns
    # 0.0 exactly for x = 0 and stays accurate for |x| << eps.
    return nx2 / (np.sqrt(nx2 + eps * eps) + eps)


def soft_unit(x, eps) -> np.ndarray:
    """Gradient of the soft norm: x / sqrt(|x|^2 + eps^2).

    Well defined everywhere, |soft_unit| < 1, and soft_unit(0) = 0.
    """
    x = _as_vector(x)
    eps = _check_eps(eps)
    return x / np.sqrt(float(x @ x) + eps * eps)


def soft_norm_hessian(x, eps) -> np.ndarray:
    """Hessian of the soft norm: (I - u u^T) / sqrt(|x|^2 + eps^2), u = soft_unit.

    Symmetric positive semi-definite for every x and eps > 0.
    """
    x = _as_vector(x)
    eps = _check_eps(eps)
    denom = np.sqrt(float(x @ x) + eps * eps)
    u = x / denom
    return (np.eye(x.size) - np.outer(u, u)) / denom
