"""Minkowski norms on a single tangent space.

A Minkowski norm F is positive away from 0, positively 1-homogeneous and
strongly convex: the fundamental tensor

    g_ij(v) = 1/2 * d^2(F^2)/dv_i dv_j   (v != 0)

is symmetric positive definite and induces the inner product g_v, the
second-order Riemannian approximation of F in the direction v.  Supported
families: Euclidean, Riemannian (SPD matrix), Randers (sqrt(v A v) + <b, v>)
and Custom (any dual-generic evaluator of F^2).
"""

from __future__ import annotations

import numpy as np

from . import dual
from .dual import value
from .errors import InvalidVector, NormNotSmoothAtZero, StrongConvexityViolated

ZERO_SCALE = 1e-12  # below this (relative) length, F is treated as non-smooth


def _check_vector(v, dim):
    v = np.asarray(v, dtype=float)
    if v.shape != (dim,):
        raise InvalidVector(f"expected a vector of dimension {dim}, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidVector("vector has non-finite entries")
    return v


class MinkowskiNorm:
    """Base class; subclasses provide ``norm_sq`` (dual-generic F^2)."""

    def __init__(self, dim):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        self.dim = int(dim)

    def norm_sq(self, v):
        """F(v)^2 for ``v`` a sequence of dual-generic scalars."""
        raise NotImplementedError

    def __call__(self, v):
        v = _check_vector(v, self.dim)
        if np.linalg.norm(v) == 0.0:
            return 0.0
        return float(np.sqrt(value(self.norm_sq(list(v)))))

    def fundamental_tensor(self, v):
        """g_ij(v) = Hessian of F^2/2 at v; raises away from its domain."""
        v = _check_vector(v, self.dim)
        scale = max(1.0, float(np.linalg.norm(v)))
        if np.linalg.norm(v) <= ZERO_SCALE * scale:
            raise NormNotSmoothAtZero("fundamental tensor needs v != 0")
        H = dual.hessian(lambda a: self.norm_sq(a), list(v))
        g = 0.5 * np.array([[value(H[i][j]) for j in range(self.dim)]
                            for i in range(self.dim)])
        g = 0.5 * (g + g.T)
        if np.min(np.linalg.eigvalsh(g)) <= 0.0:
            raise StrongConvexityViolated(
                f"fundamental tensor not positive definite at v = {v}")
        return g

    def inner(self, vref, a, b):
        """g_{vref}(a, b)."""
        g = self.fundamental_tensor(vref)
        a = _check_vector(a, self.dim)
        b = _check_vector(b, self.dim)
        return float(a @ g @ b)


class EuclideanNorm(MinkowskiNorm):
    def norm_sq(self, v):
        acc = v[0] * v[0]
        for c in v[1:]:
            acc = acc + c * c
        return acc

    def fundamental_tensor(self, v):
        _check_vector(v, self.dim)
        if np.linalg.norm(v) <= ZERO_SCALE:
            raise NormNotSmoothAtZero("fundamental tensor needs v != 0")
        return np.eye(self.dim)


class RiemannianNorm(MinkowskiNorm):
    """F(v) = sqrt(v^T A v) for a symmetric positive-definite A."""

    def __init__(self, A):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be a square matrix")
        if not np.allclose(A, A.T, atol=1e-12):
            raise ValueError("A must be symmetric")
        if np.min(np.linalg.eigvalsh(A)) <= 0.0:
            raise StrongConvexityViolated("A is not positive definite")
        super().__init__(A.shape[0])
        self.A = 0.5 * (A + A.T)

    def norm_sq(self, v):
        acc = None
        for i in range(self.dim):
            for j in range(self.dim):
                term = self.A[i, j] * (v[i] * v[j])
                acc = term if acc is None else acc + term
        return acc

    def fundamental_tensor(self, v):
        _check_vector(v, self.dim)
        if np.linalg.norm(v) <= ZERO_SCALE:
            raise NormNotSmoothAtZero("fundamental tensor needs v != 0")
        return self.A.copy()


class RandersNorm(MinkowskiNorm):
    """F(v) = sqrt(v^T A v) + <b, v> with |b|_{A^{-1}} < 1.

    The drift bound is validated at construction; it is exactly the condition
    for F to be positive and strongly convex.
    """

    DRIFT_MARGIN = 1e-9

    def __init__(self, A, b):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if np.min(np.linalg.eigvalsh(A)) <= 0.0:
            raise StrongConvexityViolated("A is not positive definite")
        super().__init__(A.shape[0])
        if b.shape != (self.dim,):
            raise ValueError("b must match the dimension of A")
        self.A = 0.5 * (A + A.T)
        self.b = b
        drift = float(np.sqrt(b @ np.linalg.solve(self.A, b)))
        if drift >= 1.0 - self.DRIFT_MARGIN:
            raise StrongConvexityViolated(
                f"Randers drift |b|_A^-1 = {drift:.12g} must stay below 1")

    def norm_sq(self, v):
        q = None
        for i in range(self.dim):
            for j in range(self.dim):
                term = self.A[i, j] * (v[i] * v[j])
                q = term if q is None else q + term
        lin = None
        for i in range(self.dim):
            term = self.b[i] * v[i]
            lin = term if lin is None else lin + term
        root = dual.sqrt(q)
        return (root + lin) ** 2


class CustomNorm(MinkowskiNorm):
    """Norm given by a dual-generic evaluator of F^2.

    The evaluator must accept a list of scalars that may be nested duals and
    use only :mod:`ftct.dual` math; that is the first/second derivative
    contract that the fundamental tensor (and, downstream, curvature) needs.
    """

    def __init__(self, norm_sq_fn, dim):
        super().__init__(dim)
        self._fn = norm_sq_fn

    def norm_sq(self, v):
        return self._fn(v)


def evaluate_norm(norm: MinkowskiNorm, v) -> float:
    """F(v); zero at v = 0, InvalidVector on malformed input."""
    return norm(v)


def fundamental_tensor(norm: MinkowskiNorm, v) -> np.ndarray:
    """The matrix (g_ij(v)); symmetric positive definite for valid norms."""
    return norm.fundamental_tensor(v)
