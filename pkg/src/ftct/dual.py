"""Forward-mode automatic differentiation on nested dual numbers.

A :class:`Dual` stores a primal part ``re`` and a tangent part ``im``; both
may be floats, numpy arrays (for batched evaluation) or further ``Dual``
instances (for higher derivatives).  All metric code in this package is
written against the small math vocabulary exported here (``sqrt``, ``exp``,
...), so any function built from it can be differentiated to the order the
curvature formulas require (fourth derivatives of F^2) simply by feeding it
seeded duals.

Plain numbers/arrays act as constants at every nesting depth, which keeps
seed bookkeeping cheap: a one-hot seed never has to be promoted to the depth
of the value it perturbs.  Mixing two *independently* seeded duals of
different depth is not supported (classic perturbation confusion); the
helpers below always seed uniformly, so this does not arise in practice.
"""

from __future__ import annotations

import numpy as np

_SCALARS = (int, float, np.floating, np.integer, np.ndarray)


def _is_const(x):
    return not isinstance(x, Dual)


class Dual:
    """Nested dual number ``re + im * eps`` with ``eps^2 = 0``."""

    __slots__ = ("re", "im")
    # Make numpy defer to our reflected operators instead of broadcasting
    # elementwise over an object array.
    __array_ufunc__ = None
    __array_priority__ = 1000.0

    def __init__(self, re, im):
        self.re = re
        self.im = im

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.re + other.re, self.im + other.im)
        return Dual(self.re + other, self.im)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.re - other.re, self.im - other.im)
        return Dual(self.re - other, self.im)

    def __rsub__(self, other):
        return Dual(other - self.re, -self.im)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.re * other.re, self.re * other.im + self.im * other.re)
        return Dual(self.re * other, self.im * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.re
            return Dual(self.re * inv, (self.im - self.re * inv * other.im) * inv)
        return Dual(self.re / other, self.im / other)

    def __rtruediv__(self, other):
        inv = 1.0 / self.re
        val = other * inv
        return Dual(val, -val * inv * self.im)

    def __neg__(self):
        return Dual(-self.re, -self.im)

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("dual exponent must be a plain number")
        if p == 2:
            return Dual(self.re * self.re, 2.0 * (self.re * self.im))
        if p == 1:
            return Dual(self.re, self.im)
        return Dual(self.re ** p, (p * self.re ** (p - 1)) * self.im)

    # -- comparisons act on the primal value ------------------------------

    def __lt__(self, other):
        return value(self) < value(other)

    def __le__(self, other):
        return value(self) <= value(other)

    def __gt__(self, other):
        return value(self) > value(other)

    def __ge__(self, other):
        return value(self) >= value(other)

    def __repr__(self):
        return f"Dual({self.re!r}, {self.im!r})"


def value(x):
    """Strip all dual structure, returning the underlying float/array."""
    while isinstance(x, Dual):
        x = x.re
    return x


def im_part(y):
    """Tangent part of ``y``; 0 when the output did not depend on the seed."""
    return y.im if isinstance(y, Dual) else 0.0


def map_structure(fn, obj):
    """Apply ``fn`` to every scalar leaf of a (possibly nested) list/tuple."""
    if isinstance(obj, (list, tuple)):
        return [map_structure(fn, o) for o in obj]
    return fn(obj)


# -- elementary functions (recursive in the nesting depth) -----------------

def sqrt(x):
    if isinstance(x, Dual):
        s = sqrt(x.re)
        return Dual(s, x.im * (0.5 / s))
    return np.sqrt(x)


def exp(x):
    if isinstance(x, Dual):
        e = exp(x.re)
        return Dual(e, x.im * e)
    return np.exp(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(log(x.re), x.im / x.re)
    return np.log(x)


def sin(x):
    if isinstance(x, Dual):
        return Dual(sin(x.re), x.im * cos(x.re))
    return np.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(cos(x.re), -(x.im * sin(x.re)))
    return np.cos(x)


def sinh(x):
    if isinstance(x, Dual):
        return Dual(sinh(x.re), x.im * cosh(x.re))
    return np.sinh(x)


def cosh(x):
    if isinstance(x, Dual):
        return Dual(cosh(x.re), x.im * sinh(x.re))
    return np.cosh(x)


def tanh(x):
    if isinstance(x, Dual):
        t = tanh(x.re)
        return Dual(t, x.im * (1.0 - t * t))
    return np.tanh(x)


def arctan(x):
    if isinstance(x, Dual):
        return Dual(arctan(x.re), x.im / (1.0 + x.re * x.re))
    return np.arctan(x)


def where(cond, a, b):
    """Branchless select on a plain boolean (array) condition.

    ``cond`` must not carry dual structure; it is evaluated on primal values.
    """
    if _is_const(a) and _is_const(b):
        return np.where(cond, a, b)
    a_re = a.re if isinstance(a, Dual) else a
    b_re = b.re if isinstance(b, Dual) else b
    a_im = a.im if isinstance(a, Dual) else 0.0
    b_im = b.im if isinstance(b, Dual) else 0.0
    return Dual(where(cond, a_re, b_re), where(cond, a_im, b_im))


# -- seeding helpers -------------------------------------------------------

def partial(f, args, i):
    """d f / d args[i] evaluated at ``args`` (f maps a list of scalars to a
    scalar or a list of scalars).

    Every component is wrapped in a fresh dual level (seed 0 for the ones not
    differentiated) so that nested calls keep their epsilon levels aligned;
    seeding only one component would conflate this level with any dual
    structure the other components already carry.
    """
    seeded = [Dual(a, 1.0 if k == i else 0.0) for k, a in enumerate(args)]
    return map_structure(im_part, f(seeded))


def grad(f, args):
    """All first partials of ``f`` (scalar- or list-valued) at ``args``."""
    return [partial(f, args, i) for i in range(len(args))]


def directional(f, args, direction):
    """Derivative of ``f`` along ``direction`` in its argument list."""
    seeded = [Dual(a, d) for a, d in zip(args, direction)]
    return map_structure(im_part, f(seeded))


def value_and_directional(f, args, direction):
    seeded = [Dual(a, d) for a, d in zip(args, direction)]
    out = f(seeded)
    return map_structure(value, out), map_structure(im_part, out)


def hessian(f, args):
    """Matrix of second partials of scalar-valued ``f`` (list of lists)."""
    n = len(args)
    return [grad(lambda a, j=j: partial(f, a, j), args) for j in range(n)]


def nth_derivative(g, t, k):
    """k-th derivative of a univariate dual-generic function at plain t.

    Uses k nested first-order seeds, so no factorial rescaling is needed.
    """
    if k == 0:
        return value(g(t))
    x = t
    for _ in range(k):
        x = Dual(x, 1.0)
    out = g(x)
    for _ in range(k):
        out = im_part(out)
    return value(out)


def apply_univariate(derivs, t, k=0):
    """Evaluate the k-th derivative of a univariate function at a (possibly
    dual) point ``t``, given ``derivs(a, k)`` returning the k-th derivative
    at plain points ``a``."""
    if isinstance(t, Dual):
        return Dual(
            apply_univariate(derivs, t.re, k),
            t.im * apply_univariate(derivs, t.re, k + 1),
        )
    return derivs(t, k)
