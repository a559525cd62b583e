"""Radial warping profiles for rotationally symmetric surfaces.

A profile is a positive smooth function ``f`` on ``(0, t_max]`` extending to
a smooth odd function through 0 with ``f(0) = 0``, ``f'(0) = 1``.  Its radial
curvature function is ``G = -f''/f``, equivalently ``f'' + G f = 0``.

Profiles come in two flavors:

* closed form -- ``f`` is given analytically (written against
  :mod:`ftct.dual` math so it can be differentiated to high order);
* curvature form -- ``G`` is given and ``f`` is produced by integrating the
  Jacobi-type ODE, with a high-order odd series starting the integration off
  the removable singularity at 0 and a dense quintic-Hermite table for fast
  vectorized evaluation.

Both flavors expose the same interface: ``f``, ``fp``, ``fpp`` and ``G`` are
dual-generic (accept floats, numpy arrays, or nested duals), and
``phi_of_u`` provides the cancellation-free even combination
``(f(r)^2 - r^2)/r^4`` as a function of ``u = r^2`` that Cartesian charts
need through the pole.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp

from . import dual
from .dual import Dual, value
from .errors import IntegrationFailure, ProfileVanishes

SERIES_TERMS = 7          # odd orders 1, 3, ..., 13
T_SERIES = 0.08           # below this, series evaluation replaces 0/0-prone forms
_ODE_START = 1e-3         # hand over from series to the ODE integrator here


def _series_divide(num, den, nterms):
    """Coefficients of num(u)/den(u) (den[0] != 0) to ``nterms`` terms."""
    q = np.zeros(nterms)
    for k in range(nterms):
        acc = num[k] if k < len(num) else 0.0
        for j in range(k):
            dj = den[k - j] if k - j < len(den) else 0.0
            acc -= q[j] * dj
        q[k] = acc / den[0]
    return q


def _polyval_u(coeffs, u):
    """Dual-generic Horner evaluation of sum coeffs[k] u^k."""
    acc = coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * u + c
    return acc


def _clamp_min(x, floor_val):
    """Replace entries whose primal value is below ``floor_val``; keeps the
    computation finite on the masked branch of a piecewise formula."""
    mask = value(x) < floor_val
    if not np.any(mask):
        return x
    return dual.where(mask, floor_val, x)


class RadialProfile:
    """Common interface for the two profile flavors.

    Subclasses must provide `_f_raw/_fp_raw/_fpp_raw` valid away from 0 and
    may rely on the shared series data near 0.
    """

    def __init__(self, t_max):
        if t_max <= 0:
            raise ValueError("t_max must be positive")
        self.t_max = float(t_max)
        # filled by subclass __init__
        self.odd_coeffs = None     # a_1, a_3, ..., odd Taylor coefficients
        self._g_series = None      # G as even series in u = t^2
        self._phi_series = None    # (f^2 - t^2)/t^4 as series in u

    # -- series plumbing ---------------------------------------------------

    def _finish_series(self):
        a = self.odd_coeffs
        n = len(a)
        # A(u) = f/t, B~(u) = t f'' / u  as series in u = t^2
        A = np.array(a)
        Bt = np.array([(2 * k + 3) * (2 * k + 2) * a[k + 1] for k in range(n - 1)])
        self._g_series = -_series_divide(Bt, A, n - 1)
        # (A^2 - 1)/u
        A2 = np.convolve(A, A)[:n]
        A2[0] -= 1.0
        self._phi_series = A2[1:]

    def f_series(self, t):
        u = t * t
        return t * _polyval_u(self.odd_coeffs, u)

    def fp_series(self, t):
        a = self.odd_coeffs
        c = [(2 * k + 1) * a[k] for k in range(len(a))]
        return _polyval_u(c, t * t)

    def fpp_series(self, t):
        a = self.odd_coeffs
        c = [(2 * k + 3) * (2 * k + 2) * a[k + 1] for k in range(len(a) - 1)]
        return t * _polyval_u(c, t * t)

    # -- public dual-generic evaluation -------------------------------------

    def f(self, t):
        raise NotImplementedError

    def fp(self, t):
        raise NotImplementedError

    def fpp(self, t):
        raise NotImplementedError

    def G(self, t):
        """Radial curvature -f''/f, series-protected near the pole."""
        tv = value(t)
        if np.all(tv >= T_SERIES):
            return -(self.fpp(t) / self.f(t))
        series = _polyval_u(self._g_series, t * t)
        if np.all(tv < T_SERIES):
            return series
        ts = _clamp_min(t, T_SERIES)
        return dual.where(tv < T_SERIES, series, -(self.fpp(ts) / self.f(ts)))

    def phi_of_u(self, u):
        """(f(r)^2 - r^2)/r^4 with u = r^2, smooth through the pole."""
        uv = value(u)
        u_switch = T_SERIES ** 2
        if np.all(uv >= u_switch):
            r = dual.sqrt(u)
            return (self.f(r) ** 2 - u) / u ** 2
        series = _polyval_u(self._phi_series, u)
        if np.all(uv < u_switch):
            return series
        us = _clamp_min(u, u_switch)
        r = dual.sqrt(us)
        return dual.where(uv < u_switch, series, (self.f(r) ** 2 - us) / us ** 2)

    # -- housekeeping --------------------------------------------------------

    def check_positive(self, n=2000):
        ts = np.linspace(self.t_max / n, self.t_max, n)
        fv = value(self.f(ts))
        if np.any(fv <= 0.0):
            bad = ts[np.argmax(fv <= 0.0)]
            raise ProfileVanishes(f"profile non-positive near t = {bad:.6g}")


class ClosedFormProfile(RadialProfile):
    """Profile given by an analytic odd function written in dual math."""

    def __init__(self, fn, t_max, name=None):
        super().__init__(t_max)
        self.fn = fn
        self.name = name or getattr(fn, "__name__", "closed-form")
        coeffs = []
        for k in range(SERIES_TERMS):
            order = 2 * k + 1
            coeffs.append(dual.nth_derivative(fn, 0.0, order) / math.factorial(order))
        self.odd_coeffs = np.array(coeffs)
        if abs(self.odd_coeffs[0] - 1.0) > 1e-10:
            raise ValueError(f"profile must have f'(0) = 1, got {self.odd_coeffs[0]}")
        self._finish_series()
        self.check_positive()

    def f(self, t):
        return self.fn(t)

    def fp(self, t):
        if isinstance(t, Dual):
            return dual.apply_univariate(self._derivs, t, 1)
        return dual.im_part(self.fn(Dual(t, 1.0)))

    def fpp(self, t):
        if isinstance(t, Dual):
            return dual.apply_univariate(self._derivs, t, 2)
        return dual.im_part(dual.im_part(self.fn(Dual(Dual(t, 1.0), 1.0))))

    def _derivs(self, a, k):
        if k == 0:
            return value(self.fn(a))
        x = a
        for _ in range(k):
            x = Dual(x, 1.0)
        out = self.fn(x)
        for _ in range(k):
            out = dual.im_part(out)
        return value(out)


class CurvatureProfile(RadialProfile):
    """Profile integrated from its radial curvature function G."""

    def __init__(self, g_fn, t_max, name=None, grid_step=2e-3):
        super().__init__(t_max)
        self.g_fn = g_fn
        self.name = name or "curvature-built"
        self.odd_coeffs = self._series_from_curvature()
        self._finish_series()
        self._build_table(grid_step)
        self.check_positive()

    # series: f^(k)(0) from f'' = -G f and the derivatives of G at 0
    def _series_from_curvature(self):
        kmax = 2 * SERIES_TERMS - 1
        gders = [dual.nth_derivative(self.g_fn, 0.0, j) for j in range(kmax - 1)]
        fd = [0.0, 1.0]  # f(0), f'(0)
        for k in range(2, kmax + 1):
            m = k - 2
            acc = 0.0
            for j in range(m + 1):
                acc += math.comb(m, j) * gders[j] * fd[m - j]
            fd.append(-acc)
        return np.array([fd[2 * k + 1] / math.factorial(2 * k + 1)
                         for k in range(SERIES_TERMS)])

    def _build_table(self, grid_step):
        t0 = _ODE_START
        t1 = self.t_max * 1.02
        y0 = [value(self.f_series(t0)), value(self.fp_series(t0))]
        sol = solve_ivp(
            lambda t, y: [y[1], -value(self.g_fn(t)) * y[0]],
            (t0, t1), y0, method="DOP853", rtol=1e-12, atol=1e-14,
            dense_output=True,
        )
        if not sol.success:
            raise IntegrationFailure(f"profile ODE failed: {sol.message}")
        n = max(64, int(np.ceil((t1 - t0) / grid_step)))
        ts = np.linspace(t0, t1, n + 1)
        fs, fps = sol.sol(ts)
        gs = value(self.g_fn(ts))
        fpps = -gs * fs
        self._grid_t0 = t0
        self._grid_h = ts[1] - ts[0]
        self._grid_n = n
        self._coeffs = self._hermite_quintic(fs, fps, fpps, self._grid_h)

    @staticmethod
    def _hermite_quintic(f, g, s, h):
        """Per-segment quintic coefficients matching value/slope/curvature."""
        f0, f1 = f[:-1], f[1:]
        g0, g1 = g[:-1] * h, g[1:] * h
        s0, s1 = s[:-1] * h * h, s[1:] * h * h
        A = f1 - f0 - g0 - 0.5 * s0
        B = g1 - g0 - s0
        C = s1 - s0
        c = np.empty((len(f0), 6))
        c[:, 0] = f0
        c[:, 1] = g0
        c[:, 2] = 0.5 * s0
        c[:, 3] = 10 * A - 4 * B + 0.5 * C
        c[:, 4] = -15 * A + 7 * B - C
        c[:, 5] = 6 * A - 3 * B + 0.5 * C
        return c

    def _table_eval(self, t, deriv=0):
        tt = np.asarray(t, dtype=float)
        scalar = tt.ndim == 0
        tt = np.atleast_1d(tt)
        xi = (tt - self._grid_t0) / self._grid_h
        idx = np.clip(np.floor(xi).astype(int), 0, self._grid_n - 1)
        loc = xi - idx
        c = self._coeffs[idx]
        if deriv == 0:
            out = c[:, 5]
            for k in (4, 3, 2, 1, 0):
                out = out * loc + c[:, k]
        elif deriv == 1:
            out = 5 * c[:, 5]
            for k in (4, 3, 2, 1):
                out = out * loc + k * c[:, k]
            out = out / self._grid_h
        else:
            raise ValueError("table stores value and first derivative only")
        return out[0] if scalar else out

    def _derivs(self, a, k, _cache=None):
        """Derivative tower: table for orders 0-1, the ODE recursion above."""
        if k == 0:
            return self._f_plain(a)
        if k == 1:
            return self._fp_plain(a)
        m = k - 2
        acc = 0.0
        for j in range(m + 1):
            gj = dual.nth_derivative(self.g_fn, a, j) if j else value(self.g_fn(a))
            acc = acc + math.comb(m, j) * gj * self._derivs(a, m - j)
        return -acc

    def _f_plain(self, t):
        tv = np.asarray(t, dtype=float)
        lo = tv < T_SERIES
        if not np.any(lo):
            return self._table_eval(t, 0)
        if np.all(lo):
            return value(self.f_series(tv))
        return np.where(lo, value(self.f_series(np.where(lo, tv, T_SERIES))),
                        self._table_eval(np.where(lo, T_SERIES, tv), 0))

    def _fp_plain(self, t):
        tv = np.asarray(t, dtype=float)
        lo = tv < T_SERIES
        if not np.any(lo):
            return self._table_eval(t, 1)
        if np.all(lo):
            return value(self.fp_series(tv))
        return np.where(lo, value(self.fp_series(np.where(lo, tv, T_SERIES))),
                        self._table_eval(np.where(lo, T_SERIES, tv), 1))

    def f(self, t):
        if isinstance(t, Dual):
            return dual.apply_univariate(self._derivs, t)
        return self._f_plain(t)

    def fp(self, t):
        if isinstance(t, Dual):
            return dual.apply_univariate(self._derivs, t, 1)
        return self._fp_plain(t)

    def fpp(self, t):
        if isinstance(t, Dual):
            return dual.apply_univariate(self._derivs, t, 2)
        return -value(self.g_fn(t)) * self._f_plain(t)

    def G(self, t):
        return self.g_fn(t)


# -- stock profiles ----------------------------------------------------------

def plane_profile(t_max):
    """Flat plane, f(t) = t."""
    return ClosedFormProfile(lambda t: t * 1.0, t_max, name="plane")


def hyperbolic_profile(t_max):
    """Constant curvature -1, f(t) = sinh t."""
    return ClosedFormProfile(dual.sinh, t_max, name="hyperbolic")


def gauss_tanh_profile(t_max):
    """f(t) = exp(-t^2) tanh(t): a von Mangoldt profile whose curvature
    starts at 8 and decreases to -infinity."""
    return ClosedFormProfile(lambda t: dual.exp(-(t * t)) * dual.tanh(t),
                             t_max, name="gauss-tanh")
