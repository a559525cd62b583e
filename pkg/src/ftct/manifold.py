"""Chart-based Finsler manifolds.

A chart couples a metric field F(x, v) on an open subset of R^n with a base
point; on top of that this module provides geodesic integration (initial
value and two-point problems via multi-start shooting), asymmetric distances
d and d_m, flag curvature, tangent curvature, and the set of radial
directions at a point (terminal velocities of all minimal geodesics from the
base point).

All differential geometry is generated from F^2 by nested forward-mode
differentiation.  The derivative helpers operate on a single flat argument
list [x_1..x_n, v_1..v_n] and always wrap every entry when seeding, which
keeps nested derivative levels aligned regardless of how deep the curvature
formulas recurse.  Components may be numpy arrays, so one call evaluates a
whole batch of points (the ODE right-hand side exploits this heavily).

Conventions: geodesics solve  x'' + 2 G(x, x') = 0  with the spray
coefficients G generated from the energy Lagrangian F^2/2; curvature uses
the standard spray form of the Riemann operator

    R^i_k = 2 dG^i/dx^k - v^j d2G^i/dx^j dv^k
            + 2 G^j d2G^i/dv^j dv^k - dG^i/dv^j dG^j/dv^k,

which for a flag with unit pole v reproduces g_v(R^v(w, v)v, w) of the Chern
connection.
"""

from __future__ import annotations

import numpy as np

from . import dual, ode
from .dual import Dual, value
from .errors import (
    BvpNoConvergence,
    ChartExit,
    DegenerateFlag,
    InvalidVector,
)
from .norms import CustomNorm, MinkowskiNorm, RiemannianNorm

# ---------------------------------------------------------------------------
# small dual-generic linear algebra (n <= 3)
# ---------------------------------------------------------------------------


def mat_inv(g):
    n = len(g)
    if n == 1:
        return [[1.0 / g[0][0]]]
    if n == 2:
        det = g[0][0] * g[1][1] - g[0][1] * g[1][0]
        idet = 1.0 / det
        return [[g[1][1] * idet, -(g[0][1] * idet)],
                [-(g[1][0] * idet), g[0][0] * idet]]
    if n == 3:
        a, b, c = g[0]
        d, e, f = g[1]
        h, i, j = g[2]
        A = e * j - f * i
        B = -(d * j - f * h)
        C = d * i - e * h
        det = a * A + b * B + c * C
        idet = 1.0 / det
        return [
            [A * idet, -(b * j - c * i) * idet, (b * f - c * e) * idet],
            [B * idet, (a * j - c * h) * idet, -(a * f - c * d) * idet],
            [C * idet, -(a * i - b * h) * idet, (a * e - b * d) * idet],
        ]
    raise ValueError("charts with dimension > 3 are not supported")


def mat_vec(m, v):
    return [sum_scalars([m[i][j] * v[j] for j in range(len(v))])
            for i in range(len(m))]


def dot(a, b):
    return sum_scalars([ai * bi for ai, bi in zip(a, b)])


def sum_scalars(terms):
    acc = terms[0]
    for t in terms[1:]:
        acc = acc + t
    return acc


# ---------------------------------------------------------------------------
# metric fields
# ---------------------------------------------------------------------------


class MetricField:
    """A Minkowski norm on every tangent space of a chart, F = F(x, v).

    Subclasses implement ``F2`` with dual-generic arithmetic.  ``quadratic``
    marks fields that are Riemannian (F^2 quadratic in v), which unlocks the
    cheaper Christoffel form of the spray.
    """

    dim = 2
    quadratic = False

    def F2(self, x, v):
        raise NotImplementedError

    # -- args-list adapters -------------------------------------------------

    def f2_args(self, args):
        n = self.dim
        return self.F2(args[:n], args[n:])

    def metric_args(self, args):
        """g_ij = 1/2 d^2 F^2 / dv_i dv_j as a nested list."""
        n = self.dim
        rows = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1):
                hij = dual.partial(
                    lambda a, jj=j: dual.partial(self.f2_args, a, n + jj),
                    args, n + i)
                rows[i][j] = rows[j][i] = 0.5 * hij
        return rows

    def spray_args(self, args):
        """Spray coefficients G^i(x, v) from the energy Lagrangian."""
        if not any(isinstance(c, Dual) for c in args):
            return self.spray_plain(args)
        n = self.dim
        v = list(args[n:])
        cx = [dual.partial(self.f2_args, args, l) for l in range(n)]
        vdir = v + [0.0] * n

        def vgrad(a):
            return [dual.partial(self.f2_args, a, n + l) for l in range(n)]

        m = dual.directional(vgrad, args, vdir)
        g = self.metric_args(args)
        ginv = mat_inv(g)
        rhs = [0.25 * (m[l] - cx[l]) for l in range(n)]
        return mat_vec(ginv, rhs)

    def spray_plain(self, args):
        """Fast spray for plain (array) arguments: the seed loops are fused
        into single evaluations with a leading seed axis."""
        n = self.dim
        base = np.broadcast(*[np.asarray(a) for a in args]).shape
        x, v = args[:n], args[n:]

        def seed_col(j, depth):  # one-hot over a new leading axis
            e = np.zeros((n,) + (1,) * depth)
            e[(j,) + (0,) * depth] = 1.0
            return e

        # Hessian in v: two fused levels -> (n, n) + base
        seeded = ([Dual(Dual(xi, 0.0), 0.0) for xi in x]
                  + [Dual(Dual(vj, seed_col(j, len(base))),
                          seed_col(j, len(base) + 1))
                     for j, vj in enumerate(v)])
        out = self.f2_args(seeded)
        A = np.broadcast_to(np.asarray(value(dual.im_part(dual.im_part(out)))),
                            (n, n) + base)
        # x-gradient: one fused level -> (n,) + base
        seeded = ([Dual(xi, seed_col(i, len(base))) for i, xi in enumerate(x)]
                  + [Dual(vj, 0.0) for vj in v])
        cx = np.broadcast_to(
            np.asarray(value(dual.im_part(self.f2_args(seeded)))), (n,) + base)
        # mixed term sum_k v_k d2F2/dx_k dv_l: inner v-axis, outer direction x
        seeded = ([Dual(Dual(xi, 0.0), np.asarray(vi)) for xi, vi in zip(x, v)]
                  + [Dual(Dual(vj, seed_col(j, len(base))), 0.0)
                     for j, vj in enumerate(v)])
        out = self.f2_args(seeded)
        m = np.broadcast_to(np.asarray(value(dual.im_part(dual.im_part(out)))),
                            (n,) + base)

        rhs = 0.5 * (m - cx)  # A = 2g, so G = 1/4 g^-1 (m - c) = 1/2 A^-1 (m - c)
        if n == 2:
            det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
            g0 = (A[1, 1] * rhs[0] - A[0, 1] * rhs[1]) / det
            g1 = (-A[1, 0] * rhs[0] + A[0, 0] * rhs[1]) / det
            return [g0, g1]
        mats = np.moveaxis(A.reshape(n, n, -1), 2, 0)
        vecs = np.moveaxis(rhs.reshape(n, -1), 1, 0)[:, :, None]
        sol = np.linalg.solve(mats, vecs)[:, :, 0]
        return [sol[:, i].reshape(base) for i in range(n)]

    # -- conveniences --------------------------------------------------------

    def F_values(self, xs, vs):
        """Plain batched norm values; xs, vs are (..., n) arrays."""
        xs = np.asarray(xs, dtype=float)
        vs = np.asarray(vs, dtype=float)
        comps = [xs[..., i] for i in range(self.dim)] + \
                [vs[..., i] for i in range(self.dim)]
        return np.sqrt(value(self.f2_args(comps)))

    def norm_at(self, x) -> MinkowskiNorm:
        x = [float(c) for c in np.asarray(x, dtype=float)]
        return CustomNorm(lambda v: self.F2(x, v), self.dim)


class RiemannianField(MetricField):
    """F^2 = g_ij(x) v^i v^j for a dual-generic SPD matrix function."""

    quadratic = True

    def __init__(self, g_fn, dim=2):
        self.dim = dim
        self._g_fn = g_fn

    def g_components(self, args):
        return self._g_fn(args[:self.dim])

    def F2(self, x, v):
        g = self._g_fn(list(x))
        n = self.dim
        return sum_scalars([g[i][j] * (v[i] * v[j])
                            for i in range(n) for j in range(n)])

    def metric_args(self, args):
        return self.g_components(args)

    def spray_args(self, args):
        if not any(isinstance(c, Dual) for c in args):
            return self.spray_plain(args)
        n = self.dim
        v = list(args[n:])
        g = self.g_components(args)
        dg = [dual.partial(self.g_components, args, k) for k in range(n)]
        ginv = mat_inv(g)
        out = []
        for i in range(n):
            acc = None
            for j in range(n):
                for k in range(n):
                    gam = None
                    for l in range(n):
                        t = ginv[i][l] * (dg[k][l][j] + dg[j][l][k] - dg[l][j][k])
                        gam = t if gam is None else gam + t
                    term = gam * (v[j] * v[k])
                    acc = term if acc is None else acc + term
            out.append(0.25 * acc)
        return out

    def spray_plain(self, args):
        """Fast spray for plain arguments: metric and its x-derivatives in
        two evaluations of g, Christoffel contraction vectorized."""
        n = self.dim
        x, v = list(args[:self.dim]), [np.asarray(c) for c in args[self.dim:]]
        base = np.broadcast(*[np.asarray(a) for a in args]).shape
        g_nl = self._g_fn(x)
        g = [[np.broadcast_to(np.asarray(value(g_nl[i][j])), base)
              for j in range(n)] for i in range(n)]
        seeded = []
        for i, xi in enumerate(x):
            e = np.zeros((n,) + (1,) * len(base))
            e[(i,) + (0,) * len(base)] = 1.0
            seeded.append(Dual(xi, e))
        g_d = self._g_fn(seeded)
        dg = [[np.broadcast_to(np.asarray(dual.im_part(g_d[i][j])), (n,) + base)
               for j in range(n)] for i in range(n)]

        rhs = []
        for l in range(n):
            acc = 0.0
            for j in range(n):
                for k in range(n):
                    acc = acc + (2.0 * dg[l][j][k] - dg[j][k][l]) * (v[j] * v[k])
            rhs.append(acc)
        if n == 2:
            det = g[0][0] * g[1][1] - g[0][1] * g[1][0]
            return [0.25 * (g[1][1] * rhs[0] - g[0][1] * rhs[1]) / det,
                    0.25 * (-g[1][0] * rhs[0] + g[0][0] * rhs[1]) / det]
        ginv = mat_inv(g)
        return [0.25 * sum_scalars([ginv[i][l] * rhs[l] for l in range(n)])
                for i in range(n)]

    def norm_at(self, x):
        comps = [float(c) for c in np.asarray(x, dtype=float)]
        g = self._g_fn(comps)
        mat = np.array([[value(g[i][j]) for j in range(self.dim)]
                        for i in range(self.dim)])
        return RiemannianNorm(mat)


class ConstantField(MetricField):
    """Locally Minkowski chart: the same norm on every tangent space."""

    def __init__(self, norm: MinkowskiNorm):
        self.norm = norm
        self.dim = norm.dim

    def F2(self, x, v):
        return self.norm.norm_sq(list(v))

    def norm_at(self, x):
        return self.norm


class RandersField(MetricField):
    """F = sqrt(v^T A(x) v) + <b(x), v> with position-dependent data.

    ``A_fn(x)`` returns a nested list, ``b_fn(x)`` a list; both dual-generic.
    """

    def __init__(self, A_fn, b_fn, dim=2):
        self.dim = dim
        self._A_fn = A_fn
        self._b_fn = b_fn

    @classmethod
    def constant(cls, A, b):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        dim = A.shape[0]
        return cls(lambda x: [[A[i, j] for j in range(dim)] for i in range(dim)],
                   lambda x: [b[i] for i in range(dim)], dim=dim)

    def F2(self, x, v):
        A = self._A_fn(list(x))
        b = self._b_fn(list(x))
        n = self.dim
        q = sum_scalars([A[i][j] * (v[i] * v[j])
                         for i in range(n) for j in range(n)])
        lin = dot(b, v)
        return (dual.sqrt(q) + lin) ** 2


class CustomField(MetricField):
    def __init__(self, f2_fn, dim=2):
        self.dim = dim
        self._fn = f2_fn

    def F2(self, x, v):
        return self._fn(list(x), list(v))


class SurfaceOfRevolutionField(RiemannianField):
    """Cartesian chart of the rotationally symmetric metric dt^2 + f(t)^2 dth^2.

    Smooth through the pole (placed at the origin): with u = |x|^2 the metric
    is  g = I + phi(u) x_perp x_perp^T, phi(u) = (f(|x|)^2 - u)/u^2, and the
    profile supplies phi as a cancellation-free series near u = 0.
    """

    def __init__(self, profile):
        self.profile = profile
        super().__init__(self._g, dim=2)

    def _g(self, x):
        x1, x2 = x
        u = x1 * x1 + x2 * x2
        phi = self.profile.phi_of_u(u)
        off = -(phi * (x1 * x2))
        return [[1.0 + phi * (x2 * x2), off],
                [off, 1.0 + phi * (x1 * x1)]]


def polar_surface_field(profile):
    """Polar (t, theta) chart of the same surface, valid away from the pole."""
    def g(x):
        t = x[0]
        f = profile.f(t)
        return [[1.0 + 0.0 * t, 0.0 * t], [0.0 * t, f * f]]
    return RiemannianField(g, dim=2)


# ---------------------------------------------------------------------------
# curvature operators
# ---------------------------------------------------------------------------


def _args_of(x, v):
    return [c for c in x] + [c for c in v]


def riemann_args(field, args):
    """Spray Riemann operator R^i_k as a nested list."""
    n = field.dim
    v = list(args[n:])
    spray = field.spray_args

    Gx = [dual.partial(spray, args, k) for k in range(n)]           # Gx[k][i]
    Gv = [dual.partial(spray, args, n + k) for k in range(n)]       # Gv[k][i]
    vdir = v + [0.0] * n

    def vjac(a):
        out = []
        for k in range(n):
            out.extend(dual.partial(spray, a, n + k))
        return out

    flat_xv = dual.directional(vjac, args, vdir)                    # k-major
    Gval = spray(args)
    gdir = [0.0] * n + list(Gval)
    flat_vv = dual.directional(vjac, args, gdir)

    R = [[None] * n for _ in range(n)]
    for i in range(n):
        for k in range(n):
            quad = sum_scalars([Gv[j][i] * Gv[k][j] for j in range(n)])
            R[i][k] = (2.0 * Gx[k][i] - flat_xv[k * n + i]
                       + 2.0 * flat_vv[k * n + i] - quad)
    return R


def chern_args(field, args):
    """Chern connection coefficients Gamma^l_jk at reference (x, v)."""
    n = field.dim
    g = field.metric_args(args)
    ginv = mat_inv(g)
    dgx = [dual.partial(field.metric_args, args, k) for k in range(n)]
    if field.quadratic:
        cartan = None
    else:
        cartan = [dual.partial(field.metric_args, args, n + m) for m in range(n)]
        nl = [dual.partial(field.spray_args, args, n + j) for j in range(n)]

    Gamma = [[[None] * n for _ in range(n)] for _ in range(n)]
    for l in range(n):
        for j in range(n):
            for k in range(n):
                terms = []
                for s in range(n):
                    base = dgx[k][s][j] + dgx[j][s][k] - dgx[s][j][k]
                    terms.append(ginv[l][s] * (0.5 * base))
                    if cartan is not None:
                        # C_{sjm} = 1/2 dg_sj/dv_m, hence the overall 1/2
                        corr = None
                        for m in range(n):
                            tmc = (cartan[m][s][j] * nl[k][m]
                                   + cartan[m][s][k] * nl[j][m]
                                   - cartan[m][j][k] * nl[s][m])
                            corr = tmc if corr is None else corr + tmc
                        terms.append(-0.5 * (ginv[l][s] * corr))
                Gamma[l][j][k] = sum_scalars(terms)
    return Gamma


def flag_curvature_batch(field, x, v, w):
    """K(v, w) on batch components; returns (K, denominator_ratio)."""
    args = _args_of(x, v)
    g = field.metric_args(args)
    R = riemann_args(field, args)
    Rw = mat_vec(R, list(w))
    gvv = value(_quad(g, v, v))
    gww = value(_quad(g, w, w))
    gvw = value(_quad(g, v, w))
    num = value(_quad(g, Rw, w))
    den = gvv * gww - gvw ** 2
    ratio = den / (gvv * gww)
    with np.errstate(divide="ignore", invalid="ignore"):
        K = num / den
    return K, ratio


def _quad(g, a, b):
    n = len(g)
    return sum_scalars([g[i][j] * (a[i] * b[j]) for i in range(n) for j in range(n)])


def tangent_curvature_batch(field, x, v, w):
    """T(v, w) = g_v(2 G(x, w) - Gamma(x, v)(w, w), v) on batch components."""
    args_v = _args_of(x, v)
    args_w = _args_of(x, w)
    Gw = field.spray_args(args_w)
    Gamma = chern_args(field, args_v)
    g = field.metric_args(args_v)
    n = field.dim
    diff = [2.0 * Gw[i] - _quad(Gamma[i], list(w), list(w)) for i in range(n)]
    return value(_quad(g, diff, v))


# ---------------------------------------------------------------------------
# chart, geodesics, shooting
# ---------------------------------------------------------------------------


class BoxDomain:
    """Open axis-aligned box; charts treat leaving it as ChartExit."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.all((pts > self.lo) & (pts < self.hi), axis=-1)


class DiskDomain:
    """Open disk around the origin (Cartesian charts of revolution surfaces)."""

    def __init__(self, radius):
        self.radius = float(radius)

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.sum(pts * pts, axis=-1) < self.radius ** 2


class GeodesicPath:
    """Dense unit-speed geodesic with arclength parameter in [0, length]."""

    def __init__(self, chart, ts, ys, fs):
        self.chart = chart
        self.ts = ts
        self.ys = ys
        self.fs = fs
        self.forward_length = float(ts[-1])
        self._reverse_length = None

    # -- evaluation ----------------------------------------------------------

    def state(self, t):
        tq = np.clip(np.asarray(t, dtype=float), 0.0, self.ts[-1])
        scalar = tq.ndim == 0
        tq = np.atleast_1d(tq)
        idx = np.clip(np.searchsorted(self.ts, tq, side="right") - 1,
                      0, len(self.ts) - 2)
        t0 = self.ts[idx]
        h = self.ts[idx + 1] - t0
        s = ((tq - t0) / h)[:, None]
        h = h[:, None]
        y0, y1 = self.ys[idx], self.ys[idx + 1]
        f0, f1 = self.fs[idx], self.fs[idx + 1]
        out = ((1 + 2 * s) * (1 - s) ** 2 * y0 + s * (1 - s) ** 2 * h * f0
               + s * s * (3 - 2 * s) * y1 + s * s * (s - 1) * h * f1)
        return out[0] if scalar else out

    def position(self, t):
        n = self.chart.dim
        return self.state(t)[..., :n]

    def velocity(self, t):
        n = self.chart.dim
        return self.state(t)[..., n:]

    @property
    def samples(self):
        n = self.chart.dim
        return self.ts, self.ys[:, :n], self.ys[:, n:]

    # -- lengths ---------------------------------------------------------------

    @property
    def reverse_length(self):
        """Integral of F(-c') along the curve (length of the reverse curve)."""
        if self._reverse_length is None:
            ts = np.linspace(0.0, self.forward_length, 513)
            st = self.state(ts)
            n = self.chart.dim
            fr = self.chart.field.F_values(st[:, :n], -st[:, n:])
            self._reverse_length = float(_simpson(fr, ts))
        return self._reverse_length

    def speed_deviation(self):
        """max |F(c') - 1| over the stored nodes."""
        n = self.chart.dim
        fv = self.chart.field.F_values(self.ys[:, :n], self.ys[:, n:])
        return float(np.max(np.abs(fv - 1.0)))


def _simpson(vals, ts):
    n = len(ts) - 1
    h = ts[1] - ts[0]
    return h / 3 * (vals[0] + vals[-1] + 4 * np.sum(vals[1:-1:2])
                    + 2 * np.sum(vals[2:-2:2]))


class FinslerChart:
    """A metric field on a chart domain with a distinguished base point."""

    def __init__(self, field, domain, base_point, reversible=False, name="chart",
                 bvp_starts=32, rtol=1e-9, atol=1e-11, h_max_path=0.02,
                 l_max_factor=3.0):
        self.field = field
        self.domain = domain
        self.base_point = np.asarray(base_point, dtype=float)
        self.reversible = bool(reversible)
        self.name = name
        self.bvp_starts = int(bvp_starts)
        self.rtol = float(rtol)
        self.atol = float(atol)
        self.h_max_path = float(h_max_path)
        self.l_max_factor = float(l_max_factor)

    @property
    def dim(self):
        return self.field.dim

    # -- metric conveniences ---------------------------------------------------

    def F(self, x, v):
        return float(self.field.F_values(np.asarray(x, float), np.asarray(v, float)))

    def norm_at(self, x):
        return self.field.norm_at(x)

    def unit_vector(self, x, v):
        v = np.asarray(v, dtype=float)
        nrm = self.F(x, v)
        if nrm <= 0 or not np.isfinite(nrm):
            raise InvalidVector("cannot normalize a zero or non-finite vector")
        return v / nrm

    def lam(self, x, unit_dir):
        """lambda = max(1, F(-e)) for a unit direction e at x."""
        return max(1.0, self.F(x, -np.asarray(unit_dir, float)))

    # -- spray RHS ---------------------------------------------------------------

    def spray_rhs(self):
        n = self.dim
        field = self.field

        def rhs(y):
            comps = [y[:, i] for i in range(2 * n)]
            G = field.spray_args(comps)
            cols = [y[:, n + i] for i in range(n)] + \
                   [-2.0 * value(G[i]) for i in range(n)]
            return np.stack(cols, axis=1)

        return rhs

    def _inside(self):
        n = self.dim
        return lambda y: self.domain.contains(y[:, :n])

    # -- public geodesic operations ----------------------------------------------

    def geodesic_ivp(self, x, v, length, rtol=None, h_max=None) -> GeodesicPath:
        """Unit-speed geodesic of given forward length from (x, v)."""
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(v)):
            raise InvalidVector("initial velocity has non-finite entries")
        u = self.unit_vector(x, v)
        y0 = np.concatenate([x, u])[None, :]
        sol = ode.integrate(
            self.spray_rhs(), y0, float(length),
            rtol=rtol or self.rtol, atol=self.atol,
            h_max=h_max or self.h_max_path, inside=self._inside(),
        )
        if sol.status[0] == ode.STATUS_EXIT:
            raise ChartExit(sol.exit_point[0, :self.dim])
        return GeodesicPath(self, sol.ts, sol.ys[:, 0, :], sol.fs[:, 0, :])

    def minimal_geodesic(self, x, y, n_starts=None):
        """All minimal geodesics x -> y (within 1e-6 of the minimum) and d(x, y)."""
        sols = shoot_min_geodesics(self, x, [y], n_starts or self.bvp_starts)[0]
        if not sols:
            raise BvpNoConvergence(f"no geodesic found from {x} to {y}")
        paths = [s.path() for s in sols]
        return paths, sols[0].length

    def distance(self, x, y, n_starts=None):
        sols = shoot_min_geodesics(self, x, [y], n_starts or self.bvp_starts)[0]
        if not sols:
            raise BvpNoConvergence(f"no geodesic found from {x} to {y}")
        return sols[0].length

    def d_m(self, x, y, n_starts=None):
        return max(self.distance(x, y, n_starts), self.distance(y, x, n_starts))

    def flag_curvature(self, x, v, w):
        """Flag curvature K(v, w); DegenerateFlag when v, w nearly parallel."""
        x, v, w = (np.asarray(a, dtype=float) for a in (x, v, w))
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
            raise InvalidVector("flag data must be finite")
        K, ratio = flag_curvature_batch(self.field, list(x), list(v), list(w))
        if ratio < 1e-10:
            raise DegenerateFlag("flag plane numerically degenerate")
        return float(K)

    def tangent_curvature(self, x, v, w):
        x, v, w = (np.asarray(a, dtype=float) for a in (x, v, w))
        if np.linalg.norm(v) == 0 or np.linalg.norm(w) == 0:
            raise InvalidVector("tangent curvature needs nonzero vectors")
        return float(tangent_curvature_batch(self.field, list(x), list(v), list(w)))

    def radial_direction_set(self, z, n_starts=None, angle_tol=1e-4):
        """Terminal unit velocities of all minimal geodesics base_point -> z."""
        sols = shoot_min_geodesics(self, self.base_point, [z],
                                   n_starts or self.bvp_starts)[0]
        if not sols:
            raise BvpNoConvergence(f"no geodesic found from base point to {z}")
        dirs, kept = [], []
        for s in sols:
            ang = np.arctan2(s.v_end[1], s.v_end[0])
            if all(_angdiff(ang, a) > angle_tol for a in kept):
                kept.append(ang)
                dirs.append(s.v_end)
        return np.array(dirs), sols[0].length

    def reverse_geodesic_residual(self, path: GeodesicPath, n_samples=33):
        """max |2G(x,-v) - 2G(x,v)| along the path: 0 iff the reverse curve
        is geodesic (with the same parametrization class)."""
        ts = np.linspace(0, path.forward_length, n_samples)
        st = path.state(ts)
        n = self.dim
        xs = [st[:, i] for i in range(n)]
        vs = [st[:, n + i] for i in range(n)]
        Gf = self.field.spray_args(xs + vs)
        Gb = self.field.spray_args(xs + [-c for c in vs])
        res = [np.abs(2 * value(Gb[i]) - 2 * value(Gf[i])) for i in range(n)]
        return float(np.max(res))


def _angdiff(a, b):
    d = abs(a - b) % (2 * np.pi)
    return min(d, 2 * np.pi - d)


# ---------------------------------------------------------------------------
# multi-start shooting
# ---------------------------------------------------------------------------


class BvpSolution:
    """One geodesic solving a two-point problem: source -> target."""

    __slots__ = ("chart", "source", "alpha", "length", "v_start", "x_end", "v_end")

    def __init__(self, chart, source, alpha, length, v_start, x_end, v_end):
        self.chart = chart
        self.source = source
        self.alpha = alpha
        self.length = length
        self.v_start = v_start
        self.x_end = x_end
        self.v_end = v_end

    def path(self, h_max=None) -> GeodesicPath:
        return self.chart.geodesic_ivp(self.source, self.v_start, self.length,
                                       h_max=h_max)


def straight_F_length(chart, a, b, nodes=9):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    ss = np.linspace(0.0, 1.0, nodes)
    xs = a[None, :] + ss[:, None] * (b - a)[None, :]
    vs = np.broadcast_to(b - a, xs.shape)
    fv = chart.field.F_values(xs, vs)
    return float(_simpson(fv, ss))


def shoot_min_geodesics(chart, source, targets, n_starts=32, l_max=None,
                        tie_tol=1e-6, max_iter=30, keep_all=False,
                        rtol_fine=1e-11, tol_factor=1e-10):
    """Multi-start shooting from one source to many targets.

    Returns, per target, the list of converged :class:`BvpSolution` whose
    length is within ``tie_tol`` of that target's minimum (all solutions when
    ``keep_all``), sorted by length.  Targets equal to the source yield a
    trivial zero-length solution.

    Newton refinement runs in two phases: cheap integrations until the miss
    drops below 1e-6, then `rtol_fine` integrations down to the position
    tolerance ``tol_factor * (1 + separation)``.
    """
    source = np.asarray(source, dtype=float)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    M = targets.shape[0]
    n = chart.dim
    if n != 2:
        raise NotImplementedError("shooting is implemented for 2D charts")

    results = [[] for _ in range(M)]
    sep = np.linalg.norm(targets - source[None, :], axis=1)
    live = [m for m in range(M) if sep[m] > 1e-13]
    for m in range(M):
        if sep[m] <= 1e-13:
            results[m].append(BvpSolution(chart, source, 0.0, 0.0,
                                          np.zeros(n), source.copy(), np.zeros(n)))
    if not live:
        return results

    # d(source, target) never exceeds the F-length of the straight chord
    # (domains are convex), which bounds both the fan horizon and any
    # admissible solution length.
    l_chord = np.full(M, np.inf)
    for m in live:
        l_chord[m] = straight_F_length(chart, source, targets[m])
    l_est = l_chord[live]
    if l_max is None:
        factor = chart.l_max_factor if keep_all else 1.15
        l_max = float(np.max(l_est) * factor + 0.1)

    # fan: uniform angles plus one aimed angle per live target
    aims = [np.arctan2(*(targets[m] - source)[::-1]) for m in live]
    fan_angles = np.sort(np.unique(np.concatenate([
        np.linspace(0.0, 2 * np.pi, n_starts, endpoint=False), aims])))
    B = len(fan_angles)
    units = np.stack([np.cos(fan_angles), np.sin(fan_angles)], axis=1)
    Fv = chart.field.F_values(np.broadcast_to(source, (B, 2)), units)
    v0 = units / Fv[:, None]
    y0 = np.concatenate([np.broadcast_to(source, (B, 2)), v0], axis=1)
    fan = ode.integrate(chart.spray_rhs(), y0, l_max, rtol=1e-6, atol=1e-8,
                        inside=chart._inside())

    # seeds per target: local minima of the closest-approach over the fan
    seed_alpha, seed_len, seed_tgt = [], [], []
    pos = fan.ys[:, :, :2]
    tgrid = fan.ts
    max_seeds = 10
    for m in live:
        d2 = np.sum((pos - targets[m][None, None, :]) ** 2, axis=2)
        d2 = np.where(tgrid[:, None] <= fan.t_end[None, :] + 1e-12, d2, np.inf)
        kbest = np.argmin(d2, axis=0)
        dbest = d2[kbest, np.arange(B)]
        cand = []
        for i in range(B):
            left = dbest[(i - 1) % B]
            right = dbest[(i + 1) % B]
            if dbest[i] <= left and dbest[i] <= right and np.isfinite(dbest[i]):
                cand.append((dbest[i], fan_angles[i], max(tgrid[kbest[i]], 1e-3)))
        cand.sort(key=lambda c: c[0])
        for d0, a0, l0 in cand[:max_seeds]:
            seed_alpha.append(a0)
            seed_len.append(l0)
            seed_tgt.append(m)
    if not seed_alpha:
        return results

    alpha = np.array(seed_alpha)
    length = np.array(seed_len)
    tgt = np.array(seed_tgt, dtype=int)
    S = len(alpha)
    active = np.ones(S, dtype=bool)
    miss = np.full(S, np.inf)
    fine_rounds = np.zeros(S, dtype=int)
    capped = np.zeros(S, dtype=int)
    if keep_all:
        len_cap = np.full(S, 1.6 * l_max)
    else:
        len_cap = l_chord[tgt] * (1 + 1e-3) + 1e-3
    length = np.minimum(length, len_cap)
    dal = 1e-7
    rhs = chart.spray_rhs()
    tol_pos = tol_factor * (1.0 + float(np.max(sep)))
    sols_acc = [[] for _ in range(M)]

    def newton_round(idx, rt, at, fine):
        al = np.concatenate([alpha[idx], alpha[idx] + dal])
        ln = np.concatenate([length[idx], length[idx]])
        units = np.stack([np.cos(al), np.sin(al)], axis=1)
        src = np.broadcast_to(source, (len(al), 2))
        Fv = chart.field.F_values(src, units)
        y0 = np.concatenate([src, units / Fv[:, None]], axis=1)
        sol = ode.integrate(rhs, y0, ln, rtol=rt, atol=at)
        k = len(idx)
        E = sol.y_end[:k, :2]
        V = sol.y_end[:k, 2:]
        E2 = sol.y_end[k:, :2]
        r = E - targets[tgt[idx]]
        rn = np.linalg.norm(r, axis=1)
        miss[idx] = rn

        done = (rn <= tol_pos) if fine else np.zeros(len(idx), dtype=bool)
        for jj in np.where(done)[0]:
            si = idx[jj]
            sols_acc[tgt[si]].append(BvpSolution(
                chart, source, float(alpha[si]), float(length[si]),
                y0[jj, 2:].copy(), E[jj].copy(), V[jj].copy()))
        active[idx[done]] = False

        sel = ~done
        idxr = idx[sel]
        if len(idxr) == 0:
            return
        Ja = (E2[sel] - E[sel]) / dal
        Jl = V[sel]
        det = Ja[:, 0] * Jl[:, 1] - Ja[:, 1] * Jl[:, 0]
        ok = np.abs(det) > 1e-14
        rr = r[sel]
        with np.errstate(divide="ignore", invalid="ignore"):
            da = np.where(ok, -(rr[:, 0] * Jl[:, 1] - rr[:, 1] * Jl[:, 0]) / det, 0.0)
            dl = np.where(ok, -(Ja[:, 0] * rr[:, 1] - Ja[:, 1] * rr[:, 0]) / det, 0.0)
        da = np.clip(da, -0.4, 0.4)
        dl = np.clip(dl, -0.3 * l_max, 0.3 * l_max)
        alpha[idxr] += da
        new_len = np.clip(length[idxr] + dl, 1e-6, len_cap[idxr])
        at_cap = new_len >= len_cap[idxr] - 1e-12
        capped[idxr] = np.where(at_cap, capped[idxr] + 1, 0)
        length[idxr] = new_len
        active[idxr] = (active[idxr] & ok & np.isfinite(rn[sel])
                        & (capped[idxr] < 3))

    for _ in range(max_iter):
        idx = np.where(active)[0]
        if len(idx) == 0:
            break
        # seeds that cannot beat an already-found solution are useless
        if not keep_all:
            for si in idx:
                found = sols_acc[tgt[si]]
                if found and length[si] > min(s.length for s in found) + 100 * tie_tol:
                    active[si] = False
            idx = np.where(active)[0]
            if len(idx) == 0:
                break
        is_fine = miss[idx] <= 1e-6
        if np.any(~is_fine):
            newton_round(idx[~is_fine], 1e-8, 1e-10, fine=False)
        if np.any(is_fine):
            fidx = idx[is_fine]
            newton_round(fidx, rtol_fine, rtol_fine * 1e-2, fine=True)
            fine_rounds[fidx] += 1
            active[fidx] &= fine_rounds[fidx] < 6

    for m in range(M):
        if not sols_acc[m]:
            continue
        uniq = []
        for s in sorted(sols_acc[m], key=lambda s: s.length):
            if all(_angdiff(s.alpha, u.alpha) > 1e-6 or abs(s.length - u.length) > 1e-8
                   for u in uniq):
                uniq.append(s)
        lmin = uniq[0].length
        results[m] = [s for s in uniq
                      if keep_all or s.length <= lmin + tie_tol]
    return results
