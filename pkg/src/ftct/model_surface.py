"""Rotationally symmetric Riemannian reference surfaces.

The model surface carries the metric dt^2 + f(t)^2 dtheta^2 in geodesic
polar coordinates around its pole.  Everything a comparison argument needs
lives here: profile construction from a closed form or from a radial
curvature function, the curvature-weakened modification f'' + (G - d) f = 0,
distances and minimal geodesics via Clairaut-reduced shooting, comparison
triangles (monotone bisection over the angular separation), the cut locus of
an off-pole point, and the double-triangle gluing check.

Unit-speed geodesics are integrated in the coordinates (t, theta, phi) where
phi is the angle from the outward meridian direction:

    t' = cos(phi),  theta' = sin(phi)/f(t),  phi' = -(f'(t)/f(t)) sin(phi),

so f(t) sin(phi) is a first integral (Clairaut).  Since theta' keeps its
sign, geodesics aiming at positive angular separation have phi0 in (0, pi)
and shooting reduces to one parameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .dual import value
from .errors import (
    NoComparisonTriangle,
    PreconditionFailed,
    RhoNotUnique,
    TruncationTooShort,
    UnsupportedSurface,
)
from .profiles import ClosedFormProfile, CurvatureProfile, RadialProfile

_POLE_EPS = 1e-12


class ModelSurface:
    """A profile together with its truncation radius and derived landmarks.

    Attributes
    ----------
    rho : float or None
        Unique interior zero of f' (the waist), when present.
    von_mangoldt : bool
        True when G is non-increasing on the sampled grid.
    delta : float
        Curvature weakening this surface was built with (0 for a base model).
    """

    def __init__(self, profile: RadialProfile, t_max, name=None, delta=0.0):
        self.profile = profile
        self.t_max = float(t_max)
        self.name = name or profile.name
        self.delta = float(delta)
        self._fan_cache = {}
        self._scan_landmarks()

    # -- profile delegates -------------------------------------------------

    def f(self, t):
        return self.profile.f(t)

    def fp(self, t):
        return self.profile.fp(t)

    def fpp(self, t):
        return self.profile.fpp(t)

    def G(self, t):
        return self.profile.G(t)

    # -- landmarks ------------------------------------------------------------

    def _scan_landmarks(self, n=4001):
        ts = np.linspace(self.t_max / n, self.t_max, n)
        fpv = value(self.fp(ts))
        sign_change = np.where(np.diff(np.signbit(fpv)))[0]
        zeros = []
        for i in sign_change:
            zeros.append(brentq(lambda t: float(value(self.fp(t))),
                                ts[i], ts[i + 1], xtol=1e-14))
        if len(zeros) > 1:
            raise RhoNotUnique(f"profile derivative vanishes at {zeros}")
        self.rho = zeros[0] if zeros else None
        gv = value(self.G(ts))
        self.von_mangoldt = bool(np.all(np.diff(gv) <= 1e-9 * max(1.0, np.max(np.abs(gv)))))
        self.g_scale = float(np.max(np.abs(gv)))
        if self.rho is not None:
            self.g_at_rho = float(value(self.G(self.rho)))
            self.rho_nondegenerate = abs(self.g_at_rho) > 1e-6 * max(1.0, self.g_scale)
        else:
            self.g_at_rho = None
            self.rho_nondegenerate = False

    # -- distances ------------------------------------------------------------

    def distance(self, a, b):
        """d((t1, th1), (t2, th2)); also returns the realized geodesic."""
        return surface_distance(self, a, b)

    def _fan(self, t1, t2):
        key = (round(float(t1), 12), round(float(t2), 12))
        if key not in self._fan_cache:
            if len(self._fan_cache) > 16:
                self._fan_cache.clear()
            self._fan_cache[key] = GeodesicFan(self, float(t1), float(t2))
        return self._fan_cache[key]


@dataclass
class PolarGeodesic:
    """Unit-speed geodesic on the model, sampled in (t, theta, phi)."""

    s: np.ndarray
    t: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    length: float
    through_pole: bool = False

    @property
    def phi0(self):
        return float(self.phi[0])

    @property
    def arrival_cos(self):
        """cos of the angle at the endpoint between the incoming geodesic
        reversed and the inward meridian; equals t'(s_end)."""
        return float(np.cos(self.phi[-1]))


@dataclass
class ComparisonTriangle:
    """Geodesic triangle with one vertex at the pole.

    ``delta_theta`` is the angular separation of the two off-pole vertices
    (x at theta = 0, y at theta = delta_theta); angle_p coincides with it.
    """

    side_px: float
    side_py: float
    side_xy: float
    delta_theta: float
    angle_p: float
    angle_x: float
    angle_y: float
    surface: ModelSurface = None

    def angles(self):
        return self.angle_p, self.angle_x, self.angle_y


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def build_profile(t_max, closed_form=None, curvature=None, name=None) -> ModelSurface:
    """Build a model surface either from an analytic odd profile f (written
    in dual math) or from its radial curvature function G."""
    if (closed_form is None) == (curvature is None):
        raise PreconditionFailed("give exactly one of closed_form or curvature")
    if t_max <= 0:
        raise PreconditionFailed("t_max must be positive")
    if closed_form is not None:
        profile = ClosedFormProfile(closed_form, t_max, name=name)
    else:
        profile = CurvatureProfile(curvature, t_max, name=name)
    return ModelSurface(profile, t_max, name=name)


def delta_modification(surface: ModelSurface, delta) -> ModelSurface:
    """The curvature-weakened surface with f_d'' + (G - delta) f_d = 0."""
    if delta < 0:
        raise PreconditionFailed("delta must be nonnegative")
    if delta == 0.0:
        return surface
    base_g = surface.profile.G
    prof = CurvatureProfile(lambda t: base_g(t) - delta, surface.t_max,
                            name=f"{surface.name}-weakened-{delta:g}")
    out = ModelSurface(prof, surface.t_max,
                       name=f"{surface.name} (delta={delta:g})", delta=delta)
    if surface.rho is not None and out.rho is None:
        raise TruncationTooShort(
            "weakened profile has no waist inside the truncation radius")
    return out


# ---------------------------------------------------------------------------
# geodesic fan (one start radius, one crossing radius)
# ---------------------------------------------------------------------------


class GeodesicFan:
    """Fixed-step RK4 fan of geodesics from (t1, 0), phi0 in (0, pi), with
    all crossings of the radius t2 recorded per launch angle.

    The fan only brackets; every candidate is re-solved adaptively before it
    is trusted.
    """

    N_ANGLES = 241

    def __init__(self, surface, t1, t2, n_angles=None):
        self.surface = surface
        self.t1 = t1
        self.t2 = t2
        n_angles = n_angles or self.N_ANGLES
        self.s_max = min(t1 + t2 + 0.5, 3.0 * surface.t_max)
        self.phi0 = np.linspace(1e-4, np.pi - 1e-4, n_angles)
        self._integrate()

    def _integrate(self):
        surf = self.surface
        B = len(self.phi0)
        steps = min(max(500, int(self.s_max / 0.006)), 2400)
        h = self.s_max / steps
        t = np.full(B, self.t1)
        th = np.zeros(B)
        phi = self.phi0.copy()
        tmax_ok = surf.t_max * 1.015

        crossings = [[] for _ in range(B)]
        t_hist = np.empty((steps + 1, B))
        th_hist = np.empty((steps + 1, B))
        s_hist = np.linspace(0.0, self.s_max, steps + 1)
        t_hist[0], th_hist[0] = t, th

        def rhs(state):
            tt, pp = state[0], state[2]
            fv = value(surf.f(np.clip(tt, 1e-9, tmax_ok)))
            fpv = value(surf.fp(np.clip(tt, 1e-9, tmax_ok)))
            sp = np.sin(pp)
            return np.stack([np.cos(pp), sp / fv, -(fpv / fv) * sp])

        state = np.stack([t, th, phi])
        alive = np.ones(B, dtype=bool)
        for k in range(steps):
            k1 = rhs(state)
            k2 = rhs(state + 0.5 * h * k1)
            k3 = rhs(state + 0.5 * h * k2)
            k4 = rhs(state + h * k3)
            new = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            bad = ~np.isfinite(new).all(axis=0) | (new[0] > tmax_ok) | (new[0] < 1e-6)
            alive = alive & ~bad
            state = np.where(alive[None, :], new, state)
            t_hist[k + 1] = np.where(alive, state[0], np.nan)
            th_hist[k + 1] = np.where(alive, state[1], np.nan)
            # record radius crossings, linearly interpolated
            c0 = t_hist[k] - self.t2
            c1 = t_hist[k + 1] - self.t2
            hit = alive & np.isfinite(c0) & (c0 * c1 < 0)
            for b in np.where(hit)[0]:
                w = c0[b] / (c0[b] - c1[b])
                crossings[b].append((s_hist[k] + w * h,
                                     th_hist[k, b] + w * (th_hist[k + 1, b] - th_hist[k, b])))
        self.crossings = crossings
        self.max_index = max((len(c) for c in crossings), default=0)

    def branch(self, k):
        """(phi0, theta_k, s_k) arrays over launch angles with >= k+1 crossings."""
        ph, th, ss = [], [], []
        for b, cr in enumerate(self.crossings):
            if len(cr) > k:
                ph.append(self.phi0[b])
                ss.append(cr[k][0])
                th.append(cr[k][1])
        return np.array(ph), np.array(th), np.array(ss)

    def interp_candidates(self, dtheta):
        """(theta=dtheta) roots from the tabulated branches, linearly
        interpolated: list of (phi0_lo, phi0_hi, s_estimate, branch_index)."""
        out = []
        for k in range(self.max_index):
            ph, th, ss = self.branch(k)
            if len(ph) < 2:
                continue
            d = th - dtheta
            for i in np.where(d[:-1] * d[1:] < 0)[0]:
                w = d[i] / (d[i] - d[i + 1])
                out.append((ph[i], ph[i + 1],
                            ss[i] + w * (ss[i + 1] - ss[i]), k))
        return out


def _shoot_once(surface, t1, phi0, t2, s_max, max_step=np.inf):
    """Adaptive single shot from (t1, 0); returns the solve_ivp solution with
    radius-crossing events."""
    fsurf, fpsurf = surface.f, surface.fp
    tmax_ok = surface.t_max * 1.015

    def rhs(s, y):
        tt = min(max(y[0], 1e-12), tmax_ok)
        fv = float(value(fsurf(tt)))
        fpv = float(value(fpsurf(tt)))
        sp = np.sin(y[2])
        return [np.cos(y[2]), sp / fv, -(fpv / fv) * sp]

    def cross(s, y):
        return y[0] - t2
    cross.terminal = False
    cross.direction = 0

    return solve_ivp(rhs, (0.0, s_max), [t1, 0.0, phi0], rtol=1e-11, atol=1e-13,
                     events=[cross], dense_output=True, max_step=max_step)


def _crossing_data(sol, k):
    """theta and state of the k-th radius crossing of a single shot.

    Starts that sit exactly on the crossing radius fire a spurious event at
    s = 0; crossings are counted only away from the launch point.
    """
    se = sol.t_events[0]
    ye = sol.y_events[0]
    keep = se > 1e-9
    se, ye = se[keep], ye[keep]
    if len(se) <= k:
        return None
    return se[k], ye[k]


def _refine_candidate(surface, t1, t2, dtheta, br, s_pad=0.3):
    """brentq over phi0 inside the bracket so the k-th crossing lands on
    theta = dtheta; returns (length, phi0, arrival_state) or None."""
    lo, hi, s_est, k = br
    s_horizon = s_est + s_pad

    def theta_mismatch(phi0):
        sol = _shoot_once(surface, t1, phi0, t2, s_horizon)
        data = _crossing_data(sol, k)
        if data is None:
            return np.nan
        return data[1][1] - dtheta

    flo, fhi = theta_mismatch(lo), theta_mismatch(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
        return None
    phi_star = brentq(theta_mismatch, lo, hi, xtol=1e-13)
    sol = _shoot_once(surface, t1, phi_star, t2, s_horizon)
    data = _crossing_data(sol, k)
    if data is None:
        return None
    s_c, y = data
    return float(s_c), float(phi_star), y, sol


def surface_distance(surface: ModelSurface, a, b):
    """Minimal geodesic distance between polar points (t, theta).

    Returns ``(d, PolarGeodesic)``; the path is reported in the normalized
    orientation theta(a) = 0, theta(b) = |wrapped separation|.
    """
    t1, th1 = float(a[0]), float(a[1])
    t2, th2 = float(b[0]), float(b[1])
    for t in (t1, t2):
        if t < -_POLE_EPS or t > surface.t_max + 1e-9:
            raise PreconditionFailed(f"radius {t} outside [0, t_max]")
    dth = abs((th2 - th1 + np.pi) % (2 * np.pi) - np.pi)

    if t1 <= _POLE_EPS or t2 <= _POLE_EPS:
        d = t1 + t2
        s = np.linspace(0.0, max(d, 1e-300), 65)
        if t1 <= _POLE_EPS:  # radially outward
            return d, PolarGeodesic(s, s, np.full_like(s, dth), np.zeros_like(s),
                                    d, through_pole=False)
        return d, PolarGeodesic(s, t1 - s, np.zeros_like(s), np.full_like(s, np.pi),
                                d, through_pole=False)

    if dth <= 1e-12:
        d = abs(t1 - t2)
        s = np.linspace(0.0, max(d, 1e-300), 65)
        phi = 0.0 if t2 >= t1 else np.pi
        return d, PolarGeodesic(s, t1 + np.sign(t2 - t1 + 1e-300) * s,
                                np.zeros_like(s), np.full_like(s, phi), d)

    fan = surface._fan(t1, t2)
    cands = fan.interp_candidates(dth)
    best = None
    for br in sorted(cands, key=lambda c: c[2]):
        if best is not None and br[2] > best[0] + 0.05:
            continue
        ref = _refine_candidate(surface, t1, t2, dth, br)
        if ref is None:
            continue
        if best is None or ref[0] < best[0]:
            best = ref
    # through-pole candidate connects exactly opposite meridians
    if abs(dth - np.pi) <= 1e-12 and (best is None or t1 + t2 < best[0]):
        d = t1 + t2
        s = np.linspace(0.0, d, 129)
        t_path = np.abs(t1 - s)
        th_path = np.where(s <= t1, 0.0, np.pi)
        phi_path = np.where(s <= t1, np.pi, 0.0)
        return d, PolarGeodesic(s, t_path, th_path, phi_path, d, through_pole=True)
    if best is None:
        raise NoComparisonTriangle(
            f"no geodesic from ({t1:.6g}, 0) to ({t2:.6g}, {dth:.6g}) found")
    length, phi0, y_end, sol = best
    ss = np.linspace(0.0, length, 129)
    tt, th, ph = sol.sol(ss)
    path = PolarGeodesic(ss, tt, th, ph, length)
    if np.max(tt) > surface.t_max * (1 - 1e-9) + 1e-12:
        raise TruncationTooShort("minimizer grazes the truncation radius")
    return length, path


# ---------------------------------------------------------------------------
# comparison triangles
# ---------------------------------------------------------------------------


def comparison_triangle(surface: ModelSurface, d_px, d_py, side_xy,
                        tol=1e-9) -> ComparisonTriangle:
    """Place x at (d_px, 0) and find the angular separation in [0, pi] whose
    realized distance to (d_py, .) equals ``side_xy``.

    Monotonicity of the distance in the separation (a property of von
    Mangoldt surfaces) makes plain bisection correct; the result is polished
    with exact distance evaluations until the round trip is below ``tol``.
    """
    if not surface.von_mangoldt:
        raise UnsupportedSurface("comparison triangles need a von Mangoldt surface")
    if min(d_px, d_py, side_xy) <= 0:
        raise PreconditionFailed("triangle sides must be positive")
    if max(d_px, d_py) > surface.t_max:
        raise TruncationTooShort("vertex radius beyond the truncation radius")
    lo_bound = abs(d_px - d_py)
    hi_bound = d_px + d_py
    scale = max(1.0, hi_bound)
    if side_xy < lo_bound - 1e-12 * scale or side_xy > hi_bound + 1e-12 * scale:
        raise PreconditionFailed("side_xy violates the triangle inequality")

    # degenerate configurations
    if abs(side_xy - hi_bound) <= 1e-11 * scale:
        return ComparisonTriangle(d_px, d_py, side_xy, np.pi, np.pi, 0.0, 0.0,
                                  surface)
    if abs(side_xy - lo_bound) <= 1e-11 * scale:
        ax = np.pi if d_py > d_px else 0.0
        return ComparisonTriangle(d_px, d_py, side_xy, 0.0, 0.0,
                                  ax, np.pi - ax, surface)

    fan = surface._fan(d_px, d_py)

    def interp_distance(dth):
        cands = fan.interp_candidates(dth)
        d = min((c[2] for c in cands), default=np.inf)
        if abs(dth - np.pi) <= 1e-12:
            d = min(d, d_px + d_py)
        return d

    d_at_pi = exact_distance_pi = None
    if interp_distance(np.pi) < side_xy:
        exact_distance_pi, _ = surface_distance(surface, (d_px, 0.0), (d_py, np.pi))
        if exact_distance_pi < side_xy - 1e-12 * scale:
            raise NoComparisonTriangle(
                f"largest realizable side at separation pi is {exact_distance_pi:.9g}, "
                f"below the requested {side_xy:.9g}")
        d_at_pi = exact_distance_pi

    lo, hi = 0.0, np.pi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if interp_distance(mid) < side_xy:
            lo = mid
        else:
            hi = mid
    dth = 0.5 * (lo + hi)

    # exact polish with secant iterations on the true distance
    d0, path = surface_distance(surface, (d_px, 0.0), (d_py, dth))
    step = 1e-5
    for _ in range(50):
        if abs(d0 - side_xy) <= tol:
            break
        d1, _ = surface_distance(surface, (d_px, 0.0), (d_py, dth + step))
        slope = (d1 - d0) / step
        if not np.isfinite(slope) or abs(slope) < 1e-14:
            break
        dth = float(np.clip(dth + (side_xy - d0) / slope, 0.0, np.pi))
        d0, path = surface_distance(surface, (d_px, 0.0), (d_py, dth))
    if abs(d0 - side_xy) > 100 * tol:
        raise NoComparisonTriangle(
            f"bisection failed to realize the side: got {d0:.12g}, "
            f"wanted {side_xy:.12g}")

    angle_x = np.pi - path.phi0
    angle_y = float(np.arccos(np.clip(path.arrival_cos, -1.0, 1.0)))
    return ComparisonTriangle(d_px, d_py, side_xy, dth, dth, angle_x, angle_y,
                              surface)


# ---------------------------------------------------------------------------
# cut locus of an off-pole point
# ---------------------------------------------------------------------------


@dataclass
class CutLocusRay:
    """The cut locus of (t0, theta0): a ray on the opposite meridian."""

    theta: float
    t_endpoint: float


def cut_locus_ray(surface: ModelSurface, t0, theta0=0.0):
    """Cut locus of the point (t0, theta0), or None when it is empty.

    The endpoint is the first conjugate point along the geodesic through the
    pole, located as the first zero of the scalar field y'' + G y = 0 with
    y(0) = 0, y'(0) = 1 along that geodesic.
    """
    t0 = float(t0)
    if not (0 < t0 < surface.t_max):
        raise PreconditionFailed("t0 must lie strictly inside (0, t_max)")
    s_end = t0 + surface.t_max * 0.995
    g_of_s = lambda s: float(value(surface.G(abs(s - t0))))

    def rhs(s, y):
        return [y[1], -g_of_s(s) * y[0]]

    def zero(s, y):
        return y[0]
    zero.terminal = True
    zero.direction = -1

    sol = solve_ivp(rhs, (1e-9, s_end), [1e-9, 1.0], rtol=1e-11, atol=1e-13,
                    events=[zero], max_step=0.05)
    if len(sol.t_events[0]):
        s_star = float(sol.t_events[0][0])
        if s_star <= t0:
            raise UnsupportedSurface("conjugate point before the pole")
        return CutLocusRay(theta=(theta0 + np.pi) % (2 * np.pi),
                           t_endpoint=s_star - t0)
    # no zero up to the truncation radius: certify emptiness only when the
    # curvature tail cannot focus the field any more
    tail = np.linspace(max(surface.t_max * 0.5, 1e-3), surface.t_max * 0.99, 64)
    if np.all(value(surface.G(tail)) <= 0.0) and sol.y[1, -1] > 0:
        return None
    raise TruncationTooShort("no conjugate point inside the truncation radius "
                             "and the curvature tail is still positive")


# ---------------------------------------------------------------------------
# double triangle gluing
# ---------------------------------------------------------------------------


@dataclass
class DoubleTriangleReport:
    glued: ComparisonTriangle
    angle_x: float
    angle_q: float
    angle_z: float
    angle_r: float
    theta_z: float
    theta_z_below_pi: bool

    @property
    def first_slack(self):
        return self.angle_x - self.angle_q

    @property
    def second_slack(self):
        return self.angle_z - self.angle_r

    def holds(self, slack=-1e-6):
        return self.first_slack >= slack and self.second_slack >= slack


def double_triangle_check(surface: ModelSurface, tri1: ComparisonTriangle,
                          tri2: ComparisonTriangle) -> DoubleTriangleReport:
    """Glue triangles sharing the middle vertex y and compare angles.

    ``tri1`` is the triangle (p, x, y), ``tri2`` is (p, y, z) with
    theta(x) = 0 < theta(y) < theta(z); the angles at y must not overlap
    (their sum stays <= pi).  The glued triangle has sides (d(p, x),
    d(p, z), d(x, y) + d(y, z)); its angles never exceed the originals'.
    """
    if abs(tri1.side_py - tri2.side_px) > 1e-9:
        raise PreconditionFailed("triangles do not share the middle vertex radius")
    if tri1.delta_theta <= 0 or tri2.delta_theta <= 0:
        raise PreconditionFailed("vertices must be strictly ordered in theta")
    ang_sum = tri1.angle_y + tri2.angle_x
    if ang_sum > np.pi + 1e-9:
        raise PreconditionFailed("angles at the shared vertex overlap")
    glued = comparison_triangle(surface, tri1.side_px, tri2.side_py,
                                tri1.side_xy + tri2.side_xy)
    theta_z = tri1.delta_theta + tri2.delta_theta
    return DoubleTriangleReport(
        glued=glued,
        angle_x=tri1.angle_x, angle_q=glued.angle_x,
        angle_z=tri2.angle_y, angle_r=glued.angle_y,
        theta_z=theta_z, theta_z_below_pi=bool(theta_z < np.pi),
    )


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def export_profile(surface: ModelSurface, path, n=1001):
    """Two-column text table (t, f(t)) on a uniform grid, 17 significant
    digits, for cross-checking in external tools."""
    ts = np.linspace(surface.t_max / n, surface.t_max, n)
    fv = value(surface.f(ts))
    with open(path, "w") as fh:
        for t, f in zip(ts, fv):
            fh.write(f"{t:.17g} {f:.17g}\n")
