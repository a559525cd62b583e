"""Batched adaptive Runge-Kutta integration with dense output.

One shared Dormand-Prince 5(4) stepper advances a whole batch of independent
trajectories (geodesic fans, multi-start shooting, neighbor variations) so
that the per-step Python overhead is paid once per batch instead of once per
trajectory.  Step size is controlled by the worst active member; every member
lands exactly on its own end time because the global step is clipped to the
nearest active deadline (no interpolated endpoints).

Dense output is cubic Hermite on the accepted steps; callers that need
interpolation below ~1e-9 accuracy cap ``h_max`` accordingly.
"""

from __future__ import annotations

import numpy as np

from .errors import IntegrationFailure

# Dormand-Prince 5(4) tableau
_A = (
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_ERR = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
                 -17253 / 339200, 22 / 525, -1 / 40])

STATUS_DONE = 0
STATUS_EXIT = 1
STATUS_FAIL = 2


class BatchSolution:
    """Dense solution of a batch integration.

    Attributes
    ----------
    ts : (K,) shared accepted times (monotone increasing from 0)
    ys, fs : (K, B, D) states and derivatives at those times
    t_end : (B,) time each member actually reached
    y_end : (B, D) state there
    status : (B,) STATUS_DONE or STATUS_EXIT
    exit_point : (B, D) first outside state for exited members (nan otherwise)
    """

    def __init__(self, ts, ys, fs, t_end, y_end, status, exit_point):
        self.ts = ts
        self.ys = ys
        self.fs = fs
        self.t_end = t_end
        self.y_end = y_end
        self.status = status
        self.exit_point = exit_point

    @property
    def n_members(self):
        return self.ys.shape[1]

    def eval(self, tq, member=0):
        """Cubic-Hermite state of one member at times ``tq`` (clipped to its
        reached span)."""
        tq = np.minimum(np.asarray(tq, dtype=float), self.t_end[member])
        scalar = tq.ndim == 0
        tq = np.atleast_1d(tq)
        idx = np.clip(np.searchsorted(self.ts, tq, side="right") - 1,
                      0, len(self.ts) - 2)
        t0 = self.ts[idx]
        h = self.ts[idx + 1] - t0
        s = (tq - t0) / h
        y0 = self.ys[idx, member]
        y1 = self.ys[idx + 1, member]
        f0 = self.fs[idx, member]
        f1 = self.fs[idx + 1, member]
        s = s[:, None]
        h = h[:, None]
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        out = h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
        return out[0] if scalar else out


def integrate(rhs, y0, t_end, rtol=1e-9, atol=1e-11, h_max=np.inf,
              h0=None, inside=None, max_steps=200_000):
    """Integrate ``y' = rhs(y)`` for a batch of members from t = 0.

    Parameters
    ----------
    rhs : callable (B, D) -> (B, D), autonomous right-hand side
    y0 : (B, D) initial states (a copy is taken)
    t_end : scalar or (B,) nonnegative end times
    inside : optional callable (B, D) -> (B,) bool; a member whose accepted
        state leaves the region is frozen at the step start and flagged
        STATUS_EXIT, with the offending state recorded in ``exit_point``.
    """
    y = np.array(y0, dtype=float)
    if y.ndim == 1:
        y = y[None, :]
    B, D = y.shape
    t_end = np.broadcast_to(np.asarray(t_end, dtype=float), (B,)).copy()
    if np.any(t_end < 0):
        raise ValueError("end times must be nonnegative")

    t = 0.0
    status = np.full(B, STATUS_DONE, dtype=int)
    reached = np.zeros(B)
    exit_point = np.full((B, D), np.nan)
    active = t_end > 0.0

    f = rhs(y)
    if h0 is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.sqrt(np.mean((y / scale) ** 2))
        d1 = np.sqrt(np.mean((f / scale) ** 2))
        h = 0.01 * d0 / d1 if d1 > 1e-10 else 1e-4
        h = min(h, float(np.max(t_end)), h_max)
    else:
        h = float(h0)

    ts_list = [0.0]
    ys_list = [y.copy()]
    fs_list = [f.copy()]
    k = np.empty((7, B, D))

    steps = 0
    # wild batch members (diverging shooting seeds) legitimately overflow;
    # their errors are caught by the per-member checks below
    _quiet = np.errstate(over="ignore", invalid="ignore", divide="ignore")
    while np.any(active):
        steps += 1
        if steps > max_steps:
            raise IntegrationFailure("maximum step count exceeded")
        # land exactly on the nearest active deadline
        pending = t_end[active] - t
        h_step = min(h, h_max, float(np.min(pending[pending > 1e-15])
                                     if np.any(pending > 1e-15) else h))
        h_step = max(h_step, 1e-14)

        with _quiet:
            k[0] = f
            for i, a in enumerate(_A):
                yi = y + h_step * np.einsum("s,sbd->bd", a, k[: i + 1])
                k[i + 1] = rhs(yi)
            y_new = y + h_step * np.einsum("s,sbd->bd", _B5, k[:6])
            k[6] = rhs(y_new)
            err_vec = h_step * np.einsum("s,sbd->bd", _ERR, k)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err_members = np.sqrt(np.mean((err_vec / scale) ** 2, axis=1))
        err_members = np.where(active, err_members, 0.0)
        nonfinite = active & ~np.isfinite(err_members)
        if np.any(nonfinite):
            if h_step > 1e-6:
                # a plausibly transient overflow: retry the whole step smaller
                h = h_step * 0.2
                continue
            # give up on those members only; the rest of the batch goes on
            status[nonfinite] = STATUS_FAIL
            reached[nonfinite] = t
            active = active & ~nonfinite
            err_members = np.where(active, err_members, 0.0)
            if not np.any(active):
                break
        err = float(np.max(err_members))

        if err > 1.0:
            h = h_step * max(0.2, 0.9 * (err ** -0.2))
            if h < 1e-13:
                raise IntegrationFailure("step size underflow")
            continue

        # accept: frozen members keep their state; k[6] is rhs at y_new (FSAL)
        y_acc = np.where(active[:, None], y_new, y)
        f_acc = np.where(active[:, None], k[6], f)
        t = t + h_step

        if inside is not None:
            ok = inside(y_acc) | ~active
            newly_out = active & ~ok
            if np.any(newly_out):
                exit_point[newly_out] = y_acc[newly_out]
                y_acc[newly_out] = y[newly_out]
                f_acc[newly_out] = f[newly_out]
                reached[newly_out] = t - h_step
                status[newly_out] = STATUS_EXIT
                active = active & ok

        y, f = y_acc, f_acc
        ts_list.append(t)
        ys_list.append(y.copy())
        fs_list.append(f.copy())

        done = active & (t >= t_end - 1e-14)
        reached[done] = t_end[done]
        active = active & ~done

        h = h_step * min(5.0, 0.9 * err ** -0.2 if err > 1e-30 else 5.0)

    if len(ts_list) == 1:  # all end times were zero
        ts_list.append(1e-300)
        ys_list.append(y.copy())
        fs_list.append(f.copy())
    return BatchSolution(
        np.array(ts_list), np.stack(ys_list), np.stack(fs_list),
        reached, y.copy(), status, exit_point,
    )
