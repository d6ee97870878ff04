"""Rotationally symmetric shrinking torus, found by shooting on the profile ODE.

The profile ``(x(s), r(s))`` in arclength solves

    x' = cos t,  r' = sin t,  t' = (x sin t - r cos t)/2 + cos t / r

and the surface is obtained by rotating it about the x-axis.  We start on the
symmetry plane x = 0 with horizontal tangent and bisect on the starting
height until the orbit meets x = 0 again perpendicularly; reflecting that arc
closes the profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import bisect

from .errors import ShootingFailed
from .geometry import ImmersedGeometry, _oriented_mesh
from .shapes import zip_rings

RTOL = 1e-12
ATOL = 1e-13


def _rhs(s, y):
    x, r, t = y
    return [math.cos(t), math.sin(t), 0.5 * (x * math.sin(t) - r * math.cos(t)) + math.cos(t) / r]


def _return_event(s, y):
    return y[0]


_return_event.terminal = True
_return_event.direction = -1


def _axis_event(s, y):
    return y[1] - 1e-3


_axis_event.terminal = True


def shoot(r0, s_max=60.0):
    """Integrate from ``(0, r0)`` with ``t = 0`` to the next downward crossing of x = 0.

    Returns ``(state, s)`` at the crossing, or ``None`` if the orbit reaches
    the axis or never returns.
    """
    sol = solve_ivp(_rhs, (0.0, s_max), [0.0, r0, 0.0], method="DOP853",
                    events=[_return_event, _axis_event], rtol=RTOL, atol=ATOL)
    if sol.t_events[0].size == 0:
        return None
    return sol.y_events[0][0], float(sol.t_events[0][0])


@dataclass
class ProfileCurve:
    """Closed profile sampled uniformly in arclength; ``theta`` is the tangent angle."""

    points: np.ndarray
    theta: np.ndarray
    curvature: np.ndarray
    length: float
    closed: bool = True


def find_profile(r_lo=math.sqrt(2.0) + 0.05, r_hi=4.0, n_scan=53, xtol=1e-14):
    """Locate the closing starting height.  Returns ``(r0, half_length, log)``.

    ``log`` records every scanned and bisected height with its mismatch
    ``sin t`` at the return point.
    """
    log = []

    def probe(r0, stage):
        res = shoot(r0)
        if res is None:
            log.append({"stage": stage, "r0": r0, "mismatch": None})
            return None
        y, s = res
        log.append({"stage": stage, "r0": r0, "mismatch": math.sin(y[2]), "theta": y[2], "r_return": y[1]})
        return y

    grid = np.linspace(r_lo, r_hi, n_scan)
    ys = [probe(float(r0), "scan") for r0 in grid]
    for a, b, ya, yb in zip(grid[:-1], grid[1:], ys[:-1], ys[1:]):
        if ya is None or yb is None:
            continue
        # a genuine root has continuous return angle near -pi; a wrap of
        # the angle through +-pi is a spurious sign change
        if abs(ya[2] - yb[2]) > 0.5 * math.pi or math.cos(ya[2]) > 0:
            continue
        if math.sin(ya[2]) * math.sin(yb[2]) < 0:
            def mismatch(r0):
                y = probe(r0, "bisect")
                if y is None:
                    raise ShootingFailed(f"orbit lost during bisection at r0={r0}")
                return math.sin(y[2])

            r0 = bisect(mismatch, float(a), float(b), xtol=xtol)
            _, half = shoot(r0)
            return r0, half, log
    raise ShootingFailed(f"no closing profile bracketed in [{r_lo}, {r_hi}]")


def sample_profile(r0, half_length, n):
    """Sample the reflected closed profile at ``n`` points equally spaced in arclength."""
    sol = solve_ivp(_rhs, (0.0, half_length), [0.0, r0, 0.0], method="DOP853",
                    rtol=RTOL, atol=ATOL, dense_output=True)
    total = 2.0 * half_length
    s = total * np.arange(n) / n
    front = s <= half_length
    y = np.empty((3, n))
    y[:, front] = sol.sol(s[front])
    back = sol.sol(total - s[~front])
    y[0, ~front] = -back[0]
    y[1, ~front] = back[1]
    y[2, ~front] = -back[2]
    x, r, t = y
    k = np.array([_rhs(0.0, y[:, i])[2] for i in range(n)])
    return ProfileCurve(np.stack([x, r], 1), t, k, total)


def gen_angenent_torus(target_edge=0.2, az_scale=1.0, r_bracket=None):
    """Shrinking torus of revolution about the x-axis with analytic geometry.

    Azimuthal counts are a base count times a power of two, chosen per
    profile ring so triangles stay near isotropic; every ring count is a
    multiple of the base count, so the mesh keeps that rotational symmetry.
    ``az_scale`` multiplies the base count.
    """
    kw = {} if r_bracket is None else {"r_lo": r_bracket[0], "r_hi": r_bracket[1]}
    r0, half, log = find_profile(**kw)
    r_inner = float(shoot(r0)[0][1])
    n_prof = max(16, int(math.ceil(2 * half / target_edge)))
    prof = sample_profile(r0, half, n_prof)
    x, r = prof.points.T
    t = prof.theta
    rmin = float(r.min())
    n_base = max(6, int(math.ceil(az_scale * 2 * math.pi * rmin / target_edge)))
    counts = n_base * 2 ** np.rint(np.log2(r / rmin)).astype(int)

    pts, N, T1, T2, S = [], [], [], [], []
    rings = []
    for i in range(n_prof):
        n = int(counts[i])
        phi = 2 * math.pi * np.arange(n) / n
        c, s_ = np.cos(phi), np.sin(phi)
        start = sum(len(q) for q in pts)
        rings.append((np.arange(start, start + n), phi))
        pts.append(np.stack([np.full(n, x[i]), r[i] * c, r[i] * s_], 1))
        st, ct = math.sin(t[i]), math.cos(t[i])
        N.append(np.stack([np.full(n, -st), ct * c, ct * s_], 1))
        T1.append(np.stack([np.full(n, ct), st * c, st * s_], 1))
        T2.append(np.stack([np.zeros(n), -s_, c], 1))
        Si = np.zeros((n, 2, 2))
        Si[:, 0, 0] = -prof.curvature[i]
        Si[:, 1, 1] = ct / r[i]
        S.append(Si)
    tris = []
    for i in range(n_prof):
        (ia, pa), (ib, pb) = rings[i], rings[(i + 1) % n_prof]
        tris.append(zip_rings(ia, pa, ib, pb))
    v = np.vstack(pts)
    N = np.vstack(N)
    mesh = _oriented_mesh(v, np.vstack(tris), N)
    frames = np.stack([np.vstack(T1), np.vstack(T2)], 1)
    meta = {
        "surface": "angenent",
        "target_edge": target_edge,
        "az_scale": az_scale,
        "r0": r0,
        "half_length": half,
        "r_inner": r_inner,
        "profile_r_min": rmin,
        "profile_r_max": float(r.max()),
        "profile_x_max": float(np.abs(x).max()),
        "n_profile": n_prof,
        "n_azimuth_base": n_base,
        "shooting_log": log,
    }
    return ImmersedGeometry(mesh, N, frames, np.vstack(S), meta=meta)


def _wrapped_difference(mesh, angle):
    E = mesh.edges
    d = angle[E[:, 1]] - angle[E[:, 0]]
    return (d + math.pi) % (2 * math.pi) - math.pi


def period_cochains(geom):
    """Closed 1-cochains ``(azimuthal, meridional)`` with unit periods.

    Edge values are wrapped differences of the rotation angle and of the
    angle around the profile centre, divided by 2 pi, so each cochain is the
    edge integral of a smooth closed form and the pair does not depend on
    how the mesh was generated.
    """
    x, y, z = geom.mesh.vertices.T
    r = np.hypot(y, z)
    rc = 0.5 * (geom.meta["profile_r_min"] + geom.meta["profile_r_max"])
    phi = np.arctan2(z, y)
    psi = np.arctan2(r - rc, x)
    return (_wrapped_difference(geom.mesh, phi) / (2 * math.pi),
            _wrapped_difference(geom.mesh, psi) / (2 * math.pi))
