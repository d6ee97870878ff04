"""Combinatorial mesh primitives: icosphere, grids, tori, ring strips."""

from __future__ import annotations

import numpy as np


def octahedron():
    v = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    t = np.array([
        [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
        [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5],
    ])
    return v, t


def icosphere(subdivisions):
    """Unit icosphere refined ``subdivisions`` times by midpoint splitting."""
    p = (1 + 5 ** 0.5) / 2
    v = np.array([
        [-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
        [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
        [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1],
    ], dtype=float)
    t = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    for _ in range(subdivisions):
        n = len(v)
        pairs = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        pairs.sort(axis=1)
        uniq, inv = np.unique(pairs[:, 0] * n + pairs[:, 1], return_inverse=True)
        a, b = uniq // n, uniq % n
        mid = v[a] + v[b]
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        m = len(t)
        ids = n + inv.reshape(3, m)
        m01, m12, m20 = ids
        v = np.vstack([v, mid])
        t = np.concatenate([
            np.stack([t[:, 0], m01, m20], 1),
            np.stack([t[:, 1], m12, m01], 1),
            np.stack([t[:, 2], m20, m12], 1),
            np.stack([m01, m12, m20], 1),
        ])
    return v, t


def grid_triangles(nu, nv, wrap_u=False, wrap_v=False):
    """Triangles of an ``nu x nv`` vertex grid (vertex id ``i*nv + j``).

    Each quad is split along the same diagonal, so every interior vertex
    star is point-symmetric on a uniform grid.
    """
    iu = np.arange(nu if wrap_u else nu - 1)
    jv = np.arange(nv if wrap_v else nv - 1)
    I, J = np.meshgrid(iu, jv, indexing="ij")
    I, J = I.ravel(), J.ravel()
    I1, J1 = (I + 1) % nu, (J + 1) % nv
    a = I * nv + J
    b = I1 * nv + J
    c = I1 * nv + J1
    d = I * nv + J1
    return np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])


def square_grid(n, size=1.0):
    """Flat ``n x n`` vertex grid on ``[0, size]^2`` in the z = 0 plane."""
    s = np.linspace(0.0, size, n)
    X, Y = np.meshgrid(s, s, indexing="ij")
    v = np.stack([X.ravel(), Y.ravel(), np.zeros(n * n)], 1)
    return v, grid_triangles(n, n)


def torus_grid(nu, nv, R=1.0, r=0.4):
    u = 2 * np.pi * np.arange(nu) / nu
    w = 2 * np.pi * np.arange(nv) / nv
    U, W = np.meshgrid(u, w, indexing="ij")
    x = (R + r * np.cos(W)) * np.cos(U)
    y = (R + r * np.cos(W)) * np.sin(U)
    z = r * np.sin(W)
    v = np.stack([x.ravel(), y.ravel(), z.ravel()], 1)
    return v, grid_triangles(nu, nv, wrap_u=True, wrap_v=True)


def zip_rings(inner, inner_angle, outer, outer_angle):
    """Triangulate the strip between two closed rings sharing an axis.

    ``inner``/``outer`` are vertex ids ordered by increasing angle; angles are
    in radians.  The strip is walked by always advancing the ring whose next
    sample has the smaller angle, which yields a valid triangulation for
    any pair of monotone rings.
    """
    ni, no = len(inner), len(outer)
    ai = np.asarray(inner_angle, dtype=float)
    ao = np.asarray(outer_angle, dtype=float)
    # unwrap both rings to start near the same angle
    start = ai[0]
    ai = start + np.mod(ai - start, 2 * np.pi)
    ao = start + np.mod(ao - start, 2 * np.pi)
    k0 = int(np.argmin(ao))
    outer = np.roll(np.asarray(outer), -k0)
    ao = np.roll(ao, -k0)
    ai_ext = np.append(ai, ai[0] + 2 * np.pi)
    ao_ext = np.append(ao, ao[0] + 2 * np.pi)
    tris = []
    i = j = 0
    while i < ni or j < no:
        advance_inner = j >= no or (i < ni and ai_ext[i + 1] <= ao_ext[j + 1])
        a, b = inner[i % ni], outer[j % no]
        if advance_inner:
            tris.append((a, inner[(i + 1) % ni], b))
            i += 1
        else:
            tris.append((a, outer[(j + 1) % no], b))
            j += 1
    return np.array(tris, dtype=np.int64)
