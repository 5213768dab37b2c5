"""Quadrature rules: sphere surfaces, tensor-product cubes, singular box integrals.

Sphere rules are octahedrally symmetric point sets with rational weights
(exact for polynomials up to degree 7 and 11 respectively).  Box integrals
with a 1/|z| singularity are handled by octree subdivision plus a Duffy-type
pyramid transform on cells that contain the singular point.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss


class AccuracyError(RuntimeError):
    """Requested tolerance not reached; carries the achieved error estimate."""

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved {achieved:.3e})")
        self.achieved = achieved


# ---------------------------------------------------------------------------
# sphere rules
# ---------------------------------------------------------------------------

def _group_a1():
    pts = np.zeros((6, 3))
    pts[0::2, :] = np.eye(3)
    pts[1::2, :] = -np.eye(3)
    return pts


def _group_a2():
    # midpoints of octahedron edges: (+-1, +-1, 0)/sqrt(2), all placements
    pts = []
    s = 1 / np.sqrt(2.0)
    for i in range(3):
        for j in range(i + 1, 3):
            for si in (1, -1):
                for sj in (1, -1):
                    p = np.zeros(3)
                    p[i], p[j] = si * s, sj * s
                    pts.append(p)
    return np.array(pts)


def _group_a3():
    s = 1 / np.sqrt(3.0)
    pts = [[sx * s, sy * s, sz * s] for sx in (1, -1) for sy in (1, -1) for sz in (1, -1)]
    return np.array(pts)


def _group_llm(l, m):
    # permutations of (+-l, +-l, +-m)
    pts = []
    for axis_m in range(3):
        for sm in (1, -1):
            for s1 in (1, -1):
                for s2 in (1, -1):
                    p = np.empty(3)
                    others = [ax for ax in range(3) if ax != axis_m]
                    p[axis_m] = sm * m
                    p[others[0]] = s1 * l
                    p[others[1]] = s2 * l
                    pts.append(p)
    return np.array(pts)


def sphere_rule(order):
    """Unit-sphere quadrature (points, weights); weights sum to 1.

    order 26: degree-7 rule (octahedron + cube + edge midpoints).
    order 50: degree-11 rule (adds the (l,l,m) orbit, l = 1/sqrt(11)).
    """
    if order == 26:
        pts = np.vstack([_group_a1(), _group_a2(), _group_a3()])
        w = np.concatenate([
            np.full(6, 1.0 / 21.0),
            np.full(12, 4.0 / 105.0),
            np.full(8, 27.0 / 840.0),
        ])
    elif order == 50:
        l = 1 / np.sqrt(11.0)
        m = 3 / np.sqrt(11.0)
        pts = np.vstack([_group_a1(), _group_a2(), _group_a3(), _group_llm(l, m)])
        w = np.concatenate([
            np.full(6, 4.0 / 315.0),
            np.full(12, 64.0 / 2835.0),
            np.full(8, 27.0 / 1280.0),
            np.full(24, 14641.0 / 725760.0),
        ])
    else:
        raise ValueError(f"no sphere rule with {order} points")
    return pts, w


def sphere_product_rule(n_theta=24, n_phi=48):
    """Gauss-Legendre x trapezoid product rule on the unit sphere (weights sum to 1).

    Independent family from sphere_rule; used for cross-checks.
    """
    x, wx = leggauss(n_theta)          # cos(theta) in [-1, 1]
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    ct = x[:, None]
    st = np.sqrt(1 - ct**2)
    pts = np.stack(
        [st * np.cos(phi)[None, :], st * np.sin(phi)[None, :], ct * np.ones((1, n_phi))],
        axis=-1,
    ).reshape(-1, 3)
    w = np.repeat(wx / 2.0, n_phi) / n_phi
    return pts, w


# ---------------------------------------------------------------------------
# tensor-product cube rules
# ---------------------------------------------------------------------------

def gauss_cube(center, half_width, order):
    """Tensor Gauss nodes/weights on an axis-aligned cube; weights sum to volume."""
    x, w = leggauss(order)
    xs = x * half_width
    ws = w * half_width
    c = np.asarray(center, dtype=float)
    pts = np.stack(
        np.meshgrid(c[0] + xs, c[1] + xs, c[2] + xs, indexing="ij"), axis=-1
    ).reshape(-1, 3)
    wts = (ws[:, None, None] * ws[None, :, None] * ws[None, None, :]).reshape(-1)
    return pts, wts


def gauss_box(lo, hi, order):
    """Tensor Gauss rule on a general axis-aligned box."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    x, w = leggauss(order)
    axes, wts1 = [], []
    for a, b in zip(lo, hi):
        axes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        wts1.append(0.5 * (b - a) * w)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    wts = (wts1[0][:, None, None] * wts1[1][None, :, None] * wts1[2][None, None, :]).reshape(-1)
    return pts, wts


# ---------------------------------------------------------------------------
# singular box integration:  int_box f(z) dz  with f ~ O(1/|z|) near z = 0
# ---------------------------------------------------------------------------

def _duffy_corner(f, corner, spans, order):
    """Integrate f over the box corner + [0, spans] with a 1/|z| singularity at
    z = corner, via three Duffy pyramids (Jacobian t^2 cancels the singularity)."""
    x, w = leggauss(order)
    t = 0.5 * (x + 1)
    wt = 0.5 * w
    u = 0.5 * (x + 1)
    wu = 0.5 * w
    total = 0.0
    corner = np.asarray(corner, float)
    spans = np.asarray(spans, float)
    for main in range(3):
        o = [ax for ax in range(3) if ax != main]
        T, U1, U2 = np.meshgrid(t, u, u, indexing="ij")
        W = wt[:, None, None] * wu[None, :, None] * wu[None, None, :]
        z = np.empty(T.shape + (3,))
        z[..., main] = corner[main] + spans[main] * T
        z[..., o[0]] = corner[o[0]] + spans[o[0]] * T * U1
        z[..., o[1]] = corner[o[1]] + spans[o[1]] * T * U2
        jac = abs(np.prod(spans)) * T**2
        total += (f(z.reshape(-1, 3)).reshape(T.shape) * jac * W).sum()
    return total


def integrate_singular_box(f, lo, hi, singular_point=None, order=8, tol=None,
                           max_depth=6, core_depth=0):
    """Integrate f over [lo, hi] when f may blow up like 1/|z - z0|.

    Octree refinement toward z0; the cell whose closure contains z0 is split
    into up to 8 sub-boxes with z0 as a shared corner and each is integrated
    with the Duffy transform (exact cancellation of the 1/r singularity).
    core_depth > 0 keeps octree-subdividing the singular cell that many levels
    before applying Duffy (useful when f has extra structure near z0 beyond
    the 1/r factor).  Smooth cells use Gauss rules with an order-downgrade
    error estimate.  Raises AccuracyError if tol is set and the estimate at
    max_depth exceeds it.
    """
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    z0 = None if singular_point is None else np.asarray(singular_point, float)

    def cell_contains(a, b):
        return z0 is not None and np.all(z0 >= a - 1e-14) and np.all(z0 <= b + 1e-14)

    def smooth_cell(a, b):
        pts, wts = gauss_box(a, b, order)
        hi_val = (f(pts) * wts).sum()
        pts2, wts2 = gauss_box(a, b, max(2, order - 2))
        lo_val = (f(pts2) * wts2).sum()
        return hi_val, abs(hi_val - lo_val)

    def subdivide(a, b, depth):
        mid = 0.5 * (a + b)
        for sx in (0, 1):
            for sy in (0, 1):
                for sz in (0, 1):
                    sub_lo = np.where([sx, sy, sz], mid, a)
                    sub_hi = np.where([sx, sy, sz], b, mid)
                    stack.append((sub_lo, sub_hi, depth + 1))

    total = 0.0
    err = 0.0
    stack = [(lo, hi, 0)]
    while stack:
        a, b, depth = stack.pop()
        diam = float(np.linalg.norm(b - a))
        if cell_contains(a, b):
            if depth < core_depth:
                subdivide(a, b, depth)
                continue
            zc = np.clip(z0, a, b)
            # split at the singular point: up to 8 corner boxes, Duffy each
            for sx in (0, 1):
                for sy in (0, 1):
                    for sz in (0, 1):
                        sub_lo = np.where([sx, sy, sz], zc, a)
                        sub_hi = np.where([sx, sy, sz], b, zc)
                        spans = sub_hi - sub_lo
                        if np.any(spans <= 0):
                            continue
                        signs = np.where([sx, sy, sz], 1.0, -1.0)
                        total += _duffy_corner(f, zc, signs * spans, order)
            continue
        near = z0 is not None and float(np.linalg.norm(np.clip(z0, a, b) - z0)) < 0.5 * diam
        if near and depth < max_depth:
            subdivide(a, b, depth)
            continue
        val, e = smooth_cell(a, b)
        total += val
        err += e
    if tol is not None and err > tol:
        raise AccuracyError("cube quadrature did not reach tolerance", err)
    return total, err
