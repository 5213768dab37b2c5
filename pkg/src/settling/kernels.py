"""Fundamental solution and the elementary sphere/cube averaged fields.

Everything is normalized to viscosity 1.  The fundamental velocity tensor is

    Phi(x) = (1/8 pi) (I/|x| + x x^T / |x|^3),

(-1)-homogeneous, symmetric, even, biharmonic away from the origin.  The
field of a unit force spread uniformly over a sphere surface of radius a is
constant F/(6 pi a) inside and

    u(x) = [Phi + (a^2/6) Lap Phi](x - c) F

outside (exact: Phi is biharmonic, so the surface average obeys the
second-order mean value identity).  The cube-averaged field is Phi convolved
with the normalized cube indicator; far away it is a Stokeslet plus the
second-moment correction (h^2/6) Lap Phi, mirroring the sphere formula.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .quadrature import integrate_singular_box, _duffy_corner

INV_8PI = 1.0 / (8.0 * np.pi)
INV_4PI = 1.0 / (4.0 * np.pi)
E3 = np.array([0.0, 0.0, 1.0])


class SingularEvaluation(ZeroDivisionError):
    """Oseen tensor evaluated at the origin."""


def oseen(x):
    """Oseen tensor at points x (..., 3) -> (..., 3, 3)."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise SingularEvaluation("Phi(0) is undefined")
    eye = np.eye(3)
    outer = x[..., :, None] * x[..., None, :]
    return INV_8PI * (eye / r[..., None, None] + outer / r[..., None, None] ** 3)


def oseen_apply(x, force):
    """Phi(x) @ force without forming the tensor."""
    x = np.asarray(x, dtype=float)
    force = np.asarray(force, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise SingularEvaluation("Phi(0) is undefined")
    xf = x @ force
    return INV_8PI * (force / r[..., None] + x * (xf / r**3)[..., None])


def lap_oseen_apply(x, force):
    """(Lap Phi)(x) @ force = (1/4 pi)(F/r^3 - 3 x (x.F)/r^5)."""
    x = np.asarray(x, dtype=float)
    force = np.asarray(force, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    xf = x @ force
    return INV_4PI * (force / r[..., None] ** 3 - 3 * x * (xf / r**5)[..., None])


def phi33(x):
    """e3 . Phi(x) e3 as a scalar; the workhorse of the energy quadratures."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    return INV_8PI * (1.0 / r + x[..., 2] ** 2 / r**3)


def lap_phi33(x):
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    return INV_4PI * (1.0 / r**3 - 3 * x[..., 2] ** 2 / r**5)


# ---------------------------------------------------------------------------
# derived cube constants (computed once; see tests for the quadrature oracles)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1)
def cube_newton_constant():
    """Gamma = int_{side-1 cube, centered} dz/|z|  (prism self potential)."""
    def f(z):
        return 1.0 / np.linalg.norm(z, axis=-1)
    total = 0.0
    for sx in (1, -1):
        for sy in (1, -1):
            for sz in (1, -1):
                total += _duffy_corner(f, np.zeros(3), 0.5 * np.array([sx, sy, sz]), 24)
    return total


@lru_cache(maxsize=1)
def cube_pair_constant():
    """B1 = int_{[-1,1]^3} Phi33(z) prod(1 - |z_k|) dz: side-1 cube-cube self term."""
    def f(z):
        return phi33(z) * np.prod(1.0 - np.abs(z), axis=-1)
    total, _ = integrate_singular_box(f, (-1, -1, -1), (1, 1, 1),
                                      singular_point=(0, 0, 0), order=16, max_depth=2)
    return total


# exact for any centered cube: int over its boundary of dPhi33/dnu equals the
# sphere flux -2/3 because int_{Q \ B} Lap Phi33 = 0 by octahedral symmetry
CUBE_FLUX_PHI33 = -2.0 / 3.0


# ---------------------------------------------------------------------------
# sphere field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SphereField:
    """Unit of force spread uniformly over the sphere surface."""

    center: np.ndarray
    radius: float
    force: np.ndarray

    def velocity(self, points):
        return sphere_field(points, self)


def sphere_field(points, sphere):
    """Velocity of the sphere-surface force distribution; exact everywhere."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    c = np.asarray(sphere.center, dtype=float)
    a = float(sphere.radius)
    F = np.asarray(sphere.force, dtype=float)
    if a <= 0:
        raise ValueError("radius must be positive")
    d = pts - c
    r = np.linalg.norm(d, axis=-1)
    out = np.empty_like(pts)
    inside = r <= a
    out[inside] = F / (6 * np.pi * a)
    do = d[~inside]
    out[~inside] = oseen_apply(do, F) + (a**2 / 6) * lap_oseen_apply(do, F)
    return out.reshape(np.shape(points))


def sphere_field_e3(points, center, radius):
    """e3-component of the sphere field for force e3 (hot loop)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = pts - np.asarray(center, dtype=float)
    r = np.linalg.norm(d, axis=-1)
    out = np.empty(len(pts))
    inside = r <= radius
    out[inside] = 1.0 / (6 * np.pi * radius)
    do = d[~inside]
    out[~inside] = phi33(do) + (radius**2 / 6) * lap_phi33(do)
    return out


# ---------------------------------------------------------------------------
# cube field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CubeField:
    """Velocity of a unit force averaged over an axis-aligned cube.

    switch_diameters: beyond this many cube diameters the field is evaluated
    as a center Stokeslet plus the second-moment correction; closer points go
    through adaptive quadrature with octree subdivision near the singularity.
    """

    center: np.ndarray
    half_width: float
    force: np.ndarray
    order: int = 8
    switch_diameters: float = 3.0
    tol_factor: float = 1e-8      # absolute tolerance = tol_factor |F| / h

    def velocity(self, points):
        return cube_field(points, self)


def cube_field(points, cube):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    c = np.asarray(cube.center, dtype=float)
    h = float(cube.half_width)
    F = np.asarray(cube.force, dtype=float)
    if h <= 0:
        raise ValueError("cube is degenerate")
    d = pts - c
    r = np.linalg.norm(d, axis=-1)
    diam = 2 * np.sqrt(3.0) * h
    far = r >= cube.switch_diameters * diam
    out = np.empty_like(pts)
    if np.any(far):
        df = d[far]
        out[far] = oseen_apply(df, F) + (h**2 / 6) * lap_oseen_apply(df, F)
    near_idx = np.flatnonzero(~far)
    vol = (2 * h) ** 3
    tol = cube.tol_factor * float(np.linalg.norm(F)) / h
    for i in near_idx:
        out[i] = _cube_field_point(pts[i], c, h, F, cube.order, tol) / vol
    return out.reshape(np.shape(points))


def _cube_field_point(x, c, h, F, order, tol):
    comps = np.empty(3)
    for k in range(3):
        def f(y, k=k):
            return oseen_apply(x - y, F)[:, k]
        val, _ = integrate_singular_box(
            f, c - h, c + h, singular_point=x, order=order, tol=tol * (2 * h) ** 3,
            max_depth=6)
        comps[k] = val
    return comps


def cube_average_phi33(x, c, h, order=8, tol=None):
    """(1/|Q|) int_Q Phi33(x - y) dy by adaptive quadrature (oracle-grade path)."""
    x = np.asarray(x, float)
    c = np.asarray(c, float)
    val, _ = integrate_singular_box(
        lambda y: phi33(x - y), c - h, c + h, singular_point=x, order=order,
        tol=tol, max_depth=6)
    return val / (2 * h) ** 3


def cube_field_e3(points, c, h, order=8, cache=None):
    """e3-component of the cube field for force e3, adaptive path per point.

    cache (optional dict) memoizes on the quantized relative offset; identical
    point/cube geometries recur heavily in lattice sweeps.
    """
    pts = np.atleast_2d(np.asarray(points, float))
    out = np.empty(len(pts))
    for idx, x in enumerate(pts):
        if cache is None:
            out[idx] = cube_average_phi33(x, c, h, order=order)
            continue
        key = tuple(np.round((x - c) / h, 12)) + (round(h, 15), order)
        if key not in cache:
            cache[key] = cube_average_phi33(x, c, h, order=order)
        out[idx] = cache[key]
    return out


# ---------------------------------------------------------------------------
# elementary field U_i
# ---------------------------------------------------------------------------

class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class KernelField:
    """U_i = N^{-1/3} [sphere_field(X_i, R) - cube_field(Q_i)] with force e3."""

    center: np.ndarray
    radius: float
    cube_half_width: float
    amplitude: float              # N^{-1/3}

    def velocity(self, points):
        sph = SphereField(self.center, self.radius, E3)
        cub = CubeField(self.center, self.cube_half_width, E3)
        return self.amplitude * (sphere_field(points, sph) - cube_field(points, cub))

    def velocity_fast(self, points):
        """Sphere exact + cube far multipole; valid beyond ~3 cube diameters."""
        pts = np.atleast_2d(np.asarray(points, float))
        d = pts - self.center
        s = sphere_field(pts, SphereField(self.center, self.radius, E3))
        cfar = oseen_apply(d, E3) + (self.cube_half_width**2 / 6) * lap_oseen_apply(d, E3)
        return self.amplitude * (s - cfar)


def elementary_field(i, config):
    """The i-th elementary field of a configuration (requires B_i inside Q_i)."""
    if config.cube_half_widths is None:
        raise GeometryError("configuration has no cubes")
    if config.cube_half_widths[i] < config.R:
        raise GeometryError(f"ball {i} is not contained in its cube")
    return KernelField(
        center=config.centers[i],
        radius=config.R,
        cube_half_width=float(config.cube_half_widths[i]),
        amplitude=config.N ** (-1 / 3),
    )
