"""Domains, densities and the geometric checks behind the model assumptions.

A Domain is an axis-aligned box or an axis-aligned duct (bounded rectangular
cross-section, unbounded third axis).  The driving force is always along the
third coordinate axis.  A DensityField is a piecewise-constant probability
density given as a list of disjoint axis-aligned boxes with constant values;
its ``hom`` flag records whether every interior jump surface is orthogonal to
e3 (the well-prepared condition curl(n e3) = 0).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FORCE_AXIS = 2  # e3

MASS_TOL = 1e-12


class ConfigurationError(ValueError):
    """Geometry or feasibility violation in a configuration or density."""


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box or duct.

    extents: three (lo, hi) pairs.  For a duct the third pair is ignored for
    containment along that axis (unbounded) but is kept as the default
    truncation window for grid solves.
    """

    kind: str                      # "box" | "duct"
    extents: tuple                 # ((lo1, hi1), (lo2, hi2), (lo3, hi3))

    def __post_init__(self):
        if self.kind not in ("box", "duct"):
            raise ConfigurationError(f"unknown domain kind {self.kind!r}")
        ext = tuple((float(a), float(b)) for a, b in self.extents)
        object.__setattr__(self, "extents", ext)
        for i, (a, b) in enumerate(ext):
            if i == 2 and self.kind == "duct":
                continue
            if not b > a:
                raise ConfigurationError(f"axis {i}: empty extent [{a}, {b}]")
        # (H0): the cross-section must have positive measure -- guaranteed above
        if self.kind == "duct" and not ext[2][1] > ext[2][0]:
            raise ConfigurationError("duct truncation window is empty")

    @property
    def bounded_axes(self):
        return (0, 1) if self.kind == "duct" else (0, 1, 2)

    def wall_distance(self, points):
        """Min distance from each point to the boundary (duct: lateral walls)."""
        pts = np.atleast_2d(np.asarray(points, float))
        dists = []
        for ax in self.bounded_axes:
            lo, hi = self.extents[ax]
            dists.append(pts[:, ax] - lo)
            dists.append(hi - pts[:, ax])
        return np.min(dists, axis=0)

    def contains_balls(self, centers, radius, margin=0.0):
        return bool(np.all(self.wall_distance(centers) >= radius + margin - 1e-15))

    def to_dict(self):
        return {"kind": self.kind, "extents": [list(e) for e in self.extents]}

    @staticmethod
    def from_dict(d):
        return Domain(d["kind"], tuple(tuple(e) for e in d["extents"]))


def unit_cube_domain():
    return Domain("box", ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)))


def shifted_duct_domain(truncation=(-1.5, 2.5)):
    """Duct (-1,1) x (0,1) x R used by the mirrored shifted construction."""
    return Domain("duct", ((-1.0, 1.0), (0.0, 1.0), tuple(truncation)))


@dataclass
class DensityField:
    """Piecewise-constant density: disjoint boxes with constant values, unit mass."""

    pieces: list                    # [(lo(3,), hi(3,), value), ...]
    domain: Domain
    hom: bool = field(init=False)
    defect_weight: float | None = None   # surface defect on the plane {x1 = defect_plane}
    defect_plane: float | None = None

    def __post_init__(self):
        self.pieces = [
            (np.asarray(lo, float), np.asarray(hi, float), float(v))
            for lo, hi, v in self.pieces
        ]
        mass = self.total_mass()
        if abs(mass - 1.0) > MASS_TOL:
            raise ConfigurationError(f"density mass {mass} != 1")
        self.hom = self._check_hom()

    def total_mass(self):
        return float(sum(v * np.prod(hi - lo) for lo, hi, v in self.pieces))

    def value_at(self, points):
        pts = np.atleast_2d(np.asarray(points, float))
        out = np.zeros(len(pts))
        for lo, hi, v in self.pieces:
            inside = np.all((pts >= lo) & (pts <= hi), axis=1)
            out[inside] = v
        return out

    def _interior_jump_faces(self):
        """Piece faces strictly inside the domain where the density jumps."""
        faces = []
        for lo, hi, v in self.pieces:
            for ax in range(3):
                for pos, outward in ((lo[ax], -1.0), (hi[ax], +1.0)):
                    # a face lying on the domain boundary is not interior
                    if ax in self.domain.bounded_axes:
                        a, b = self.domain.extents[ax]
                        if abs(pos - a) < 1e-12 or abs(pos - b) < 1e-12:
                            continue
                    # probe density value just outside this face at the face center
                    center = 0.5 * (lo + hi)
                    center[ax] = pos + outward * 1e-9
                    v_out = self.value_at(center[None, :])[0]
                    if abs(v_out - v) > 1e-12:
                        faces.append(ax)
        return faces

    def _check_hom(self):
        # all interior jump surfaces orthogonal to e3 <=> normal axis == FORCE_AXIS
        return all(ax == FORCE_AXIS for ax in self._interior_jump_faces())


def uniform_box_density(lo, hi, domain):
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    vol = float(np.prod(hi - lo))
    return DensityField([(lo, hi, 1.0 / vol)], domain)
