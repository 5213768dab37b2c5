"""Particle configurations: generators, separation checks, transport bounds, IO.

Conventions (fixed package-wide): N particles of radius R = N^{-1/3} r, each
driven by the force N^{-1/3} e3, viscosity 1.  Every generator returns a
configuration that passes its own invariant checks: balls strictly inside the
domain, pairwise separation >= c N^{-1/3} with the generator's declared c,
and pairwise-disjoint cubes centered on the particles.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import (ConfigurationError, Domain, DensityField, MASS_TOL,
                       shifted_duct_domain, uniform_box_density,
                       unit_cube_domain)


@dataclass
class ParticleConfiguration:
    N: int
    r: float
    centers: np.ndarray                 # (N, 3)
    domain: Domain
    cube_half_widths: np.ndarray | None = None     # (N,)
    separation_constant: float | None = None       # declared c in (H1)
    transport_cells: np.ndarray | None = None      # (N, 3, 2): per-atom mass cell
    generator: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, float).reshape(self.N, 3)
        if self.cube_half_widths is not None:
            self.cube_half_widths = np.asarray(self.cube_half_widths, float).reshape(self.N)
        self.validate()

    @property
    def R(self):
        return self.N ** (-1 / 3) * self.r

    def cube_bounds(self, i):
        hw = self.cube_half_widths[i]
        return self.centers[i] - hw, self.centers[i] + hw

    def validate(self):
        if self.N < 1:
            raise ConfigurationError("need at least one particle")
        if not self.domain.contains_balls(self.centers, self.R):
            raise ConfigurationError("a ball is not strictly inside the domain")
        c_pair, _ = min_separation(self)
        if self.separation_constant is not None and self.N > 1:
            if c_pair < self.separation_constant - 1e-9:
                raise ConfigurationError(
                    f"separation {c_pair} below declared constant {self.separation_constant}")
        if self.cube_half_widths is not None:
            self._validate_cubes()

    def _validate_cubes(self):
        hw = self.cube_half_widths
        if np.any(hw <= 0):
            raise ConfigurationError("cube half-widths must be positive")
        vols = (2 * hw) ** 3
        # volume window (1/(C1 N), C1/N): record the implied C1, require finite
        c1 = max(np.max(1.0 / (vols * self.N)), np.max(vols * self.N))
        self.params.setdefault("cube_volume_constant", float(c1))
        if self.N > 1:
            # disjointness: |Xi - Xj|_inf >= hw_i + hw_j for all pairs
            tree = cKDTree(self.centers)
            hmax = float(hw.max())
            pairs = tree.query_pairs(2 * np.sqrt(3.0) * hmax, output_type="ndarray")
            if len(pairs):
                d_inf = np.max(
                    np.abs(self.centers[pairs[:, 0]] - self.centers[pairs[:, 1]]), axis=1)
                if np.any(d_inf < hw[pairs[:, 0]] + hw[pairs[:, 1]] - 1e-12):
                    raise ConfigurationError("cubes overlap")

    def balls_inside_cubes(self):
        return self.cube_half_widths is not None and bool(
            np.all(self.cube_half_widths >= self.R - 1e-15))


@dataclass
class EmpiricalMeasures:
    """rho_N (atoms), rho_bar_N (sphere surfaces), sigma_N (cube indicators).

    Each member stores (locations-or-bounds, masses) with unit total mass.
    """

    config: ParticleConfiguration

    def atom_masses(self):
        return np.full(self.config.N, 1.0 / self.config.N)

    def rho(self):
        return self.config.centers, self.atom_masses()

    def rho_bar(self):
        # sphere surface measures, represented by center/radius/mass
        return self.config.centers, self.config.R, self.atom_masses()

    def sigma(self):
        if self.config.cube_half_widths is None:
            raise ConfigurationError("sigma_N requires cubes")
        return self.config.centers, self.config.cube_half_widths, self.atom_masses()

    def masses_ok(self, tol=MASS_TOL):
        return abs(self.atom_masses().sum() - 1.0) <= tol


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def generate_cubic_lattice(M, r, domain=None, cube_scale=1.0):
    """M^3 particles at the cell centers (k + 1/2)/M of the unit cube.

    Cubes are the lattice cells scaled by cube_scale (default: the cells
    themselves); shrunk cubes keep the mass-1/N transport cells at full size.
    Separation constant c = 1.
    """
    if M < 1:
        raise ConfigurationError("M must be >= 1")
    if not 0 < cube_scale <= 1:
        raise ConfigurationError("cube_scale must lie in (0, 1]")
    domain = domain or unit_cube_domain()
    N = M**3
    R = N ** (-1 / 3) * r
    idx = np.indices((M, M, M)).reshape(3, -1).T
    centers = (idx + 0.5) / M
    if not domain.contains_balls(centers, R, margin=0.0):
        raise ConfigurationError(
            f"lattice M={M}, r={r} does not fit inside the domain with margin R")
    hw = np.full(N, cube_scale / (2 * M))
    cells = np.stack([centers - 1 / (2 * M), centers + 1 / (2 * M)], axis=-1)
    return ParticleConfiguration(
        N=N, r=r, centers=centers, domain=domain, cube_half_widths=hw,
        separation_constant=1.0, transport_cells=cells,
        generator="lattice", params={"M": M, "cube_scale": cube_scale})


def generate_shifted_example(M, lam, r):
    """Mirrored shifted lattice on the duct (-1,1) x (0,1) x R; N = 2 M^3.

    Right half: X_k = ((k1 + 1/2 - lam)/M, (k2 + 1/2)/M, (k3 + 1/2)/M); the
    left half is the mirror image across {x1 = 0}.  The k1 = 0 layer gets
    cubes of half-width 1/(2M) - lam/M, all others 1/(2M).  Returns the
    configuration together with the limiting density n = (1/2) 1_{duct cross
    section} x (0,1) and its surface defect of weight 2^{1/3} lam on {x1 = 0}.
    """
    if not 0 < lam < 0.5:
        raise ConfigurationError(f"lambda must lie in (0, 1/2), got {lam}")
    if M < 1:
        raise ConfigurationError("M must be >= 1")
    domain = shifted_duct_domain()
    N = 2 * M**3
    R = N ** (-1 / 3) * r
    idx = np.indices((M, M, M)).reshape(3, -1).T
    right = (idx + 0.5) / M
    right[:, 0] -= lam / M
    left = right.copy()
    left[:, 0] *= -1
    centers = np.vstack([right, left])
    hw_half = np.full(M**3, 1 / (2 * M))
    hw_half[idx[:, 0] == 0] = 1 / (2 * M) - lam / M
    hw = np.concatenate([hw_half, hw_half])
    if np.any(hw < R):
        raise ConfigurationError("shifted-layer cubes too small to contain the balls")
    # transport cells: the unshifted lattice cells and their mirrors
    tr_right = (idx + 0.5) / M
    cells_r = np.stack([tr_right - 1 / (2 * M), tr_right + 1 / (2 * M)], axis=-1)
    cells_l = cells_r.copy()
    cells_l[:, 0, :] = -cells_r[:, 0, ::-1]
    cells = np.vstack([cells_r, cells_l])
    c_sep = 2 ** (1 / 3) * min(1.0, 1.0 - 2 * lam)
    config = ParticleConfiguration(
        N=N, r=r, centers=centers, domain=domain, cube_half_widths=hw,
        separation_constant=c_sep, transport_cells=cells,
        generator="shifted", params={"M": M, "lambda": lam})
    density = DensityField(
        [((-1.0, 0.0, 0.0), (1.0, 1.0, 1.0), 0.5)], domain,
    )
    density.defect_weight = 2 ** (1 / 3) * lam
    density.defect_plane = 0.0
    return config, density


def generate_hardcore_poisson(N, r, domain=None, seed=0, max_fraction=0.2,
                              max_attempts=10**6):
    """Rejection-sampled centers with pairwise and wall distance >= 2R.

    Deterministic given the seed.  Cell-list neighbor grid keeps the expected
    cost O(N).  Raises if the packing is infeasible or attempts run out.
    """
    domain = domain or unit_cube_domain()
    R = N ** (-1 / 3) * r
    ext = domain.extents
    if domain.kind == "duct":
        # sample within the stored truncation window along the free axis
        pass
    vol = np.prod([hi - lo for lo, hi in ext])
    if N * (2 * R) ** 3 > max_fraction * vol:
        raise ConfigurationError(
            f"packing fraction {N * (2 * R) ** 3 / vol:.3f} exceeds {max_fraction}")
    rng = np.random.default_rng(seed)
    lo = np.array([e[0] for e in ext]) + 2 * R
    hi = np.array([e[1] for e in ext]) - 2 * R
    if np.any(hi <= lo):
        raise ConfigurationError("domain too small for the wall margin 2R")
    cell = 2 * R
    grid = {}
    placed = np.empty((N, 3))
    def neighbors_ok(p):
        key = tuple((p // cell).astype(int))
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    for q in grid.get((key[0] + dx, key[1] + dy, key[2] + dz), ()):
                        if np.sum((p - q) ** 2) < (2 * R) ** 2:
                            return False
        return True
    n_placed = 0
    attempts = 0
    while n_placed < N:
        p = lo + (hi - lo) * rng.random(3)
        attempts += 1
        if attempts > max_attempts * N:
            raise ConfigurationError(
                f"packing failed after {attempts} attempts ({n_placed}/{N} placed)")
        if not neighbors_ok(p):
            continue
        placed[n_placed] = p
        grid.setdefault(tuple((p // cell).astype(int)), []).append(p)
        n_placed += 1
    return ParticleConfiguration(
        N=N, r=r, centers=placed, domain=domain, cube_half_widths=None,
        separation_constant=2 * r, generator="poisson",
        params={"seed": seed, "max_fraction": max_fraction})


def assign_cubes(config, half_width=None):
    """Attach disjoint cubes to a cube-less configuration (e.g. Poisson).

    Default half-width: min pairwise distance / (2 sqrt(3)), which guarantees
    disjointness from the l2 separation.
    """
    if half_width is None:
        c_pair, _ = min_separation(config)
        d_min = c_pair * config.N ** (-1 / 3)
        half_width = d_min / (2 * np.sqrt(3.0))
    half_width = max(half_width, config.R)
    config.cube_half_widths = np.full(config.N, float(half_width))
    config._validate_cubes()
    return config


# ---------------------------------------------------------------------------
# separation and transport bounds
# ---------------------------------------------------------------------------

def min_separation(config):
    """(c_pair, c_wall): minimal pair/wall distances scaled by N^{1/3}."""
    scale = config.N ** (1 / 3)
    if config.N == 1:
        c_pair = np.inf
    else:
        tree = cKDTree(config.centers)
        dists, _ = tree.query(config.centers, k=2)
        c_pair = float(dists[:, 1].min()) * scale
    c_wall = float(config.domain.wall_distance(config.centers).min()) * scale
    return c_pair, c_wall


@dataclass(frozen=True)
class WinfBound:
    value: float
    certified: bool


def winf_upper_bound(config, density):
    """Certified upper bound for W_inf(rho_N, n) from the cell-to-atom transport.

    Uses the stored transport cells (falling back to the cubes).  The bound is
    certified when the cells partition supp(n) with mass exactly 1/N each;
    otherwise it is reported as heuristic.
    """
    if config.transport_cells is not None:
        cells = config.transport_cells
    elif config.cube_half_widths is not None:
        hw = config.cube_half_widths
        cells = np.stack([config.centers - hw[:, None], config.centers + hw[:, None]],
                         axis=-1)
    else:
        raise ConfigurationError("no transport cells or cubes assigned")
    # sup distance cell -> atom: attained at a cell corner
    worst = 0.0
    for i in range(config.N):
        lo, hi = cells[i, :, 0], cells[i, :, 1]
        corners = np.stack(np.meshgrid(*zip(lo, hi), indexing="ij"), -1).reshape(-1, 3)
        worst = max(worst, float(np.linalg.norm(corners - config.centers[i], axis=1).max()))
    certified = _cells_partition_support(cells, density, config.N)
    return WinfBound(worst, certified)


def _cells_partition_support(cells, density, N):
    vols = np.prod(cells[:, :, 1] - cells[:, :, 0], axis=1)
    masses = vols * density.value_at(0.5 * (cells[:, :, 0] + cells[:, :, 1]))
    if np.any(np.abs(masses - 1.0 / N) > 1e-9 / N):
        return False
    supp_vol = sum(np.prod(hi - lo) for lo, hi, v in density.pieces if v > 0)
    return abs(vols.sum() - supp_vol) <= 1e-9 * supp_vol


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_config_csv(config, csv_path, sidecar_path=None):
    """Flat CSV (index, x1, x2, x3, cube half-width) + JSON sidecar metadata."""
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "x1", "x2", "x3", "hw"])
        hw = config.cube_half_widths
        for i, c in enumerate(config.centers):
            row = [i] + [f"{x:.17g}" for x in c]
            row.append(f"{hw[i]:.17g}" if hw is not None else "")
            writer.writerow(row)
    meta = {
        "generator": config.generator,
        "N": config.N,
        "r": config.r,
        "separation_constant": config.separation_constant,
        "domain": config.domain.to_dict(),
        "params": config.params,
    }
    if sidecar_path:
        with open(sidecar_path, "w") as fh:
            json.dump(meta, fh, indent=1, sort_keys=True)
    return meta


def load_config_csv(csv_path, sidecar_path):
    with open(sidecar_path) as fh:
        meta = json.load(fh)
    centers, hws = [], []
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            centers.append([float(row["x1"]), float(row["x2"]), float(row["x3"])])
            hws.append(float(row["hw"]) if row["hw"] else np.nan)
    hw = None if np.isnan(hws).any() else np.asarray(hws)
    return ParticleConfiguration(
        N=meta["N"], r=meta["r"], centers=np.asarray(centers),
        domain=Domain.from_dict(meta["domain"]), cube_half_widths=hw,
        separation_constant=meta.get("separation_constant"),
        generator=meta.get("generator", "custom"), params=meta.get("params", {}))


def uniform_density_for(config):
    """The natural limiting density for the built-in generators."""
    if config.generator == "shifted":
        density = DensityField([((-1.0, 0.0, 0.0), (1.0, 1.0, 1.0), 0.5)], config.domain)
        density.defect_weight = 2 ** (1 / 3) * config.params["lambda"]
        density.defect_plane = 0.0
        return density
    return uniform_box_density((0, 0, 0), (1, 1, 1), config.domain)
