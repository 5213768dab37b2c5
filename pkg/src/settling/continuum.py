"""Grid solves for the macroscopic fields: staggered Stokes, Poisson, dual norms.

MAC layout on a box with homogeneous Dirichlet velocity walls:
  p[i,j,k]   at cell centers                       shape (n1, n2, n3)
  u1[i,j,k]  at x1-faces, interior i = 1..n1-1     shape (n1-1, n2, n3)
  (u2, u3 analogous).  Wall-normal components sit on wall faces (value 0,
  eliminated); wall-tangential components use the linear ghost u_g = -u_1.

With this layout the discrete divergence and gradient are exact adjoints, and
each component Laplacian is separable: DST-I along the component's own axis
(nodes on walls), DST-II/III along the other axes (half-offset nodes with the
anti-symmetric ghost).  The inner solves are therefore exact direct solves,
and the outer pressure iteration is plain CG on the Schur complement
S = D A^{-1} G (classical Uzawa acceleration).  After convergence the
divergence equals the Schur residual, so the 1e-8 divergence contract follows
from the CG tolerance.

The scalar (-Lap + mass) solver reuses the DST-I machinery on node-centered
interior grids and backs both the dual-Sobolev norms and the 2-D cross-section
reduction of the plane-defect flow.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import fft


class SolverError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# DST building blocks
# ---------------------------------------------------------------------------

class ComponentSolver:
    """Exact inverse of -Lap_h for one velocity component (or a scalar field).

    normal_axis: axis with on-wall nodes (DST-I); all other axes use the
    half-offset ghost convention (DST-II forward, DST-III inverse).  Pass
    normal_axis="all" for node-centered scalar grids (DST-I on every axis).
    mass adds a zero-order term (for -Lap + mass).
    """

    def __init__(self, shape, h, normal_axis, mass=0.0):
        self.shape = tuple(shape)
        self.h = h
        self.normal_axis = normal_axis
        eigs = []
        for ax, n in enumerate(self.shape):
            if normal_axis == "all" or ax == normal_axis:
                lam = 4 * np.sin(np.pi * np.arange(1, n + 1) / (2 * (n + 1))) ** 2
            else:
                lam = 4 * np.sin(np.pi * np.arange(1, n + 1) / (2 * n)) ** 2
            eigs.append(lam / h**2)
        L = np.zeros(self.shape)
        for ax, lam in enumerate(eigs):
            L += lam.reshape([-1 if a == ax else 1 for a in range(len(self.shape))])
        self.L = L + mass

    def _is_type1(self, ax):
        return self.normal_axis == "all" or ax == self.normal_axis

    def _fwd(self, f):
        g = f
        for ax in range(f.ndim):
            g = fft.dst(g, type=1 if self._is_type1(ax) else 2, axis=ax)
        return g

    def _bwd(self, g):
        f = g
        for ax in range(g.ndim):
            n = self.shape[ax]
            if self._is_type1(ax):
                f = fft.dst(f, type=1, axis=ax) / (2 * (n + 1))
            else:
                f = fft.dst(f, type=3, axis=ax) / (2 * n)
        return f

    def solve(self, f):
        if f.shape != self.shape:
            raise SolverError(f"forcing shape {f.shape} != unknown shape {self.shape}")
        return self._bwd(self._fwd(f) / self.L)

    def apply(self, u):
        if u.shape != self.shape:
            raise SolverError(f"field shape {u.shape} != unknown shape {self.shape}")
        return self._bwd(self._fwd(u) * self.L)


@dataclass
class GridSolution:
    h: float
    energy: float                  # <f, u>_h  (= ||grad u||^2 by the identity)
    energy_gradient: float         # u^T A u h^3, the raw gradient form
    residual: float
    div_max: float = 0.0
    iters: int = 0
    fields: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def save_fields(self, prefix):
        """Flat binary arrays + JSON headers {shape, spacing, origin, component}."""
        for name, (arr, origin) in self.fields.items():
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            arr.tofile(f"{prefix}_{name}.bin")
            header = {"shape": list(arr.shape), "spacing": self.h,
                      "origin": list(origin), "component": name}
            with open(f"{prefix}_{name}.json", "w") as fh:
                json.dump(header, fh, sort_keys=True)


# ---------------------------------------------------------------------------
# MAC Stokes
# ---------------------------------------------------------------------------

class MacStokesBox:
    """-Lap u + grad p = f, div u = 0, u = 0 on the walls of a box."""

    def __init__(self, extents, h):
        self.extents = tuple((float(a), float(b)) for a, b in extents)
        self.h = float(h)
        self.n = tuple(int(round((b - a) / h)) for a, b in self.extents)
        for (a, b), nk in zip(self.extents, self.n):
            if abs(a + nk * h - b) > 1e-9 * max(1.0, abs(b)):
                raise SolverError(f"extent [{a}, {b}] is not a multiple of h = {h}")
            if nk < 2:
                raise SolverError("need at least 2 cells per axis")
        n1, n2, n3 = self.n
        self.ushape = [(n1 - 1, n2, n3), (n1, n2 - 1, n3), (n1, n2, n3 - 1)]
        self.solvers = [ComponentSolver(self.ushape[k], h, k) for k in range(3)]

    def zero_forcing(self):
        return [np.zeros(s) for s in self.ushape]

    def face_axes(self, component):
        """Coordinate arrays of the interior faces carrying that component."""
        axes = []
        for ax in range(3):
            a, _ = self.extents[ax]
            n = self.n[ax]
            if ax == component:
                axes.append(a + np.arange(1, n) * self.h)
            else:
                axes.append(a + (np.arange(n) + 0.5) * self.h)
        return axes

    def div(self, u):
        h = self.h
        n1, n2, n3 = self.n
        U1 = np.zeros((n1 + 1, n2, n3)); U1[1:n1] = u[0]
        U2 = np.zeros((n1, n2 + 1, n3)); U2[:, 1:n2] = u[1]
        U3 = np.zeros((n1, n2, n3 + 1)); U3[:, :, 1:n3] = u[2]
        return (np.diff(U1, axis=0) + np.diff(U2, axis=1) + np.diff(U3, axis=2)) / h

    def grad(self, p):
        h = self.h
        return [np.diff(p, axis=0) / h, np.diff(p, axis=1) / h, np.diff(p, axis=2) / h]

    def solve(self, f, tol=1e-8, maxit=1000):
        for k in range(3):
            if f[k].shape != tuple(self.ushape[k]):
                raise SolverError(
                    f"component {k}: forcing shape {f[k].shape} != {self.ushape[k]}")
        Ainvf = [self.solvers[k].solve(f[k]) for k in range(3)]
        b = self.div(Ainvf)
        b -= b.mean()

        def S_apply(q):
            g = self.grad(q)
            w = [self.solvers[k].solve(g[k]) for k in range(3)]
            d = self.div(w)
            return d - d.mean()

        p = np.zeros(self.n)
        r = b.copy()
        d = r.copy()
        rs = float((r * r).sum())
        b0 = np.sqrt(rs)
        it = 0
        while np.sqrt(rs) > tol * max(b0, 1e-300) and it < maxit:
            Sd = S_apply(d)
            alpha = rs / float((d * Sd).sum())
            p += alpha * d
            r -= alpha * Sd
            rs_new = float((r * r).sum())
            d = r + (rs_new / rs) * d
            rs = rs_new
            it += 1
        if it >= maxit:
            raise SolverError(f"Uzawa/Schur CG stalled at residual {np.sqrt(rs)/b0:.2e}")
        g = self.grad(p)
        u = [self.solvers[k].solve(f[k] - g[k]) for k in range(3)]
        divu = self.div(u)
        h3 = self.h**3
        energy = h3 * sum(float((u[k] * f[k]).sum()) for k in range(3))
        energy_grad = h3 * sum(float((u[k] * self.solvers[k].apply(u[k])).sum())
                               for k in range(3))
        sol = GridSolution(
            h=self.h, energy=energy, energy_gradient=energy_grad,
            residual=np.sqrt(rs) / max(b0, 1e-300),
            div_max=float(np.abs(divu).max()), iters=it)
        sol.fields = {f"u{k+1}": (u[k], [self.extents[a][0] for a in range(3)])
                      for k in range(3)}
        sol.fields["p"] = (p, [self.extents[a][0] for a in range(3)])
        sol.meta["grad_inner"] = lambda v: h3 * sum(
            float((u[k] * self.solvers[k].apply(v[k])).sum()) for k in range(3))
        sol.meta["u"] = u
        return sol


# ---------------------------------------------------------------------------
# conservative rasterization
# ---------------------------------------------------------------------------

def cic_deposit(points, masses, axes, shape):
    """Cloud-in-cell deposit of point masses onto a node lattice given by the
    per-axis coordinate arrays.  Out-of-hull mass folds to the nearest node,
    so total mass is conserved exactly."""
    pts = np.atleast_2d(np.asarray(points, float))
    out = np.zeros(shape)
    s, i0, w = [], [], []
    for ax in range(3):
        coords = axes[ax]
        step = coords[1] - coords[0]
        sk = (pts[:, ax] - coords[0]) / step
        sk = np.clip(sk, 0.0, len(coords) - 1.0)
        ik = np.minimum(sk.astype(int), len(coords) - 2)
        s.append(sk); i0.append(ik); w.append(sk - ik)
    for d1 in (0, 1):
        for d2 in (0, 1):
            for d3 in (0, 1):
                ww = ((w[0] if d1 else 1 - w[0]) * (w[1] if d2 else 1 - w[1])
                      * (w[2] if d3 else 1 - w[2]))
                np.add.at(out, (i0[0] + d1, i0[1] + d2, i0[2] + d3),
                          np.asarray(masses) * ww)
    return out


def _interval_overlap_weights(a, b, coords, step):
    """Length of [a,b] covered by each node's dual cell, end mass folded in."""
    lo = np.maximum(coords - step / 2, a)
    hi = np.minimum(coords + step / 2, b)
    wt = np.clip(hi - lo, 0.0, None)
    wt[0] += max(0.0, min(coords[0] - step / 2, b) - a)
    wt[-1] += max(0.0, b - max(coords[-1] + step / 2, a))
    return wt


def box_deposit(lo, hi, mass, axes):
    """Deposit a uniform box measure onto the node lattice, exactly conservative."""
    steps = [ax[1] - ax[0] for ax in axes]
    ws = [_interval_overlap_weights(lo[k], hi[k], axes[k], steps[k]) for k in range(3)]
    vol = float(np.prod(np.asarray(hi) - np.asarray(lo)))
    return (mass / vol) * ws[0][:, None, None] * ws[1][None, :, None] * ws[2][None, None, :]


def density_deposit(density, axes):
    out = np.zeros(tuple(len(a) for a in axes))
    for lo, hi, v in density.pieces:
        m = v * float(np.prod(hi - lo))
        out += box_deposit(lo, hi, m, axes)
    return out


# ---------------------------------------------------------------------------
# the plane-defect flow (2-D cross-section reduction)
# ---------------------------------------------------------------------------

def solve_defect_poisson(weight, n_grid=256):
    """Defect flow for a plane source of the given weight on {x1 = 0}.

    The forcing weight * delta_{x1=0} e3 is invariant along the duct axis, so
    the axial velocity w solves the 2-D Dirichlet Poisson problem
    -Lap2 w = weight * delta(x1) on the cross-section (-1,1) x (0,1) and the
    pressure is constant.  The node column i0 sits exactly on x1 = 0 and
    receives line mass weight/h.  Returns energy E = <g, w> = ||grad w||^2.
    """
    if n_grid < 2:
        raise SolverError("resolution too small")
    h = 1.0 / n_grid
    n1, n2 = 2 * n_grid, n_grid
    f = np.zeros((n1 - 1, n2 - 1))
    if weight != 0.0:
        f[n_grid - 1, :] = weight / h
    lam1 = 4 * np.sin(np.pi * np.arange(1, n1) / (2 * n1)) ** 2 / h**2
    lam2 = 4 * np.sin(np.pi * np.arange(1, n2) / (2 * n2)) ** 2 / h**2
    L = lam1[:, None] + lam2[None, :]
    F = fft.dst(fft.dst(f, type=1, axis=0), type=1, axis=1)
    w = fft.dst(fft.dst(F / L, type=1, axis=0), type=1, axis=1) / (2 * n1) / (2 * n2)
    energy = float((f * w).sum()) * h**2
    sol = GridSolution(h=h, energy=energy, energy_gradient=energy,
                       residual=0.0, iters=0)
    sol.fields["w"] = (w, [-1.0, 0.0, 0.0])
    sol.meta["profile_on_plane"] = w[n_grid - 1, :]
    return sol


def defect_energy_series(weight, n_terms=100001):
    """Closed-form energy of the plane-defect flow: separable sine series.

    E / weight^2 = 4 sum_{odd n} tanh(n pi) / (n pi)^3; each mode uses the 1-D
    Green value tanh(kappa)/(2 kappa) at the source plane.
    """
    n = np.arange(1, n_terms, 2, dtype=float)
    return float(weight**2 * np.sum(4 * np.tanh(n * np.pi) / (n * np.pi) ** 3))


# ---------------------------------------------------------------------------
# box/duct Stokes solves with density or empirical forcing
# ---------------------------------------------------------------------------

def duct_truncation_window(domain, support=(0.0, 1.0), widths_factor=8.0):
    """Default truncation of the unbounded duct axis: total length equal to
    widths_factor times the largest cross-section width, centered on the
    forcing support."""
    if domain.kind != "duct":
        return domain.extents[2]
    w = max(domain.extents[0][1] - domain.extents[0][0],
            domain.extents[1][1] - domain.extents[1][0])
    length = widths_factor * w
    mid = 0.5 * (support[0] + support[1])
    return (mid - length / 2, mid + length / 2)


def stokes_extents(domain, window=None):
    ext = list(domain.extents)
    if domain.kind == "duct":
        ext[2] = tuple(window) if window is not None else duct_truncation_window(domain)
    return tuple(ext)


def solve_stokes_box(density, domain, h, direction=2, tol=1e-8, window=None):
    """Stokes flow forced by density * e_direction on the (truncated) domain."""
    box = MacStokesBox(stokes_extents(domain, window), h)
    f = box.zero_forcing()
    axes = box.face_axes(direction)
    f[direction] = density_deposit(density, axes) / h**3
    sol = box.solve(f, tol=tol)
    sol.meta["forcing_mass"] = float(f[direction].sum()) * h**3
    sol.meta["box"] = box
    return sol


def mean_velocity_matrix(density, domain, h, tol=1e-8, window=None):
    """V_* with components V_*.e_k = int grad v[e3] : grad v[e_k]."""
    sols = []
    box = MacStokesBox(stokes_extents(domain, window), h)
    forcings = []
    for direction in range(3):
        f = box.zero_forcing()
        f[direction] = density_deposit(density, box.face_axes(direction)) / h**3
        forcings.append(f)
        sols.append(box.solve(f, tol=tol))
    u3 = sols[2].meta["u"]
    V = np.empty(3)
    for k in range(3):
        # <grad v3, grad vk> = <f3 - G p3, vk> = <f3, vk> + O(div residual)
        V[k] = h**3 * sum(float((forcings[2][c] * sols[k].meta["u"][c]).sum())
                          for c in range(3))
    return V, sols


def empirical_stokes_energy(config, h, tol=1e-8, window=None, direction=2):
    """Pair energy of the rasterized empirical sphere measure (PM estimator).

    The spheres are far below the grid scale, so rho_bar deposits as CIC
    atoms; the grid then adds a spurious self energy ~= g0/N with g0 the
    single-atom energy at the lattice offset of the configuration.  g0 is
    measured on the same grid with the particle closest to the cloud centroid
    and removed, leaving the collective (pair) energy that converges to the
    continuum value.  Returns (raw_energy, pair_energy, g0).
    """
    box = MacStokesBox(stokes_extents(config.domain, window), h)
    axes = box.face_axes(direction)
    masses = np.full(config.N, 1.0 / config.N)
    f = box.zero_forcing()
    f[direction] = cic_deposit(config.centers, masses, axes, box.ushape[direction]) / h**3
    sol = box.solve(f, tol=tol)
    centroid = config.centers.mean(axis=0)
    ref = config.centers[np.argmin(np.linalg.norm(config.centers - centroid, axis=1))]
    f0 = box.zero_forcing()
    f0[direction] = cic_deposit(ref[None, :], np.array([1.0]), axes,
                                box.ushape[direction]) / h**3
    sol0 = box.solve(f0, tol=tol)
    g0 = sol0.energy
    pair = sol.energy - g0 / config.N
    return sol.energy, pair, g0


# ---------------------------------------------------------------------------
# dual Sobolev norms
# ---------------------------------------------------------------------------

class ScalarGrid:
    """Node-centered interior lattice for (-Lap + 1) solves with Dirichlet data."""

    def __init__(self, extents, h):
        self.extents = tuple((float(a), float(b)) for a, b in extents)
        self.h = float(h)
        self.n = tuple(int(round((b - a) / h)) for a, b in self.extents)
        for (a, b), nk in zip(self.extents, self.n):
            if abs(a + nk * h - b) > 1e-9 * max(1.0, abs(b)):
                raise SolverError(f"extent [{a}, {b}] is not a multiple of h = {h}")
        self.shape = tuple(nk - 1 for nk in self.n)
        self.axes = [a + np.arange(1, nk) * h for (a, _), nk in zip(self.extents, self.n)]
        self.solver = ComponentSolver(self.shape, h, "all", mass=1.0)

    def deposit_config_measures(self, config, density=None):
        """Node-mass arrays of rho_bar_N, sigma_N and (optionally) n."""
        masses = np.full(config.N, 1.0 / config.N)
        rho = cic_deposit(config.centers, masses, self.axes, self.shape)
        sigma = None
        if config.cube_half_widths is not None:
            sigma = np.zeros(self.shape)
            for i in range(config.N):
                lo, hi = config.cube_bounds(i)
                sigma += box_deposit(lo, hi, masses[i], self.axes)
        dens = density_deposit(density, self.axes) if density is not None else None
        return rho, sigma, dens

    def dual_norm(self, node_masses, tol=1e-10):
        """|| f ||_{(H^1)*} = sqrt(<f, u>), (-Lap + 1) u = f, zero Dirichlet data.

        The DST solve is direct, so the residual is machine-level; it is still
        measured and reported against tol.
        """
        dens = node_masses / self.h**3
        u = self.solver.solve(dens)
        resid = float(np.abs(self.solver.apply(u) - dens).max())
        scale = max(1.0, float(np.abs(dens).max()))
        if resid > tol * scale * 1e6:
            raise SolverError(f"dual-norm solve residual {resid:.2e}")
        val = float((dens * u).sum()) * self.h**3
        return np.sqrt(max(val, 0.0))


def dual_sobolev_norm(node_masses, grid, tol=1e-10):
    return grid.dual_norm(node_masses, tol=tol)
