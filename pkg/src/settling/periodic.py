"""Spectral solution of the torus cell problem and the dilute-limit coefficient.

For a unit cell of size d = 1, sphere radius ratio rho and unit force, the
Fourier diagonalization of the cell problem gives the energy as a lattice sum

    S(rho) = sum_{m != 0} j0(2 pi |m| rho)^2 (1 - m3^2/|m|^2) / (4 pi^2 |m|^2),

j0(t) = sin(t)/t.  Cubic symmetry makes each |m|^2-shell contribution depend
only on n = |m|^2 and the representation count r3(n), so the sum collapses to

    S(rho) = (1/6 pi^2) sum_n r3(n) j0(2 pi sqrt(n) rho)^2 / n.

The tail beyond |m| = K is replaced by its radial integral, which has a
closed form in the sine integral; the reported tail bound is calibrated from
the K-ladder (integral comparison).  General cells scale as
S(r, d) = S(r/d) / d.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import sici

from .quadrature import AccuracyError

_r3_cache = {"nmax": 0, "r3": None}


def shell_counts(nmax):
    """r3(n) = #{m in Z^3 : |m|^2 = n} for n = 0..nmax, by double convolution."""
    if _r3_cache["nmax"] >= nmax:
        return _r3_cache["r3"][: nmax + 1]
    r1 = np.zeros(nmax + 1)
    r1[0] = 1.0
    sq = np.arange(1, int(np.sqrt(nmax)) + 1)
    r1[sq * sq] = 2.0
    r2 = fftconvolve(r1, r1)[: nmax + 1]
    r3 = np.rint(fftconvolve(r2, r1)[: nmax + 1])
    _r3_cache["nmax"] = nmax
    _r3_cache["r3"] = r3
    return r3


def _j0_sq(t):
    out = np.ones_like(t)
    nz = t != 0
    out[nz] = (np.sin(t[nz]) / t[nz]) ** 2
    return out


def _tail_integral(rho, K):
    """int_{|k| > K} of the radial continuum version; closed form via Si."""
    x0 = 2 * np.pi * rho * K
    si2x0, _ = sici(2 * x0)
    rest = np.sin(x0) ** 2 / x0 + np.pi / 2 - si2x0
    return (2 / (3 * np.pi)) * rest / (2 * np.pi * rho)


def _partial_sum(rho, K, r3):
    n = np.arange(1, K * K + 1, dtype=float)
    t = 2 * np.pi * rho * np.sqrt(n)
    return float((r3[1 : K * K + 1] * _j0_sq(t) / (6 * np.pi**2 * n)).sum())


@dataclass
class SpectralLatticeSum:
    rho: float
    K: int
    value: float
    tail_bound: float
    partial_sums: list = field(default_factory=list)   # [(K, raw partial, with tail)]
    warning: str | None = None


def lattice_energy(rho, tol=1e-6, K0=64, K_max=4096, full_result=False):
    """||grad v_per||^2 on the unit torus for radius ratio rho, unit force.

    Shell summation up to K with the integral tail; K doubles until the
    K-ladder increment (the integral-comparison certificate) is below tol.
    Raises AccuracyError when K_max is insufficient.
    """
    if not 0 < rho < 0.5:
        raise ValueError(f"rho must lie in (0, 1/2), got {rho}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    K = K0
    ladder = []
    prev = None
    while True:
        r3 = shell_counts(K * K)
        raw = _partial_sum(rho, K, r3)
        val = raw + _tail_integral(rho, K)
        ladder.append((K, raw, val))
        if prev is not None:
            delta = abs(val - prev)
            if delta < tol / 4:
                bound = max(4 * delta, np.finfo(float).eps * abs(val))
                res = SpectralLatticeSum(rho, K, val, bound, ladder)
                return res if full_result else val
        prev = val
        if 2 * K > K_max:
            raise AccuracyError("lattice sum did not converge by K_max",
                                abs(ladder[-1][2] - ladder[-2][2]) if len(ladder) > 1 else np.inf)
        K *= 2


def lattice_energy_scaled(r, d, tol=1e-6):
    """S(r, d) = S(r/d) / d."""
    return lattice_energy(r / d, tol) / d


def a_per_estimate(rho_list, tol=1e-6):
    """First-order hindering coefficient by extrapolation of a(rho) to rho -> 0.

    a(rho) = (1 - 6 pi rho S(rho)) / rho; a linear model a(rho) = a_per + b rho
    is fitted by least squares.  Returns (a_per, fit_residual, diagnostics).
    """
    rho = np.asarray(sorted(rho_list, reverse=True), float)
    if len(rho) < 3:
        raise ValueError("need at least 3 rho values")
    if np.any(rho <= 1e-4) or np.any(rho >= 0.05 + 1e-12):
        raise ValueError("rho values must lie in (1e-4, 0.05]")
    a = np.array([(1 - 6 * np.pi * p * lattice_energy(p, tol)) / p for p in rho])
    A = np.vstack([np.ones_like(rho), rho]).T
    coef, *_ = np.linalg.lstsq(A, a, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - a) ** 2)))
    warning = None
    diffs = np.diff(a)
    if not (np.all(diffs >= 0) or np.all(diffs <= 0)):
        warning = "a(rho) sequence is not monotone; extrapolation ill-conditioned"
    return float(coef[0]), resid, {"a_values": a.tolist(), "slope": float(coef[1]),
                                   "warning": warning}


def torus_vs_freespace(M, r, tol=1e-6, policy="exact"):
    """Free-space lattice energy vs the torus value; the gap is the finite-size
    boundary effect and must shrink as M grows.

    Requires the cubic-lattice configuration with cubes equal to the lattice
    cells, so the torus cell has d = 1 in lattice units and ratio rho = r.
    """
    from .configs import generate_cubic_lattice
    from .freespace import assemble_energy

    config = generate_cubic_lattice(M, r)
    breakdown = assemble_energy(config, policy=policy)
    freespace_norm = config.N ** (-2 / 3) * breakdown.total
    torus_norm = lattice_energy(r, tol)
    return freespace_norm, torus_norm, abs(freespace_norm - torus_norm)
