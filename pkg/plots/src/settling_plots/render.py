"""Deterministic figures from settling records.csv files.

Four figure kinds, all consuming only the public CSV schema:
  scaling  -- Vsed vs N, log-log, slope guides at 0 and 2/3
  hasimoto -- first-order coefficient a(r) = (1 - 6 pi r E_torus)/r vs r with
              the linear extrapolation to r = 0
  norms    -- dual-norm decay vs N, log-log, slope guide at -1/3
  gap      -- |N^{-2/3} E_freespace - E_torus| vs M = N^{1/3}, log-log

Rendering is read-only and pixel-reproducible: fixed style, fixed DPI, no
clock access (SVG hashsalt pinned, date metadata stripped).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

matplotlib.rcParams.update({
    "figure.figsize": (6.0, 4.2),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 10,
    "svg.hashsalt": "settling-plots",
    "axes.grid": True,
    "grid.alpha": 0.3,
})

KINDS = ("scaling", "hasimoto", "norms", "gap")

REQUIRED_COLUMNS = {
    "scaling": ("N", "Vsed_est", "VSt"),
    "hasimoto": ("r", "E_torus"),
    "norms": ("N", "norm_rho_sigma", "norm_sigma_n"),
    "gap": ("N", "E_freespace", "E_torus"),
}


class SchemaError(ValueError):
    """The CSV is missing a column the figure kind needs."""


@dataclass
class FigureSpec:
    csv_path: str
    kind: str
    out_path: str
    logx: bool = True
    logy: bool = True
    title: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}")


def read_rows(csv_path, columns):
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in columns:
            if col not in header:
                raise SchemaError(f"records CSV is missing column {col!r}")
        rows = [row for row in reader if row.get("status", "ok") == "ok"]
    return rows


def _floats(rows, col):
    out = []
    for row in rows:
        try:
            out.append(float(row[col]))
        except (ValueError, TypeError):
            out.append(math.nan)
    return np.asarray(out)


def _finite_positive(*arrays):
    mask = np.ones(len(arrays[0]), bool)
    for a in arrays:
        mask &= np.isfinite(a) & (a > 0)
    return mask


def _guide(ax, x, y_anchor, slope, label):
    x = np.asarray(x, float)
    ref = y_anchor * (x / x[0]) ** slope
    ax.plot(x, ref, "--", color="gray", linewidth=1, label=label)


def _no_data(ax):
    ax.text(0.5, 0.5, "no data", ha="center", va="center",
            transform=ax.transAxes, fontsize=14, color="gray")


def render(spec):
    """Render one figure; returns (out_path, plotted_series dict)."""
    rows = read_rows(spec.csv_path, REQUIRED_COLUMNS[spec.kind])
    fig, ax = plt.subplots()
    series = {}
    if spec.kind == "scaling":
        N = _floats(rows, "N")
        v = _floats(rows, "Vsed_est")
        vst = _floats(rows, "VSt")
        mask = _finite_positive(N, v)
        if mask.any():
            order = np.argsort(N[mask])
            Ns, vs = N[mask][order], v[mask][order]
            ax.plot(Ns, vs, "o-", label="mean settling speed")
            if np.isfinite(vst[mask]).any():
                ax.axhline(vst[mask][0], color="k", linewidth=1,
                           label="single sphere")
            _guide(ax, Ns, vs[0], 0.0, "slope 0 (well-prepared)")
            _guide(ax, Ns, vs[0], 2 / 3, "slope 2/3 (ill-prepared)")
            series = {"N": Ns, "value": vs}
        else:
            _no_data(ax)
        ax.set_xlabel("N")
        ax.set_ylabel("Vsed")
    elif spec.kind == "hasimoto":
        r = _floats(rows, "r")
        S = _floats(rows, "E_torus")
        mask = _finite_positive(r, S)
        if mask.any():
            order = np.argsort(r[mask])
            rs, Ss = r[mask][order], S[mask][order]
            a = (1 - 6 * np.pi * rs * Ss) / rs
            ax.plot(rs, a, "o", label="a(r)")
            if len(rs) >= 2:
                coef = np.polyfit(rs, a, 1)
                xs = np.linspace(0, rs[-1], 50)
                ax.plot(xs, np.polyval(coef, xs), "-",
                        label=f"fit: a(0) = {coef[1]:.4f}")
            series = {"r": rs, "a": a}
        else:
            _no_data(ax)
        ax.set_xlabel("r")
        ax.set_ylabel("a(r)")
        ax.set_xscale("linear")
        ax.set_yscale("linear")
    elif spec.kind == "norms":
        N = _floats(rows, "N")
        for col, style in (("norm_rho_sigma", "o-"), ("norm_sigma_n", "s-")):
            vals = _floats(rows, col)
            mask = _finite_positive(N, vals)
            if mask.any():
                order = np.argsort(N[mask])
                Ns, vs = N[mask][order], vals[mask][order]
                ax.plot(Ns, vs, style, label=col)
                if col not in series:
                    _guide(ax, Ns, vs[0], -1 / 3, "slope -1/3")
                series[col] = (Ns, vs)
        if not series:
            _no_data(ax)
        ax.set_xlabel("N")
        ax.set_ylabel("dual Sobolev norm")
    elif spec.kind == "gap":
        N = _floats(rows, "N")
        ef = _floats(rows, "E_freespace")
        et = _floats(rows, "E_torus")
        gap = np.abs(N ** (-2 / 3) * ef - et)
        mask = _finite_positive(N, gap)
        if mask.any():
            M = N[mask] ** (1 / 3)
            order = np.argsort(M)
            Ms, gs = M[order], gap[mask][order]
            ax.plot(Ms, gs, "o-", label="|freespace - torus|")
            _guide(ax, Ms, gs[0], -1.0, "slope -1")
            series = {"M": Ms, "gap": gs}
        else:
            _no_data(ax)
        ax.set_xlabel("M")
        ax.set_ylabel("energy gap")
    if spec.kind != "hasimoto":
        if spec.logx:
            ax.set_xscale("log")
        if spec.logy:
            ax.set_yscale("log")
    ax.set_title(spec.title or spec.kind)
    if series:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    metadata = {"Date": None} if spec.out_path.endswith(".svg") else {}
    fig.savefig(spec.out_path, metadata=metadata)
    plt.close(fig)
    return spec.out_path, series
