"""Figure rendering for CLI reports. Everything draws to files via Agg."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_rocking_figure",
    "save_fieldmap_figure",
    "save_scan_figure",
    "save_trace_figure",
]


def save_rocking_figure(path, thetas_rad, reflectance, title: str = "Rocking curve") -> Path:
    fig, ax = plt.subplots(figsize=(6.0, 4.0), constrained_layout=True)
    ax.plot(np.asarray(thetas_rad) * 1e3, reflectance, lw=1.2)
    ax.set_xlabel("grazing angle (mrad)")
    ax.set_ylabel("reflectance")
    ax.set_ylim(0.0, 1.05)
    ax.set_title(title)
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return Path(path)


def save_fieldmap_figure(path, fmap, title: str = "Field enhancement map") -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.4), constrained_layout=True)
    mesh = ax.pcolormesh(fmap.x_nm, fmap.z_nm, fmap.xi_sq.T, shading="auto", cmap="magma")
    for edge in fmap.metadata.get("layer_edges_nm", ()):
        ax.axhline(edge, color="w", lw=0.6, ls="--", alpha=0.7)
    ax.invert_yaxis()  # depth increases downward
    ax.set_xlabel("x (nm)")
    ax.set_ylabel("depth z (nm)")
    ax.set_title(title)
    fig.colorbar(mesh, ax=ax, label="|xi_E|^2")
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return Path(path)


def save_scan_figure(path, result, title: str = "Spot-size scan") -> Path:
    fig, (ax_chi, ax_xi) = plt.subplots(
        2, 1, figsize=(6.4, 6.8), sharex=True, constrained_layout=True
    )
    isotopes = []
    for row in result.rows:
        if row.isotope not in isotopes:
            isotopes.append(row.isotope)
    for iso in isotopes:
        rows = [r for r in result.rows if r.isotope == iso]
        w0 = [r.w0_nm for r in rows]
        ax_chi.loglog(w0, [r.chi_nec_cavity for r in rows], "o-", ms=3, label=f"{iso} cavity")
        ax_chi.loglog(w0, [r.chi_nec_free for r in rows], ":", lw=1.0, label=f"{iso} free")
        ax_xi.semilogx(w0, [r.xi for r in rows], "o-", ms=3, label=iso)
    ax_chi.set_ylabel("chi_source_nec (sqrt(uJ))")
    ax_chi.legend(fontsize=7)
    ax_xi.set_xlabel("spot size w0 (nm)")
    ax_xi.set_ylabel("enhancement xi")
    ax_xi.axhline(1.0, color="k", lw=0.6, ls=":")
    ax_xi.legend(fontsize=7)
    fig.suptitle(f"{title} ({result.mode})")
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return Path(path)


def save_trace_figure(path, result, title: str = "Optimization trace") -> Path:
    fig, ax = plt.subplots(figsize=(6.0, 4.0), constrained_layout=True)
    if result.trace:
        idx = [i for i, _ in result.trace]
        val = [v for _, v in result.trace]
        # extend the staircase to the final evaluation count
        ax.step(idx + [result.evaluations], val + [val[-1]], where="post")
    ax.set_xlabel("objective evaluations")
    ax.set_ylabel("best enhancement xi")
    ax.set_title(f"{title}: {result.isotope}, w0={result.w0_nm:g} nm")
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return Path(path)
