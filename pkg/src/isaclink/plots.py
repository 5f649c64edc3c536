"""Figure rendering for the report path: detection probability and BER
curves next to the delimited output, plus oracle-grid views."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SWEEP_LABEL = {
    "ebn0_db": r"$E_b/N_0$ (dB)",
    "snr_db": "SNR (dB)",
    "sir_db": "radar SIR (dB)",
    "zd": r"Doppler zero-padding $Z_D$",
    "time": "time step",
}


def _by_structure(rows):
    out: dict[str, list] = {}
    for r in rows:
        out.setdefault(r.structure, []).append(r)
    for v in out.values():
        v.sort(key=lambda r: r.sweep)
    return out


def _ber_floor(rows) -> float:
    pos = [r.ber for r in rows if r.ber > 0]
    return min(pos) / 3 if pos else 1e-6


def render_sweep(rows, stem: str, sweep: str) -> list[str]:
    """Pd and BER curves per structure; returns the written file paths."""
    groups = _by_structure(rows)
    xlabel = _SWEEP_LABEL.get(sweep, sweep)
    paths = []

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, rs in sorted(groups.items()):
        ax.plot([r.sweep for r in rs], [r.pd for r in rs], marker="o",
                label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("detection probability")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    p = f"{stem}_pd.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(6, 4))
    floor = _ber_floor(rows)
    for name, rs in sorted(groups.items()):
        ber = np.maximum([r.ber for r in rs], floor)
        ax.semilogy([r.sweep for r in rs], ber, marker="s", label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("bit error rate")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    p = f"{stem}_ber.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    paths.append(p)
    return paths


def render_dynamic(rows, steps, stem: str) -> list[str]:
    """BER/Pd against time plus the deterministic scenario parameters."""
    paths = render_sweep(rows, stem, "time")
    fig, axes = plt.subplots(3, 1, figsize=(6, 7), sharex=True)
    n = [s.step for s in steps]
    axes[0].plot(n, [10 * np.log10(s.sir) for s in steps], marker="o")
    axes[0].set_ylabel("radar SIR (dB)")
    axes[1].plot(n, [s.tau_r * 1e6 for s in steps], marker="o")
    axes[1].set_ylabel(r"$\tau_R$ ($\mu$s)")
    axes[2].plot(n, [s.alpha_r_mag for s in steps], marker="o")
    axes[2].set_ylabel(r"$|\alpha_R|$")
    axes[2].set_xlabel("time step")
    for ax in axes:
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    p = f"{stem}_geometry.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    paths.append(p)
    return paths


def render_oracle(interference: np.ndarray, echo: np.ndarray,
                  stem: str) -> list[str]:
    """Delay-profile and 2D views of the dispersion grids."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    im = axes[0].imshow(10 * np.log10(np.maximum(interference, 1e-12)).T,
                        aspect="auto", origin="lower", cmap="viridis")
    axes[0].set_title("interference dispersion (dB)")
    axes[0].set_xlabel("delay bin")
    axes[0].set_ylabel("Doppler bin")
    fig.colorbar(im, ax=axes[0])
    im = axes[1].imshow(10 * np.log10(np.maximum(np.abs(echo), 1e-12)).T,
                        aspect="auto", origin="lower", cmap="viridis")
    axes[1].set_title("echo dispersion (dB)")
    axes[1].set_xlabel("delay bin")
    fig.colorbar(im, ax=axes[1])
    fig.tight_layout()
    p = f"{stem}_oracle.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    return [p]
