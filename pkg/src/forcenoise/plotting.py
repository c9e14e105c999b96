"""Optional SVG figures (requires matplotlib; imported lazily)."""

from __future__ import annotations

import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise RuntimeError("SVG output needs matplotlib (pip install 'artifact[plot]')") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_spectrum(spectra, path, title=None):
    """Log-log total / backaction / shot curves of one or more spectra."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for s in spectra:
        f = s.freq_hz
        ax.loglog(f, s.total, lw=1.6, label=f"{s.label} total")
        ax.loglog(f, s.backaction, lw=0.9, ls="--", label=f"{s.label} backaction")
        ax.loglog(f, s.shot, lw=0.9, ls=":", label=f"{s.label} shot")
    ax.set_xlabel(r"frequency $\nu/2\pi$ (Hz)")
    ax.set_ylabel(r"$S_{FF}$ (N$^2$/Hz)")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7)
    ax.grid(True, which="major", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_sweep(table, path):
    """SNR^2 against sensor radius for the four sweep columns."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    labels = {"snr2_voltage": "voltage readout", "snr2_current": "current readout",
              "snr2_position": "position sensing", "snr2_sql": "SQL benchmark"}
    for c, lab in labels.items():
        y = np.asarray(table.snr2[c])
        ax.loglog(table.R, y, marker=".", label=lab)
    ax.set_xlabel("radius R (m)")
    ax.set_ylabel(r"SNR$^2_{\rm opt}$")
    ax.legend(fontsize=8)
    ax.grid(True, which="major", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
