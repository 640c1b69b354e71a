"""Static SVG figures drawn from already-computed arrays."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp so repeated runs give identical files
matplotlib.rcParams["svg.hashsalt"] = "petfisher"
_SVG_META = {"Date": None, "Creator": None}

_MINOR_COLORS = {1: "red", 3: "magenta"}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def plot_standard_errors(path, se_full, se_minor=None, empirical_se=None, truth=None, title=None):
    pixels = np.arange(1, len(se_full) + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    if truth is not None:
        ax.plot(pixels, truth, color="black", lw=1, label="tumor")
    ax.plot(pixels, se_full, "o-", color="blue", label="observed SE (full)")
    for k, se in sorted((se_minor or {}).items()):
        ax.plot(pixels, se, "s--", color=_MINOR_COLORS.get(k), label=f"{k}-point inversion")
    if empirical_se is not None:
        ax.plot(pixels, empirical_se, "x:", color="green", label="empirical SE")
    ax.set_xlabel("pixel")
    ax.set_ylabel("per-unit charge")
    ax.grid(True)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_noise_to_signal(path, nts_full, nts_minor=None, title=None):
    pixels = np.arange(1, len(nts_full) + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(pixels, nts_full, "o-", color="blue", label="full inversion")
    for k, v in sorted((nts_minor or {}).items()):
        ax.plot(pixels, v, "s--", color=_MINOR_COLORS.get(k), label=f"{k}-point inversion")
    ax.set_xlabel("pixel")
    ax.set_ylabel("noise-to-signal per observation")
    ax.grid(True)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_system_matrix(path, p, title=None):
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(p, cmap="viridis", vmin=0, vmax=1)
    n_pix, n_det = p.shape
    ax.set_xticks(range(n_det), [str(d) for d in range(1, n_det + 1)])
    ax.set_yticks(range(n_pix), [str(b) for b in range(1, n_pix + 1)])
    ax.set_xlabel("detector pair")
    ax.set_ylabel("pixel")
    fig.colorbar(im, ax=ax)
    if title:
        ax.set_title(title)
    _save(fig, path)
