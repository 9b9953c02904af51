"""Optional SVG rendering of emitted CSVs. Needs matplotlib."""

import os

from .fileio import read_csv


def render_directory(out_dir, csv_names):
    """Render each CSV trace next to it as ``<name>.svg``; returns the names."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "uioinv"
    written = []
    for name in csv_names:
        if name == "bound_curve.csv":
            continue
        tr = read_csv(os.path.join(out_dir, name))
        if len(tr) == 0:
            continue
        fig, ax = plt.subplots(figsize=(6, 3))
        for i in range(tr.dim):
            ax.plot(tr.indices, tr.samples[:, i], lw=0.8, label=f"component {i}")
        ax.set_xlabel("k")
        ax.set_title(name[:-4])
        if tr.dim > 1:
            ax.legend(fontsize=7)
        fig.tight_layout()
        svg = name[:-4] + ".svg"
        fig.savefig(os.path.join(out_dir, svg), format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(svg)
    return written
