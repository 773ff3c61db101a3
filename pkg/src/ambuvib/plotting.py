"""Report figures written next to the text/CSV/JSON outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

AREA_COLORS = {"A1": "#2b8cbe", "A2": "#fdae61", "A3": "#d7191c"}

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _figure(width=4.5, height=None):
    height = height or width * 0.75
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def confusion_heatmap(cm, path, title="Tagged vs assigned mobility area"):
    fig, ax = _figure(4.0, 3.6)
    pct = cm.row_percent()
    ax.imshow(pct, cmap="Blues", vmin=0, vmax=100)
    names = ["A1", "A2", "A3"]
    ax.set_xticks(range(3), names)
    ax.set_yticks(range(3), names)
    ax.set_xlabel("Assigned")
    ax.set_ylabel("Tagged")
    for i in range(3):
        for j in range(3):
            color = "white" if pct[i, j] > 60 else "black"
            ax.text(j, i, f"{cm.counts[i, j]}\n{pct[i, j]:.1f}%", ha="center", va="center", color=color, fontsize=8)
    ax.set_title(f"{title}\naccuracy {100 * cm.accuracy:.2f}%")
    return _save(fig, path)


def sigma_curve(trace: dict, chosen: float, path):
    fig, ax = _figure()
    s = np.array(sorted(trace))
    acc = np.array([trace[k] for k in s])
    ax.semilogx(s, 100 * acc, ".-", color="0.3")
    ax.axvline(chosen, color=AREA_COLORS["A3"], lw=1, ls="--", label=f"sigma = {chosen:.6g}")
    ax.set_xlabel("sphere of influence (normalized units)")
    ax.set_ylabel("leave-one-out accuracy (%)")
    ax.legend(frameon=False)
    return _save(fig, path)


def route_bars(cmp, path):
    """Stacked seconds per area for each candidate, with the index marked."""
    fig, ax = _figure(5.0, 3.2)
    ids = [rid for rid, _ in cmp.ranked]
    left = np.zeros(len(ids))
    for k, name in enumerate(("A1", "A2", "A3")):
        vals = np.array([m.durations.as_tuple()[k] for _, m in cmp.ranked], dtype=float)
        ax.barh(ids, vals, left=left, color=AREA_COLORS[name], label=name)
        left += vals
    for y, (rid, m) in enumerate(cmp.ranked):
        ax.plot(m.index, y, "k|", ms=14)
        mark = "  (recommended)" if rid == cmp.recommended else ""
        ax.annotate(f"index {m.index:g}{mark}", (m.index, y), xytext=(4, 6), textcoords="offset points", fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("seconds")
    ax.legend(frameon=False, ncol=3, loc="lower center", bbox_to_anchor=(0.5, 1.0))
    return _save(fig, path)


def route_map(trip, path, title=None):
    fig, ax = _figure(4.5, 4.5)
    lon = np.array([s.lon for s in trip.log.samples])
    lat = np.array([s.lat for s in trip.log.samples])
    names = np.array([a.name for a in trip.labels])
    for name, color in AREA_COLORS.items():
        sel = names == name
        if sel.any():
            ax.scatter(lon[sel], lat[sel], s=6, color=color, label=name)
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    ax.set_aspect(1.0 / np.cos(np.radians(lat.mean())) if len(lat) else 1.0)
    ax.legend(frameon=False, markerscale=2)
    if title:
        ax.set_title(title)
    return _save(fig, path)
