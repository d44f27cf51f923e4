"""SVG figures rendered from sweep CSV files (never from in-memory results)."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed element ids so identical CSVs give identical SVG bytes
plt.rcParams["svg.hashsalt"] = "matryoshka"

STYLE = {"matryoshka": dict(color="C3", marker="o"), "pdm-qpsk": dict(color="C0", marker="s")}
PLOTTED = {
    "ber": (["ber", "ber_theory"], "SNR [dB]", "BER", "log"),
    "mi": (["mi", "gmi"], "distance [km]", "bits / 12D symbol", "linear"),
    "power": (["snr_eff_db"], "launch power per channel [dBm]", "effective SNR [dB]", "linear"),
    "dsp": (["snr_eff_pre_db", "snr_eff_post_db", "snr_eff_awgn_db"], "SNR [dB]", "effective SNR [dB]", "linear"),
}


def read_rows(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def plot_csv(csv_path, svg_path=None) -> Path:
    rows = read_rows(csv_path)
    kind = rows[0]["sweep"]
    metrics_, xlabel, ylabel, yscale = PLOTTED[kind]
    fig, ax = plt.subplots(figsize=(6, 4.2))
    groups: dict[tuple, list] = {}
    for r in rows:
        if r["metric"] not in metrics_:
            continue
        extra = r["launch_power_dbm"] if kind == "mi" else r["distance_km"] if kind == "power" else ""
        groups.setdefault((r["scheme"], r["metric"], extra), []).append(r)
    for (scheme, metric, extra), rs in sorted(groups.items()):
        rs.sort(key=lambda r: float(r["x"]))
        x = [float(r["x"]) for r in rs]
        y = [float(r["value"]) for r in rs]
        if yscale == "log":
            x, y = zip(*[(a, b) for a, b in zip(x, y) if b > 0]) if any(b > 0 for b in y) else ([], [])
        style = dict(STYLE.get(scheme, {}))
        ls = "--" if metric in ("gmi", "ber_theory", "snr_eff_pre_db") else "-"
        if metric == "ber_theory":
            style["marker"] = None
        label = f"{scheme} {metric}" + (f" @ {extra}" if extra else "")
        ax.plot(x, y, ls=ls, label=label, **style)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_yscale(yscale)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    svg_path = Path(svg_path or Path(csv_path).with_suffix(".svg"))
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return svg_path
