"""Log-log figures for profile CSV files, written as SVG."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import FormatError, read_profile  # noqa: E402

plt.rcParams["svg.hashsalt"] = "restproj"
plt.rcParams["svg.fonttype"] = "none"


def profile_figure(scales, values, slope: float, intercept: float, title: str = ""):
    """Scatter of the ``(scale, value)`` pairs and the fitted power law."""
    scales = np.asarray(scales, dtype=float)
    values = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 4))
    pos = values > 0
    ax.loglog(scales[pos], values[pos], "o", label="profile")
    if not math.isnan(slope):
        xs = np.array([scales.min(), scales.max()])
        ax.loglog(xs, np.exp(intercept) * xs ** slope, "-", label="fit")
        ax.text(0.05, 0.92, f"slope = {slope:.3f}", transform=ax.transAxes)
    ax.set_xlabel("scale")
    ax.set_ylabel("value")
    if title:
        ax.set_title(title)
    return fig


def emit_plots(profile_files: Iterable, out_dir=None) -> List[Path]:
    """One SVG per profile CSV; the slope annotation is read from the JSON
    sidecar when present so figure and sidecar agree."""
    out = []
    for path in map(Path, profile_files):
        if not path.exists():
            raise FileNotFoundError(path)
        profile = read_profile(path)
        if len(profile.scales) == 0:
            raise FormatError(f"{path}: empty profile")
        slope, intercept = profile.slope, profile.intercept
        sidecar = path.with_suffix(".json")
        if sidecar.exists():
            meta = json.loads(sidecar.read_text())
            if meta.get("slope") is not None:
                slope, intercept = meta["slope"], meta["intercept"]
        fig = profile_figure(profile.scales, profile.values, slope, intercept, path.stem)
        target_dir = Path(out_dir or path.parent)
        target_dir.mkdir(parents=True, exist_ok=True)
        target = target_dir / (path.stem + ".svg")
        fig.savefig(target, format="svg", metadata={"Date": None})
        plt.close(fig)
        out.append(target)
    return out
