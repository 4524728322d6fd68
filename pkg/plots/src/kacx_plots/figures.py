"""Figure construction from kacx CSV artifacts.

Each renderer is a pure function of its input files: no statistic is
recomputed here, fitted values come from the file headers, and the output is
rasterized at a fixed size so a re-render is byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .reader import expect_schema, read_csv

FIGURE_KINDS = ("histogram-overlay", "gap-survival", "exclusion-curve",
                "tagged-paths", "scatter-before-after", "excess-energy")

_SAVE_KW = dict(dpi=150, metadata={"Software": "kacx-plots"})


@dataclass
class FigureSpec:
    kind: str
    inputs: dict
    out: str
    bin_width: float | None = None
    log_y: bool = False
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"choose from {FIGURE_KINDS}")
        for name, path in self.inputs.items():
            if path is None:
                raise ValueError(f"{self.kind} needs input '{name}'")


def _new_axes():
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.grid(alpha=0.25, linewidth=0.5)
    return fig, ax


def _finish(fig, ax, spec, xlabel, ylabel):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(spec.out, **_SAVE_KW)
    plt.close(fig)
    return spec.out


def render_histogram_overlay(spec: FigureSpec):
    """Step histogram with the spread of per-bin counts as dots whose area is
    proportional to how many samples produced that count, and a reference
    density curve."""
    meta_h, hist = read_csv(spec.inputs["hist"], 4)
    expect_schema(meta_h, "histogram", spec.inputs["hist"])
    fig, ax = _new_axes()

    counts_path = spec.inputs.get("counts")
    if counts_path:
        meta_c, cd = read_csv(counts_path, 4)
        expect_schema(meta_c, "count-distribution", counts_path)
        n_samples = {}
        for left, right, count, mult in cd:
            n_samples[left] = n_samples.get(left, 0) + mult
        n_particles = float(meta_h.get("n", 0)) or None
        width = cd[0, 1] - cd[0, 0]
        for left, right, count, mult in cd:
            total = n_samples[left]
            if n_particles:
                density = count / (n_particles * width)
            else:  # fall back: scale counts to the mean density of the bin
                k = np.searchsorted(hist[:, 0], left)
                mean_count = np.sum(
                    cd[(cd[:, 0] == left), 2] * cd[(cd[:, 0] == left), 3]) / total
                density = count * hist[min(k, len(hist) - 1), 2] \
                    / max(mean_count, 1e-300)
            ax.scatter(0.5 * (left + right), density,
                       s=80.0 * mult / total, color="tab:blue", alpha=0.6,
                       linewidths=0, zorder=2)

    edges = np.concatenate([hist[:, 0], hist[-1:, 1]])
    ax.stairs(hist[:, 2], edges, color="black", linewidth=1.4,
              label="ensemble mean", zorder=3)

    ref_path = spec.inputs.get("reference")
    if ref_path:
        meta_r, ref = read_csv(ref_path, 2)
        expect_schema(meta_r, "density", ref_path)
        ax.plot(ref[:, 0], ref[:, 1], color="tab:green", linewidth=1.4,
                label="limit density", zorder=4)

    ax.set_xlim(edges[0], edges[-1])
    ax.set_ylim(bottom=0)
    return _finish(fig, ax, spec, "energy", "density")


def render_gap_survival(spec: FigureSpec):
    """Empirical survival of the scaled gaps on a log axis; straight line
    means exponential.  Fitted and predicted rates come from the header."""
    meta, data = read_csv(spec.inputs["in"], 2)
    expect_schema(meta, "gap-survival", spec.inputs["in"])
    r, surv = data[:, 0], data[:, 1]
    fig, ax = _new_axes()
    keep = surv > 0
    ax.semilogy(r[keep], surv[keep], drawstyle="steps-post",
                color="tab:blue", linewidth=1.2, label="empirical")
    r_line = np.linspace(0, r[keep].max(), 200)
    fitted = float(meta.get("fitted_rate", "nan"))
    if np.isfinite(fitted):
        ax.semilogy(r_line, np.exp(-fitted * r_line), color="black",
                    linewidth=1.0, linestyle="--",
                    label=f"fitted rate {fitted:.3f}")
    theory = float(meta.get("theory_rate", "nan"))
    if np.isfinite(theory):
        ax.semilogy(r_line, np.exp(-theory * r_line), color="tab:red",
                    linewidth=1.0, linestyle=":",
                    label=f"predicted rate {theory:.3f}")
    ax.set_ylim(bottom=max(surv[keep].min() * 0.5, 1e-6))
    return _finish(fig, ax, spec, "scaled gap r", "survival fraction")


def render_exclusion_curve(spec: FigureSpec):
    meta, data = read_csv(spec.inputs["in"], 3)
    expect_schema(meta, "exclusion-curve", spec.inputs["in"])
    fig, ax = _new_axes()
    ax.plot(data[:, 0], data[:, 1], color="tab:blue", linewidth=1.6,
            label="exclusion factor")
    ax.plot(data[:, 0], data[:, 2], color="tab:orange", linewidth=1.2,
            linestyle="--", label="1 - u")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    return _finish(fig, ax, spec, "occupancy u", "admissibility probability")


def render_tagged_paths(spec: FigureSpec):
    meta, data = read_csv(spec.inputs["in"], 3)
    expect_schema(meta, "tags", spec.inputs["in"])
    fig, ax = _new_axes()
    for pid in np.unique(data[:, 1]):
        sel = data[:, 1] == pid
        ax.plot(data[sel, 0], data[sel, 2], linewidth=0.9,
                label=f"particle {int(pid)}")
    return _finish(fig, ax, spec, "time", "energy")


def render_scatter_before_after(spec: FigureSpec):
    meta, data = read_csv(spec.inputs["in"], 2)
    expect_schema(meta, "scatter", spec.inputs["in"])
    fig, ax = _new_axes()
    ax.scatter(data[:, 0], data[:, 1], s=1.2, alpha=0.25, linewidths=0,
               color="tab:blue", rasterized=True)
    top = float(data.max()) * 1.02
    ax.plot([0, top], [0, top], color="black", linewidth=0.8)
    ref_path = spec.inputs.get("reference")
    if ref_path:
        meta_r, ref = read_csv(ref_path, 2)
        expect_schema(meta_r, "density", ref_path)
        ax.plot(ref[:, 0], ref[:, 1], color="tab:orange", linewidth=1.2,
                label="reference curve")
    ax.set_xlim(0, top)
    ax.set_ylim(0, top)
    return _finish(fig, ax, spec, "energy before", "energy after")


def render_excess_energy(spec: FigureSpec):
    """Particle density together with the rank-wise excess-energy density
    mapped to the energy axis and the per-particle excess energy."""
    meta_g, g = read_csv(spec.inputs["g"], 2)
    expect_schema(meta_g, "density", spec.inputs["g"])
    fig, ax = _new_axes()
    ax.plot(g[:, 0], g[:, 1], color="tab:red", linewidth=1.4,
            label="particle density")
    meta_w, w = read_csv(spec.inputs["w"], 2)
    ax.plot(w[:, 0], w[:, 1], color="tab:blue", linewidth=1.4,
            label="excess-energy density")
    ratio_path = spec.inputs.get("ratio")
    if ratio_path:
        meta_r, ratio = read_csv(ratio_path, 2)
        ax.plot(ratio[:, 0], ratio[:, 1], color="tab:green", linewidth=1.2,
                label="excess energy per particle")
    ax.set_ylim(bottom=0)
    return _finish(fig, ax, spec, "energy", "density")


_RENDERERS = {
    "histogram-overlay": render_histogram_overlay,
    "gap-survival": render_gap_survival,
    "exclusion-curve": render_exclusion_curve,
    "tagged-paths": render_tagged_paths,
    "scatter-before-after": render_scatter_before_after,
    "excess-energy": render_excess_energy,
}


def render(spec: FigureSpec) -> str:
    """Render the figure described by spec; returns the output path."""
    return _RENDERERS[spec.kind](spec)
