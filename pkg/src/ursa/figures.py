"""Matplotlib report figures rendered next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .annotation import CurvePoint, isotonic_fit
from .roadgraph import RoadGraph
from .taxonomy import ClassTaxonomy, IouReport
from .viewplan import ViewPlan
from .world import CoverageReport, SyntheticWorld


def _save(fig, path: str | Path) -> None:
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def curve_figure(
    curve: Sequence[CurvePoint],
    target: float,
    k_star: int | None,
    path: str | Path,
) -> None:
    """Accuracy versus votes with the isotonic fit and the diminishing-returns point."""
    ks = [p.k for p in curve]
    acc = [p.accuracy for p in curve]
    err = [p.stderr for p in curve]
    fitted = isotonic_fit(acc)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.errorbar(ks, acc, yerr=err, fmt="o-", ms=3, lw=1, capsize=2, label="measured")
    ax.plot(ks, fitted, drawstyle="steps-post", lw=1.5, label="isotonic fit")
    ax.axhline(target, color="gray", ls="--", lw=1, label=f"target {target:g}")
    if k_star is not None:
        ax.axvline(k_star, color="tab:red", ls=":", lw=1.5, label=f"k* = {k_star}")
    ax.set_xlabel("votes per identifier")
    ax.set_ylabel("fraction correct")
    ax.set_xticks(ks)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right", fontsize=9)
    fig.tight_layout()
    _save(fig, path)


def iou_figure(report: IouReport, taxonomy: ClassTaxonomy, path: str | Path) -> None:
    names = [taxonomy.name_of(c) for c in sorted(report.per_class)]
    values = [report.per_class[c] for c in sorted(report.per_class)]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.35 * len(names) + 1.5), 4.0))
    ax.bar(range(len(values)), values, color="tab:blue")
    if report.mean is not None:
        ax.axhline(report.mean, color="tab:red", ls="--", lw=1, label=f"mean {report.mean:.3f}")
        ax.legend(fontsize=9)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=60, ha="right", fontsize=8)
    ax.set_ylabel("IOU")
    ax.set_ylim(0.0, 1.0)
    fig.tight_layout()
    _save(fig, path)


def coverage_figure(
    g: RoadGraph,
    plan: ViewPlan,
    world: SyntheticWorld,
    report: CoverageReport,
    path: str | Path,
) -> None:
    """Road edges, pose positions/directions, and covered vs missed assets."""
    fig, ax = plt.subplots(figsize=(6.4, 6.4))
    for e in g.edges:
        a, b = g.vertex(e.a).pos, g.vertex(e.b).pos
        ax.plot([a.x, b.x], [a.y, b.y], color="0.7", lw=1, zorder=1)
    covered = [a.pos for a in world.assets if a.fmss in report.covered]
    missed = [a.pos for a in world.assets if a.fmss in report.uncovered]
    if covered:
        ax.scatter([p.x for p in covered], [p.y for p in covered], s=8, c="tab:green",
                   label=f"covered ({len(report.covered)})", zorder=2)
    if missed:
        ax.scatter([p.x for p in missed], [p.y for p in missed], s=8, c="tab:red",
                   label=f"missed ({len(report.uncovered)})", zorder=2)
    for p in plan.poses:
        pos = g.vertex(p.at).pos
        ax.annotate(
            "",
            xy=(pos.x + p.look_dir.x * 12, pos.y + p.look_dir.y * 12),
            xytext=(pos.x, pos.y),
            arrowprops={"arrowstyle": "->", "color": "tab:blue", "lw": 1.5},
            zorder=3,
        )
    ax.scatter(
        [g.vertex(p.at).pos.x for p in plan.poses],
        [g.vertex(p.at).pos.y for p in plan.poses],
        s=25, c="tab:blue", marker="s", label=f"poses ({len(plan.poses)})", zorder=3,
    )
    ax.set_aspect("equal")
    ax.set_title(f"coverage {report.fraction:.3f}")
    ax.legend(fontsize=9, loc="best")
    fig.tight_layout()
    _save(fig, path)


def vote_histogram_figure(histogram: dict[int, int], target: int, path: str | Path) -> None:
    ks = sorted(histogram)
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    ax.bar(ks, [histogram[k] for k in ks], color="tab:blue")
    ax.axvline(target, color="tab:red", ls="--", lw=1, label=f"target {target}")
    ax.set_xlabel("votes recorded")
    ax.set_ylabel("ballots")
    ax.legend(fontsize=9)
    fig.tight_layout()
    _save(fig, path)
