"""
Figure builders for the three documented plot kinds.

Rendering is deterministic: fixed style, Agg backend, pinned SVG hash
salt, and no timestamps in the output metadata, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .schema import read_table

_STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "axieuler-viz",
}

KINDS = ("growth", "criterion", "scaling")


@dataclass(frozen=True)
class FigureSpec:
    """One figure request: inputs, kind, scales, output path."""
    kind: str
    inputs: tuple
    out: str
    yscale: str = "log"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown plot kind {self.kind!r}; "
                             f"choose from {KINDS}")
        if self.yscale not in ("linear", "log"):
            raise ValueError("yscale must be 'linear' or 'log'")


def _finish(fig, out):
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    meta = {"Date": None} if out.suffix == ".svg" else {"Software": None}
    fig.savefig(out, metadata=meta)
    plt.close(fig)
    return out


def plot_growth(beta_csv, lambda_csv, out, yscale="log"):
    """Overlaid growth curves with the region where the semigroup bound
    dominates the amplitude bound shaded."""
    _, beta = read_table(beta_csv, "growth_beta")
    _, lam = read_table(lambda_csv, "growth_lambda")
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.plot(beta[:, 0], beta[:, 1], label="amplitude growth", color="C0")
        ax.plot(beta[:, 0], beta[:, 2], "--", color="C0", alpha=0.7,
                label="amplitude growth (running sup)")
        ax.plot(lam[:, 0], lam[:, 1], label="semigroup growth", color="C1")
        lam_on_beta = np.interp(beta[:, 0], lam[:, 0], lam[:, 1])
        ax.fill_between(beta[:, 0], beta[:, 1], lam_on_beta,
                        where=lam_on_beta >= beta[:, 1],
                        color="C1", alpha=0.15,
                        label="amplitude below semigroup")
        ax.set_yscale(yscale)
        ax.set_xlabel("t")
        ax.set_ylabel("growth factor")
        ax.legend(fontsize=8)
        return _finish(fig, out)


def plot_criterion(ledger_csv, out, yscale="linear"):
    """Running criterion integral with the instantaneous integrand inset."""
    _, d = read_table(ledger_csv, "criterion_ledger")
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.plot(d[:, 0], d[:, 4], color="C0", label="running integral")
        ax.set_yscale(yscale)
        ax.set_xlabel("t")
        ax.set_ylabel("integral")
        ax.legend(loc="upper left", fontsize=8)
        inset = ax.inset_axes([0.58, 0.14, 0.38, 0.34])
        inset.plot(d[:, 0], d[:, 1], color="C2", lw=0.9)
        inset.set_title("integrand", fontsize=8)
        inset.tick_params(labelsize=6)
        return _finish(fig, out)


def plot_scaling(scaling_csv, out, yscale="log"):
    """Rescaled growth against the exponent threshold, verdict annotated."""
    _, d = read_table(scaling_csv, "scaling")
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.plot(d[:, 0], d[:, 1], label="growth", color="C0")
        ax.plot(d[:, 0], d[:, 2], label="rescaled growth", color="C1")
        thr = d[0, 4]
        ax.axhline(thr, color="k", ls=":", lw=1.2,
                   label=f"exponent threshold = {thr:g}")
        ax.set_yscale(yscale)
        ax.set_xlabel("t")
        ax.set_ylabel("growth")
        ax.annotate(f"threshold {thr:g}", xy=(d[0, 0], thr),
                    xytext=(0, 4), textcoords="offset points", fontsize=8)
        ax.legend(fontsize=8)
        return _finish(fig, out)


def render(spec: FigureSpec):
    if spec.kind == "growth":
        if len(spec.inputs) != 2:
            raise ValueError("growth needs two inputs: beta.csv lambda.csv")
        return plot_growth(spec.inputs[0], spec.inputs[1], spec.out,
                           spec.yscale)
    if spec.kind == "criterion":
        if len(spec.inputs) != 1:
            raise ValueError("criterion needs one input: criterion.csv")
        return plot_criterion(spec.inputs[0], spec.out, spec.yscale)
    if len(spec.inputs) != 1:
        raise ValueError("scaling needs one input: scaling.csv")
    return plot_scaling(spec.inputs[0], spec.out, spec.yscale)
