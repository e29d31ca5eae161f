"""
Run-directory figure rendering for the `report` subcommand.

Reads only the delimited outputs of a run directory and writes matplotlib
figures next to them (or into --out).  Styles are fixed and no timestamps
are embedded, so identical inputs render identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import read_csv_numeric

_STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "axieuler",
}


def _save(fig, path: Path):
    fig.savefig(path, metadata={"Software": "axieuler"})
    plt.close(fig)
    return path


def render_run(run_dir: Path, out_dir: Path | None = None) -> list[Path]:
    out_dir = out_dir or run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    with plt.rc_context(_STYLE):
        p = run_dir / "diagnostics.csv"
        if p.exists():
            cols, d = read_csv_numeric(p, "diagnostics")
            fig, axes = plt.subplots(2, 1, sharex=True)
            axes[0].plot(d[:, 0], d[:, 1], label="kinetic energy")
            axes[0].set_ylabel("energy")
            axes[0].legend()
            axes[1].plot(d[:, 0], d[:, 2], label="sup |Gamma|")
            axes[1].plot(d[:, 0], d[:, 3], label="L2 Gamma")
            axes[1].plot(d[:, 0], d[:, 4], label="sup |omega|")
            axes[1].set_xlabel("t")
            axes[1].legend()
            written.append(_save(fig, out_dir / "diagnostics.png"))
        p = run_dir / "beta.csv"
        if p.exists():
            cols, d = read_csv_numeric(p, "growth_beta")
            fig, ax = plt.subplots()
            ax.semilogy(d[:, 0], d[:, 1], label="amplitude growth")
            ax.semilogy(d[:, 0], d[:, 2], "--", label="running sup")
            ax.set_xlabel("t")
            ax.legend()
            written.append(_save(fig, out_dir / "beta.png"))
        p = run_dir / "beta_lambda.csv"
        if p.exists():
            cols, d = read_csv_numeric(p, "beta_lambda")
            fig, ax = plt.subplots()
            ax.semilogy(d[:, 0], d[:, 1], label="amplitude growth")
            ax.semilogy(d[:, 0], d[:, 2], label="semigroup growth")
            ax.fill_between(d[:, 0], d[:, 1], d[:, 2],
                            where=d[:, 2] >= d[:, 1], alpha=0.2)
            ax.set_xlabel("t")
            ax.legend()
            written.append(_save(fig, out_dir / "beta_lambda.png"))
        p = run_dir / "criterion.csv"
        if p.exists():
            cols, d = read_csv_numeric(p, "criterion_ledger")
            fig, ax = plt.subplots()
            ax.plot(d[:, 0], d[:, 4], label="running integral")
            inset = ax.inset_axes([0.55, 0.12, 0.4, 0.35])
            inset.plot(d[:, 0], d[:, 1])
            inset.set_title("integrand", fontsize=8)
            ax.set_xlabel("t")
            ax.legend()
            written.append(_save(fig, out_dir / "criterion.png"))
        p = run_dir / "scaling.csv"
        if p.exists():
            cols, d = read_csv_numeric(p, "scaling")
            fig, ax = plt.subplots()
            ax.semilogy(d[:, 0], d[:, 1], label="growth")
            ax.semilogy(d[:, 0], d[:, 2], label="rescaled growth")
            ax.axhline(d[0, 4], color="k", lw=1, ls=":",
                       label="exponent threshold")
            ax.set_xlabel("t")
            ax.legend()
            written.append(_save(fig, out_dir / "scaling.png"))
    return written
