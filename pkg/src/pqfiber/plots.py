"""Bifurcation-diagram figures rendered to deterministic SVG strings.

Two panels mirror the qualitative diagrams of the two exponent orderings:
energy versus the spectral parameter and the q-gradient norm versus the
spectral parameter, each with a dashed vertical guide at the principal
eigenvalue. Rendering is pinned for byte-stable output: fixed hash salt,
no date metadata, Agg backend.
"""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "pqfiber"


def _render(lams, values, lambda1, ylabel: str, symlog: bool) -> str:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    try:
        line = ax.plot(lams, values, marker="o", markersize=3.5, linewidth=1.0, color="#1f4e79")[0]
        line.set_gid("data-points")
        guide = ax.axvline(lambda1, linestyle="--", linewidth=1.0, color="#b03030")
        guide.set_gid("lambda1-guide")
        if lams:
            ax.set_xscale("log")
            if symlog:
                nonzero = [abs(v) for v in values if v != 0.0]
                ax.set_yscale("symlog", linthresh=max(1e-12, 0.5 * min(nonzero)) if nonzero else 1e-12)
            elif all(v > 0.0 for v in values):
                ax.set_yscale("log")
        ax.set_xlabel("spectral parameter")
        ax.set_ylabel(ylabel)
        ax.grid(True, which="both", alpha=0.25, linewidth=0.4)
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        return buf.getvalue().decode("utf-8")
    finally:
        plt.close(fig)


def render_sweep_figures(records, lambda1: float) -> tuple[str, str]:
    """(energy figure, q-norm figure) as SVG documents for sorted records."""
    lams = [r.lam for r in records]
    energy = _render(lams, [r.j_energy for r in records], lambda1, "energy at the solution", True)
    qnorm = _render(lams, [r.q_norm for r in records], lambda1, "q-gradient norm of the solution", False)
    return energy, qnorm
