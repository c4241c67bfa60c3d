"""Figure rendering for the report path.

Each result record that carries a series gets one figure: decay series on
a log ordinate with the fitted line, dimension mass curves on log-log
axes. Figures are written next to the delimited output; they are a
convenience view, the CSV stays the canonical payload.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _fit_line(ax, grid, fit):
    xs = [grid[0], grid[-1]]
    ys = [math.exp(fit["intercept"] + fit["slope"] * x) for x in xs]
    label = f"slope {fit['slope']:.4f}, R^2 {fit['r2']:.3f}"
    ax.plot(xs, ys, "r--", lw=1.2, label=label)


def _decay_axes(ax, grid, values, fit, ylabel):
    positive = [(n, v) for n, v in zip(grid, values) if v > 0]
    if positive:
        ax.semilogy([n for n, _ in positive], [v for _, v in positive], "o-", ms=4)
        if fit is not None:
            _fit_line(ax, grid, fit)
            ax.legend(fontsize=8)
    ax.set_xlabel("n (steps)")
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)


def render_record_figure(record: dict, out_path) -> bool:
    """Render the figure for one result record; returns False when the
    record has nothing plottable."""
    sub = record.get("subcommand", "")
    payload = record.get("payload", {})
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    drew = False
    try:
        if sub in ("converge", "kak-converge", "u-diverge"):
            fit = payload.get("fit", payload)
            _decay_axes(ax, fit["n_grid"], fit["values"], fit, "mean distance")
            drew = True
        elif sub == "independence":
            for name in payload["phi_ids"]:
                series = payload["discrepancies"][name]
                pts = [(n, v) for n, v in zip(payload["grid"], series) if v > 0]
                if pts:
                    ax.semilogy([n for n, _ in pts], [v for _, v in pts], "o-",
                                ms=3, label=name)
            ax.set_xlabel("n (steps)")
            ax.set_ylabel("discrepancy")
            ax.legend(fontsize=8)
            ax.grid(True, which="both", alpha=0.3)
            drew = True
        elif sub == "dimension":
            ax.loglog(payload["eps_grid"], payload["masses"], "o-", ms=4)
            xs = [payload["eps_grid"][0], payload["eps_grid"][-1]]
            c, a = payload["c_hat"], payload["alpha"]
            ax.loglog(xs, [c * x**a for x in xs], "r--", lw=1.2,
                      label=f"alpha {a:.3f}")
            ax.set_xlabel("eps")
            ax.set_ylabel("worst hyperplane mass")
            ax.legend(fontsize=8)
            ax.grid(True, which="both", alpha=0.3)
            drew = True
        elif sub == "tits":
            failure = [1.0 - f for f in payload["certified_fraction"]]
            _decay_axes(ax, payload["grid"], failure, payload["failure_fit"],
                        "failure fraction")
            drew = True
        elif sub in ("lyapunov", "gap"):
            if sub == "lyapunov":
                lam = payload["lambdas"]
                err = payload["stderrs"]
                ax.errorbar(range(1, len(lam) + 1), lam, yerr=[2 * e for e in err],
                            fmt="o", capsize=3)
                ax.set_xlabel("exponent index")
                ax.set_ylabel("nats / step")
            else:
                ax.errorbar([1], [payload["gap"]],
                            yerr=[[payload["gap"] - payload["ci_low"]],
                                  [payload["ci_high"] - payload["gap"]]],
                            fmt="o", capsize=3)
                ax.axhline(0.0, color="k", lw=0.8)
                ax.set_ylabel("top gap (nats / step)")
                ax.set_xticks([])
            ax.grid(True, alpha=0.3)
            drew = True
        if drew:
            ax.set_title(f"{sub} [{record.get('spec_label', '')}]", fontsize=10)
            fig.tight_layout()
            fig.savefig(out_path, dpi=130)
        return drew
    finally:
        plt.close(fig)
