"""Static SVG rendering of figure data (optional; needs matplotlib).

Output is deterministic: the SVG id salt is fixed and the date metadata is
dropped, so reruns give identical files.
"""


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise RuntimeError("SVG output needs matplotlib (pip install 'artifact[plot]')") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "singular-spade"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _save(fig, plt, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_fig1(panels, config, path):
    plt = _pyplot()
    fig, axes = plt.subplots(1, 4, figsize=(16, 3.6))
    blind = 2.0 * config["theta"]
    for ax, label, n in zip(axes[:3], "abc", config["n_values"]):
        for scheme, style in (("DI", "-"), ("bSPADE", "--")):
            pts = [p for p in panels[label] if p.scheme == scheme]
            ax.plot([p.s for p in pts], [p.power for p in pts], style, label=scheme)
        ax.axvline(blind, color="grey", linestyle=":", linewidth=1)
        ax.axhline(config["alpha"], color="grey", linewidth=0.5)
        ax.set_title(f"({label}) n = {n}")
        ax.set_xlabel("s")
    axes[0].set_ylabel("power")
    axes[0].legend()
    ax = axes[3]
    for s in config["panel_d_s"]:
        for scheme, style in (("DI", "-"), ("bSPADE", "--")):
            pts = [p for p in panels["d"] if p.scheme == scheme and p.s == s]
            ax.plot([p.n for p in pts], [p.power for p in pts], style, marker="o", ms=3, label=f"{scheme} s={s:g}")
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_title("(d) power versus n")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, plt, path)


def plot_fig2(summaries, path):
    plt = _pyplot()
    fig, axes = plt.subplots(1, len(summaries), figsize=(5 * len(summaries), 3.6), squeeze=False)
    for ax, ((eps_max, s_max), rows) in zip(axes[0], summaries.items()):
        n = [r["n"] for r in rows]
        for key, color in (("exact", "C0"), ("local", "C1")):
            ax.fill_between(n, [r[key][0] for r in rows], [r[key][2] for r in rows], color=color, alpha=0.25)
            ax.plot(n, [r[key][1] for r in rows], color=color, label=key)
        ax.set_xscale("log", base=2)
        ax.set_xlabel("n")
        ax.set_title(f"eps_max={eps_max:g}, s_max={s_max:g}")
    axes[0][0].set_ylabel("centred free energy (nats)")
    axes[0][0].legend()
    fig.tight_layout()
    return _save(fig, plt, path)
