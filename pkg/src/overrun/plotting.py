"""Figure rendering for bench curves and the corpus outcome matrix.

Everything is drawn straight to a file; nothing opens a window.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.colors import ListedColormap
from matplotlib.patches import Patch

_OUTCOME_ORDER = (
    "COMPLETED_CLEAN",
    "MITIGATED_CONTINUED",
    "ABORTED_DETECTED",
    "SILENT_CORRUPTION",
)
_OUTCOME_COLORS = {
    "COMPLETED_CLEAN": "#74c476",
    "MITIGATED_CONTINUED": "#6baed6",
    "ABORTED_DETECTED": "#fd8d3c",
    "SILENT_CORRUPTION": "#de2d26",
}
_OUTCOME_SHORT = {
    "COMPLETED_CLEAN": "CC",
    "MITIGATED_CONTINUED": "MC",
    "ABORTED_DETECTED": "AD",
    "SILENT_CORRUPTION": "SC",
}


def plot_bench(results, path) -> None:
    """Introspection cost per call versus string length, one line per backend."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    by_backend: dict[str, list] = {}
    for r in results:
        by_backend.setdefault(r.backend, []).append(r)
    for backend, rows in by_backend.items():
        rows = sorted(rows, key=lambda r: r.string_length)
        xs = [r.string_length for r in rows]
        if backend == "shadow":
            ys = [r.shadow_reads for r in rows]
            label = "shadow: cells read per query"
        else:
            ys = [r.metadata_lookups for r in rows]
            label = f"{backend}: table lookups per query"
        ax.loglog(xs, ys, marker="o", label=label)
    ax.set_xlabel("string length (bytes)")
    ax.set_ylabel("introspection ops per call")
    ax.set_title("size_right cost: constant table lookup vs linear shadow walk")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_corpus_matrix(entries, path) -> None:
    """Outcome grid: scenarios down the side, (backend, policy) across."""
    scenarios = []
    columns = []
    for e in entries:
        if e.scenario not in scenarios:
            scenarios.append(e.scenario)
        col = (e.backend, e.policy)
        if col not in columns:
            columns.append(col)
    grid = [[0] * len(columns) for _ in scenarios]
    for e in entries:
        r = scenarios.index(e.scenario)
        c = columns.index((e.backend, e.policy))
        grid[r][c] = _OUTCOME_ORDER.index(e.report.outcome.value)

    fig, ax = plt.subplots(figsize=(1.1 * len(columns) + 3, 0.6 * len(scenarios) + 2.5))
    cmap = ListedColormap([_OUTCOME_COLORS[o] for o in _OUTCOME_ORDER])
    ax.imshow(grid, cmap=cmap, vmin=0, vmax=len(_OUTCOME_ORDER) - 1, aspect="auto")
    ax.set_xticks(range(len(columns)))
    ax.set_xticklabels([f"{b}\n{p}" for b, p in columns], fontsize=8)
    ax.set_yticks(range(len(scenarios)))
    ax.set_yticklabels(scenarios, fontsize=9)
    for r in range(len(scenarios)):
        for c in range(len(columns)):
            ax.text(
                c,
                r,
                _OUTCOME_SHORT[_OUTCOME_ORDER[grid[r][c]]],
                ha="center",
                va="center",
                fontsize=8,
            )
    ax.set_title("corpus outcomes by backend and policy")
    handles = [
        Patch(facecolor=_OUTCOME_COLORS[o], label=f"{_OUTCOME_SHORT[o]} = {o}")
        for o in _OUTCOME_ORDER
    ]
    ax.legend(handles=handles, loc="upper left", bbox_to_anchor=(1.02, 1.0), fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
