"""Benchmark report assembly: delimited output, a markdown table and the
companion matplotlib figures."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

CSV_SCHEMA = "slaprp-bench-csv v1"

BENCH_FIELDS = [
    "instance",
    "sha",
    "policy",
    "branching",
    "symmetry",
    "opt",
    "lb",
    "ub",
    "gap",
    "time_s",
    "nodes",
    "cuts",
]

BOUND_FIELDS = ["instance", "sha", "lp_mtz", "lp_mcf", "dw", "dw_sl1", "dw_sl", "optimum"]


@dataclass
class BenchReport:
    rows: list[dict] = field(default_factory=list)
    bound_rows: list[dict] = field(default_factory=list)

    def add_stats(self, sha: str, stats) -> None:
        self.rows.append(
            {
                "instance": stats.instance,
                "sha": sha[:12],
                "policy": stats.policy,
                "branching": stats.branching,
                "symmetry": int(stats.symmetry),
                "opt": int(stats.optimal),
                "lb": stats.lower_bound,
                "ub": stats.objective,
                "gap": round(stats.gap, 4),
                "time_s": round(stats.time_sec, 3),
                "nodes": stats.nodes,
                "cuts": stats.cuts,
            }
        )

    def add_error(self, instance: str, sha: str, policy: str, message: str) -> None:
        self.rows.append(
            {
                "instance": instance,
                "sha": sha[:12],
                "policy": policy,
                "branching": "",
                "symmetry": "",
                "opt": 0,
                "lb": "",
                "ub": "",
                "gap": "",
                "time_s": "",
                "nodes": "",
                "cuts": f"error: {message}",
            }
        )

    def aggregates(self) -> list[dict]:
        groups: dict[str, list[dict]] = {}
        for row in self.rows:
            if isinstance(row.get("time_s"), (int, float)):
                groups.setdefault(row["policy"], []).append(row)
        out = []
        for policy in sorted(groups):
            rows = groups[policy]
            n = len(rows)
            out.append(
                {
                    "instance": f"mean[{policy}]",
                    "sha": "",
                    "policy": policy,
                    "branching": "",
                    "symmetry": "",
                    "opt": sum(r["opt"] for r in rows),
                    "lb": "",
                    "ub": "",
                    "gap": round(sum(r["gap"] for r in rows) / n, 4),
                    "time_s": round(sum(r["time_s"] for r in rows) / n, 3),
                    "nodes": round(sum(r["nodes"] for r in rows) / n, 1),
                    "cuts": round(sum(r["cuts"] for r in rows) / n, 1),
                }
            )
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# {CSV_SCHEMA}\n")
            w = csv.DictWriter(fh, BENCH_FIELDS)
            w.writeheader()
            for row in self.rows + self.aggregates():
                w.writerow(row)

    def write_bounds_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# {CSV_SCHEMA} bounds\n")
            w = csv.DictWriter(fh, BOUND_FIELDS)
            w.writeheader()
            for row in self.bound_rows:
                w.writerow(row)

    def write_markdown(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("| " + " | ".join(BENCH_FIELDS) + " |\n")
            fh.write("|" + "---|" * len(BENCH_FIELDS) + "\n")
            for row in self.rows + self.aggregates():
                fh.write("| " + " | ".join(str(row[k]) for k in BENCH_FIELDS) + " |\n")
            if self.bound_rows:
                fh.write("\n| " + " | ".join(BOUND_FIELDS) + " |\n")
                fh.write("|" + "---|" * len(BOUND_FIELDS) + "\n")
                for row in self.bound_rows:
                    fh.write(
                        "| " + " | ".join(str(row[k]) for k in BOUND_FIELDS) + " |\n"
                    )


def read_bench_csv(path) -> list[dict]:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError("missing schema header")
        return list(csv.DictReader(fh))


def render_figures(report: BenchReport, out_dir) -> list[Path]:
    """Figures next to the delimited output: per-policy gap and time bars,
    nodes-vs-time scatter, and the dual-bound chain when present."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    written = []
    rows = [r for r in report.rows if isinstance(r.get("time_s"), (int, float))]
    if rows:
        policies = sorted({r["policy"] for r in rows})
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
        gaps = [[r["gap"] for r in rows if r["policy"] == p] for p in policies]
        times = [[r["time_s"] for r in rows if r["policy"] == p] for p in policies]
        ax1.bar(policies, [sum(g) / len(g) for g in gaps], color="#4878d0")
        ax1.set_ylabel("mean gap (%)")
        ax1.set_title("Final integrality gap by policy")
        ax2.bar(policies, [sum(t) / len(t) for t in times], color="#ee854a")
        ax2.set_ylabel("mean time (s)")
        ax2.set_title("Solve time by policy")
        for ax in (ax1, ax2):
            ax.tick_params(axis="x", rotation=30)
        fig.tight_layout()
        path = out_dir / "fig_policy_summary.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

        fig, ax = plt.subplots(figsize=(5.5, 4))
        for p in policies:
            xs = [r["nodes"] for r in rows if r["policy"] == p]
            ys = [r["time_s"] for r in rows if r["policy"] == p]
            ax.scatter(xs, ys, label=p, alpha=0.75)
        ax.set_xlabel("branch-and-bound nodes")
        ax.set_ylabel("time (s)")
        ax.set_title("Tree size vs solve time")
        if len(policies) > 1:
            ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / "fig_nodes_time.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    if report.bound_rows:
        fig, ax = plt.subplots(figsize=(7, 4))
        labels = ["lp_mtz", "lp_mcf", "dw", "dw_sl1", "dw_sl", "optimum"]
        for row in report.bound_rows:
            ys = [row[k] for k in labels]
            ax.plot(range(len(labels)), ys, marker="o", alpha=0.7, label=row["instance"])
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(["LP", "LP-MCF", "DW", "DW+SL1", "DW+SL", "OPT"])
        ax.set_ylabel("dual bound")
        ax.set_title("Bound improvement across formulations")
        if len(report.bound_rows) <= 8:
            ax.legend(fontsize=7)
        fig.tight_layout()
        path = out_dir / "fig_bound_chain.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
