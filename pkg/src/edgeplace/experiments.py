"""Sweep execution, result files and trend checks over a results directory."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .config import ScenarioConfig, Sweep
from .simulator import METRICS, run, summarize

SUMMARY_COLUMNS = [
    "scenario",
    "strategy",
    "hosts",
    "producers",
    "consumers",
    "seed",
    "mean_e2e_ms",
    "mean_replicas_per_producer",
    "mean_replication_overhead_ms",
    "mean_selection_time_ms",
    "declines",
]

HIST_COLUMNS = ["bin_low_ms", "bin_high_ms", "count"]

_METRIC_COLUMN = {
    "e2e_ms": "mean_e2e_ms",
    "replicas_per_producer": "mean_replicas_per_producer",
    "replication_overhead_ms": "mean_replication_overhead_ms",
    "selection_time_ms": "mean_selection_time_ms",
}


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6f}"


@dataclass
class CellResult:
    row: dict
    histograms: dict = field(default_factory=dict)

    @property
    def key(self) -> str:
        r = self.row
        return f"{r['scenario']}_{r['strategy']}_h{r['hosts']}_p{r['producers']}_c{r['consumers']}_s{r['seed']}"


def run_cell(config: ScenarioConfig) -> CellResult:
    ledger = run(config)
    summary = summarize(ledger, bins=config.histogram_bins)
    row = {
        "scenario": config.scenario,
        "strategy": config.strategy,
        "hosts": config.hosts,
        "producers": config.producers,
        "consumers": config.consumers,
        "seed": config.seed,
        "declines": ledger.declines,
    }
    for metric, column in _METRIC_COLUMN.items():
        row[column] = summary[metric].mean
    hists = {m: list(zip(s.bin_edges[:-1], s.bin_edges[1:], s.bin_counts)) for m, s in summary.items()}
    return CellResult(row, hists)


def run_sweep(sweep: Sweep, workers: int = 1) -> list[CellResult]:
    cells = sweep.cells()
    if workers <= 1 or len(cells) <= 1:
        return [run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_cell, cells))


def summary_csv(results: list[CellResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for res in results:
        r = res.row
        w.writerow([_fmt(r[c]) if isinstance(r[c], float) else r[c] for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def write_results(results: list[CellResult], out: str | Path, sweep: Sweep | None = None) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.csv").write_text(summary_csv(results))
    hist_dir = out / "hist"
    hist_dir.mkdir(exist_ok=True)
    for res in results:
        for metric, rows in res.histograms.items():
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(HIST_COLUMNS)
            for lo, hi, n in rows:
                w.writerow([_fmt(lo), _fmt(hi), n])
            (hist_dir / f"{res.key}__{metric}.csv").write_text(buf.getvalue())
    if sweep is not None:
        (out / "sweep.yaml").write_text(sweep.dump())
    return out / "summary.csv"


def read_summary(path: str | Path) -> list[dict]:
    path = Path(path)
    if path.is_dir():
        path = path / "summary.csv"
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for c in ("hosts", "producers", "consumers", "seed", "declines"):
            r[c] = int(r[c])
        for c in _METRIC_COLUMN.values():
            r[c] = float(r[c])
    return rows


# trend checks

@dataclass
class TrendResult:
    claim: str
    passed: bool
    details: list[str] = field(default_factory=list)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.claim}"


STRATEGIES = ("distance", "latency", "spatial")


def seed_means(rows: list[dict], column: str) -> dict[int, dict[str, float]]:
    """consumer count -> strategy -> mean of ``column`` over seeds.

    Seeds whose value is NaN (no samples in that run) are skipped; a cell
    with no finite value at all stays NaN.
    """
    acc: dict[int, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        acc[r["consumers"]][r["strategy"]].append(r[column])
    out = {}
    for c, by in sorted(acc.items()):
        out[c] = {}
        for s, v in by.items():
            finite = [x for x in v if not math.isnan(x)]
            out[c][s] = math.fsum(finite) / len(finite) if finite else math.nan
    return out


def missing_cells(rows: list[dict], consumers: list[int] | None = None) -> list[tuple[str, int]]:
    have = {(r["strategy"], r["consumers"]) for r in rows}
    counts = sorted(set(consumers or []) | {r["consumers"] for r in rows})
    return [(s, c) for c in counts for s in STRATEGIES if (s, c) not in have]


def trend_e2e(rows: list[dict], margin: float = 0.10) -> TrendResult:
    res = TrendResult(f"end-to-end latency: distance exceeds latency and spatial by >= {margin:.0%}", True)
    for c, m in seed_means(rows, "mean_e2e_ms").items():
        worst = max(m["latency"], m["spatial"])
        ok = m["distance"] >= (1 + margin) * worst
        res.passed &= ok
        res.details.append(
            f"c={c}: distance={m['distance']:.4g} latency={m['latency']:.4g} spatial={m['spatial']:.4g} "
            f"ratio={m['distance'] / worst:.3f} {'ok' if ok else 'FAIL'}"
        )
    return res


def trend_replicas(rows: list[dict], closeness: float = 0.20) -> TrendResult:
    res = TrendResult(
        f"replicas per producer: distance >= latency, spatial; latency ~ spatial within {closeness:.0%}", True
    )
    means = seed_means(rows, "mean_replicas_per_producer")
    largest = max(means) if means else None
    for c, m in means.items():
        d, lat, sp = m["distance"], m["latency"], m["spatial"]
        order_ok = d >= lat and d >= sp
        gap = abs(lat - sp) / min(lat, sp) if min(lat, sp) > 0 else math.inf
        close_ok = gap <= closeness or (c == largest and sp > lat)
        ok = order_ok and close_ok
        res.passed &= ok
        res.details.append(
            f"c={c}: distance={d:.3f} latency={lat:.3f} spatial={sp:.3f} gap={gap:.3f} {'ok' if ok else 'FAIL'}"
        )
    return res


def trend_overhead(rows: list[dict], spread: float = 0.30) -> TrendResult:
    """Points where no strategy replicated are skipped; a point where only some
    strategies replicated fails, as does a sweep with no evaluable point."""
    res = TrendResult(f"replication overhead: all strategies within {spread:.0%} of one another", True)
    evaluated = 0
    for c, m in seed_means(rows, "mean_replication_overhead_ms").items():
        vals = [m[s] for s in STRATEGIES]
        values = " ".join(f"{s}={m[s]:.3f}" for s in STRATEGIES)
        if all(math.isnan(v) for v in vals):
            res.details.append(f"c={c}: {values} skipped (no replication)")
            continue
        evaluated += 1
        if any(math.isnan(v) for v in vals):
            ok = False
            ratio = math.nan
        else:
            ratio = (max(vals) - min(vals)) / min(vals)
            ok = ratio <= spread
        res.passed &= ok
        res.details.append(f"c={c}: {values} spread={ratio:.3f} {'ok' if ok else 'FAIL'}")
    if not evaluated:
        res.passed = False
        res.details.append("no consumer count produced replicas")
    return res


def trend_selection(rows: list[dict]) -> TrendResult:
    res = TrendResult("replica selection time: spatial < latency < distance", True)
    for c, m in seed_means(rows, "mean_selection_time_ms").items():
        ok = m["spatial"] < m["latency"] < m["distance"]
        res.passed &= ok
        res.details.append(
            f"c={c}: " + " ".join(f"{s}={m[s]:.5f}" for s in STRATEGIES) + f" {'ok' if ok else 'FAIL'}"
        )
    return res


SCENARIO_TRENDS = {
    "e2e_latency": (trend_e2e, trend_replicas, trend_overhead),
    "replica_count": (trend_e2e, trend_replicas, trend_overhead),
    "replication_overhead": (trend_e2e, trend_replicas, trend_overhead),
    "selection_time": (trend_selection,),
}


class MissingRuns(RuntimeError):
    def __init__(self, scenario: str, cells: list[tuple[str, int]]):
        listing = ", ".join(f"({s}, {c})" for s, c in cells)
        super().__init__(f"scenario {scenario}: missing runs {listing}")
        self.cells = cells


def compare(results_dir: str | Path) -> list[tuple[str, TrendResult]]:
    """Evaluate the trend claims for every scenario found in a results directory."""
    results_dir = Path(results_dir)
    rows = read_summary(results_dir)
    expected = None
    sweep_file = results_dir / "sweep.yaml"
    if sweep_file.exists():
        expected = Sweep.load(sweep_file).consumers
    by_scenario: dict[str, list[dict]] = defaultdict(list)
    for r in rows:
        by_scenario[r["scenario"]].append(r)
    out = []
    for name, srows in sorted(by_scenario.items()):
        gaps = missing_cells(srows, expected)
        if gaps:
            raise MissingRuns(name, gaps)
        checks = SCENARIO_TRENDS.get(name, (trend_e2e, trend_replicas, trend_overhead, trend_selection))
        for check in checks:
            out.append((name, check(srows)))
    return out


__all__ = [
    "SUMMARY_COLUMNS",
    "HIST_COLUMNS",
    "METRICS",
    "CellResult",
    "run_cell",
    "run_sweep",
    "summary_csv",
    "write_results",
    "read_summary",
    "TrendResult",
    "trend_e2e",
    "trend_replicas",
    "trend_overhead",
    "trend_selection",
    "compare",
    "MissingRuns",
]
