"""Side-by-side comparison of the three diagnostic models on one case.

Rows are ordered by the noisy-OR ranking and carry the multimembership and
simple-Bayes posteriors of the same disease, so a plot of the report gives
three bars per rank position with the gold-standard diseases flagged.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

from .errors import InvalidConfig
from .exact import brute_force_posteriors, quickscore_posteriors
from .multimembership import mb_posteriors
from .network import CaseEvidence, NetworkSpec, validate_case
from .report import PosteriorReport
from .sampling import SamplerConfig, likelihood_weighting_posteriors
from .simple_bayes import sb_posteriors

MODEL_KEYS = ("noisy_or", "mb", "sb")
CSV_COLUMNS = ["rank", "disease_id", "p_noisy_or", "p_mb", "p_sb", "is_gold"]

_METHOD_ALIASES = {
    "brute": "brute",
    "brute-force": "brute",
    "exact": "brute",
    "quickscore": "quickscore",
    "lw": "lw",
    "likelihood-weighting": "lw",
    "auto": "auto",
}


@dataclass(frozen=True)
class RankRow:
    rank: int
    disease_id: str
    p_noisy_or: float
    p_mb: float
    p_sb: float
    is_gold: bool


@dataclass
class ComparisonReport:
    case_id: str
    rows: list[RankRow]
    gold_ranks: dict[str, dict[str, int]]
    rankings: dict[str, list[str]]
    counts: dict[str, int]
    threshold: float = 0.5
    top_k: int = 30
    method: str = "brute"
    sampler: dict = field(default_factory=dict)
    runtime: dict[str, float] = field(default_factory=dict)


def rank_diseases(report: PosteriorReport) -> list[tuple[str, float]]:
    """Descending by posterior; ties keep network order."""
    items = list(report.posteriors.items())
    order = sorted(range(len(items)), key=lambda i: (-items[i][1], i))
    return [items[i] for i in order]


def gold_ranks(ranking: list[tuple[str, float]], gold) -> dict[str, int]:
    position = {d: r for r, (d, _) in enumerate(ranking, start=1)}
    return {g: position[g] for g in gold}


def count_above(values, threshold: float) -> int:
    return sum(1 for v in values if v > threshold)


def resolve_method(method: str, net: NetworkSpec, case: CaseEvidence) -> str:
    try:
        method = _METHOD_ALIASES[method]
    except KeyError:
        raise InvalidConfig(f"unknown method {method!r}") from None
    if method == "auto":
        if net.n_diseases <= 20:
            return "brute"
        return "quickscore" if len(case.positive) <= 20 else "lw"
    return method


def noisy_or_posteriors(net, case, method, cfg=None) -> PosteriorReport:
    method = resolve_method(method, net, case)
    if method == "brute":
        return brute_force_posteriors(net, case)
    if method == "quickscore":
        workers = cfg.workers if cfg is not None else 1
        return quickscore_posteriors(net, case, workers=workers)
    report, _ = likelihood_weighting_posteriors(net, case, cfg or SamplerConfig())
    return report


def compare_models(
    net: NetworkSpec,
    case: CaseEvidence,
    method: str = "auto",
    cfg: SamplerConfig | None = None,
    top_k: int = 30,
    threshold: float = 0.5,
) -> ComparisonReport:
    """Run all three models on identical inputs and align them by noisy-OR rank."""
    validate_case(net, case)
    if top_k < 1:
        raise InvalidConfig("top_k must be at least 1")
    resolved = resolve_method(method, net, case)
    runtime = {}
    start = time.perf_counter()
    no = noisy_or_posteriors(net, case, resolved, cfg)
    runtime["noisy_or"] = time.perf_counter() - start
    start = time.perf_counter()
    mb = mb_posteriors(net, case)
    runtime["mb"] = time.perf_counter() - start
    start = time.perf_counter()
    sb = sb_posteriors(net, case)
    runtime["sb"] = time.perf_counter() - start

    reports = dict(zip(MODEL_KEYS, (no, mb, sb)))
    ranked = {key: rank_diseases(r) for key, r in reports.items()}
    gold = set(case.gold)
    rows = [
        RankRow(
            rank,
            did,
            p,
            mb.posteriors[did],
            sb.posteriors[did],
            did in gold,
        )
        for rank, (did, p) in enumerate(ranked["noisy_or"], start=1)
    ]
    head = rows[:top_k]
    counts = {
        "noisy_or": count_above((r.p_noisy_or for r in head), threshold),
        "mb": count_above((r.p_mb for r in head), threshold),
        "sb": count_above((r.p_sb for r in head), threshold),
    }
    sampler = {k: v for k, v in no.meta.items() if k in ("seed", "samples", "converged", "effective_sample_size")}
    if "saturated" in mb.meta:
        sampler["mb_saturated"] = mb.meta["saturated"]
    return ComparisonReport(
        case_id=case.case_id,
        rows=rows,
        gold_ranks={key: gold_ranks(ranked[key], case.gold) for key in MODEL_KEYS},
        rankings={key: [d for d, _ in ranked[key]] for key in MODEL_KEYS},
        counts=counts,
        threshold=threshold,
        top_k=top_k,
        method=resolved,
        sampler=sampler,
        runtime=runtime,
    )


def _row_cells(row: RankRow) -> list[str]:
    return [
        str(row.rank),
        row.disease_id,
        repr(row.p_noisy_or),
        repr(row.p_mb),
        repr(row.p_sb),
        "true" if row.is_gold else "false",
    ]


def _text(report: ComparisonReport) -> str:
    lines = [
        f"case {report.case_id}  (noisy-OR method: {report.method})",
        f"{'':1} {'rank':>4}  {'disease':<12} {'noisy-OR':>9} {'MB':>9} {'SB':>9}",
    ]
    for row in report.rows[: report.top_k]:
        star = "*" if row.is_gold else " "
        lines.append(
            f"{star} {row.rank:>4}  {row.disease_id:<12} "
            f"{row.p_noisy_or:>9.4f} {row.p_mb:>9.4f} {row.p_sb:>9.4f}"
        )
    lines.append(
        f"above {report.threshold:g} in top {report.top_k}: "
        + ", ".join(f"{k}={v}" for k, v in report.counts.items())
    )
    for key in MODEL_KEYS:
        ranks = report.gold_ranks[key]
        if ranks:
            lines.append(
                f"gold ranks ({key}): " + ", ".join(f"{d}={r}" for d, r in ranks.items())
            )
    return "\n".join(lines) + "\n"


def emit_report(report: ComparisonReport, fmt: str = "csv") -> bytes:
    """Serialize the top ``report.top_k`` rows; identical reports give identical bytes."""
    if fmt == "text":
        return _text(report).encode("utf-8")
    if fmt != "csv":
        raise InvalidConfig(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows[: report.top_k]:
        writer.writerow(_row_cells(row))
    return buf.getvalue().encode("utf-8")


def emit_reports(reports: list[ComparisonReport]) -> bytes:
    """Multi-case CSV: the single-report columns prefixed by ``case_id``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["case_id"] + CSV_COLUMNS)
    for report in reports:
        for row in report.rows[: report.top_k]:
            writer.writerow([report.case_id] + _row_cells(row))
    return buf.getvalue().encode("utf-8")


def emit_summary(reports: list[ComparisonReport]) -> bytes:
    """Per case and model: threshold count and gold-standard ranks."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["case_id", "model", "top_k", "threshold", "n_above", "gold_ranks"])
    for report in reports:
        for key in MODEL_KEYS:
            ranks = ";".join(f"{d}:{r}" for d, r in report.gold_ranks[key].items())
            writer.writerow(
                [report.case_id, key, report.top_k, repr(report.threshold), report.counts[key], ranks]
            )
    return buf.getvalue().encode("utf-8")


def parse_report_csv(data: bytes) -> list[RankRow]:
    """Inverse of :func:`emit_report` for the CSV format (``case_id`` ignored)."""
    reader = csv.DictReader(io.StringIO(data.decode("utf-8")))
    return [
        RankRow(
            int(rec["rank"]),
            rec["disease_id"],
            float(rec["p_noisy_or"]),
            float(rec["p_mb"]),
            float(rec["p_sb"]),
            rec["is_gold"] == "true",
        )
        for rec in reader
    ]
