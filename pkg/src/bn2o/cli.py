"""Command-line entry point.

Exit codes: 0 success, 2 validation error, 3 inference error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .errors import DiagnosisError, InferenceError, IoFailure, ValidationError
from .exact import brute_force_posteriors, quickscore_posteriors
from .generate import GeneratorConfig, generate_cases, generate_network, manifest_csv
from .harness import (
    compare_models,
    emit_report,
    emit_reports,
    emit_summary,
    rank_diseases,
    resolve_method,
)
from .multimembership import mb_posteriors
from .network import load_case, load_network, pure_leak_findings, save_case, save_network
from .sampling import SamplerConfig, likelihood_weighting_posteriors
from .simple_bayes import sb_posteriors

log = logging.getLogger("bn2o")

EXIT_OK, EXIT_VALIDATION, EXIT_INFERENCE, EXIT_IO = 0, 2, 3, 4


def _write(path, data: bytes):
    if path is None or str(path) == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def _sidecar(path, suffix):
    path = Path(path)
    return path.with_name(path.stem + suffix)


def _sampler_config(args) -> SamplerConfig:
    return SamplerConfig(
        seed=args.seed,
        max_samples=args.samples,
        batch_size=min(args.batch_size, args.samples),
        workers=args.workers,
        importance=args.importance,
    )


def cmd_generate(args):
    overrides = {"seed": args.seed} if args.seed is not None else {}
    if args.n_cases is not None:
        overrides["n_cases"] = args.n_cases
    cfg = GeneratorConfig.load(args.config, **overrides)
    net = generate_network(cfg)
    cases = generate_cases(net, cfg)
    out = Path(args.out_dir)
    _write(out / "network.json", save_network(net))
    for item in cases:
        _write(out / "cases" / f"{item.case.case_id}.json", save_case(item.case))
    _write(out / "manifest.csv", manifest_csv(cases))
    print(
        f"wrote {net.n_diseases} diseases, {net.n_findings} findings, "
        f"{len(net.links)} links and {len(cases)} cases to {out}"
    )


def _posterior_csv(report) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "disease_id", "posterior"])
    for rank, (did, p) in enumerate(rank_diseases(report), start=1):
        writer.writerow([rank, did, repr(p)])
    return buf.getvalue().encode("utf-8")


def cmd_diagnose(args):
    net = load_network(args.network)
    case = load_case(args.case, net)
    trace = None
    if args.model == "mb":
        report = mb_posteriors(net, case)
    elif args.model == "sb":
        report = sb_posteriors(net, case)
    else:
        method = resolve_method(args.method, net, case)
        if method == "brute":
            report = brute_force_posteriors(net, case)
        elif method == "quickscore":
            report = quickscore_posteriors(net, case, workers=args.workers)
        else:
            cfg = _sampler_config(args)
            report, trace = likelihood_weighting_posteriors(net, case, cfg)
    _write(args.out, _posterior_csv(report))
    if trace is not None and args.out not in (None, "-"):
        _write(_sidecar(args.out, ".trace.csv"), trace.to_csv(net, cfg.top_k_watch))
    details = [f"model={report.model}", f"method={report.method}"]
    if report.evidence_probability is not None:
        details.append(f"p(evidence)={report.evidence_probability:.6g}")
    details += [f"{k}={v}" for k, v in report.meta.items() if k != "cancellation_factor"]
    print(" ".join(details), file=sys.stderr)


def _case_paths(source) -> list[Path]:
    source = Path(source)
    if source.is_dir():
        paths = sorted(source.glob("*.json"))
        if not paths:
            raise IoFailure(f"no case files in {source}")
        return paths
    if not source.exists():
        raise IoFailure(f"no such file: {source}")
    return [source]


def cmd_compare(args):
    net = load_network(args.network)
    cases = [load_case(p, net) for p in _case_paths(args.cases)]
    cfg = _sampler_config(args)

    def run(case):
        return compare_models(net, case, args.method, cfg, top_k=args.top, threshold=args.threshold)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(run, cases))
    else:
        reports = [run(c) for c in cases]

    if args.format == "text":
        _write(args.out, b"".join(emit_report(r, "text") for r in reports))
    elif len(reports) == 1 and not args.case_column:
        _write(args.out, emit_report(reports[0]))
    else:
        _write(args.out, emit_reports(reports))
    if args.out not in (None, "-"):
        _write(_sidecar(args.out, "_summary.csv"), emit_summary(reports))
    for r in reports:
        total = sum(r.runtime.values())
        log.info("case %s: %.3f s", r.case_id, total)


def cmd_validate(args):
    net = load_network(args.network)
    print(f"network ok: {net.n_diseases} diseases, {net.n_findings} findings, {len(net.links)} links")
    leaky = pure_leak_findings(net)
    if leaky:
        print(
            f"warning: {len(leaky)} finding(s) have no linked disease and carry no evidence: "
            + ", ".join(leaky[:10])
            + (" ..." if len(leaky) > 10 else "")
        )
    if args.case:
        case = load_case(args.case, net)
        pos, neg, gold = case.stats
        print(f"case {case.case_id} ok: |F+|={pos} |F-|={neg} |D|={gold}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bn2o", description="Compare noisy-OR, multimembership and simple Bayes diagnosis."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def sampler_flags(p):
        p.add_argument("--samples", type=int, default=100_000)
        p.add_argument("--batch-size", type=int, default=5_000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--importance", choices=["self", "prior"], default="self")

    p = sub.add_parser("generate", help="synthesize a network and cases")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-cases", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("diagnose", help="posteriors for one case under one model")
    p.add_argument("--network", required=True)
    p.add_argument("--case", required=True)
    p.add_argument("--model", choices=["noisy-or", "mb", "sb"], default="noisy-or")
    p.add_argument("--method", choices=["brute", "quickscore", "lw", "auto"], default="auto")
    p.add_argument("--out")
    sampler_flags(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("compare", help="three-model comparison report")
    p.add_argument("--network", required=True)
    p.add_argument("--cases", required=True, help="case file or directory of case files")
    p.add_argument("--method", choices=["brute", "quickscore", "lw", "auto"], default="auto")
    p.add_argument("--top", type=int, default=30)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--format", choices=["csv", "text"], default="csv")
    p.add_argument("--case-column", action="store_true", help="prefix rows with case_id even for one case")
    p.add_argument("--jobs", type=int, default=1, help="cases compared concurrently")
    p.add_argument("--out")
    sampler_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="check network (and case) files")
    p.add_argument("--network", required=True)
    p.add_argument("--case")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InferenceError as exc:
        print(f"inference error: {exc}", file=sys.stderr)
        return EXIT_INFERENCE
    except (IoFailure, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DiagnosisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFERENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
