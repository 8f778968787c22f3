"""Exact noisy-OR posteriors.

Three routes with one numeric contract:

* :func:`brute_force_posteriors` enumerates all ``2**n`` disease instances.
  It is the oracle the other routes are checked against.
* :func:`quickscore_posteriors` expands the positive findings by
  inclusion-exclusion. Each subset term factorises over diseases, so the cost
  is ``O(2**|F+| * n * |F|)`` instead of ``O(2**n)``.
* :func:`negative_evidence_posteriors` is the closed form for ``F+ = {}``,
  where diseases stay independent a posteriori.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import (
    NumericalInstability,
    PositiveEvidencePresent,
    TooManyDiseases,
    TooManyPositiveFindings,
    ZeroEvidenceProbability,
)
from .network import CaseEvidence, NetworkSpec, validate_case
from .report import PosteriorReport

log = logging.getLogger(__name__)

ENUMERATION_CAP = 20
QUICKSCORE_CAP = 20
BOUNDARY_SLACK = 1e-9

_CHUNK_BITS = 14


def _clamp(values, what):
    values = np.asarray(values, dtype=float)
    bad = (values < -BOUNDARY_SLACK) | (values > 1 + BOUNDARY_SLACK) | ~np.isfinite(values)
    if bad.any():
        worst = values[bad][0]
        raise NumericalInstability(f"{what} produced posterior {worst!r} outside [0, 1]")
    return np.clip(values, 0.0, 1.0)


def _bit_rows(start, stop, width):
    idx = np.arange(start, stop, dtype=np.int64)[:, None]
    return ((idx >> np.arange(width, dtype=np.int64)) & 1).astype(bool)


def _log_evidence_likelihood(net, states, pos, neg):
    """``log p(F+, F- | D)`` for each row of ``states``."""
    total = np.zeros(len(states))
    if len(neg):
        total += net.log_absent(states, neg).sum(axis=1)
    if len(pos):
        log_abs = net.log_absent(states, pos)
        with np.errstate(divide="ignore"):
            total += np.log(-np.expm1(log_abs)).sum(axis=1)
    return total


def _log_instance_prior(net, states):
    return np.where(states, np.log(net.priors), np.log1p(-net.priors)).sum(axis=1)


def brute_force_posteriors(
    net: NetworkSpec, case: CaseEvidence, max_diseases: int = ENUMERATION_CAP
) -> PosteriorReport:
    """Posteriors by summing the joint over every disease instance."""
    validate_case(net, case)
    n = net.n_diseases
    if n > max_diseases:
        raise TooManyDiseases(f"{n} diseases exceeds enumeration cap {max_diseases}")
    pos = net.finding_indices(case.positive)
    neg = net.finding_indices(case.negative)

    # running sums scaled by exp(-shift) so nothing underflows
    shift = -math.inf
    total = 0.0
    per_disease = np.zeros(n)
    n_states = 1 << n
    step = 1 << _CHUNK_BITS
    for start in range(0, n_states, step):
        states = _bit_rows(start, min(start + step, n_states), n)
        logw = _log_instance_prior(net, states) + _log_evidence_likelihood(net, states, pos, neg)
        top = logw.max()
        if top == -math.inf:
            continue
        if top > shift:
            scale = math.exp(shift - top) if shift > -math.inf else 0.0
            total *= scale
            per_disease *= scale
            shift = top
        w = np.exp(logw - shift)
        total += math.fsum(w)
        per_disease += w @ states
    if total == 0.0:
        raise ZeroEvidenceProbability(f"evidence of case {case.case_id!r} is impossible")

    return PosteriorReport.from_array(
        net,
        "noisy-or",
        "brute-force",
        _clamp(per_disease / total, "brute force"),
        evidence_probability=total * math.exp(shift),
    )


def negative_evidence_posteriors(net: NetworkSpec, case: CaseEvidence) -> PosteriorReport:
    """Closed form for cases with only negative findings.

    ``p(d_i+ | F-) = a / (a + b)`` with ``a = p(d_i+) * prod_{F-} (1 - q_ij)``
    and ``b = p(d_i-)``; the leak factors cancel.
    """
    validate_case(net, case)
    if case.positive:
        raise PositiveEvidencePresent(f"case {case.case_id!r} has positive findings")
    neg = net.finding_indices(case.negative)
    a, b, log_evidence = _negative_terms(net, neg)
    return PosteriorReport.from_array(
        net,
        "noisy-or",
        "negative-evidence",
        a / (a + b),
        evidence_probability=math.exp(log_evidence),
    )


def _negative_terms(net, cols):
    """Per-disease ``a``, ``b`` and ``log p(F-)`` for negative findings ``cols``."""
    blocked = net.certain[:, cols].any(axis=1)
    log_fail = net.log_fail[:, cols].sum(axis=1)
    a = np.where(blocked, 0.0, net.priors * np.exp(log_fail))
    b = 1.0 - net.priors
    log_evidence = float(net.log_leak_fail[cols].sum() + np.log(a + b).sum())
    return a, b, log_evidence


def _subset_block(net, pos, start, stop, base_fail, base_blocked, offset):
    """Inclusion-exclusion terms for subsets ranked ``start..stop-1``.

    Returns ``(signed_total, signed_clamped)`` in extended precision, scaled
    relative to the empty-subset term, shapes ``(B,)`` and ``(B, n)``.
    """
    ext = np.longdouble
    bits = _bit_rows(start, stop, len(pos)).astype(ext)
    sign = np.where(bits.sum(axis=1) % 2 == 0, ext(1), ext(-1))
    # per disease: log prod_{j in F- u F'} (1 - q_ij), and whether any is certain
    fail = base_fail + bits @ net.log_fail[:, pos].T.astype(ext)
    blocked = base_blocked | ((bits @ net.certain[:, pos].T.astype(ext)) > 0)
    priors = net.priors.astype(ext)
    present = np.where(blocked, ext(0), priors * np.exp(fail))
    factor = (1 - priors) + present
    leak = bits @ net.log_leak_fail[pos].astype(ext)
    log_total = leak + np.log(factor).sum(axis=1)
    total = sign * np.exp(log_total - offset)
    clamped = total[:, None] * present / factor
    return total, clamped


def _base_offset(net, base_fail, base_blocked):
    # log of the empty-subset term without the leak factors of F-
    priors = net.priors.astype(np.longdouble)
    present = np.where(base_blocked, 0, priors * np.exp(base_fail))
    return np.log((1 - priors) + present).sum()


def _exact_sum(terms):
    """Sum extended-precision terms as an exactly rounded double."""
    hi = terms.astype(float)
    lo = (terms - hi).astype(float)
    return math.fsum(np.concatenate([hi, lo]))


def quickscore_posteriors(
    net: NetworkSpec,
    case: CaseEvidence,
    max_positive: int = QUICKSCORE_CAP,
    workers: int = 1,
) -> PosteriorReport:
    """Posteriors by inclusion-exclusion over subsets of the positive findings.

    ``p(F+, F-) = sum_{F' <= F+} (-1)^|F'| p(F- u F' absent)``, and each
    ``p(S absent)`` factorises over diseases because only negative-form
    factors remain. Terms are formed in extended precision and summed exactly
    (:func:`math.fsum` over a double-double split), so cancellation between
    alternating terms costs little accuracy and the result does not depend
    on how subsets are split across ``workers``.
    """
    validate_case(net, case)
    k = len(case.positive)
    if k > max_positive:
        raise TooManyPositiveFindings(f"{k} positive findings exceeds cap {max_positive}")
    neg = net.finding_indices(case.negative)
    pos = net.finding_indices(case.positive)
    # a positive finding no disease can cause only scales the evidence by its
    # leak; keeping it in the subset sum would just add cancellation
    orphan = ~(net.q[:, pos] > 0).any(axis=0)
    orphan_leaks = net.leaks[pos[orphan]]
    if (orphan_leaks == 0).any():
        raise ZeroEvidenceProbability(
            f"case {case.case_id!r} has a positive finding with no cause and no leak"
        )
    log_orphan = float(np.log(orphan_leaks).sum())
    pos = pos[~orphan]
    k = len(pos)
    if k == 0:
        negatives_only = CaseEvidence(case.case_id, negative=case.negative, gold=case.gold)
        report = negative_evidence_posteriors(net, negatives_only)
        report.method = "quickscore"
        report.meta["subsets"] = 1
        report.meta["cancellation_factor"] = 1.0
        report.evidence_probability *= math.exp(log_orphan)
        return report

    base_fail = net.log_fail[:, neg].astype(np.longdouble).sum(axis=1)
    base_blocked = net.certain[:, neg].any(axis=1)
    offset = _base_offset(net, base_fail, base_blocked)
    n_subsets = 1 << k
    step = 1 << _CHUNK_BITS
    ranges = [(s, min(s + step, n_subsets)) for s in range(0, n_subsets, step)]

    def run(bounds):
        return _subset_block(net, pos, bounds[0], bounds[1], base_fail, base_blocked, offset)

    if workers > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run, ranges))
    else:
        blocks = [run(r) for r in ranges]

    totals = np.concatenate([b[0] for b in blocks])
    clamped = np.concatenate([b[1] for b in blocks])
    evidence = _exact_sum(totals)
    if evidence <= 0.0:
        raise ZeroEvidenceProbability(
            f"evidence of case {case.case_id!r} is impossible (or lost to cancellation)"
        )
    numer = np.array([_exact_sum(col) for col in clamped.T])
    # rounding in the individual terms bounds the achievable accuracy
    cancellation = float(np.abs(totals).sum()) / evidence
    if cancellation * float(np.finfo(np.longdouble).eps) > 1e-9:
        log.warning(
            "quickscore case %r: cancellation factor %.3g, posteriors may be inaccurate",
            case.case_id,
            cancellation,
        )
    log_evidence = math.log(evidence) + float(offset) + float(net.log_leak_fail[neg].sum()) + log_orphan
    return PosteriorReport.from_array(
        net,
        "noisy-or",
        "quickscore",
        _clamp(numer / evidence, "quickscore"),
        evidence_probability=math.exp(log_evidence),
        meta={"subsets": n_subsets, "cancellation_factor": cancellation},
    )
