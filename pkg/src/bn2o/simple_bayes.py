"""Simple Bayes: exactly one disease is present.

Priors are the noisy-OR priors renormalised to sum to one, and the
conditional for each (disease, finding) pair is the noisy-OR probability of
the finding when that disease alone is present::

    c_ij = 1 - (1 - q_ij)(1 - q0j)

There is deliberately no "no disease" hypothesis.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import AllHypothesesExcluded
from .network import CaseEvidence, NetworkSpec, validate_case
from .report import PosteriorReport


@dataclass(frozen=True)
class SbParameters:
    renormalized_priors: np.ndarray
    conditionals: np.ndarray
    # log c_ij and log(1 - c_ij), kept to avoid recomputing per case
    log_present: np.ndarray
    log_absent: np.ndarray

    def to_csv(self, net: NetworkSpec) -> bytes:
        """Audit table over linked pairs; an unlinked pair's conditional is the leak."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["disease", "finding", "prior", "p_present"])
        for i, j in zip(*np.nonzero(net.q > 0)):
            writer.writerow(
                [
                    net.diseases[i].id,
                    net.findings[j].id,
                    repr(float(self.renormalized_priors[i])),
                    repr(float(self.conditionals[i, j])),
                ]
            )
        return buf.getvalue().encode("utf-8")


def derive_sb_parameters(net: NetworkSpec) -> SbParameters:
    cached = net.derived.get("sb")
    if cached is not None:
        return cached
    priors = net.priors / math.fsum(net.priors)
    with np.errstate(divide="ignore"):
        log_absent = np.log1p(-net.q) + net.log_leak_fail[None, :]
        conditionals = -np.expm1(log_absent)
        log_present = np.log(conditionals)
    for arr in (priors, conditionals, log_present, log_absent):
        arr.setflags(write=False)
    result = SbParameters(priors, conditionals, log_present, log_absent)
    net.derived["sb"] = result
    return result


def sb_posteriors(net: NetworkSpec, case: CaseEvidence) -> PosteriorReport:
    validate_case(net, case)
    params = derive_sb_parameters(net)
    pos = net.finding_indices(case.positive)
    neg = net.finding_indices(case.negative)
    log_post = (
        np.log(params.renormalized_priors)
        + params.log_present[:, pos].sum(axis=1)
        + params.log_absent[:, neg].sum(axis=1)
    )
    top = log_post.max()
    if top == -math.inf:
        raise AllHypothesesExcluded(
            f"no disease can explain the evidence of case {case.case_id!r}"
        )
    w = np.exp(log_post - top)
    return PosteriorReport.from_array(
        net, "simple-bayes", "closed-form", w / math.fsum(w)
    )
