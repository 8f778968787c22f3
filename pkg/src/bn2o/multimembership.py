"""Multimembership Bayes: every disease updated in isolation.

Conditionals come from the shared noisy-OR parameters by marginalising the
other diseases at their priors::

    alpha_ij        = (1 - q0j) * prod_{k != i} [(1 - qkj) p(dk+) + p(dk-)]
    p(fj+ | di+)    = 1 - (1 - qij) * alpha_ij
    p(fj+ | di-)    = 1 - alpha_ij

Each disease's posterior odds are its prior odds times one likelihood ratio
per observed finding. Nothing lets diseases compete for a shared finding,
which is why this model tends to overshoot.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroEvidenceProbability
from .network import CaseEvidence, NetworkSpec, validate_case
from .report import PosteriorReport

# beyond this |log odds| the odds no longer fit in a double
_LOG_ODDS_LIMIT = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class MbConditionals:
    """Dense ``(n, m)`` arrays; entries for unlinked pairs are uninformative."""

    alpha: np.ndarray
    log_alpha: np.ndarray
    p_present: np.ndarray
    p_absent: np.ndarray
    linked: np.ndarray

    def to_csv(self, net: NetworkSpec) -> bytes:
        """Audit table of every linked (disease, finding) pair."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["disease", "finding", "alpha", "p_present", "p_absent"])
        for i, j in zip(*np.nonzero(self.linked)):
            writer.writerow(
                [
                    net.diseases[i].id,
                    net.findings[j].id,
                    repr(float(self.alpha[i, j])),
                    repr(float(self.p_present[i, j])),
                    repr(float(self.p_absent[i, j])),
                ]
            )
        return buf.getvalue().encode("utf-8")


@dataclass
class OddsUpdate:
    prior_odds: float
    likelihood_ratios: list[float]
    posterior_odds: float
    posterior_probability: float


def derive_mb_conditionals(net: NetworkSpec) -> MbConditionals:
    """Derive (and memoise on ``net``) the per-disease conditionals."""
    cached = net.derived.get("mb")
    if cached is not None:
        return cached

    # log[(1 - qkj) p(dk+) + p(dk-)] = log(1 - qkj p(dk+)); finite since p < 1
    own = np.log1p(-net.q * net.priors[:, None])
    log_alpha = net.log_leak_fail[None, :] + own.sum(axis=0)[None, :] - own
    np.minimum(log_alpha, 0.0, out=log_alpha)
    alpha = np.exp(log_alpha)
    with np.errstate(divide="ignore"):
        log_fail_q = np.log1p(-net.q)
    p_present = -np.expm1(log_fail_q + log_alpha)
    p_absent = -np.expm1(log_alpha)
    for arr in (alpha, log_alpha, p_present, p_absent):
        arr.setflags(write=False)
    linked = net.q > 0
    linked.setflags(write=False)
    result = MbConditionals(alpha, log_alpha, p_present, p_absent, linked)
    net.derived["mb"] = result
    return result


def _log_likelihood_ratios(net, cond, pos, neg):
    """``(n, |F+| + |F-|)`` matrix of ``log lambda``; 0 for unlinked pairs."""
    with np.errstate(divide="ignore", invalid="ignore"):
        lam_pos = np.log(cond.p_present[:, pos]) - np.log(cond.p_absent[:, pos])
        lam_neg = np.log1p(-net.q[:, neg])
    lam_pos = np.where(cond.linked[:, pos], lam_pos, 0.0)
    lam_neg = np.where(cond.linked[:, neg], lam_neg, 0.0)
    return np.concatenate([lam_pos, lam_neg], axis=1)


def _check_possible(net, case, pos):
    impossible = (net.leaks[pos] == 0) & ~net.q[:, pos].any(axis=0)
    if impossible.any():
        fid = case.positive[int(np.argmax(impossible))]
        raise ZeroEvidenceProbability(
            f"positive finding {fid!r} has no leak and no causes"
        )


def mb_posteriors(net: NetworkSpec, case: CaseEvidence) -> PosteriorReport:
    validate_case(net, case)
    cond = derive_mb_conditionals(net)
    pos = net.finding_indices(case.positive)
    neg = net.finding_indices(case.negative)
    _check_possible(net, case, pos)

    log_lam = _log_likelihood_ratios(net, cond, pos, neg)
    has_inf = np.isposinf(log_lam).any(axis=1) & np.isneginf(log_lam).any(axis=1)
    if has_inf.any():
        did = net.disease_ids[int(np.argmax(has_inf))]
        raise ZeroEvidenceProbability(
            f"evidence is impossible both with and without disease {did!r}"
        )
    log_odds = np.log(net.priors) - np.log1p(-net.priors) + log_lam.sum(axis=1)
    posterior = _expit(log_odds)

    meta = {}
    saturated = np.abs(log_odds) > _LOG_ODDS_LIMIT
    if saturated.any():
        meta["saturated"] = [net.disease_ids[i] for i in np.flatnonzero(saturated)]
    return PosteriorReport.from_array(net, "multimembership", "closed-form", posterior, meta=meta)


def _expit(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def mb_odds_update(net: NetworkSpec, case: CaseEvidence, disease_id: str) -> OddsUpdate:
    """Odds-likelihood breakdown for one disease, in observation order."""
    validate_case(net, case)
    cond = derive_mb_conditionals(net)
    i = net.disease_index[disease_id]
    pos = net.finding_indices(case.positive)
    neg = net.finding_indices(case.negative)
    _check_possible(net, case, pos)
    log_lam = _log_likelihood_ratios(net, cond, pos, neg)[i]
    prior = float(net.priors[i])
    prior_odds = prior / (1.0 - prior)
    with np.errstate(over="ignore"):
        lams = [float(v) for v in np.exp(log_lam)]
    log_post = math.log(prior_odds) + float(log_lam.sum())
    posterior_odds = math.exp(log_post) if log_post < _LOG_ODDS_LIMIT else math.inf
    return OddsUpdate(prior_odds, lams, posterior_odds, float(_expit(np.array(log_post))))
