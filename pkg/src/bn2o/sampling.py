"""Likelihood-weighted sampling of noisy-OR posteriors.

Disease instances are drawn from a product-of-Bernoullis importance
distribution and weighted by ``p(D) p(evidence | D) / q(D)``. With
``importance="prior"`` this is plain likelihood weighting (``q`` = priors,
weight = evidence likelihood). With ``importance="self"`` the importance
distribution is refreshed after every batch toward the current posterior
estimate.

Randomness is drawn per block of sample indices from a Philox stream keyed
by ``(seed, first sample index)``, so results do not depend on ``workers``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import AllZeroWeights, InsufficientBatches, InvalidConfig
from .network import CaseEvidence, NetworkSpec, validate_case
from .report import PosteriorReport

BLOCK = 1024
# importance probabilities are kept this far from 0 and 1
IMPORTANCE_FLOOR = 1e-3
# share of the prior mixed back into the refreshed importance distribution
PRIOR_MIX = 0.1


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    max_samples: int = 100_000
    batch_size: int = 5_000
    convergence_tol: float = 0.005
    top_k_watch: int = 20
    workers: int = 1
    importance: str = "self"
    early_stop: bool = False

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig(f"seed must fit in 64 bits, got {self.seed}")
        if self.batch_size < 1 or self.max_samples < self.batch_size:
            raise InvalidConfig("need max_samples >= batch_size >= 1")
        if not self.convergence_tol > 0:
            raise InvalidConfig("convergence_tol must be positive")
        if self.top_k_watch < 1 or self.workers < 1:
            raise InvalidConfig("top_k_watch and workers must be at least 1")
        if self.importance not in ("prior", "self"):
            raise InvalidConfig(f"unknown importance mode {self.importance!r}")


@dataclass
class SamplerTrace:
    samples_drawn: int = 0
    converged: bool = False
    # cumulative posterior estimate after each batch, full length n
    batch_estimates: list[np.ndarray] = field(default_factory=list)
    effective_sample_size: float = 0.0

    def snapshot(self, batch: int, k: int) -> list[tuple[int, float]]:
        """Top-``k`` ``(disease ordinal, estimate)`` pairs of one batch."""
        est = self.batch_estimates[batch]
        order = _rank_order(est)[:k]
        return [(int(i), float(est[i])) for i in order]

    def to_csv(self, net: NetworkSpec, k: int) -> bytes:
        """One row per watched disease, one column per batch."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["disease"] + [f"batch_{b + 1}" for b in range(len(self.batch_estimates))])
        if self.batch_estimates:
            for i in _rank_order(self.batch_estimates[-1])[:k]:
                writer.writerow(
                    [net.diseases[i].id] + [repr(float(e[i])) for e in self.batch_estimates]
                )
        return buf.getvalue().encode("utf-8")


def _rank_order(values):
    # descending, ties by ordinal; NaN last
    v = np.where(np.isnan(values), -np.inf, values)
    return np.lexsort((np.arange(len(v)), -v))


def check_convergence(trace: SamplerTrace, cfg: SamplerConfig) -> bool:
    """True iff every watched disease moved less than the tolerance last batch.

    Watched diseases are the ``top_k_watch`` highest current estimates.
    """
    if len(trace.batch_estimates) < 2:
        raise InsufficientBatches("convergence needs at least two batch snapshots")
    last, prev = trace.batch_estimates[-1], trace.batch_estimates[-2]
    watch = _rank_order(last)[: cfg.top_k_watch]
    delta = np.abs(last[watch] - prev[watch])
    if np.isnan(delta).any():
        return False
    return bool(delta.max() < cfg.convergence_tol)


class _Accumulator:
    """Weighted sums held relative to ``exp(shift)``."""

    def __init__(self, n):
        self.shift = -math.inf
        self.w = 0.0
        self.w2 = 0.0
        self.wd = np.zeros(n)

    def add(self, shift, w, w2, wd):
        if shift == -math.inf:
            return
        if shift > self.shift:
            scale = math.exp(self.shift - shift) if self.shift > -math.inf else 0.0
            self.w *= scale
            self.w2 *= scale * scale
            self.wd *= scale
            self.shift = shift
        scale = math.exp(shift - self.shift)
        self.w += w * scale
        self.w2 += w2 * scale * scale
        self.wd += wd * scale

    def estimate(self):
        if self.w == 0.0:
            return np.full(len(self.wd), np.nan)
        return np.clip(self.wd / self.w, 0.0, 1.0)

    def ess(self):
        return self.w * self.w / self.w2 if self.w2 > 0 else 0.0


def _block(net, pos, neg, log_prior_ratio, proposal, seed, start, size):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, start])))
    states = rng.random((size, net.n_diseases)) < proposal
    logw = np.where(states, log_prior_ratio[0], log_prior_ratio[1]).sum(axis=1)
    if len(neg):
        logw += net.log_absent(states, neg).sum(axis=1)
    if len(pos):
        with np.errstate(divide="ignore"):
            logw += np.log(-np.expm1(net.log_absent(states, pos))).sum(axis=1)
    top = float(logw.max())
    if top == -math.inf:
        return top, 0.0, 0.0, np.zeros(net.n_diseases)
    w = np.exp(logw - top)
    return top, float(w.sum()), float((w * w).sum()), w @ states


def likelihood_weighting_posteriors(
    net: NetworkSpec, case: CaseEvidence, cfg: SamplerConfig | None = None
) -> tuple[PosteriorReport, SamplerTrace]:
    cfg = cfg or SamplerConfig()
    validate_case(net, case)
    pos = net.finding_indices(case.positive)
    neg = net.finding_indices(case.negative)
    log_p = np.log(net.priors)
    log_not_p = np.log1p(-net.priors)

    acc = _Accumulator(net.n_diseases)
    trace = SamplerTrace()
    proposal = net.priors.copy()
    pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        drawn = 0
        while drawn < cfg.max_samples:
            size = min(cfg.batch_size, cfg.max_samples - drawn)
            ratio = (log_p - np.log(proposal), log_not_p - np.log1p(-proposal))
            starts = range(drawn, drawn + size, BLOCK)
            jobs = [
                (net, pos, neg, ratio, proposal, cfg.seed, s, min(BLOCK, drawn + size - s))
                for s in starts
            ]
            if pool is not None:
                parts = list(pool.map(lambda a: _block(*a), jobs))
            else:
                parts = [_block(*a) for a in jobs]
            for part in parts:
                acc.add(*part)
            drawn += size

            est = acc.estimate()
            trace.batch_estimates.append(est)
            trace.samples_drawn = drawn
            if len(trace.batch_estimates) >= 2:
                trace.converged = check_convergence(trace, cfg)
                if trace.converged and cfg.early_stop:
                    break
            if cfg.importance == "self" and not np.isnan(est).any():
                mixed = (1.0 - PRIOR_MIX) * est + PRIOR_MIX * net.priors
                proposal = np.clip(mixed, IMPORTANCE_FLOOR, 1.0 - IMPORTANCE_FLOOR)
    finally:
        if pool is not None:
            pool.shutdown()

    if acc.w == 0.0:
        raise AllZeroWeights(
            f"no sampled instance is consistent with case {case.case_id!r}; "
            "raise max_samples or use importance='self'"
        )
    trace.effective_sample_size = acc.ess()
    report = PosteriorReport.from_array(
        net,
        "noisy-or",
        "likelihood-weighting",
        acc.estimate(),
        meta={
            "seed": cfg.seed,
            "samples": trace.samples_drawn,
            "converged": trace.converged,
            "importance": cfg.importance,
            "effective_sample_size": trace.effective_sample_size,
        },
    )
    return report, trace
