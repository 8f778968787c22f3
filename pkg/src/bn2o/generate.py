"""Synthetic BN2O networks and forward-sampled diagnostic cases.

Each case draws a true disease instance from the priors (rejecting until the
number of present diseases is in range), forward-samples every finding through
the noisy-OR gates, then records a subset of findings as observed:

* positives: every finding sampled present, randomly thinned to the upper
  bound of ``target_positive`` when there are more;
* negatives: a random subset of the absent findings that are linked to at
  least one true disease.

The true present diseases become the case's gold standard.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import InfeasibleConfig, InvalidConfig, IoFailure, ParseError, RejectionBudgetExceeded
from .network import (
    CaseEvidence,
    CausalLink,
    DiseaseSpec,
    FindingSpec,
    NetworkSpec,
    validate_network,
)

# instances drawn per rejection round
_ROUND = 256


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    n_diseases: int = 20
    n_findings: int = 60
    link_density: float = 3.0
    prior_range: tuple[float, float] = (0.01, 0.05)
    q_range: tuple[float, float] = (0.2, 0.9)
    leak_range: tuple[float, float] = (0.0, 0.01)
    target_positive: tuple[int, int] = (1, 15)
    target_negative: tuple[int, int] = (0, 10)
    true_disease_count: tuple[int, int] = (1, 3)
    n_cases: int = 1
    max_attempts: int = 200_000

    def __post_init__(self):
        for name in ("prior_range", "q_range", "leak_range", "target_positive",
                     "target_negative", "true_disease_count"):
            value = tuple(getattr(self, name))
            if len(value) != 2 or value[0] > value[1]:
                raise InvalidConfig(f"{name} must be an ordered pair, got {value!r}")
            object.__setattr__(self, name, value)
        lo, hi = self.prior_range
        if not 0 < lo <= hi < 1:
            raise InvalidConfig(f"prior_range must lie inside (0, 1), got {self.prior_range}")
        lo, hi = self.q_range
        if not 0 < lo <= hi <= 1:
            raise InvalidConfig(f"q_range must lie inside (0, 1], got {self.q_range}")
        lo, hi = self.leak_range
        if not 0 <= lo <= hi < 1:
            raise InvalidConfig(f"leak_range must lie inside [0, 1), got {self.leak_range}")
        if min(self.n_diseases, self.n_findings, self.n_cases, self.max_attempts) < 1:
            raise InvalidConfig("counts must be at least 1")
        if self.target_positive[0] < 0 or self.target_negative[0] < 0:
            raise InvalidConfig("finding targets must be non-negative")
        if self.true_disease_count[0] < 0 or self.true_disease_count[1] > self.n_diseases:
            raise InvalidConfig("true_disease_count must lie within [0, n_diseases]")

    @classmethod
    def from_dict(cls, doc: dict, **overrides) -> "GeneratorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InvalidConfig(f"unknown generator settings: {sorted(unknown)}")
        return cls(**{**doc, **overrides})

    @classmethod
    def load(cls, path, **overrides) -> "GeneratorConfig":
        try:
            with open(os.fspath(path), encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno, exc.colno) from None
        return cls.from_dict(doc, **overrides)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass(frozen=True)
class GeneratedCase:
    case: CaseEvidence
    provenance: dict[str, bool]  # the disease instance actually sampled
    stats: tuple[int, int, int]


def _uniform(rng, bounds, size):
    lo, hi = bounds
    return rng.uniform(lo, hi, size) if hi > lo else np.full(size, float(lo))


def generate_network(cfg: GeneratorConfig) -> NetworkSpec:
    """Random network; each (disease, finding) pair is linked independently
    with probability ``link_density / n_diseases``."""
    n, m = cfg.n_diseases, cfg.n_findings
    if not 0 < cfg.link_density <= n:
        raise InfeasibleConfig(
            f"link_density must be in (0, n_diseases={n}], got {cfg.link_density}"
        )
    rng = np.random.default_rng([cfg.seed, 0])
    priors = _uniform(rng, cfg.prior_range, n)
    leaks = _uniform(rng, cfg.leak_range, m)
    mask = rng.random((n, m)) < cfg.link_density / n
    qs = _uniform(rng, cfg.q_range, (n, m))

    dw, fw = len(str(n)), len(str(m))
    diseases = [DiseaseSpec(f"d{i + 1:0{dw}d}", f"disease {i + 1}", float(p))
                for i, p in enumerate(priors)]
    findings = [FindingSpec(f"f{j + 1:0{fw}d}", f"finding {j + 1}", float(l))
                for j, l in enumerate(leaks)]
    links = [CausalLink(diseases[i].id, findings[j].id, float(qs[i, j]))
             for i, j in zip(*np.nonzero(mask))]
    return validate_network(NetworkSpec(tuple(diseases), tuple(findings), tuple(links)))


def sample_findings(net: NetworkSpec, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Forward-sample every finding for each instance row; ``(B, m)`` booleans."""
    states = np.atleast_2d(states)
    p_absent = np.exp(net.log_absent(states, np.arange(net.n_findings)))
    return rng.random(p_absent.shape) >= p_absent


def generate_case(net: NetworkSpec, cfg: GeneratorConfig, index: int = 0) -> GeneratedCase:
    rng = np.random.default_rng([cfg.seed, 1, index])
    lo_d, hi_d = cfg.true_disease_count
    lo_p, hi_p = cfg.target_positive
    lo_n, hi_n = cfg.target_negative
    attempts = 0
    while attempts < cfg.max_attempts:
        states = rng.random((_ROUND, net.n_diseases)) < net.priors
        attempts += _ROUND
        counts = states.sum(axis=1)
        for row in np.flatnonzero((counts >= lo_d) & (counts <= hi_d)):
            instance = states[row]
            present = sample_findings(net, instance, rng)[0]
            positives = np.flatnonzero(present)
            if len(positives) < lo_p:
                continue
            if len(positives) > hi_p:
                positives = np.sort(rng.choice(positives, hi_p, replace=False))
            linked = net.q[instance].any(axis=0) & ~present
            candidates = np.flatnonzero(linked)
            if len(candidates) < lo_n:
                continue
            k = min(int(rng.integers(lo_n, hi_n + 1)), len(candidates))
            negatives = np.sort(rng.choice(candidates, k, replace=False))
            case = CaseEvidence(
                f"case_{index + 1:03d}",
                positive=tuple(net.findings[j].id for j in positives),
                negative=tuple(net.findings[j].id for j in negatives),
                gold=tuple(net.diseases[i].id for i in np.flatnonzero(instance)),
            )
            provenance = dict(zip(net.disease_ids, map(bool, instance)))
            return GeneratedCase(case, provenance, case.stats)
    raise RejectionBudgetExceeded(
        f"no acceptable case after {attempts} instance draws; widen the targets "
        "or raise max_attempts"
    )


def generate_cases(net: NetworkSpec, cfg: GeneratorConfig) -> list[GeneratedCase]:
    return [generate_case(net, cfg, i) for i in range(cfg.n_cases)]


def manifest_csv(cases) -> bytes:
    """Case summary with the columns ``case, |F+|, |F-|, |D|``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["case", "|F+|", "|F-|", "|D|"])
    for item in cases:
        case = getattr(item, "case", item)
        writer.writerow([case.case_id, *case.stats])
    return buf.getvalue().encode("utf-8")
