"""Bipartite noisy-OR network model and the evidence it is queried with.

A network has an upper layer of diseases (each with a prior), a lower layer of
findings (each with a leak probability) and causal links ``q`` from diseases to
findings. Everything downstream reads the dense views built here:

* ``priors``  -- shape ``(n,)``
* ``leaks``   -- shape ``(m,)``
* ``q``       -- shape ``(n, m)``, zero where no link exists
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DanglingLink,
    DuplicateId,
    EmptyNetwork,
    IncompleteInstance,
    IoFailure,
    ParseError,
    ProbabilityOutOfRange,
    UnknownDisease,
    UnknownFinding,
    ValidationError,
)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class DiseaseSpec:
    id: str
    name: str
    prior: float


@dataclass(frozen=True)
class FindingSpec:
    id: str
    name: str
    leak: float


@dataclass(frozen=True)
class CausalLink:
    disease_id: str
    finding_id: str
    q: float


def _readonly(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NetworkSpec:
    """Immutable BN2O network. Build through :func:`validate_network`."""

    diseases: tuple[DiseaseSpec, ...]
    findings: tuple[FindingSpec, ...]
    links: tuple[CausalLink, ...]
    # per-network memo for derived model parameters (MB conditionals etc.)
    derived: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "diseases", tuple(self.diseases))
        object.__setattr__(self, "findings", tuple(self.findings))
        object.__setattr__(self, "links", tuple(self.links))

    @property
    def n_diseases(self) -> int:
        return len(self.diseases)

    @property
    def n_findings(self) -> int:
        return len(self.findings)

    @cached_property
    def disease_index(self) -> dict[str, int]:
        return {d.id: i for i, d in enumerate(self.diseases)}

    @cached_property
    def finding_index(self) -> dict[str, int]:
        return {f.id: j for j, f in enumerate(self.findings)}

    @cached_property
    def disease_ids(self) -> tuple[str, ...]:
        return tuple(d.id for d in self.diseases)

    @cached_property
    def priors(self) -> np.ndarray:
        return _readonly(np.array([d.prior for d in self.diseases], dtype=float))

    @cached_property
    def leaks(self) -> np.ndarray:
        return _readonly(np.array([f.leak for f in self.findings], dtype=float))

    @cached_property
    def q(self) -> np.ndarray:
        q = np.zeros((self.n_diseases, self.n_findings))
        for link in self.links:
            q[self.disease_index[link.disease_id], self.finding_index[link.finding_id]] = link.q
        return _readonly(q)

    @cached_property
    def log_fail(self) -> np.ndarray:
        """``log(1 - q)`` with the ``-inf`` of deterministic links replaced by 0.

        Pair with :attr:`certain` so matrix products never meet ``0 * -inf``.
        """
        with np.errstate(divide="ignore"):
            out = np.log1p(-self.q)
        out[~np.isfinite(out)] = 0.0
        return _readonly(out)

    @cached_property
    def certain(self) -> np.ndarray:
        return _readonly((self.q >= 1.0).astype(float))

    @cached_property
    def log_leak_fail(self) -> np.ndarray:
        return _readonly(np.log1p(-self.leaks))

    def finding_indices(self, ids: Iterable[str]) -> np.ndarray:
        try:
            return np.array([self.finding_index[f] for f in ids], dtype=np.intp)
        except KeyError as exc:
            raise UnknownFinding("finding not in network", exc.args[0]) from None

    def log_absent(self, states: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Vectorised ``log p(f_j- | D)`` for a batch of disease instances.

        ``states`` is a boolean ``(B, n)`` array, ``cols`` indexes findings.
        Returns a ``(B, len(cols))`` array; ``-inf`` where a present disease
        causes the finding with certainty.
        """
        s = np.asarray(states, dtype=float)
        out = s @ self.log_fail[:, cols] + self.log_leak_fail[cols]
        blocked = (s @ self.certain[:, cols]) > 0
        out[blocked] = -np.inf
        return out


@dataclass(frozen=True)
class CaseEvidence:
    """Observed findings for one patient plus an optional gold diagnosis.

    Findings listed in neither ``positive`` nor ``negative`` are unobserved.
    """

    case_id: str
    positive: tuple[str, ...] = ()
    negative: tuple[str, ...] = ()
    gold: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("positive", "negative", "gold"):
            values = tuple(getattr(self, name))
            if len(set(values)) != len(values):
                dup = next(v for v in values if values.count(v) > 1)
                raise DuplicateId(f"repeated id in {name}", dup)
            object.__setattr__(self, name, values)
        both = set(self.positive) & set(self.negative)
        if both:
            raise ValidationError(
                "finding observed both present and absent", sorted(both)[0]
            )

    @property
    def stats(self) -> tuple[int, int, int]:
        """``(|F+|, |F-|, |D|)``, the columns of the case manifest."""
        return len(self.positive), len(self.negative), len(self.gold)


# -- validation ---------------------------------------------------------------


def _check_prob(value, lo, hi, lo_open, hi_open, what, entity):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProbabilityOutOfRange(f"{what} must be a number, got {value!r}", entity)
    value = float(value)
    if not math.isfinite(value):
        raise ProbabilityOutOfRange(f"{what} must be finite", entity)
    below = value <= lo if lo_open else value < lo
    above = value >= hi if hi_open else value > hi
    if below or above:
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        raise ProbabilityOutOfRange(
            f"{what} {value!r} outside {lb}{lo}, {hi}{rb}", entity
        )


def validate_network(raw: NetworkSpec) -> NetworkSpec:
    """Return ``raw`` unchanged if every invariant holds, else raise."""
    if not raw.diseases:
        raise EmptyNetwork("network has no diseases")
    if not raw.findings:
        raise EmptyNetwork("network has no findings")

    seen = set()
    for d in raw.diseases:
        if d.id in seen:
            raise DuplicateId("duplicate disease id", d.id)
        seen.add(d.id)
        _check_prob(d.prior, 0.0, 1.0, True, True, "prior", d.id)
    for f in raw.findings:
        if f.id in seen:
            raise DuplicateId("duplicate id (findings and diseases share a namespace)", f.id)
        seen.add(f.id)
        _check_prob(f.leak, 0.0, 1.0, False, True, "leak", f.id)

    diseases = {d.id for d in raw.diseases}
    findings = {f.id for f in raw.findings}
    pairs = set()
    for link in raw.links:
        key = (link.disease_id, link.finding_id)
        if link.disease_id not in diseases:
            raise DanglingLink("link from unknown disease", key)
        if link.finding_id not in findings:
            raise DanglingLink("link to unknown finding", key)
        if key in pairs:
            raise DuplicateId("more than one link for disease/finding pair", key)
        pairs.add(key)
        _check_prob(link.q, 0.0, 1.0, True, False, "causal probability", key)
    return raw


def validate_case(net: NetworkSpec, case: CaseEvidence) -> CaseEvidence:
    """Check that every id in ``case`` exists in ``net``."""
    for f in case.positive + case.negative:
        if f not in net.finding_index:
            raise UnknownFinding("case refers to unknown finding", f)
    for d in case.gold:
        if d not in net.disease_index:
            raise UnknownDisease("case refers to unknown disease", d)
    return case


def pure_leak_findings(net: NetworkSpec) -> list[str]:
    """Findings no disease links to; evidence on them is uninformative."""
    linked = net.q.any(axis=0)
    return [f.id for f, has in zip(net.findings, linked) if not has]


# -- likelihood primitives ----------------------------------------------------


def _instance_vector(net: NetworkSpec, instance) -> np.ndarray:
    if isinstance(instance, Mapping):
        missing = [d for d in net.disease_ids if d not in instance]
        if missing:
            raise IncompleteInstance("instance does not assign every disease", missing[0])
        extra = set(instance) - set(net.disease_index)
        if extra:
            raise UnknownDisease("instance assigns unknown disease", sorted(extra)[0])
        return np.array([bool(instance[d]) for d in net.disease_ids])
    vec = np.asarray(instance, dtype=bool)
    if vec.shape != (net.n_diseases,):
        raise IncompleteInstance(
            f"instance has shape {vec.shape}, expected ({net.n_diseases},)"
        )
    return vec


def finding_absent_given_instance(net: NetworkSpec, finding_id: str, instance) -> float:
    """Noisy-OR probability that ``finding_id`` is absent given a disease instance.

    The leak and every present, linked disease must all fail to produce the
    finding: ``(1 - q0j) * prod_{k present} (1 - qkj)``.
    """
    if finding_id not in net.finding_index:
        raise UnknownFinding("unknown finding", finding_id)
    j = net.finding_index[finding_id]
    present = _instance_vector(net, instance)
    p = 1.0 - net.leaks[j]
    for qk in net.q[present, j]:
        p *= 1.0 - qk
    return float(p)


def instance_prior(net: NetworkSpec, instance) -> float:
    """Prior of a full disease instance under marginal independence."""
    present = _instance_vector(net, instance)
    factors = np.where(present, net.priors, 1.0 - net.priors)
    return float(np.prod(factors))


# -- serialization ------------------------------------------------------------


def _read_source(source) -> str:
    try:
        if hasattr(source, "read"):
            data = source.read()
        elif isinstance(source, (bytes, bytearray)):
            data = bytes(source)
        else:
            with open(os.fspath(source), "rb") as fh:
                data = fh.read()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}") from None
    return data


def _parse_json(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None


def _require(obj, key, kind, where):
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object, got {type(obj).__name__}")
    if key not in obj:
        raise ParseError(f"{where}: missing key {key!r}")
    value = obj[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"{where}.{key}: expected a number, got {value!r}")
        return float(value)
    if not isinstance(value, kind):
        raise ParseError(f"{where}.{key}: expected {kind.__name__}, got {value!r}")
    return value


def _check_version(doc, what):
    version = _require(doc, "format_version", int, what)
    if isinstance(version, bool) or version != FORMAT_VERSION:
        raise ParseError(f"{what}: unsupported format_version {version!r}")


def network_from_dict(doc) -> NetworkSpec:
    _check_version(doc, "network")
    diseases = [
        DiseaseSpec(
            _require(d, "id", str, f"diseases[{i}]"),
            _require(d, "name", str, f"diseases[{i}]"),
            _require(d, "prior", float, f"diseases[{i}]"),
        )
        for i, d in enumerate(_require(doc, "diseases", list, "network"))
    ]
    findings = [
        FindingSpec(
            _require(f, "id", str, f"findings[{i}]"),
            _require(f, "name", str, f"findings[{i}]"),
            _require(f, "leak", float, f"findings[{i}]"),
        )
        for i, f in enumerate(_require(doc, "findings", list, "network"))
    ]
    links = [
        CausalLink(
            _require(l, "disease", str, f"links[{i}]"),
            _require(l, "finding", str, f"links[{i}]"),
            _require(l, "q", float, f"links[{i}]"),
        )
        for i, l in enumerate(_require(doc, "links", list, "network"))
    ]
    return validate_network(NetworkSpec(tuple(diseases), tuple(findings), tuple(links)))


def network_to_dict(net: NetworkSpec) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "diseases": [{"id": d.id, "name": d.name, "prior": d.prior} for d in net.diseases],
        "findings": [{"id": f.id, "name": f.name, "leak": f.leak} for f in net.findings],
        "links": [
            {"disease": l.disease_id, "finding": l.finding_id, "q": l.q} for l in net.links
        ],
    }


def case_from_dict(doc) -> CaseEvidence:
    _check_version(doc, "case")
    lists = {}
    for key in ("positive", "negative", "gold"):
        values = _require(doc, key, list, "case")
        if not all(isinstance(v, str) for v in values):
            raise ParseError(f"case.{key}: ids must be strings")
        lists[key] = tuple(values)
    try:
        return CaseEvidence(_require(doc, "case_id", str, "case"), **lists)
    except ValidationError as exc:
        raise ParseError(str(exc), entity=exc.entity) from None


def case_to_dict(case: CaseEvidence) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "case_id": case.case_id,
        "positive": list(case.positive),
        "negative": list(case.negative),
        "gold": list(case.gold),
    }


def load_network(source) -> NetworkSpec:
    """Parse and validate a network document from a path, bytes or binary file."""
    return network_from_dict(_parse_json(_read_source(source)))


def load_case(source, net: NetworkSpec | None = None) -> CaseEvidence:
    """Parse a case document; when ``net`` is given, also check its ids."""
    case = case_from_dict(_parse_json(_read_source(source)))
    if net is not None:
        validate_case(net, case)
    return case


def _dump(doc) -> bytes:
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def _write(data: bytes, dest):
    if dest is None:
        return data
    try:
        if hasattr(dest, "write"):
            dest.write(data)
        else:
            with open(os.fspath(dest), "wb") as fh:
                fh.write(data)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return data


def save_network(net: NetworkSpec, dest=None) -> bytes:
    """Serialize ``net``; writes to ``dest`` (path or binary file) if given."""
    return _write(_dump(network_to_dict(net)), dest)


def save_case(case: CaseEvidence, dest=None) -> bytes:
    return _write(_dump(case_to_dict(case)), dest)
