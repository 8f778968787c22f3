import itertools
import math

import numpy as np
import pytest

from bn2o.network import (
    CaseEvidence,
    CausalLink,
    DiseaseSpec,
    FindingSpec,
    NetworkSpec,
    validate_network,
)


def make_net(priors, leaks, links):
    """Build a validated network from plain lists.

    ``links`` maps ``(disease ordinal, finding ordinal) -> q``; ids are
    ``d1..dn`` and ``f1..fm``.
    """
    diseases = [DiseaseSpec(f"d{i + 1}", f"disease {i + 1}", p) for i, p in enumerate(priors)]
    findings = [FindingSpec(f"f{j + 1}", f"finding {j + 1}", l) for j, l in enumerate(leaks)]
    links = [CausalLink(f"d{i + 1}", f"f{j + 1}", q) for (i, j), q in links.items()]
    return validate_network(NetworkSpec(tuple(diseases), tuple(findings), tuple(links)))


def random_net(rng, n, m, density=0.5, prior=(0.01, 0.3), leak=(0.0, 0.05), q=(0.05, 1.0)):
    links = {}
    for i in range(n):
        for j in range(m):
            if rng.random() < density:
                links[(i, j)] = float(rng.uniform(*q))
    return make_net(
        [float(rng.uniform(*prior)) for _ in range(n)],
        [float(rng.uniform(*leak)) for _ in range(m)],
        links,
    )


def random_case(rng, net, n_pos, n_neg, case_id="c"):
    ids = [f.id for f in net.findings]
    picks = rng.permutation(len(ids))
    pos = tuple(ids[k] for k in picks[:n_pos])
    neg = tuple(ids[k] for k in picks[n_pos:n_pos + n_neg])
    return CaseEvidence(case_id, positive=pos, negative=neg)


def enumerate_posteriors(net, case):
    """Reference posteriors by explicit enumeration in plain Python floats.

    Shares no code with the package's inference routes.
    """
    priors = [d.prior for d in net.diseases]
    q = {(l.disease_id, l.finding_id): l.q for l in net.links}
    leak = {f.id: f.leak for f in net.findings}
    ids = [d.id for d in net.diseases]
    joint_total = []
    joint_by = [[] for _ in ids]
    for inst in itertools.product((False, True), repeat=len(ids)):
        p = 1.0
        for present, pr in zip(inst, priors):
            p *= pr if present else 1.0 - pr
        for f, sign in [(f, True) for f in case.positive] + [(f, False) for f in case.negative]:
            absent = 1.0 - leak[f]
            for did, present in zip(ids, inst):
                if present:
                    absent *= 1.0 - q.get((did, f), 0.0)
            p *= (1.0 - absent) if sign else absent
        joint_total.append(p)
        for k, present in enumerate(inst):
            if present:
                joint_by[k].append(p)
    total = math.fsum(joint_total)
    return {d: math.fsum(v) / total for d, v in zip(ids, joint_by)}, total


@pytest.fixture
def two_disease_net():
    # priors (0.1, 0.2), leak 0, q11 = 0.9, q21 = 0.8
    return make_net([0.1, 0.2], [0.0], {(0, 0): 0.9, (1, 0): 0.8})


@pytest.fixture
def mb_example_net():
    # priors (0.01, 0.02), leak 0.1, q11 = 0.5, q21 = 0.2
    return make_net([0.01, 0.02], [0.1], {(0, 0): 0.5, (1, 0): 0.2})


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
