import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bn2o.errors import (
    PositiveEvidencePresent,
    TooManyDiseases,
    TooManyPositiveFindings,
    ZeroEvidenceProbability,
)
from bn2o.exact import brute_force_posteriors, negative_evidence_posteriors, quickscore_posteriors
from bn2o.network import CaseEvidence

from conftest import enumerate_posteriors, make_net, random_case, random_net


def as_array(report):
    return np.array(list(report.posteriors.values()))


class TestBruteForce:
    def test_hand_enumerated_example(self, two_disease_net):
        # instances: d1 only .1*.8*.9 = .072, d2 only .9*.2*.8 = .144,
        # both .02*(1 - .1*.2) = .0196; p(f1+) = .2356
        report = brute_force_posteriors(two_disease_net, CaseEvidence("c", positive=("f1",)))
        assert report.posteriors["d1"] == pytest.approx(0.0916 / 0.2356, abs=1e-12)
        assert report.posteriors["d2"] == pytest.approx(0.1636 / 0.2356, abs=1e-12)
        assert report.posteriors["d1"] == pytest.approx(0.38879, abs=5e-6)
        assert report.posteriors["d2"] == pytest.approx(0.69440, abs=5e-6)
        assert report.evidence_probability == pytest.approx(0.2356, abs=1e-12)

    def test_no_evidence_gives_priors(self, two_disease_net):
        report = brute_force_posteriors(two_disease_net, CaseEvidence("c"))
        assert as_array(report) == pytest.approx([0.1, 0.2], abs=1e-14)
        assert report.evidence_probability == pytest.approx(1.0)

    def test_deterministic_cause_absent(self):
        net = make_net([0.3], [0.0], {(0, 0): 1.0})
        report = brute_force_posteriors(net, CaseEvidence("c", negative=("f1",)))
        assert report.posteriors["d1"] == 0.0

    def test_impossible_evidence(self):
        net = make_net([0.3], [0.0, 0.0], {(0, 0): 0.5})
        with pytest.raises(ZeroEvidenceProbability):
            brute_force_posteriors(net, CaseEvidence("c", positive=("f2",)))

    def test_cap(self, two_disease_net):
        with pytest.raises(TooManyDiseases):
            brute_force_posteriors(two_disease_net, CaseEvidence("c"), max_diseases=1)

    @pytest.mark.parametrize("trial", range(10))
    def test_matches_plain_enumeration(self, rng, trial):
        net = random_net(rng, int(rng.integers(1, 8)), 6)
        case = random_case(rng, net, int(rng.integers(0, 4)), int(rng.integers(0, 3)))
        expected, total = enumerate_posteriors(net, case)
        report = brute_force_posteriors(net, case)
        for d, p in expected.items():
            assert report.posteriors[d] == pytest.approx(p, abs=1e-12)
        assert report.evidence_probability == pytest.approx(total, rel=1e-10)

    def test_chunked_enumeration(self, rng):
        # more than one enumeration chunk (2**14 instances)
        net = random_net(rng, 15, 5, prior=(0.05, 0.2))
        case = random_case(rng, net, 2, 2)
        qs = quickscore_posteriors(net, case)
        bf = brute_force_posteriors(net, case)
        assert np.abs(as_array(qs) - as_array(bf)).max() < 1e-10


class TestQuickscore:
    def test_two_disease_example(self, two_disease_net):
        case = CaseEvidence("c", positive=("f1",))
        qs = quickscore_posteriors(two_disease_net, case)
        bf = brute_force_posteriors(two_disease_net, case)
        assert np.abs(as_array(qs) - as_array(bf)).max() < 1e-12

    def test_all_negative_equals_closed_form(self, rng):
        net = random_net(rng, 6, 8)
        case = random_case(rng, net, 0, 5)
        assert quickscore_posteriors(net, case).posteriors == negative_evidence_posteriors(net, case).posteriors

    def test_random_trials_against_brute_force(self, rng):
        worst = 0.0
        for _ in range(100):
            net = random_net(rng, 10, 8)
            case = random_case(rng, net, 4, int(rng.integers(0, 4)))
            qs = quickscore_posteriors(net, case)
            bf = brute_force_posteriors(net, case)
            worst = max(worst, np.abs(as_array(qs) - as_array(bf)).max())
            assert qs.evidence_probability == pytest.approx(bf.evidence_probability, rel=1e-9)
        assert worst < 1e-9

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12), n_pos=st.integers(0, 6), n_neg=st.integers(0, 6))
    def test_property_equivalence(self, seed, n, n_pos, n_neg):
        rng = np.random.default_rng(seed)
        net = random_net(rng, n, 12, density=0.4)
        case = random_case(rng, net, n_pos, n_neg)
        try:
            bf = brute_force_posteriors(net, case)
        except ZeroEvidenceProbability:
            with pytest.raises(ZeroEvidenceProbability):
                quickscore_posteriors(net, case)
            return
        qs = quickscore_posteriors(net, case)
        assert np.abs(as_array(qs) - as_array(bf)).max() < 1e-9
        assert qs.evidence_probability == pytest.approx(bf.evidence_probability, rel=1e-8)

    def test_worker_count_is_bitwise_irrelevant(self, rng):
        net = random_net(rng, 10, 20, density=0.4, prior=(0.01, 0.1))
        case = random_case(rng, net, 16, 3)
        one = quickscore_posteriors(net, case, workers=1)
        four = quickscore_posteriors(net, case, workers=4)
        assert one.posteriors == four.posteriors
        assert one.evidence_probability == four.evidence_probability

    def test_cap(self, rng):
        net = random_net(rng, 3, 6)
        with pytest.raises(TooManyPositiveFindings):
            quickscore_posteriors(net, random_case(rng, net, 4, 0), max_positive=3)

    def test_deterministic_links(self):
        net = make_net([0.2, 0.3], [0.0, 0.1], {(0, 0): 1.0, (1, 0): 0.5, (1, 1): 1.0})
        for case in [
            CaseEvidence("a", positive=("f1",), negative=("f2",)),
            CaseEvidence("b", positive=("f1", "f2")),
        ]:
            qs = quickscore_posteriors(net, case)
            expected, _ = enumerate_posteriors(net, case)
            assert as_array(qs) == pytest.approx(list(expected.values()), abs=1e-12)

    def test_impossible_evidence(self):
        net = make_net([0.3], [0.0, 0.0], {(0, 0): 0.5})
        with pytest.raises(ZeroEvidenceProbability):
            quickscore_posteriors(net, CaseEvidence("c", positive=("f2",)))

    @pytest.mark.parametrize("positive", [("f3",), ("f1", "f3"), ("f1", "f2", "f3")])
    def test_leak_only_findings(self, positive):
        # f3 has no cause; tiny leaks used to cost ~1e-10 through cancellation
        net = make_net([0.3, 0.1], [1e-4, 2e-3, 1e-6], {(0, 0): 0.4, (1, 1): 0.7, (0, 1): 0.2})
        case = CaseEvidence("c", positive=positive, negative=())
        qs = quickscore_posteriors(net, case)
        bf = brute_force_posteriors(net, case)
        assert as_array(qs) == pytest.approx(as_array(bf), abs=1e-14)
        assert qs.evidence_probability == pytest.approx(bf.evidence_probability, rel=1e-12)
        assert qs.meta["subsets"] == 2 ** (len(positive) - 1)

    def test_monotone_in_private_positive_finding(self, rng):
        for _ in range(20):
            net = random_net(rng, 6, 7, density=0.4)
            # f7 is linked only to d1
            links = {
                (net.disease_index[l.disease_id], net.finding_index[l.finding_id]): l.q
                for l in net.links
                if l.finding_id != "f7"
            }
            links[(0, 6)] = 0.6
            net = make_net(list(net.priors), list(net.leaks), links)
            base = random_case(rng, make_net(list(net.priors), list(net.leaks[:6]), {}), 2, 2)
            more = CaseEvidence("c", positive=base.positive + ("f7",), negative=base.negative)
            before = brute_force_posteriors(net, base).posteriors["d1"]
            after = quickscore_posteriors(net, more).posteriors["d1"]
            assert after >= before - 1e-12


class TestNegativeEvidence:
    def test_two_term_arithmetic(self):
        net = make_net([0.5], [0.2], {(0, 0): 0.5})
        report = negative_evidence_posteriors(net, CaseEvidence("c", negative=("f1",)))
        assert report.posteriors["d1"] == pytest.approx(1 / 3, abs=1e-15)

    def test_unlinked_disease_keeps_prior(self):
        net = make_net([0.5, 0.25], [0.2], {(0, 0): 0.5})
        report = negative_evidence_posteriors(net, CaseEvidence("c", negative=("f1",)))
        assert report.posteriors["d2"] == pytest.approx(0.25, abs=1e-15)

    def test_rejects_positive_findings(self, two_disease_net):
        with pytest.raises(PositiveEvidencePresent):
            negative_evidence_posteriors(two_disease_net, CaseEvidence("c", positive=("f1",)))

    def test_random_against_brute_force(self, rng):
        for _ in range(30):
            net = random_net(rng, int(rng.integers(1, 9)), 8)
            case = random_case(rng, net, 0, int(rng.integers(0, 8)))
            ne = negative_evidence_posteriors(net, case)
            bf = brute_force_posteriors(net, case)
            assert np.abs(as_array(ne) - as_array(bf)).max() < 1e-12
            assert ne.evidence_probability == pytest.approx(bf.evidence_probability, rel=1e-12)
