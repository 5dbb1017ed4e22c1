from fractions import Fraction

import mpmath
import numpy as np
import pytest

from divkit import DomainError, UnknownIdentifier
from divkit.config import MAX_RECORDED_FAILURES
from divkit.differences import (
    ALL_DIFFERENCES,
    CLOSED_FORM_SECONDS,
    Combination,
    DifferenceId,
    chain_names,
    chain_registry,
    check_chain,
    composed_generator_second,
    difference,
    difference_generator_second,
    difference_generator_second_mp,
    gates,
    run_chains,
    select_chains,
)
from divkit.distributions import DistributionPair, PairBatch, sample_pair_batch
from divkit.measures import MeasureId, evaluate, normalized_member
from divkit.verification import mixture_convexity

import oracle

P_REF = [0.5, 0.5]
Q_REF = [0.25, 0.75]
SKEWED = DistributionPair.of([1e-4, 1 - 1e-4], [0.5, 0.5])


def _registered(name, provenance):
    matches = [c for c in chain_registry() if c.name == name and c.provenance == provenance]
    assert len(matches) == 1
    return matches[0]


def test_difference_ids():
    assert len(ALL_DIFFERENCES) == 21
    diff = DifferenceId.parse("Jd")
    assert diff.high is normalized_member(5)
    assert diff.low is normalized_member(4)
    assert str(diff) == "D_Jd"
    assert DifferenceId.of("Psi", "Delta").name == "PsiDelta"
    with pytest.raises(UnknownIdentifier):
        DifferenceId.parse("dJ")
    with pytest.raises(UnknownIdentifier):
        DifferenceId.of("d", "J")
    with pytest.raises(UnknownIdentifier):
        DifferenceId.of("d", "chi2")


def test_combination_algebra():
    bound = Combination.of(d=Fraction(16, 7), I=Fraction(3, 7))
    assert bound.label == "3/7*I + 16/7*d"
    assert bound.as_dict() == {MeasureId.JENSEN_SHANNON: Fraction(3, 7), MeasureId.D_DIV: Fraction(16, 7)}
    assert (bound - bound).weights == ()
    assert (2 * Combination.of(h=1)).as_dict() == {MeasureId.HELLINGER: Fraction(2)}
    diff = Combination.difference(DifferenceId.parse("hDelta"))
    assert diff.as_dict() == {MeasureId.TRIANGULAR: Fraction(-1, 4), MeasureId.HELLINGER: Fraction(1)}
    with pytest.raises(UnknownIdentifier):
        Combination.of(renyi=1)


def test_differences_on_reference_pair(reference_pair):
    norm = oracle.normalized(P_REF, Q_REF)
    assert difference(DifferenceId.parse("Psid"), reference_pair) == pytest.approx(norm[6] - norm[3], rel=1e-10)
    assert difference(DifferenceId.parse("Psid"), reference_pair) == pytest.approx(0.00219656, abs=1e-8)
    assert difference(DifferenceId.parse("dDelta"), reference_pair) == pytest.approx(0.00092844, abs=1e-8)
    for diff in ALL_DIFFERENCES:
        assert difference(diff, reference_pair) >= 0


def test_differences_vanish_for_identical_distributions():
    pair = DistributionPair.of([0.1, 0.6, 0.3], [0.1, 0.6, 0.3])
    for diff in ALL_DIFFERENCES:
        assert difference(diff, pair) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("name", sorted(CLOSED_FORM_SECONDS))
def test_closed_forms_match_composition(name):
    diff = DifferenceId.parse(name)
    xs = np.array([1e-3, 0.3, 0.9, 1.1, 3.0, 1e3])
    closed = difference_generator_second(diff, xs)
    composed = composed_generator_second(diff, xs)
    assert np.allclose(closed, composed, rtol=1e-8, atol=1e-14)
    assert np.all(closed > 0)


@pytest.mark.parametrize("name", sorted(CLOSED_FORM_SECONDS))
def test_closed_forms_vanish_at_one(name):
    diff = DifferenceId.parse(name)
    assert difference_generator_second(diff, 1.0) == pytest.approx(0.0, abs=1e-15)
    with mpmath.workdps(40):
        assert abs(difference_generator_second_mp(diff, 1)) < mpmath.mpf(10) ** -35
        assert float(difference_generator_second_mp(diff, 3)) == pytest.approx(
            difference_generator_second(diff, 3.0), rel=1e-12
        )


def test_difference_generators_are_nonnegative():
    xs = np.geomspace(1e-4, 1e4, 4001)
    xs = xs[np.abs(xs - 1.0) > 1e-3]
    for diff in ALL_DIFFERENCES:
        assert np.all(difference_generator_second(diff, xs) >= 0), str(diff)


def test_difference_generator_rejects_nonpositive_x():
    with pytest.raises(DomainError):
        difference_generator_second(DifferenceId.parse("dh"), np.array([0.5, 0.0]))
    with pytest.raises(DomainError):
        composed_generator_second(DifferenceId.parse("TI"), -1.0)


def test_registry_structure():
    names = chain_names()
    assert names[:5] == ["eq1", "eq2", "eq3", "eq9", "eq23"]
    assert len(names) == len(set(names))
    by_name = {c.name: c for c in chain_registry() if c.provenance == "paper_verbatim"}
    assert len(by_name["eq2"].terms) == 12
    assert by_name["eq9"].links == 6
    eq23 = by_name["eq23"]
    assert [t.coefficient for t in eq23.terms] == [
        Fraction(1),
        Fraction(4, 5),
        Fraction(4),
        Fraction(12, 7),
        Fraction(3),
        Fraction(1),
        Fraction(4, 3),
        Fraction(1, 4),
        Fraction(1, 3),
        Fraction(4, 11),
        Fraction(1, 2),
    ]
    assert eq23.statement.startswith("D_hDelta <= 4/5*D_dDelta <= 4*D_dh")
    for name in ("remark3_i", "remark3_chain2", "remark4_chain1"):
        _registered(name, "paper_verbatim")
        _registered(name, "derived_corrected")


def test_select_chains():
    selected = select_chains(["eq9", "remark3_i"])
    assert [(c.name, c.provenance) for c in selected] == [
        ("eq9", "paper_verbatim"),
        ("remark3_i", "paper_verbatim"),
        ("remark3_i", "derived_corrected"),
    ]
    reordered = select_chains(["remark3_i", "eq1", "eq9", "eq1"])
    assert [c.name for c in reordered] == ["remark3_i", "remark3_i", "eq1", "eq9"]
    assert len(select_chains()) == len(chain_registry())
    with pytest.raises(UnknownIdentifier):
        select_chains(["eq9", "eq99"])


def test_gating_prefers_corrected_variants():
    verbatim = _registered("remark3_chain2", "paper_verbatim")
    corrected = _registered("remark3_chain2", "derived_corrected")
    assert not gates(verbatim, [verbatim, corrected])
    assert gates(verbatim, [verbatim])
    assert gates(corrected, [verbatim, corrected])
    eq9 = _registered("eq9", "paper_verbatim")
    assert gates(eq9, chain_registry())


def test_check_chain_on_reference_pair(reference_pair):
    check = check_chain(_registered("eq9", "paper_verbatim"), reference_pair)
    norm = oracle.normalized(P_REF, Q_REF)
    assert check.ok
    assert len(check.slacks) == 6
    assert list(check.slacks) == pytest.approx(list(np.diff(norm)), rel=1e-9, abs=1e-15)
    assert check.lhs[0] == pytest.approx(1 / 30, rel=1e-13)
    assert check.rhs[-1] == pytest.approx(7 / 192, rel=1e-13)


def test_check_chain_identical_pair_has_zero_slack():
    pair = DistributionPair.of([0.25, 0.25, 0.5], [0.25, 0.25, 0.5])
    for chain in chain_registry():
        check = check_chain(chain, pair)
        assert check.ok
        assert max(abs(s) for s in check.slacks) == 0.0


def test_check_chain_rejects_negative_tolerance(reference_pair):
    with pytest.raises(DomainError):
        check_chain(chain_registry()[0], reference_pair, tol=-1.0)


def test_verbatim_remark4_chain_fails_on_reference_pair(reference_pair):
    check = check_chain(_registered("remark4_chain1", "paper_verbatim"), reference_pair)
    assert not check.ok
    # T <= (Psi + 6J)/642
    assert not check.passed[8]
    # printed (9h+Delta)/12 exceeds h here
    assert not check.passed[2]
    assert check_chain(_registered("remark4_chain1", "derived_corrected"), reference_pair).ok


def test_verbatim_remark3_chain2_fails_for_extreme_ratios():
    check = check_chain(_registered("remark3_chain2", "paper_verbatim"), SKEWED)
    # (Psi + 12 Delta)/64 <= 4d
    assert not check.passed[1]
    assert check_chain(_registered("remark3_chain2", "derived_corrected"), SKEWED).ok


def test_run_chains_reports_in_input_order():
    chains = select_chains(["eq9", "eq1", "eq55"])
    batch = sample_pair_batch(200, 4, seed=3)
    reports = run_chains(chains, batch, workers=2)
    assert [r.name for r in reports] == ["eq9", "eq1", "eq55"]
    for report in reports:
        assert report.passed
        assert report.pairs == 200
        assert report.worst_slack >= -1e-12
        assert 0 <= report.worst_link < report.links


def test_run_chains_is_deterministic():
    chains = select_chains(["eq23", "remark4_chain1"])
    pairs = [sample_pair_batch(100, 3, seed=8), sample_pair_batch(100, 6, seed=9)]
    first = [r.model_dump() for r in run_chains(chains, pairs, workers=1)]
    second = [r.model_dump() for r in run_chains(chains, pairs, workers=4)]
    assert first == second


def test_run_chains_caps_recorded_failures():
    chain = _registered("remark4_chain1", "paper_verbatim")
    report = run_chains([chain], sample_pair_batch(300, 5, seed=4))[0]
    assert not report.passed
    assert report.failure_count > MAX_RECORDED_FAILURES
    assert len(report.failures) == MAX_RECORDED_FAILURES
    failure = report.failures[0]
    assert failure.lhs > failure.rhs
    assert len(failure.p) == 5
    # alone, the verbatim variant decides the run
    assert report.gates
    sibling = _registered("remark4_chain1", "derived_corrected")
    verbatim, corrected = run_chains([chain, sibling], sample_pair_batch(300, 5, seed=4))
    assert not verbatim.gates
    assert corrected.gates and corrected.passed


def test_run_chains_indexes_pairs_across_batches(reference_pair):
    chain = _registered("remark4_chain1", "paper_verbatim")
    pairs = [
        DistributionPair.of([0.4, 0.6], [0.4, 0.6]),
        DistributionPair.of([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]),
        reference_pair,
    ]
    report = run_chains([chain], pairs)[0]
    assert report.pairs == 3
    assert {f.pair_index for f in report.failures} == {2}
    assert [f.link for f in report.failures] == [2, 8]


def test_run_chains_with_no_pairs():
    report = run_chains(select_chains(["eq9"]), [])[0]
    assert report.pairs == 0
    assert report.passed
    assert report.worst_slack is None


def test_run_chains_rejects_negative_tolerance():
    with pytest.raises(DomainError):
        run_chains(select_chains(["eq9"]), [], tol=-1e-3)


@pytest.mark.slow
def test_gating_chains_hold_on_random_pairs():
    batches = [sample_pair_batch(10_000, n, seed=n) for n in range(2, 21)]
    skewed = PairBatch.from_pairs(
        [DistributionPair.of([e, 1 - e], [1 - e, e]) for e in (1e-6, 1e-4, 1e-2, 0.2)]
    )
    chains = chain_registry()
    reports = run_chains(chains, batches + [skewed])
    for chain, report in zip(chains, reports):
        if report.gates:
            assert report.passed, f"{report.name} ({report.provenance}): {report.failures[:1]}"
    failing = {(r.name, r.provenance) for r in reports if not r.passed}
    assert ("remark3_chain2", "paper_verbatim") in failing
    assert ("remark4_chain1", "paper_verbatim") in failing


@pytest.mark.parametrize("name", sorted(CLOSED_FORM_SECONDS))
def test_d_differences_are_jointly_convex(name):
    diff = DifferenceId.parse(name)
    first = sample_pair_batch(500, 4, seed=41)
    second = sample_pair_batch(500, 4, seed=42)
    assert mixture_convexity(lambda b: difference(diff, b), first, second) >= -1e-12


def test_difference_batch_matches_measures():
    batch = sample_pair_batch(50, 3, seed=2)
    diff = DifferenceId.parse("TI")
    expected = evaluate(MeasureId.AG_MEAN, batch) - evaluate(MeasureId.JENSEN_SHANNON, batch)
    assert np.allclose(difference(diff, batch), expected, rtol=1e-13, atol=1e-16)
