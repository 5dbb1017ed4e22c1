from fractions import Fraction

import numpy as np
import pytest

from divkit import DomainError, UnknownIdentifier
from divkit.distributions import DistributionPair, sample_pair_batch
from divkit.generators import Generator, csiszar_divergence
from divkit.measures import (
    NORMALIZED,
    MeasureId,
    evaluate,
    generator_of,
    member_by_symbol,
    normalized_member,
    normalized_sequence,
    normalized_value,
    profile,
    xi,
    zeta,
)
from divkit.verification import mixture_convexity

import oracle

P_REF = [0.5, 0.5]
Q_REF = [0.25, 0.75]
DIVERGENCES = [m for m in MeasureId if m not in (MeasureId.BHATTACHARYYA, MeasureId.HARMONIC_MEAN)]


def test_reference_pair_matches_oracle(reference_pair):
    expected = oracle.measures(P_REF, Q_REF)
    for measure in MeasureId:
        assert evaluate(measure, reference_pair) == pytest.approx(expected[measure.value], rel=1e-12, abs=1e-15)


def test_reference_pair_exact_rationals(reference_pair):
    assert evaluate(MeasureId.TRIANGULAR, reference_pair) == pytest.approx(2 / 15, rel=1e-14)
    assert evaluate(MeasureId.SYM_CHI_SQUARE, reference_pair) == pytest.approx(7 / 12, rel=1e-14)
    assert evaluate(MeasureId.CHI_SQUARE, reference_pair) == pytest.approx(1 / 3, rel=1e-14)
    assert evaluate(MeasureId.J_DIV, reference_pair) == pytest.approx(0.2746531, abs=1e-7)
    assert evaluate(MeasureId.HELLINGER, reference_pair) == pytest.approx(0.0340742, abs=1e-7)


def test_reference_pair_decimals(reference_pair):
    # direct summation; also satisfies J = 4(I + T)
    assert evaluate(MeasureId.JENSEN_SHANNON, reference_pair) == pytest.approx(0.0338220756, abs=1e-9)
    assert evaluate(MeasureId.D_DIV, reference_pair) == pytest.approx(0.0085654445, abs=1e-10)
    assert evaluate(MeasureId.D_DIV, reference_pair) == pytest.approx(oracle.measures(P_REF, Q_REF)["d_div"], rel=1e-12)
    values = profile(reference_pair)
    identity = 4 * (values[MeasureId.JENSEN_SHANNON] + values[MeasureId.AG_MEAN])
    assert values[MeasureId.J_DIV] == pytest.approx(identity, rel=1e-13)


def test_normalized_sequence_on_reference_pair(reference_pair):
    sequence = normalized_sequence(reference_pair)
    assert list(sequence) == pytest.approx(oracle.normalized(P_REF, Q_REF), rel=1e-12)
    assert sequence[0] == pytest.approx(1 / 30, rel=1e-14)
    assert sequence[-1] == pytest.approx(7 / 192, rel=1e-14)
    assert all(a <= b for a, b in zip(sequence, sequence[1:]))


def test_identical_distributions_give_zero():
    pair = DistributionPair.of([0.2, 0.3, 0.5], [0.2, 0.3, 0.5])
    for measure in DIVERGENCES:
        assert evaluate(measure, pair) == pytest.approx(0.0, abs=1e-15)
    assert evaluate(MeasureId.BHATTACHARYYA, pair) == pytest.approx(1.0)
    assert evaluate(MeasureId.HARMONIC_MEAN, pair) == pytest.approx(1.0)
    assert normalized_sequence(pair) == pytest.approx((0.0,) * 7, abs=1e-15)
    assert zeta(0.3, pair) == pytest.approx(0.0, abs=1e-14)
    assert xi(-0.7, pair) == pytest.approx(0.0, abs=1e-14)


def test_measures_are_symmetric(random_pairs):
    for batch in random_pairs:
        forward = profile(batch)
        backward = profile(batch.swapped())
        for measure in MeasureId:
            if measure is MeasureId.CHI_SQUARE:
                continue
            assert np.allclose(forward[measure], backward[measure], rtol=1e-12, atol=1e-15)


def test_sym_chi_square_is_sum_of_chi_squares(random_pairs):
    batch = random_pairs[1]
    chi = evaluate(MeasureId.CHI_SQUARE, batch) + evaluate(MeasureId.CHI_SQUARE, batch.swapped())
    assert np.allclose(evaluate(MeasureId.SYM_CHI_SQUARE, batch), chi, rtol=1e-12)


def test_batch_and_single_evaluation_agree(random_pairs):
    batch = random_pairs[2]
    values = evaluate(MeasureId.AG_MEAN, batch)
    for i in (0, 17, 999):
        assert values[i] == pytest.approx(evaluate(MeasureId.AG_MEAN, batch.pair(i)), rel=1e-13)


def test_random_pairs_against_oracle():
    batch = sample_pair_batch(10, 6, seed=99)
    for i, pair in enumerate(batch.pairs()):
        expected = oracle.measures(pair.p.values, pair.q.values)
        got = profile(pair)
        for measure in MeasureId:
            assert got[measure] == pytest.approx(expected[measure.value], rel=1e-10, abs=1e-15)


@pytest.mark.slow
def test_normalized_chain_is_nondecreasing():
    for n in (2, 5, 10, 20):
        batch = sample_pair_batch(10_000, n, seed=1)
        sequence = np.stack(normalized_sequence(batch), axis=-1)
        assert np.all(np.diff(sequence, axis=-1) >= -1e-12)


@pytest.mark.parametrize("s", [-1.0, -0.3, 0.0, 0.5, 1.0, 1.7, 2.0])
def test_families_match_csiszar_divergence(s, random_pairs):
    for batch in random_pairs:
        assert np.allclose(zeta(s, batch), csiszar_divergence(Generator(family="phi", s=s), batch), rtol=1e-12, atol=1e-14)
        assert np.allclose(xi(s, batch), csiszar_divergence(Generator(family="psi", s=s), batch), rtol=1e-12, atol=1e-14)


def test_family_particular_cases(random_pairs):
    for batch in random_pairs:
        v = profile(batch)
        assert np.allclose(zeta(2.0, batch), v[MeasureId.SYM_CHI_SQUARE] / 2, rtol=1e-10)
        assert np.allclose(zeta(0.0, batch), v[MeasureId.J_DIV], rtol=1e-10)
        assert np.allclose(zeta(1.0, batch), v[MeasureId.J_DIV], rtol=1e-10)
        assert np.allclose(zeta(0.5, batch), 8 * v[MeasureId.HELLINGER], rtol=1e-10)
        assert np.allclose(xi(-1.0, batch), v[MeasureId.TRIANGULAR] / 4, rtol=1e-10)
        assert np.allclose(xi(0.0, batch), v[MeasureId.JENSEN_SHANNON], rtol=1e-10)
        assert np.allclose(xi(0.5, batch), 4 * v[MeasureId.D_DIV], rtol=1e-10)
        assert np.allclose(xi(1.0, batch), v[MeasureId.AG_MEAN], rtol=1e-10)
        assert np.allclose(xi(2.0, batch), v[MeasureId.SYM_CHI_SQUARE] / 16, rtol=1e-10)


def test_families_on_reference_pair(reference_pair):
    assert zeta(0.5, reference_pair) == pytest.approx(0.27259339, abs=1e-8)
    assert zeta(2.0, reference_pair) == pytest.approx(7 / 24, rel=1e-13)
    assert xi(-1.0, reference_pair) == pytest.approx(1 / 30, rel=1e-13)
    assert xi(2.0, reference_pair) == pytest.approx(7 / 192, rel=1e-13)
    assert zeta(0.5, reference_pair) == pytest.approx(oracle.zeta(0.5, P_REF, Q_REF), rel=1e-12)
    assert xi(0.5, reference_pair) == pytest.approx(oracle.xi(0.5, P_REF, Q_REF), rel=1e-12)
    assert normalized_value(7, reference_pair) == pytest.approx(zeta(2.0, reference_pair) / 8, rel=1e-12)


def test_zeta_is_monotone_about_one_half(random_pairs):
    down = np.arange(-2.0, 0.51, 0.5)
    up = np.arange(0.5, 3.01, 0.5)
    for batch in random_pairs:
        falling = np.stack([zeta(s, batch) for s in down])
        rising = np.stack([zeta(s, batch) for s in up])
        assert np.all(np.diff(falling, axis=0) <= 1e-12)
        assert np.all(np.diff(rising, axis=0) >= -1e-12)


def test_xi_is_increasing_from_minus_one(random_pairs):
    orders = np.arange(-1.0, 3.01, 0.5)
    for batch in random_pairs:
        values = np.stack([xi(s, batch) for s in orders])
        assert np.all(np.diff(values, axis=0) >= -1e-12)


@pytest.mark.parametrize("delta", [1e-9, -1e-9])
def test_families_are_continuous_at_branches(delta, reference_pair):
    for family in (zeta, xi):
        for base in (0.0, 1.0):
            limit = family(base, reference_pair)
            assert abs(family(base + delta, reference_pair) - limit) <= 1e-6 * max(1.0, limit)


def test_normalized_members():
    assert [m.rank for m in NORMALIZED] == list(range(1, 8))
    assert [m.symbol for m in NORMALIZED] == ["Delta", "I", "h", "d", "J", "T", "Psi"]
    assert normalized_member(4).coefficient == Fraction(4)
    assert member_by_symbol("J").label == "1/8*J"
    for member in NORMALIZED:
        assert member.generator.second(1.0) == pytest.approx(0.25, rel=1e-14)
    with pytest.raises(UnknownIdentifier):
        normalized_member(8)
    with pytest.raises(UnknownIdentifier):
        member_by_symbol("chi2")


def test_generators_reproduce_measures(reference_pair):
    for member in NORMALIZED:
        via_generator = csiszar_divergence(generator_of(member.base), reference_pair)
        assert via_generator == pytest.approx(evaluate(member.base, reference_pair), rel=1e-12)
    with pytest.raises(UnknownIdentifier):
        generator_of(MeasureId.CHI_SQUARE)


def test_measure_id_parse():
    assert MeasureId.parse("hellinger") is MeasureId.HELLINGER
    assert MeasureId.parse("Psi") is MeasureId.SYM_CHI_SQUARE
    assert MeasureId.parse(" delta ") is MeasureId.TRIANGULAR
    with pytest.raises(UnknownIdentifier):
        MeasureId.parse("renyi")


@pytest.mark.parametrize("measure", list(MeasureId)[:8])
def test_measures_are_jointly_convex(measure):
    first = sample_pair_batch(1000, 4, seed=31)
    second = sample_pair_batch(1000, 4, seed=32)
    assert mixture_convexity(lambda b: evaluate(measure, b), first, second) >= -1e-10


def test_measures_reject_nonpositive_pairs():
    class Raw:
        def arrays(self):
            return np.array([0.0, 1.0]), np.array([0.5, 0.5])

    with pytest.raises(DomainError):
        evaluate(MeasureId.HELLINGER, Raw())
