import json
import math
from fractions import Fraction

import numpy as np
import pytest

from maxplus_growth.algebra import EPS, MaxPlusMatrix
from maxplus_growth.bounds import (
    ERROR_BOUND,
    LOWER_BASIC,
    LOWER_NESTED,
    LOWER_ROWMAX,
    UPPER_BASIC,
    BoundReport,
    all_bounds,
    best_bounds,
    bound_basic,
    bound_corollary,
    bound_nested,
    bound_rowmax,
    error_bound,
    error_constant,
)
from maxplus_growth.expectation import (
    EXACT,
    FIXTURE,
    EntryMeans,
    ExactSource,
    FixtureSource,
    MeanEstimate,
    NormMean,
)
from maxplus_growth.models import Constant, MatrixModel
from oracles import bernoulli_expectations

LAMBDA = 407 / 228
C_REF = 13 / 12


@pytest.fixture
def fixtures():
    return FixtureSource()


@pytest.mark.parametrize("m,lower,upper", [(1, 1.0, 2.0833), (2, 1.375, 1.9282),
                                           (3, 1.5123, 1.8807)])
def test_basic_bounds_table(fixtures, m, lower, upper):
    lo, up = bound_basic(fixtures, m)
    assert (lo.kind, up.kind) == (LOWER_BASIC, UPPER_BASIC)
    assert lo.value == pytest.approx(lower, abs=5e-5)
    assert up.value == pytest.approx(upper, abs=5e-5)
    assert lo.method == up.method == FIXTURE


@pytest.mark.parametrize("m,value", [(1, 1.5), (2, 1.6528), (3, 1.6965)])
def test_rowmax_bound(fixtures, m, value):
    assert bound_rowmax(fixtures, m).value == pytest.approx(value, abs=5e-5)


TABLE2 = {(1, 1): 1.5417, (1, 2): 1.6188, (1, 3): 1.6606,
          (2, 1): 1.6111, (2, 2): 1.6516, (2, 3): 1.6784,
          (3, 1): 1.6551, (3, 2): 1.6787, (3, 3): 1.6965}


@pytest.mark.parametrize("lm", sorted(TABLE2))
def test_nested_bound_table(fixtures, lm):
    l, m = lm
    r = bound_nested(fixtures, l, m)
    assert (r.kind, r.l, r.m) == (LOWER_NESTED, l, m)
    assert r.value == pytest.approx(TABLE2[lm], abs=5e-5)
    assert r.note is None


def test_nested_constant_inner_identity(fixtures):
    # identically distributed entries: value(l, m) = (c_l + E||A_m||) / (l + m)
    assert bound_nested(fixtures, 2, 1).value == pytest.approx((2.75 + 25 / 12) / 3, abs=1e-12)
    assert round((2.75 + 25 / 12) / 3, 4) == 1.6111


@pytest.mark.parametrize("m,value", [(1, 1.0), (2, 37 / 24), (3, (1 + 833 / 216) / 3)])
def test_corollary_bound(fixtures, m, value):
    assert bound_corollary(fixtures, m).value == pytest.approx(value, abs=1e-12)


def test_error_constant_and_bound(fixtures):
    assert error_constant(fixtures) == pytest.approx(C_REF, abs=1e-12)
    assert error_bound(fixtures, 1).value == pytest.approx(1.0833, abs=5e-5)
    assert error_bound(fixtures, 2).value == pytest.approx(0.5417, abs=5e-5)
    assert error_bound(fixtures, 3).kind == ERROR_BOUND


def test_error_constant_bernoulli(bernoulli):
    # oracle: E||A_1|| + ||E[A_1^-]||, both by explicit enumeration
    ref = bernoulli_expectations(1)
    c_ref = ref["norm"] + max(max(r) for r in ref["conj"])
    assert c_ref == Fraction(7, 16)
    assert error_constant(ExactSource(bernoulli)) == float(c_ref)


@pytest.mark.parametrize("c", [0.75, -1.5, 2.0])
def test_deterministic_model_all_bounds_coincide(c):
    src = ExactSource(MatrixModel.iid(2, Constant(c)))
    for m in (1, 2, 3):
        lo, up = bound_basic(src, m)
        assert lo.value == up.value == c
        assert bound_rowmax(src, m).value == c
        assert bound_corollary(src, m).value == c
        assert bound_nested(src, 1, m).value == c
        assert error_bound(src, m).value == 0
    best = best_bounds(all_bounds(src, [1, 2, 3]))
    assert (best.lower, best.upper) == (c, c)


def test_sandwich(fixtures):
    reports = all_bounds(fixtures, [1, 2, 3])
    for r in reports:
        if r.is_lower:
            assert r.value <= LAMBDA
        elif r.is_upper:
            assert r.value >= LAMBDA


def test_error_bound_consistency(fixtures):
    for m in (1, 2, 3):
        e_m = bound_basic(fixtures, m)[1].value - LAMBDA
        assert 0 <= e_m <= error_bound(fixtures, m).value


def test_fixture_trends_as_data(fixtures):
    lows = [bound_basic(fixtures, m)[0].value for m in (1, 2, 3)]
    ups = [bound_basic(fixtures, m)[1].value for m in (1, 2, 3)]
    assert lows == sorted(lows) and ups == sorted(ups, reverse=True)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_nested_dominates_corollary(fixtures, m):
    assert bound_nested(fixtures, 1, m - 1).value >= bound_corollary(fixtures, m).value - 1e-12


def test_best_bounds(fixtures):
    reports = all_bounds(fixtures, [1, 2, 3], kinds=(LOWER_BASIC, UPPER_BASIC, LOWER_ROWMAX))
    best = best_bounds(reports)
    assert best.lower == pytest.approx(1.6965, abs=5e-5)
    assert best.upper == pytest.approx(1.8807, abs=5e-5)
    assert best.lower_from.kind == LOWER_ROWMAX

    only = best_bounds([bound_rowmax(fixtures, 1)])
    assert only.lower == 1.5 and only.missing_upper
    with pytest.raises(ValueError):
        best_bounds([])


def test_exact_bounds_bernoulli_use_enumeration(bernoulli):
    src = ExactSource(bernoulli)
    lo, up = bound_basic(src, 2)
    ref = bernoulli_expectations(2)
    assert up.value == pytest.approx(float(ref["norm"]) / 2, abs=1e-14)
    assert lo.method == EXACT and lo.stderr == 0


class _EpsSource:
    method = "stub"

    def mean(self, f):
        if isinstance(f, EntryMeans):
            a = np.array([[EPS, 1.0], [EPS, EPS]])
            return MeanEstimate(MaxPlusMatrix(a), np.zeros((2, 2)), 0, "stub")
        if isinstance(f, NormMean):
            return MeanEstimate(1.0, 0.0, 0, "stub")
        raise AssertionError(f)


def test_eps_spectral_radius_flags_unbounded_below():
    lo, up = bound_basic(_EpsSource(), 1)
    assert lo.value == -math.inf and lo.note.startswith("unbounded_below")
    assert up.value == 1.0


def test_report_record_round_trip(fixtures):
    for r in all_bounds(fixtures, [1, 2], [1, 2]):
        rec = json.loads(json.dumps(r.to_record()))
        assert BoundReport.from_record(rec) == r
        assert ("l" in rec) == (r.kind == LOWER_NESTED)


def test_report_validation():
    with pytest.raises(ValueError):
        BoundReport("lower_nested", 1, 1.0, 0.0, "x")
    with pytest.raises(ValueError):
        BoundReport("upper_basic", 1, 1.0, 0.0, "x", l=2)
    with pytest.raises(ValueError):
        BoundReport("sideways", 1, 1.0, 0.0, "x")
    with pytest.raises(ValueError):
        bound_basic(FixtureSource(), 0)


def test_monte_carlo_nested_uses_disjoint_phases_and_records_caveat():
    from maxplus_growth.expectation import MonteCarloSource
    from maxplus_growth.models import SeedSpec, paper_test_model
    src = MonteCarloSource(paper_test_model(), 20_000, SeedSpec(11))
    r = bound_nested(src, 1, 1)
    assert r.note is not None and "inner expectation estimated" in r.note
    assert r.method == "monte_carlo"
    assert r.value == pytest.approx(1.5417, abs=6 * r.stderr)
    # inner phase on substream (1, 0), outer on (1, 1)
    assert set(map(type, src._cache)) >= {EntryMeans, NormMean}
