"""Lower and upper bounds on the growth rate and the absolute-error bound.

Every bound is evaluated in ordinary real arithmetic once the required
expectations are available: a max-plus power ``x^(1/m)`` becomes ``x / m``
and a max-plus inverse becomes negation.  Expectations come from an
expectation source (fixture constants, exact enumeration or Monte Carlo),
and each :class:`BoundReport` records which functionals it consumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .algebra import EPS, spectral_radius
from .errors import PreconditionError
from .expectation import (
    ConjMeans,
    EntryMeans,
    ExpectationSource,
    MeanEstimate,
    NormMean,
    RowMaxConjMeans,
    VecProductNormMean,
    nested_inner_vector,
)

LOWER_BASIC = "lower_basic"
UPPER_BASIC = "upper_basic"
LOWER_ROWMAX = "lower_rowmax"
LOWER_NESTED = "lower_nested"
LOWER_COROLLARY = "lower_corollary"
ERROR_BOUND = "error_bound"

LOWER_KINDS = (LOWER_BASIC, LOWER_ROWMAX, LOWER_NESTED, LOWER_COROLLARY)
UPPER_KINDS = (UPPER_BASIC,)
KINDS = LOWER_KINDS + UPPER_KINDS + (ERROR_BOUND,)

UNBOUNDED_BELOW = "unbounded_below: spectral radius of the mean matrix is eps"
NESTED_MC_CAVEAT = "inner expectation estimated; outer mean conditioned on the frozen estimate"


@dataclass(frozen=True)
class BoundReport:
    kind: str
    m: int
    value: float
    stderr: float
    method: str
    l: Optional[int] = None
    inputs: tuple[str, ...] = ()
    note: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown bound kind {self.kind!r}")
        if (self.kind == LOWER_NESTED) != (self.l is not None):
            raise ValueError("l is carried by lower_nested reports only")
        object.__setattr__(self, "inputs", tuple(self.inputs))

    @property
    def is_lower(self) -> bool:
        return self.kind in LOWER_KINDS

    @property
    def is_upper(self) -> bool:
        return self.kind in UPPER_KINDS

    def to_record(self) -> dict:
        rec = {"kind": self.kind}
        if self.l is not None:
            rec["l"] = self.l
        rec.update(m=self.m, value=self.value, stderr=self.stderr, method=self.method,
                   inputs=list(self.inputs))
        if self.note is not None:
            rec["note"] = self.note
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "BoundReport":
        return cls(
            kind=rec["kind"],
            l=rec.get("l"),
            m=int(rec["m"]),
            value=float(rec["value"]),
            stderr=float(rec["stderr"]),
            method=rec["method"],
            inputs=tuple(rec.get("inputs", ())),
            note=rec.get("note"),
        )


def _method(*estimates: MeanEstimate) -> str:
    methods = sorted({e.method for e in estimates})
    return "+".join(methods)


def _check_m(m: int, lowest: int = 1) -> None:
    if not isinstance(m, int) or m < lowest:
        raise ValueError(f"m must be >= {lowest}, got {m!r}")


def _require_finite(est: MeanEstimate, what: str) -> np.ndarray:
    arr = est.as_array()
    if not np.isfinite(arr).all():
        raise PreconditionError(f"{what} has non-finite entries; model must be finite w.p. 1")
    return arr


def _argmax_stderr(est: MeanEstimate) -> float:
    arr = est.as_array()
    return float(est.stderr_array().flat[int(np.argmax(arr))])


def bound_basic(source: ExpectationSource, m: int) -> tuple[BoundReport, BoundReport]:
    """Spectral-radius lower bound and mean-norm upper bound at chain length m."""
    _check_m(m)
    means = source.mean(EntryMeans(m))
    norm = source.mean(NormMean(m))

    rho = spectral_radius(means.value)
    note = None
    if rho == EPS:
        lower_value, note = -math.inf, UNBOUNDED_BELOW
    else:
        lower_value = rho / m
    # a cycle mean averages entries, so its stderr is at most the largest entry stderr
    lower_se = float(means.stderr_array().max()) / m
    lower = BoundReport(LOWER_BASIC, m, lower_value, lower_se, _method(means),
                        inputs=(EntryMeans(m).ident,), note=note)
    upper = BoundReport(UPPER_BASIC, m, norm.value / m, norm.stderr / m, _method(norm),
                        inputs=(NormMean(m).ident,))
    return lower, upper


def bound_rowmax(source: ExpectationSource, m: int) -> BoundReport:
    """Lower bound from the mean of the conjugated row-maximum vector."""
    _check_m(m)
    est = source.mean(RowMaxConjMeans(m))
    arr = _require_finite(est, "E[(A_m ⊗ 0)^-]")
    value = -float(arr.max()) / m
    return BoundReport(LOWER_ROWMAX, m, value, _argmax_stderr(est) / m, _method(est),
                       inputs=(RowMaxConjMeans(m).ident,))


def bound_nested(source: ExpectationSource, l: int, m: int) -> BoundReport:
    """Two-phase lower bound.

    Phase 1 freezes ``M = E[A_l^-]``; phase 2 averages ``||v ⊗ A_m||`` with
    ``v = (M ⊗ 0)^-`` over samples independent of phase 1.
    """
    _check_m(l)
    _check_m(m)
    inner = source.mean(ConjMeans(l))
    _require_finite(inner, "E[A_l^-]")
    v = nested_inner_vector(inner.value)
    outer = source.mean(VecProductNormMean(v, m))
    if not math.isfinite(outer.value):
        raise PreconditionError("outer expectation is not finite")

    # v_i = -max_j M_ij, and the norm moves at most one-for-one with v
    inner_se = float(inner.stderr_array().max())
    se = math.hypot(outer.stderr, inner_se) / (l + m)
    note = NESTED_MC_CAVEAT if inner_se > 0 else None
    return BoundReport(LOWER_NESTED, m, outer.value / (l + m), se, _method(inner, outer), l=l,
                       inputs=(ConjMeans(l).ident, VecProductNormMean(v, m).ident), note=note)


def _conj_norm(source: ExpectationSource) -> tuple[float, float, MeanEstimate]:
    """``||E[A_1^-]||`` with the stderr of the maximizing entry."""
    est = source.mean(ConjMeans(1))
    arr = _require_finite(est, "E[A_1^-]")
    return float(arr.max()), _argmax_stderr(est), est


def bound_corollary(source: ExpectationSource, m: int) -> BoundReport:
    """Lower bound ``(-||E[A_1^-]|| + E||A_{m-1}||) / m`` with ``E||A_0|| = 0``."""
    _check_m(m)
    c, c_se, conj = _conj_norm(source)
    used = [conj]
    inputs = [ConjMeans(1).ident]
    prev, prev_se = 0.0, 0.0
    if m > 1:
        norm = source.mean(NormMean(m - 1))
        prev, prev_se = norm.value, norm.stderr
        used.append(norm)
        inputs.append(NormMean(m - 1).ident)
    # the two inputs may share samples, so add stderrs rather than in quadrature
    return BoundReport(LOWER_COROLLARY, m, (-c + prev) / m, (c_se + prev_se) / m,
                       _method(*used), inputs=tuple(inputs))


def _error_constant(source: ExpectationSource) -> tuple[float, float, str, tuple[str, ...]]:
    norm = source.mean(NormMean(1))
    c, c_se, conj = _conj_norm(source)
    return (norm.value + c, norm.stderr + c_se, _method(norm, conj),
            (NormMean(1).ident, ConjMeans(1).ident))


def error_constant(source: ExpectationSource) -> float:
    """``E||A_1|| + ||E[A_1^-]||``."""
    return _error_constant(source)[0]


def error_bound(source: ExpectationSource, m: int) -> BoundReport:
    """Bound on ``E||A_m|| / m - lambda``."""
    _check_m(m)
    value, se, method, inputs = _error_constant(source)
    return BoundReport(ERROR_BOUND, m, value / m, se / m, method, inputs=inputs)


@dataclass(frozen=True)
class BestBounds:
    lower: Optional[float]
    lower_stderr: Optional[float]
    upper: Optional[float]
    upper_stderr: Optional[float]
    lower_from: Optional[BoundReport] = field(default=None, compare=False)
    upper_from: Optional[BoundReport] = field(default=None, compare=False)

    @property
    def missing_lower(self) -> bool:
        return self.lower is None

    @property
    def missing_upper(self) -> bool:
        return self.upper is None


def best_bounds(reports: Iterable[BoundReport]) -> BestBounds:
    """Tightest lower and upper values; a missing side is reported as None."""
    reports = list(reports)
    if not reports:
        raise ValueError("no bound reports given")
    lowers = [r for r in reports if r.is_lower]
    uppers = [r for r in reports if r.is_upper]
    lo = max(lowers, key=lambda r: r.value) if lowers else None
    up = min(uppers, key=lambda r: r.value) if uppers else None
    return BestBounds(
        lower=lo.value if lo else None,
        lower_stderr=lo.stderr if lo else None,
        upper=up.value if up else None,
        upper_stderr=up.stderr if up else None,
        lower_from=lo,
        upper_from=up,
    )


def all_bounds(source: ExpectationSource, ms: Iterable[int], ls: Iterable[int] = (),
               kinds: Iterable[str] = KINDS) -> list[BoundReport]:
    """Evaluate the requested bound kinds over a grid of chain lengths."""
    kinds = set(kinds)
    ms = list(ms)
    ls = list(ls) or ms
    out: list[BoundReport] = []
    for m in ms:
        if kinds & {LOWER_BASIC, UPPER_BASIC}:
            lower, upper = bound_basic(source, m)
            out.extend(r for r in (lower, upper) if r.kind in kinds)
        if LOWER_ROWMAX in kinds:
            out.append(bound_rowmax(source, m))
        if LOWER_COROLLARY in kinds:
            out.append(bound_corollary(source, m))
        if ERROR_BOUND in kinds:
            out.append(error_bound(source, m))
    if LOWER_NESTED in kinds:
        out.extend(bound_nested(source, l, m) for l in ls for m in ms)
    return out
