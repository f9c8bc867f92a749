"""Expectations of functionals of the product chain A_m = A(1) ⊗ ... ⊗ A(m).

Three ways to obtain a :class:`MeanEstimate`:

* :func:`mc_mean` -- Monte Carlo with standard errors.  Samples are drawn in
  fixed-size chunks; chunk ``c`` uses substream ``stream.child(c)`` and chunk
  statistics are combined in chunk order, so results do not depend on the
  number of worker threads.
* :func:`exact_mean` -- weighted enumeration of the joint support of a
  discrete model.
* :class:`FixtureSource` -- reference constants for the built-in 2 x 2
  exponential test model.

The bounds module consumes expectations through the ``ExpectationSource``
classes at the bottom of this file.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

from .algebra import MaxPlusMatrix, conjugate, rowmax
from .errors import (
    BudgetExceededError,
    EstimationError,
    FixtureUnavailableError,
    UnsupportedModelError,
)
from .models import MatrixModel, SeedSpec, chain_product, paper_test_model, sample_chains

CHUNK_SIZE = 1 << 14
DEFAULT_CAP = 10**7
_ENUM_BATCH = 1 << 15

MONTE_CARLO = "monte_carlo"
EXACT = "exact_enumeration"
FIXTURE = "fixture_constant"


# --------------------------------------------------------------------------
# functionals
# --------------------------------------------------------------------------


def _check_m(m: int) -> None:
    if not isinstance(m, int) or m < 1:
        raise ValueError(f"chain length m must be an integer >= 1, got {m!r}")


@dataclass(frozen=True)
class EntryMeans:
    """E[A_m], entrywise."""

    m: int

    def __post_init__(self):
        _check_m(self.m)

    def shape(self, n: int) -> tuple[int, ...]:
        return (n, n)

    def evaluate(self, chains: np.ndarray) -> np.ndarray:
        return chains

    @property
    def ident(self) -> str:
        return f"entry_means[m={self.m}]"


@dataclass(frozen=True)
class ConjMeans:
    """E[A_m^-]."""

    m: int

    def __post_init__(self):
        _check_m(self.m)

    def shape(self, n: int) -> tuple[int, ...]:
        return (n, n)

    def evaluate(self, chains: np.ndarray) -> np.ndarray:
        # finite models only, so plain negation is the max-plus inverse
        return -np.swapaxes(chains, -1, -2)

    @property
    def ident(self) -> str:
        return f"conj_means[m={self.m}]"


@dataclass(frozen=True)
class RowMaxConjMeans:
    """E[(A_m ⊗ 0)^-], a 1 x n row."""

    m: int

    def __post_init__(self):
        _check_m(self.m)

    def shape(self, n: int) -> tuple[int, ...]:
        return (1, n)

    def evaluate(self, chains: np.ndarray) -> np.ndarray:
        return -chains.max(axis=-1)[..., None, :]

    @property
    def ident(self) -> str:
        return f"rowmax_conj_means[m={self.m}]"


@dataclass(frozen=True)
class NormMean:
    """E||A_m||."""

    m: int

    def __post_init__(self):
        _check_m(self.m)

    def shape(self, n: int) -> tuple[int, ...]:
        return ()

    def evaluate(self, chains: np.ndarray) -> np.ndarray:
        return chains.max(axis=(-2, -1))

    @property
    def ident(self) -> str:
        return f"norm_mean[m={self.m}]"


@dataclass(frozen=True)
class VecProductNormMean:
    """E||v ⊗ A_m|| for a fixed finite 1 x n row ``v``."""

    v: MaxPlusMatrix
    m: int

    def __post_init__(self):
        _check_m(self.m)
        if self.v.rows != 1 or not self.v.is_finite():
            raise ValueError("v must be a finite 1 x n row vector")

    def shape(self, n: int) -> tuple[int, ...]:
        if self.v.cols != n:
            raise ValueError(f"v has {self.v.cols} entries, model has n={n}")
        return ()

    def evaluate(self, chains: np.ndarray) -> np.ndarray:
        v = self.v.entries[0]
        return (chains + v[:, None]).max(axis=(-2, -1))

    @property
    def ident(self) -> str:
        return f"vec_product_norm_mean[m={self.m}]"


Functional = Union[EntryMeans, ConjMeans, RowMaxConjMeans, NormMean, VecProductNormMean]


# --------------------------------------------------------------------------
# estimates
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MeanEstimate:
    value: Union[float, MaxPlusMatrix]
    stderr: Union[float, np.ndarray]
    n_samples: int
    method: str

    @property
    def is_matrix(self) -> bool:
        return isinstance(self.value, MaxPlusMatrix)

    def as_array(self) -> np.ndarray:
        return self.value.entries if self.is_matrix else np.asarray(self.value)

    def stderr_array(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.stderr, dtype=float), self.as_array().shape)


def _make_estimate(mean: np.ndarray, se: np.ndarray, n: int, method: str) -> MeanEstimate:
    if mean.ndim == 0:
        return MeanEstimate(float(mean), float(se), n, method)
    se = np.array(se, dtype=float)
    se.setflags(write=False)
    return MeanEstimate(MaxPlusMatrix._wrap(mean), se, n, method)


# --------------------------------------------------------------------------
# Monte Carlo
# --------------------------------------------------------------------------


def _chunk_bounds(n_samples: int) -> list[tuple[int, int]]:
    return [(c, min(CHUNK_SIZE, n_samples - c * CHUNK_SIZE))
            for c in range(math.ceil(n_samples / CHUNK_SIZE))]


def _chunk_stats(model, m, functionals, stream, chunk):
    c, count = chunk
    chains = sample_chains(model, m, count, stream.child(c))
    out = []
    for f in functionals:
        vals = f.evaluate(chains)
        # sequential accumulation: identical summation order for every
        # functional keeps the norm-dominance check exact in floating point
        total = np.add.accumulate(vals, axis=0)[-1]
        mu = total / count
        m2 = ((vals - mu) ** 2).sum(axis=0)
        out.append((count, total, mu, m2))
    return out


def map_ordered(fn, items: Sequence, threads: int) -> list:
    """``list(map(fn, items))``, optionally on a thread pool; order preserved."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def mc_means(
    model: MatrixModel,
    functionals: Sequence[Functional],
    n_samples: int,
    stream: SeedSpec,
    threads: int = 1,
) -> list[MeanEstimate]:
    """Estimate several functionals of the same chain length on shared samples."""
    if n_samples < 2:
        raise ValueError("Monte Carlo needs n_samples >= 2")
    ms = {f.m for f in functionals}
    if len(ms) != 1:
        raise ValueError("functionals must share one chain length")
    m = ms.pop()
    for f in functionals:
        f.shape(model.n)

    per_chunk = map_ordered(
        lambda ch: _chunk_stats(model, m, functionals, stream, ch),
        _chunk_bounds(n_samples),
        threads,
    )

    results = []
    for k in range(len(functionals)):
        n_acc, total, run_mean, m2 = per_chunk[0][k]
        for stats in per_chunk[1:]:
            nb, tb, mb, m2b = stats[k]
            n_new = n_acc + nb
            delta = mb - run_mean
            m2 = m2 + m2b + delta * delta * (n_acc * nb / n_new)
            run_mean = run_mean + delta * (nb / n_new)
            total = total + tb
            n_acc = n_new
        mean = total / n_acc
        se = np.sqrt(m2 / (n_acc - 1)) / math.sqrt(n_acc)
        results.append(_make_estimate(np.asarray(mean), np.asarray(se), n_acc, MONTE_CARLO))

    _check_norm_dominance(functionals, results)
    return results


def _check_norm_dominance(functionals, results) -> None:
    # mean of ||A|| >= ||mean of A|| holds for every finite sample set
    entry = norm = None
    for f, r in zip(functionals, results):
        if isinstance(f, EntryMeans):
            entry = r
        elif isinstance(f, NormMean):
            norm = r
    if entry is not None and norm is not None:
        if not norm.value >= float(entry.as_array().max()):
            raise EstimationError(
                f"sample mean of norms {norm.value} below norm of mean {entry.as_array().max()}"
            )


def mc_mean(
    model: MatrixModel,
    f: Functional,
    n_samples: int,
    stream: SeedSpec,
    threads: int = 1,
) -> MeanEstimate:
    return mc_means(model, [f], n_samples, stream, threads)[0]


# --------------------------------------------------------------------------
# exact enumeration
# --------------------------------------------------------------------------


def _supports(model: MatrixModel):
    if not model.is_discrete:
        raise UnsupportedModelError("exact enumeration needs discrete or constant entries")
    vals, probs = [], []
    for row in model.entries:
        for d in row:
            atoms = d.support()
            vals.append(np.array([v for v, _ in atoms]))
            probs.append(np.array([p for _, p in atoms]))
    return vals, probs


def outcome_count(model: MatrixModel, m: int) -> int:
    vals, _ = _supports(model)
    return math.prod(len(v) for v in vals) ** m


def exact_means(
    model: MatrixModel, functionals: Sequence[Functional], cap: int = DEFAULT_CAP
) -> list[MeanEstimate]:
    ms = {f.m for f in functionals}
    if len(ms) != 1:
        raise ValueError("functionals must share one chain length")
    m = ms.pop()
    n = model.n
    vals, probs = _supports(model)
    for f in functionals:
        f.shape(n)
    # one slot per entry draw, ordered (step, row, col)
    slot_vals = vals * m
    slot_probs = probs * m
    radices = np.array([len(v) for v in slot_vals], dtype=np.int64)
    count = math.prod(int(r) for r in radices)
    if count > cap:
        raise BudgetExceededError(count, cap)

    totals = [np.zeros(f.shape(n)) for f in functionals]
    for start in range(0, count, _ENUM_BATCH):
        idx = np.arange(start, min(start + _ENUM_BATCH, count), dtype=np.int64)
        draws = np.empty((idx.size, len(slot_vals)))
        weight = np.ones(idx.size)
        rem = idx
        for s in range(len(slot_vals) - 1, -1, -1):
            rem, digit = np.divmod(rem, radices[s])
            draws[:, s] = slot_vals[s][digit]
            weight *= slot_probs[s][digit]
        chains = chain_product(draws.reshape(idx.size, m, n, n))
        for k, f in enumerate(functionals):
            totals[k] = totals[k] + np.tensordot(weight, f.evaluate(chains), axes=(0, 0))

    return [_make_estimate(np.asarray(t), np.zeros_like(t), count, EXACT) for t in totals]


def exact_mean(model: MatrixModel, f: Functional, cap: int = DEFAULT_CAP) -> MeanEstimate:
    return exact_means(model, [f], cap)[0]


# --------------------------------------------------------------------------
# reference constants for the 2 x 2 exponential(1) model
# --------------------------------------------------------------------------

PAPER_ENTRY_MEANS = {1: Fraction(1), 2: Fraction(11, 4), 3: Fraction(245, 54)}
PAPER_ROWMAX_MEANS = {1: Fraction(3, 2), 2: Fraction(119, 36), 3: Fraction(1649, 324)}
PAPER_NORM_MEANS = {1: Fraction(25, 12), 2: Fraction(833, 216), 3: Fraction(21937, 3888)}
PAPER_LAMBDA = Fraction(407, 228)


def fixture_mean(f: Functional) -> MeanEstimate:
    """Reference value of ``f`` for the built-in test model."""
    m = f.m
    if m not in PAPER_NORM_MEANS:
        raise FixtureUnavailableError(f"no reference constant for {f.ident}")
    c = float(PAPER_ENTRY_MEANS[m])
    if isinstance(f, EntryMeans):
        mean = np.full((2, 2), c)
    elif isinstance(f, ConjMeans):
        mean = np.full((2, 2), -c)
    elif isinstance(f, RowMaxConjMeans):
        mean = np.full((1, 2), -float(PAPER_ROWMAX_MEANS[m]))
    elif isinstance(f, NormMean):
        mean = np.asarray(float(PAPER_NORM_MEANS[m]))
    elif isinstance(f, VecProductNormMean):
        v = f.v.entries[0]
        if v.size != 2 or v[0] != v[1]:
            raise FixtureUnavailableError("reference value needs a constant vector v")
        # ||c ⊗ A|| = c + ||A|| for a constant row c
        mean = np.asarray(v[0] + float(PAPER_NORM_MEANS[m]))
    else:
        raise FixtureUnavailableError(f"unknown functional {f!r}")
    return _make_estimate(mean, np.zeros_like(mean), 0, FIXTURE)


# --------------------------------------------------------------------------
# expectation sources consumed by the bounds
# --------------------------------------------------------------------------


class FixtureSource:
    method = FIXTURE

    def __init__(self):
        self.model = paper_test_model()

    def mean(self, f: Functional) -> MeanEstimate:
        return fixture_mean(f)


_BUNDLE = (EntryMeans, ConjMeans, RowMaxConjMeans, NormMean)


class ExactSource:
    method = EXACT

    def __init__(self, model: MatrixModel, cap: int = DEFAULT_CAP):
        _supports(model)
        self.model = model
        self.cap = cap
        self._cache: dict = {}

    def mean(self, f: Functional) -> MeanEstimate:
        if f not in self._cache:
            if isinstance(f, VecProductNormMean):
                self._cache[f] = exact_mean(self.model, f, self.cap)
            else:
                fs = [cls(f.m) for cls in _BUNDLE]
                self._cache.update(zip(fs, exact_means(self.model, fs, self.cap)))
        return self._cache[f]


class MonteCarloSource:
    """Monte Carlo expectations with disjoint substreams per chain length.

    The four plain functionals at chain length m share substream
    ``(m, 0)``; vector-product norms at chain length m use ``(m, 1)``, so
    the outer pass of a nested bound never reuses inner-phase samples.
    """

    method = MONTE_CARLO

    def __init__(self, model: MatrixModel, n_samples: int, stream: SeedSpec, threads: int = 1):
        self.model = model
        self.n_samples = n_samples
        self.stream = stream
        self.threads = threads
        self._cache: dict = {}

    def mean(self, f: Functional) -> MeanEstimate:
        if f not in self._cache:
            if isinstance(f, VecProductNormMean):
                self._cache[f] = mc_mean(
                    self.model, f, self.n_samples, self.stream.child(f.m, 1), self.threads
                )
            else:
                fs = [cls(f.m) for cls in _BUNDLE]
                ests = mc_means(
                    self.model, fs, self.n_samples, self.stream.child(f.m, 0), self.threads
                )
                self._cache.update(zip(fs, ests))
        return self._cache[f]


ExpectationSource = Union[FixtureSource, ExactSource, MonteCarloSource]


def all_functionals(v: MaxPlusMatrix, ms: Iterable[int]) -> list[Functional]:
    """The five functionals at each chain length, ``v`` feeding the vector product."""
    out: list[Functional] = []
    for m in ms:
        out.extend(cls(m) for cls in _BUNDLE)
        out.append(VecProductNormMean(v, m))
    return out


def nested_inner_vector(conj_means: MaxPlusMatrix) -> MaxPlusMatrix:
    """Row vector ``(M ⊗ 0)^-`` built from a mean matrix ``M = E[A_l^-]``."""
    return conjugate(rowmax(conj_means))
