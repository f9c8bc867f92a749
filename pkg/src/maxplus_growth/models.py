"""Random transition-matrix models and reproducible sampling.

A :class:`MatrixModel` assigns an independent distribution to every entry of
an n x n matrix.  All draws go through the inverse CDF of a uniform variate,
and uniforms come from a counter-based Philox generator keyed by
``(seed, stream_path)`` (see :class:`SeedSpec`), so any sample is a pure
function of its key.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import numpy as np

from .algebra import MaxPlusMatrix, otimes_arrays
from .errors import ModelError

# --------------------------------------------------------------------------
# entry distributions
# --------------------------------------------------------------------------


def _finite(name: str, x: Any) -> float:
    if isinstance(x, str) and x.strip().lower() == "eps":
        raise ModelError(f"{name}: distributions with mass at eps are not supported")
    try:
        v = float(x)
    except (TypeError, ValueError) as exc:
        raise ModelError(f"{name}: expected a number, got {x!r}") from exc
    if not math.isfinite(v):
        raise ModelError(f"{name}: must be finite, got {x!r}")
    return v


@dataclass(frozen=True)
class Exponential:
    mean: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and self.mean > 0):
            raise ModelError(f"exponential mean must be positive and finite, got {self.mean}")

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return -self.mean * np.log1p(-u)

    def expected(self) -> float:
        return self.mean

    def variance(self) -> float:
        return self.mean**2

    def to_dict(self) -> dict:
        return {"dist": "exponential", "mean": self.mean}


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ModelError(f"uniform needs finite lo < hi, got ({self.lo}, {self.hi})")

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * u

    def expected(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def variance(self) -> float:
        return (self.hi - self.lo) ** 2 / 12.0

    def to_dict(self) -> dict:
        return {"dist": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Discrete:
    atoms: tuple[tuple[float, float], ...]
    _values: np.ndarray = field(init=False, repr=False, compare=False)
    _cdf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        atoms = tuple((float(v), float(p)) for v, p in self.atoms)
        if not atoms:
            raise ModelError("discrete distribution needs at least one atom")
        for v, p in atoms:
            if not math.isfinite(v):
                raise ModelError(f"discrete atom {v} is not finite")
            if not (p > 0 and math.isfinite(p)):
                raise ModelError(f"discrete probability {p} must be positive")
        total = math.fsum(p for _, p in atoms)
        if abs(total - 1.0) > 1e-12:
            raise ModelError(f"discrete probabilities sum to {total}, not 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "_values", np.array([v for v, _ in atoms]))
        cdf = np.cumsum([p for _, p in atoms])
        cdf[-1] = 1.0
        object.__setattr__(self, "_cdf", cdf)

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return self._values[np.searchsorted(self._cdf, u, side="right")]

    def expected(self) -> float:
        return math.fsum(v * p for v, p in self.atoms)

    def variance(self) -> float:
        mu = self.expected()
        return math.fsum(p * (v - mu) ** 2 for v, p in self.atoms)

    def support(self) -> tuple[tuple[float, float], ...]:
        return self.atoms

    def to_dict(self) -> dict:
        return {"dist": "discrete", "atoms": [[v, p] for v, p in self.atoms]}


@dataclass(frozen=True)
class Constant:
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ModelError(f"constant value must be finite, got {self.value}")

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return np.full(np.shape(u), self.value)

    def expected(self) -> float:
        return self.value

    def variance(self) -> float:
        return 0.0

    def support(self) -> tuple[tuple[float, float], ...]:
        return ((self.value, 1.0),)

    def to_dict(self) -> dict:
        return {"dist": "constant", "value": self.value}


DistributionSpec = Union[Exponential, Uniform, Discrete, Constant]


def dist_from_dict(d: dict) -> DistributionSpec:
    if not isinstance(d, dict) or "dist" not in d:
        raise ModelError(f"distribution entry must be an object with a 'dist' key: {d!r}")
    kind = d["dist"]
    try:
        if kind == "exponential":
            return Exponential(_finite("mean", d["mean"]))
        if kind == "uniform":
            return Uniform(_finite("lo", d["lo"]), _finite("hi", d["hi"]))
        if kind == "discrete":
            atoms = d["atoms"]
            if not isinstance(atoms, list):
                raise ModelError("discrete 'atoms' must be a list of [value, prob] pairs")
            return Discrete(
                tuple((_finite("atom value", v), _finite("atom prob", p)) for v, p in atoms)
            )
        if kind == "constant":
            return Constant(_finite("value", d["value"]))
    except KeyError as exc:
        raise ModelError(f"{kind} distribution is missing parameter {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed {kind} distribution: {d!r}") from exc
    raise ModelError(f"unknown distribution {kind!r}")


# --------------------------------------------------------------------------
# matrix model
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MatrixModel:
    """Independent per-entry distributions for a random n x n matrix."""

    n: int
    entries: tuple[tuple[DistributionSpec, ...], ...]

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ModelError(f"n must be a positive integer, got {self.n!r}")
        entries = tuple(tuple(row) for row in self.entries)
        if len(entries) != self.n or any(len(row) != self.n for row in entries):
            raise ModelError(f"entries must form a {self.n}x{self.n} grid")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def iid(cls, n: int, dist: DistributionSpec) -> "MatrixModel":
        return cls(n, tuple(tuple(dist for _ in range(n)) for _ in range(n)))

    @property
    def is_discrete(self) -> bool:
        return all(isinstance(d, (Discrete, Constant)) for row in self.entries for d in row)

    @property
    def is_finite(self) -> bool:
        # eps-mass distributions are rejected at construction
        return True

    def entry_means(self) -> np.ndarray:
        return np.array([[d.expected() for d in row] for row in self.entries])

    def transform(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms of shape (..., n, n) to matrix entries in place-order."""
        out = np.empty_like(u)
        groups: dict[DistributionSpec, list[tuple[int, int]]] = {}
        for i, row in enumerate(self.entries):
            for j, d in enumerate(row):
                groups.setdefault(d, []).append((i, j))
        for d, cells in groups.items():
            if len(cells) == self.n * self.n:
                out[...] = d.ppf(u)
            else:
                ii, jj = zip(*cells)
                out[..., list(ii), list(jj)] = d.ppf(u[..., list(ii), list(jj)])
        return out

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        first = self.entries[0][0]
        if all(d == first for row in self.entries for d in row):
            return {"n": self.n, "entries": "all", **first.to_dict()}
        return {"n": self.n, "entries": [[d.to_dict() for d in row] for row in self.entries]}

    @classmethod
    def from_dict(cls, doc: dict) -> "MatrixModel":
        if not isinstance(doc, dict):
            raise ModelError("model document must be a JSON object")
        n = doc.get("n")
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ModelError(f"'n' must be a positive integer, got {n!r}")
        entries = doc.get("entries")
        if entries == "all":
            params = {k: v for k, v in doc.items() if k not in ("n", "entries")}
            return cls.iid(n, dist_from_dict(params))
        if not isinstance(entries, list):
            raise ModelError("'entries' must be \"all\" or an n x n array")
        if len(entries) != n or any(not isinstance(r, list) or len(r) != n for r in entries):
            raise ModelError(f"'entries' must be a {n}x{n} array")
        return cls(n, tuple(tuple(dist_from_dict(d) for d in row) for row in entries))

    @classmethod
    def from_json(cls, text: str) -> "MatrixModel":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelError(f"model is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path: str | Path) -> "MatrixModel":
        return cls.from_json(Path(path).read_text())


def paper_test_model() -> MatrixModel:
    """2 x 2 model with i.i.d. exponential entries of mean 1."""
    return MatrixModel.iid(2, Exponential(1.0))


BUILTIN_MODELS = {"paper-test": paper_test_model}


# --------------------------------------------------------------------------
# seeded streams
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SeedSpec:
    """Key of an independent random substream.

    Streams with the same seed and different paths are statistically
    independent; the same key always yields the same stream.
    """

    seed: int
    stream_path: tuple[int, ...] = ()

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        path = tuple(int(i) for i in self.stream_path)
        if any(i < 0 for i in path):
            raise ValueError("stream path components must be nonnegative")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "stream_path", path)

    def child(self, *idx: int) -> "SeedSpec":
        return SeedSpec(self.seed, self.stream_path + tuple(idx))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream_path)
        return np.random.Generator(np.random.Philox(ss))


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------


def chain_product(mats: np.ndarray) -> np.ndarray:
    """Left-to-right max-plus product over axis -3 of an (..., m, n, n) array."""
    acc = mats[..., 0, :, :]
    for k in range(1, mats.shape[-3]):
        acc = otimes_arrays(acc, mats[..., k, :, :])
    return acc


def sample_matrices(model: MatrixModel, shape: tuple[int, ...], gen: np.random.Generator) -> np.ndarray:
    """Draw independent matrices into an array of shape ``shape + (n, n)``."""
    u = gen.random(tuple(shape) + (model.n, model.n))
    return model.transform(u)


def sample_chains(model: MatrixModel, m: int, count: int, stream: SeedSpec) -> np.ndarray:
    """``count`` independent products A(1) ⊗ ... ⊗ A(m), shape (count, n, n)."""
    if m < 1:
        raise ValueError("chain length m must be >= 1")
    mats = sample_matrices(model, (count, m), stream.generator())
    return chain_product(mats)


def sample_matrix(model: MatrixModel, stream: SeedSpec) -> MaxPlusMatrix:
    return MaxPlusMatrix._wrap(sample_matrices(model, (), stream.generator()))


def sample_chain(model: MatrixModel, m: int, stream: SeedSpec) -> MaxPlusMatrix:
    return MaxPlusMatrix._wrap(sample_chains(model, m, 1, stream)[0])
