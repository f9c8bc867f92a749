"""Max-plus scalar and matrix arithmetic.

The carrier is IEEE double precision with ``-inf`` standing for the null
element ``EPS``.  ``max`` and ``+`` on doubles already treat ``-inf``
correctly, so matrix operations are thin numpy wrappers.  ``+inf`` and NaN
are rejected at construction and can never be produced by the operations
below.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, DomainError

EPS = -math.inf
EPS_TOKEN = "eps"


# --------------------------------------------------------------------------
# scalars
# --------------------------------------------------------------------------

def is_eps(x: float) -> bool:
    return x == EPS


def oplus(x: float, y: float) -> float:
    return x if x >= y else y


def otimes(x: float, y: float) -> float:
    if x == EPS or y == EPS:
        return EPS
    return x + y


def sinv(x: float) -> float:
    """Max-plus inverse; ``EPS`` maps to itself."""
    if x == EPS:
        return EPS
    return -x


def spow(x: float, a: float) -> float:
    """Max-plus power ``x^a``, i.e. the ordinary product ``a * x``."""
    if x == EPS:
        if a <= 0:
            raise DomainError(f"eps raised to non-positive power {a}")
        return EPS
    return a * x


def _check_scalar(x: float) -> float:
    x = float(x)
    if math.isnan(x) or x == math.inf:
        raise DomainError(f"{x} is not an element of R u {{eps}}")
    return x


# --------------------------------------------------------------------------
# matrices
# --------------------------------------------------------------------------

class MaxPlusMatrix:
    """Immutable rows x cols grid over R u {eps}.

    Vectors are ordinary n x 1 (column) or 1 x n (row) matrices.
    """

    __slots__ = ("_a",)

    def __init__(self, entries):
        a = np.array(entries, dtype=float)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
            raise DimensionError(f"expected a non-empty 2-d grid, got shape {a.shape}")
        if np.isnan(a).any() or (a == np.inf).any():
            raise DomainError("entries must be finite reals or eps (-inf)")
        a.setflags(write=False)
        self._a = a

    @classmethod
    def _wrap(cls, a: np.ndarray) -> "MaxPlusMatrix":
        # trusted internal constructor; skips validation
        obj = cls.__new__(cls)
        a = np.ascontiguousarray(a, dtype=float)
        a.setflags(write=False)
        obj._a = a
        return obj

    # constructors --------------------------------------------------------

    @classmethod
    def null(cls, rows: int, cols: int | None = None) -> "MaxPlusMatrix":
        return cls._wrap(np.full((rows, rows if cols is None else cols), EPS))

    @classmethod
    def identity(cls, n: int) -> "MaxPlusMatrix":
        a = np.full((n, n), EPS)
        np.fill_diagonal(a, 0.0)
        return cls._wrap(a)

    @classmethod
    def zeros(cls, n: int) -> "MaxPlusMatrix":
        """The all-zeros column vector (the max-plus unit vector)."""
        return cls._wrap(np.zeros((n, 1)))

    @classmethod
    def constant(cls, rows: int, cols: int, value: float) -> "MaxPlusMatrix":
        return cls._wrap(np.full((rows, cols), _check_scalar(value)))

    # accessors -----------------------------------------------------------

    @property
    def entries(self) -> np.ndarray:
        """Read-only view of the underlying array."""
        return self._a

    @property
    def shape(self) -> tuple[int, int]:
        return self._a.shape

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def is_finite(self) -> bool:
        return bool(np.isfinite(self._a).all())

    def __getitem__(self, idx):
        return float(self._a[idx])

    def tolist(self) -> list[list[float]]:
        return self._a.tolist()

    # comparisons ---------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, MaxPlusMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._a, other._a))

    def __hash__(self) -> int:
        return hash((self.shape, self._a.tobytes()))

    def __le__(self, other: "MaxPlusMatrix") -> bool:
        """Entrywise partial order."""
        _same_shape(self, other)
        return bool((self._a <= other._a).all())

    def __ge__(self, other: "MaxPlusMatrix") -> bool:
        _same_shape(self, other)
        return bool((self._a >= other._a).all())

    # operators -----------------------------------------------------------

    def __or__(self, other: "MaxPlusMatrix") -> "MaxPlusMatrix":
        return mat_oplus(self, other)

    def __matmul__(self, other: "MaxPlusMatrix") -> "MaxPlusMatrix":
        return mat_otimes(self, other)

    def __repr__(self) -> str:
        return f"MaxPlusMatrix({format_matrix(self)!r})"


def _same_shape(A: MaxPlusMatrix, B: MaxPlusMatrix) -> None:
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch: {A.shape} vs {B.shape}")


def _require_square(A: MaxPlusMatrix) -> int:
    if not A.is_square:
        raise DimensionError(f"square matrix required, got {A.shape}")
    return A.rows


def otimes_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched max-plus product over the last two axes.

    ``a`` has shape (..., p, q) and ``b`` (..., q, r); leading axes broadcast.
    """
    return np.max(a[..., :, :, None] + b[..., None, :, :], axis=-2)


def mat_oplus(A: MaxPlusMatrix, B: MaxPlusMatrix) -> MaxPlusMatrix:
    _same_shape(A, B)
    return MaxPlusMatrix._wrap(np.maximum(A.entries, B.entries))


def mat_otimes(A: MaxPlusMatrix, B: MaxPlusMatrix) -> MaxPlusMatrix:
    if A.cols != B.rows:
        raise DimensionError(f"cannot multiply {A.shape} by {B.shape}")
    return MaxPlusMatrix._wrap(otimes_arrays(A.entries, B.entries))


def scalar_otimes(c: float, A: MaxPlusMatrix) -> MaxPlusMatrix:
    c = _check_scalar(c)
    if c == EPS:
        return MaxPlusMatrix.null(A.rows, A.cols)
    return MaxPlusMatrix._wrap(A.entries + c)


def mat_pow(A: MaxPlusMatrix, k: int) -> MaxPlusMatrix:
    n = _require_square(A)
    if k < 0:
        raise DomainError("matrix power must be a nonnegative integer")
    result = MaxPlusMatrix.identity(n)
    base = A
    # square-and-multiply; all factors are powers of A so they commute
    while k:
        if k & 1:
            result = mat_otimes(result, base)
        k >>= 1
        if k:
            base = mat_otimes(base, base)
    return result


def transpose(A: MaxPlusMatrix) -> MaxPlusMatrix:
    return MaxPlusMatrix._wrap(A.entries.T)


def conjugate(A: MaxPlusMatrix) -> MaxPlusMatrix:
    """``A^-``: transpose with entrywise max-plus inverse."""
    a = A.entries.T
    out = np.where(np.isneginf(a), EPS, -a)
    return MaxPlusMatrix._wrap(out)


def norm(A: MaxPlusMatrix) -> float:
    return float(A.entries.max())


def trace(A: MaxPlusMatrix) -> float:
    _require_square(A)
    return float(np.diagonal(A.entries).max())


def rowmax(A: MaxPlusMatrix) -> MaxPlusMatrix:
    """``A ⊗ 0``: the column vector of row maxima."""
    return MaxPlusMatrix._wrap(A.entries.max(axis=1, keepdims=True))


def spectral_radius(A: MaxPlusMatrix) -> float:
    """Max-plus spectral radius via the trace formula over powers 1..n.

    Terms whose trace is eps are skipped; eps is returned when every power
    has an eps trace (acyclic graph).
    """
    n = _require_square(A)
    rho = EPS
    P = A
    for m in range(1, n + 1):
        if m > 1:
            P = mat_otimes(P, A)
        t = trace(P)
        if t != EPS:
            # t / m rather than spow(t, 1/m): one rounding instead of two
            rho = oplus(rho, t / m)
    return rho


# --------------------------------------------------------------------------
# text format: "1,2;eps,0"
# --------------------------------------------------------------------------

def format_scalar(x: float) -> str:
    if x == EPS:
        return EPS_TOKEN
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def parse_scalar(token: str) -> float:
    token = token.strip()
    if token.lower() == EPS_TOKEN:
        return EPS
    try:
        return _check_scalar(float(token))
    except ValueError as exc:
        raise ValueError(f"bad matrix entry {token!r}") from exc


def format_matrix(A: MaxPlusMatrix) -> str:
    return ";".join(",".join(format_scalar(x) for x in row) for row in A.entries)


def parse_matrix(text: str) -> MaxPlusMatrix:
    rows = [[parse_scalar(t) for t in row.split(",")] for row in text.strip().split(";")]
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DimensionError(f"ragged matrix literal {text!r}")
    return MaxPlusMatrix(rows)


def from_rows(rows: Sequence[Iterable[float | str]]) -> MaxPlusMatrix:
    """Build a matrix from nested rows; the string ``"eps"`` is accepted."""
    return MaxPlusMatrix(
        [[parse_scalar(x) if isinstance(x, str) else x for x in row] for row in rows]
    )
