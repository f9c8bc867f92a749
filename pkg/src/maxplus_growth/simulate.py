"""Simulation of x(k) = A(k)^T ⊗ x(k-1) and growth-rate estimation.

Replicate ``r`` draws its matrices from substream ``seed.child(r)``, in
blocks of ``STEP_BLOCK`` steps from a single generator, so a replicate's
trajectory depends only on the seed and ``r``.  The state is never
renormalized: entries grow roughly linearly in k and stay exact enough in
double precision for any practical horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numba
import numpy as np

from .algebra import MaxPlusMatrix, mat_otimes, transpose
from .errors import DomainError
from .expectation import map_ordered
from .models import MatrixModel, SeedSpec, sample_matrices

STEP_BLOCK = 1 << 13


@numba.njit(cache=True, nogil=True)
def _advance_state(x, mats):
    # x <- A^T ⊗ x for each matrix in mats, in order; returns norms after each step
    steps, n, _ = mats.shape
    norms = np.empty(steps)
    y = np.empty(n)
    for s in range(steps):
        for j in range(n):
            best = mats[s, 0, j] + x[0]
            for i in range(1, n):
                v = mats[s, i, j] + x[i]
                if v > best:
                    best = v
            y[j] = best
        top = y[0]
        for j in range(n):
            x[j] = y[j]
            if y[j] > top:
                top = y[j]
        norms[s] = top
    return norms


@numba.njit(cache=True, nogil=True)
def _advance_chain(P, mats):
    # P <- P ⊗ A for each matrix in mats, in order
    steps, n, _ = mats.shape
    Q = np.empty((n, n))
    for s in range(steps):
        for i in range(n):
            for j in range(n):
                best = P[i, 0] + mats[s, 0, j]
                for k in range(1, n):
                    v = P[i, k] + mats[s, k, j]
                    if v > best:
                        best = v
                Q[i, j] = best
        P[:, :] = Q


def _blocks(K: int):
    done = 0
    while done < K:
        size = min(STEP_BLOCK, K - done)
        yield done, size
        done += size


def iterate_state(x0: MaxPlusMatrix, matrices: Iterable[MaxPlusMatrix]) -> list[MaxPlusMatrix]:
    """Apply ``x <- A^T ⊗ x`` for the given matrices; returns x(1), ..., x(k)."""
    states = []
    x = x0
    for A in matrices:
        x = mat_otimes(transpose(A), x)
        states.append(x)
    return states


def simulate_state(
    model: MatrixModel,
    x0: MaxPlusMatrix,
    K: int,
    stream: SeedSpec,
    record_every: int = 1,
) -> list[tuple[int, float]]:
    """Run K steps of the recursion; return ``(k, ||x(k)||)`` every ``record_every`` steps.

    Step K is always recorded.
    """
    if K < 1 or record_every < 1:
        raise ValueError("K and record_every must be positive")
    if x0.shape != (model.n, 1):
        raise ValueError(f"x0 must be a {model.n} x 1 column vector, got {x0.shape}")
    if not x0.is_finite():
        raise DomainError("initial state must have finite entries")

    x = np.array(x0.entries[:, 0], dtype=float)
    gen = stream.generator()
    out: list[tuple[int, float]] = []
    for start, size in _blocks(K):
        mats = sample_matrices(model, (size,), gen)
        norms = _advance_state(x, mats)
        ks = np.arange(start + 1, start + size + 1)
        keep = (ks % record_every == 0) | (ks == K)
        out.extend(zip(ks[keep].tolist(), norms[keep].tolist()))
    return out


def _final_norm(model: MatrixModel, K: int, stream: SeedSpec) -> float:
    x = np.zeros(model.n)
    gen = stream.generator()
    norm = 0.0
    for _, size in _blocks(K):
        norm = _advance_state(x, sample_matrices(model, (size,), gen))[-1]
    return float(norm)


def chain_norm_growth(model: MatrixModel, K: int, stream: SeedSpec) -> float:
    """``||A(1) ⊗ ... ⊗ A(K)|| / K`` from one sampled chain."""
    if K < 1:
        raise ValueError("K must be positive")
    gen = stream.generator()
    P = np.full((model.n, model.n), -np.inf)
    np.fill_diagonal(P, 0.0)
    for _, size in _blocks(K):
        _advance_chain(P, sample_matrices(model, (size,), gen))
    return float(P.max()) / K


@dataclass(frozen=True)
class LambdaEstimate:
    lambda_hat: float
    stderr: float
    replications: int
    horizon: int
    per_replicate: tuple[float, ...] = field(default=())

    def to_record(self) -> dict:
        return {
            "lambda_hat": self.lambda_hat,
            "stderr": self.stderr,
            "replications": self.replications,
            "horizon": self.horizon,
            "per_replicate": list(self.per_replicate),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "LambdaEstimate":
        return cls(
            lambda_hat=float(rec["lambda_hat"]),
            stderr=float(rec["stderr"]),
            replications=int(rec["replications"]),
            horizon=int(rec["horizon"]),
            per_replicate=tuple(float(v) for v in rec["per_replicate"]),
        )


def summarize(values, horizon: int) -> LambdaEstimate:
    vals = np.asarray(values, dtype=float)
    R = vals.size
    if R and (vals == vals[0]).all():
        return LambdaEstimate(float(vals[0]), 0.0, R, horizon, tuple(vals.tolist()))
    mean = math.fsum(vals.tolist()) / R
    if R > 1:
        var = math.fsum(((vals - mean) ** 2).tolist()) / (R - 1)
        se = math.sqrt(var / R)
    else:
        se = math.nan
    return LambdaEstimate(mean, se, R, horizon, tuple(vals.tolist()))


def estimate_lambda(
    model: MatrixModel,
    K: int,
    R: int,
    seed: SeedSpec,
    threads: int = 1,
) -> LambdaEstimate:
    """R independent replicates of ``||x(K)|| / K`` started from the zero vector."""
    if R < 2:
        raise ValueError("need at least 2 replications")
    if K < 1:
        raise ValueError("horizon K must be positive")
    finals = map_ordered(lambda r: _final_norm(model, K, seed.child(r)), list(range(R)), threads)
    return summarize([v / K for v in finals], K)


def estimate_chain_growth(
    model: MatrixModel,
    K: int,
    R: int,
    seed: SeedSpec,
    threads: int = 1,
) -> LambdaEstimate:
    """Replicated :func:`chain_norm_growth`, the matrix-product counterpart of
    :func:`estimate_lambda`."""
    if R < 2:
        raise ValueError("need at least 2 replications")
    vals = map_ordered(lambda r: chain_norm_growth(model, K, seed.child(r)), list(range(R)), threads)
    return summarize(vals, K)
