import json
import math

import numpy as np
import pytest

from maxplus_growth.algebra import MaxPlusMatrix, norm
from maxplus_growth.errors import ModelError
from maxplus_growth.models import (
    Constant,
    Discrete,
    Exponential,
    MatrixModel,
    SeedSpec,
    Uniform,
    paper_test_model,
    sample_chain,
    sample_chains,
    sample_matrices,
    sample_matrix,
)

S = SeedSpec(12345)


def test_paper_model_json_is_bit_exact():
    doc = {"n": 2, "entries": "all", "dist": "exponential", "mean": 1.0}
    assert MatrixModel.from_dict(doc) == paper_test_model()
    assert paper_test_model().to_dict() == doc
    assert json.loads(json.dumps(paper_test_model().to_dict())) == doc


def test_per_entry_model_round_trip():
    doc = {
        "n": 2,
        "entries": [
            [{"dist": "exponential", "mean": 2.0}, {"dist": "uniform", "lo": -1.0, "hi": 1.0}],
            [{"dist": "discrete", "atoms": [[0.0, 0.25], [3.0, 0.75]]},
             {"dist": "constant", "value": 0.5}],
        ],
    }
    model = MatrixModel.from_dict(doc)
    assert model.to_dict() == doc
    assert not model.is_discrete
    assert model.entry_means().tolist() == [[2.0, 0.0], [2.25, 0.5]]


@pytest.mark.parametrize("doc", [
    {"n": 0, "entries": "all", "dist": "constant", "value": 1},
    {"n": 2, "entries": "all", "dist": "exponential", "mean": -1},
    {"n": 2, "entries": "all", "dist": "uniform", "lo": 1, "hi": 1},
    {"n": 2, "entries": "all", "dist": "discrete", "atoms": [[0, 0.5], [1, 0.4]]},
    {"n": 2, "entries": "all", "dist": "discrete", "atoms": [["eps", 0.5], [1, 0.5]]},
    {"n": 2, "entries": "all", "dist": "constant", "value": "eps"},
    {"n": 2, "entries": "all", "dist": "cauchy"},
    {"n": 2, "entries": "all", "dist": "exponential"},
    {"n": 2, "entries": [[{"dist": "constant", "value": 1}]]},
])
def test_invalid_models_rejected(doc):
    with pytest.raises(ModelError):
        MatrixModel.from_dict(doc)


def test_eps_mass_is_flagged_not_silently_accepted():
    with pytest.raises(ModelError, match="eps"):
        MatrixModel.from_dict({"n": 1, "entries": "all", "dist": "constant", "value": "eps"})


def test_constant_and_point_mass_samples():
    c = MatrixModel.iid(2, Constant(1.75))
    assert sample_matrix(c, S) == MaxPlusMatrix.constant(2, 2, 1.75)
    assert sample_matrix(c, S.child(9)) == MaxPlusMatrix.constant(2, 2, 1.75)
    z = MatrixModel.iid(2, Discrete(((0.0, 1.0),)))
    assert sample_matrix(z, S) == MaxPlusMatrix.constant(2, 2, 0.0)


def test_sample_chain_m1_matches_sample_matrix():
    model = paper_test_model()
    for k in range(5):
        assert sample_chain(model, 1, S.child(k)) == sample_matrix(model, S.child(k))


def test_sample_chain_constant_model():
    c = MatrixModel.iid(2, Constant(1.5))
    for m in (1, 2, 5):
        assert sample_chain(c, m, S) == MaxPlusMatrix.constant(2, 2, 1.5 * m)


def test_reproducibility_and_stream_separation():
    model = paper_test_model()
    a = sample_chains(model, 3, 100, SeedSpec(7, (1, 2)))
    b = sample_chains(model, 3, 100, SeedSpec(7, (1, 2)))
    c = sample_chains(model, 3, 100, SeedSpec(7, (1, 3)))
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)
    with pytest.raises(ValueError):
        SeedSpec(-1)
    with pytest.raises(ValueError):
        SeedSpec(1, (-2,))


def test_stream_independence():
    # matrices keyed by sample index i and j != i are uncorrelated
    model = paper_test_model()
    N = 100_000
    gen_i = SeedSpec(99, (0,)).generator()
    gen_j = SeedSpec(99, (1,)).generator()
    X = sample_matrices(model, (N,), gen_i).reshape(N, -1)
    Y = sample_matrices(model, (N,), gen_j).reshape(N, -1)
    for p in range(4):
        for q in range(4):
            r = np.corrcoef(X[:, p], Y[:, q])[0, 1]
            assert abs(r) < 4 / math.sqrt(N)


@pytest.mark.parametrize("dist", [
    Exponential(1.0),
    Exponential(2.5),
    Uniform(-1.0, 3.0),
    Discrete(((0.0, 0.5), (1.0, 0.5))),
    Discrete(((-2.0, 0.1), (0.5, 0.6), (4.0, 0.3))),
])
def test_distribution_moments(dist):
    N = 1_000_000
    x = dist.ppf(SeedSpec(5, (3,)).generator().random(N))
    mu, var = dist.expected(), dist.variance()
    se_mean = math.sqrt(var / N)
    assert abs(x.mean() - mu) <= 5 * se_mean
    # second moment about the true mean; its stderr is sqrt((mu4 - var^2) / N)
    sq = (x - mu) ** 2
    se_var = math.sqrt(np.var(sq) / N)
    assert abs(sq.mean() - var) <= 5 * se_var + 1e-12


def test_exponential_entry_means():
    N = 1_000_000
    mats = sample_chains(paper_test_model(), 1, N, SeedSpec(2024))
    means = mats.mean(axis=0)
    assert np.all(np.abs(means - 1.0) <= 0.003)


def test_exponential_chain_norm_mean():
    N = 1_000_000
    chains = sample_chains(paper_test_model(), 2, N, SeedSpec(2025))
    norms = chains.max(axis=(1, 2))
    assert abs(norms.mean() - 833 / 216) <= 0.01
    assert norm(MaxPlusMatrix(chains[0])) == norms[0]


def test_mixed_model_transform_places_each_distribution():
    model = MatrixModel(2, ((Constant(1.0), Constant(2.0)), (Constant(3.0), Exponential(1.0))))
    M = sample_matrix(model, S)
    assert (M[0, 0], M[0, 1], M[1, 0]) == (1.0, 2.0, 3.0)
    assert M[1, 1] > 0
