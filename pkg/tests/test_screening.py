import numpy as np
import pytest
from hypothesis import given, strategies as st

from medpath.model import ContractError, Dataset
from medpath.screening import ScreenConfig, marginal_scores, reduced_dim, sis_screen
from oracles import brute_force_top


@pytest.mark.parametrize("n,k,d", [(50, 3, 38), (50, 4, 51), (50, 8, 102), (50, 15, 192),
                                   (50, 20, 256), (55, 15, 206)])
def test_reduced_dim_reference_values(n, k, d):
    assert reduced_dim(n, k) == d


@given(st.integers(3, 5000), st.floats(0.01, 50), st.floats(0.01, 50))
def test_reduced_dim_monotone_in_k(n, k1, k2):
    lo, hi = sorted((k1, k2))
    assert reduced_dim(n, lo) <= reduced_dim(n, hi)


@given(st.integers(3, 5000), st.floats(0.01, 50))
def test_reduced_dim_monotone_in_n(n, k):
    assert reduced_dim(n, k) <= reduced_dim(n + 1, k)


def test_reduced_dim_contracts():
    with pytest.raises(ContractError):
        reduced_dim(1, 3)
    with pytest.raises(ContractError):
        reduced_dim(50, 0)
    assert reduced_dim(50, 1e-6) == 1


def _data(rng, n=30, p=20):
    return Dataset(rng.normal(size=n), rng.normal(size=(n, p)), rng.normal(size=n))


def test_full_dimension_keeps_everything_by_score(rng):
    data = _data(rng, p=8)
    res = sis_screen(data, ScreenConfig(d_override=8))
    assert sorted(res.kept_indices) == list(range(1, 9))
    kept_scores = res.scores[res.columns]
    assert np.all(np.diff(kept_scores) <= 0)
    assert res.screened == data.subset(res.columns)


def test_perfectly_correlated_columns_win(rng):
    y = rng.normal(size=12)
    m = np.column_stack([y, rng.normal(size=12), -y])
    res = sis_screen(Dataset(rng.normal(size=12), m, y), ScreenConfig(d_override=2))
    assert set(res.kept_indices) == {1, 3}


def test_matches_brute_force(rng):
    data = _data(rng)
    res = sis_screen(data, ScreenConfig(d_override=5))
    assert list(res.columns) == brute_force_top(data.m, data.y, 5)


@given(st.integers(0, 2**32 - 1), st.integers(1, 14))
def test_kept_sets_nested(seed, d):
    data = _data(np.random.default_rng(seed), p=15)
    small = set(sis_screen(data, ScreenConfig(d_override=d)).kept_indices)
    large = set(sis_screen(data, ScreenConfig(d_override=d + 1)).kept_indices)
    assert small <= large


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 100), st.booleans())
def test_scale_invariant(seed, c, flip):
    rng = np.random.default_rng(seed)
    data = _data(rng, p=10)
    j = int(rng.integers(10))
    m = data.m.copy()
    m[:, j] *= -c if flip else c
    scaled = Dataset(data.x, m, data.y)
    cfg = ScreenConfig(d_override=4)
    assert sis_screen(data, cfg).kept_indices == sis_screen(scaled, cfg).kept_indices


def test_ties_keep_lower_index(rng):
    y = rng.normal(size=10)
    base = rng.normal(size=10)
    m = np.column_stack([base, base, base])
    res = sis_screen(Dataset(rng.normal(size=10), m, y), ScreenConfig(d_override=2))
    assert res.kept_indices == (1, 2)


def test_errors(rng):
    data = _data(rng, p=5)
    with pytest.raises(ContractError):
        sis_screen(data, ScreenConfig(d_override=6))
    m = data.m.copy()
    m[:, 2] = 1.0
    with pytest.raises(ContractError, match="m3"):
        marginal_scores(Dataset(data.x, m, data.y))
    with pytest.raises(ContractError):
        ScreenConfig(k=-1)
    assert ScreenConfig.from_dict(ScreenConfig(k=3).to_dict()) == ScreenConfig(k=3)
