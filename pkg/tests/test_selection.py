from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from medpath.metrics import MetricsReport
from medpath.model import ContractError, Dataset, Scaling
from medpath.penalties import PenaltyConfig
from medpath.selection import (GridEntry, GridSpec, _select, grid_search, method_label,
                               stage_one, two_stage_select)
from medpath.solver import SolverConfig, fit, restate
from conftest import random_dataset

SMALL = GridSpec((0.1, 1.0), (0.1, 1.0), (0.0, 0.3, 1.0, 10.0), "MD")


def test_default_grid_size():
    g = GridSpec()
    pairs = {(a, b) for a, b, _ in g.triples()}
    assert len(pairs) == 49
    assert len(g) == 3528 == len(list(g.triples()))


def test_grid_contracts():
    with pytest.raises(ContractError):
        GridSpec(lambda_alpha_values=(1.0, 0.5))
    with pytest.raises(ContractError):
        GridSpec(lambda_beta_values=())
    with pytest.raises(ContractError):
        GridSpec.from_dict({"lambdas": [1]})
    assert GridSpec.from_dict(SMALL.to_dict()) == SMALL


def test_single_point_grid(rng):
    data = random_dataset(rng, n=30, p=5)
    res = grid_search(data, GridSpec((0.5,), (0.5,), (0.5,), "SMD"))
    assert res.best == 0 and res.ties == [0]


def test_huge_penalty_wins_on_noise(rng):
    n, p = 40, 6
    data = Dataset(rng.binomial(1, 0.5, n).astype(float), rng.normal(size=(n, p)),
                   rng.normal(size=n))
    grid = GridSpec((0.01, 1e6), (0.01, 1e6), (0.3, 1e6), "SMD")
    res = grid_search(data, grid)
    best = res.best_entry
    assert best.fit.q == 0
    assert best.requested == (1e6, 1e6, 1e6)
    bics = [e.fit.bic for e in res.table]
    assert best.fit.bic == min(bics)


def test_md_zero_gamma_is_a_failure(rng):
    data = random_dataset(rng, n=30, p=4)
    res = grid_search(data, SMALL)
    failed = [e for e in res.table if not e.ok]
    assert failed and all(e.requested[2] == 0 for e in failed)
    assert res.best_entry.ok


@pytest.mark.parametrize("scaling", ["none", "full"])
def test_grid_entries_match_direct_fits(rng, scaling):
    data = random_dataset(rng, n=30, p=4, signal=2.0)
    res = grid_search(data, SMALL, scaling=scaling)
    sc = Scaling.of(data, scaling)
    cfg = SolverConfig(record_history=False)
    for e in res.table:
        if not e.ok:
            continue
        direct = fit(sc.apply(data), e.config, cfg)
        direct = restate(direct, sc.to_raw(direct.params), e.config, cfg, sc.centered(data))
        assert e.fit.bic == pytest.approx(direct.bic, rel=1e-6)
        np.testing.assert_allclose(e.fit.params.beta, direct.params.beta, atol=1e-5)


def test_pathway_grid(rng):
    data = random_dataset(rng, n=30, p=3, signal=2.0)
    base = PenaltyConfig(variant="pathway", kappa=0.5)
    res = grid_search(data, GridSpec((0.1, 1.0), (0.1,), (0.3, 1.0), "SMD"), base)
    assert len(res.table) == 4 and all(e.ok for e in res.table)
    assert all(e.config.variant == "pathway" for e in res.table)


def test_repeated_and_parallel_searches_identical(rng):
    data = random_dataset(rng, n=30, p=6, signal=2.0)
    a = grid_search(data, SMALL, scaling="full")
    b = grid_search(data, SMALL, scaling="full")
    c = grid_search(data, SMALL, scaling="full", jobs=2)
    assert a.best == b.best == c.best
    assert a.to_csv() == b.to_csv() == c.to_csv()


def test_shared_cache_gives_same_answer(rng):
    data = random_dataset(rng, n=30, p=6, signal=2.0)
    cache = {}
    grid_search(data, GridSpec((0.1, 1.0), (0.1, 1.0), (0.0, 1.0), "TR"), cache=cache)
    warm = grid_search(data, SMALL, cache=cache)
    cold = grid_search(data, SMALL)
    assert warm.to_csv() == cold.to_csv()


def _fake_entry(la, lb, lg, value):
    cfg = PenaltyConfig(lambda_alpha=la, lambda_beta=lb, lambda_gamma=lg, strategy="SMD")
    return GridEntry((la, lb, lg), cfg, SimpleNamespace(bic=value, ok=True))


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=12),
       st.floats(-1e4, 1e4, allow_nan=False))
def test_selection_invariant_to_constant_shift(values, shift):
    values = [round(v, 3) for v in values]
    table = [_fake_entry(0.1 * (i + 1), 1.0, 0.3, v) for i, v in enumerate(values)]
    shifted = [_fake_entry(0.1 * (i + 1), 1.0, 0.3, v + shift) for i, v in enumerate(values)]
    assert _select(table)[0] == _select(shifted)[0]


def test_ties_go_to_larger_penalty():
    table = [_fake_entry(0.1, 0.1, 0.3, 5.0), _fake_entry(1.0, 1.0, 0.3, 5.0),
             _fake_entry(2.0, 2.0, 0.3, 6.0)]
    best, ties = _select(table)
    assert best == 1 and ties == [0, 1]


def test_method_labels():
    assert method_label(PenaltyConfig(lambda_alpha=1, lambda_beta=1)) == "TR.E_L"
    assert method_label(PenaltyConfig(lambda_alpha=1, lambda_beta=0.01)) == "TR.S_L"
    cfg = PenaltyConfig(variant="pathway", lambda_alpha=0.1, lambda_beta=1,
                        lambda_gamma=0.3, strategy="SMD")
    assert method_label(cfg) == "SMD.R_P"


def _sample(rng, configs):
    rows = []
    for cfg in configs:
        m = MetricsReport(tpr=float(rng.random()), tnr=float(rng.random()))
        rows.append((cfg, SimpleNamespace(bic=float(rng.normal()), ok=True), m))
    return rows


CONFIGS = [PenaltyConfig(lambda_alpha=a, lambda_beta=b) for a in (0.1, 1.0) for b in (0.1, 1.0)]


def test_two_stage_one_sample(rng):
    sample = _sample(rng, CONFIGS)
    out = two_stage_select([sample])
    for label, rep in out.items():
        rows = [r for r in sample if method_label(r[0]) == label]
        best = min(rows, key=lambda r: r[1].bic)
        assert rep.tpr == best[2].tpr


def test_two_stage_identical_samples(rng):
    sample = _sample(rng, CONFIGS)
    assert two_stage_select([sample, sample]) == two_stage_select([sample])


def test_two_stage_matches_hand_means(rng):
    samples = [_sample(rng, CONFIGS) for _ in range(20)]
    out = two_stage_select(samples)
    for label, rep in out.items():
        picks = []
        for s in samples:
            rows = [r for r in s if method_label(r[0]) == label]
            picks.append(min(rows, key=lambda r: r[1].bic)[2])
        assert rep.tpr == pytest.approx(np.mean([p.tpr for p in picks]))
        assert rep.tnr == pytest.approx(np.mean([p.tnr for p in picks]))


def test_two_stage_contracts(rng):
    with pytest.raises(ContractError):
        stage_one([])
    with pytest.raises(ContractError):
        stage_one([_sample(rng, CONFIGS), _sample(rng, CONFIGS[:2])])
