import pytest

from medpath import study as study_mod
from medpath.model import ContractError
from medpath.selection import GridSpec
from medpath.simgen import Scenario
from medpath.study import (KEY_FIELDS, VALUE_FIELDS, StudyConfig, aggregate, run_study,
                           summary)

GRID = GridSpec((0.1, 1.0), (0.1, 1.0), (0.0, 0.3, 1.0, 10.0))


def _study(**kw):
    base = dict(scenario=Scenario(n=40, p=20, seed=2), grid=GRID, replicates=3)
    base.update(kw)
    return StudyConfig(**base)


def test_smoke_study_shape():
    res = run_study(_study())
    assert not res.failures
    assert len(res.records) == 3 * 3
    assert len(res.long_format()) == 3 * 3 * len(VALUE_FIELDS)
    agg = res.aggregate()
    assert sorted(a["method"] for a in agg) == ["MD_L", "SMD_L", "TR_L"]
    assert all(a["n"] == 3 for a in agg)


def test_parallel_study_matches_sequential():
    st = _study(replicates=2)
    assert run_study(st, 1).records == run_study(st, 2).records


def test_k_sweep_skips_oversized_dimensions():
    res = run_study(_study(replicates=1, strategies=("SMD",), k_values=(1.0, 2.0)))
    # d(40, 1) = 11 fits inside p = 20; d(40, 2) = 22 does not
    assert {(r["k"], r["d"]) for r in res.records} == {(1.0, 11)}


def test_two_stage_pair_grouping():
    res = run_study(_study(replicates=2, strategies=("SMD",), selection="two-stage",
                           group_by="pair"))
    methods = {r["method"] for r in res.records}
    assert methods == {"SMD.E_L[0.1,0.1]", "SMD.E_L[1,1]", "SMD.S_L[1,0.1]",
                       "SMD.R_L[0.1,1]"}


def test_failures_are_recorded(monkeypatch):
    def boom(*args):
        raise RuntimeError("injected")
    monkeypatch.setattr(study_mod, "run_replicate", boom)
    res = run_study(_study(replicates=2), 1)
    assert not res.records and len(res.failures) == 2
    assert "injected" in res.failures[0][2]


def test_aggregate_and_summary():
    rows = [{**{k: None for k in KEY_FIELDS}, **{v: float(i) for v in VALUE_FIELDS},
             "method": "A", "p": 10, "gamma_true": 2.0} for i in range(3)]
    rows[0]["rb_ie"] = None
    agg = aggregate(rows)
    assert len(agg) == 1 and agg[0]["tpr"] == 1.0 and agg[0]["rb_ie"] is None
    assert summary(rows, "A", p=10)["de"] == 1.0
    with pytest.raises(ContractError):
        summary(rows, "B")


def test_config_contracts():
    with pytest.raises(ContractError):
        StudyConfig(strategies=("XX",))
    with pytest.raises(ContractError):
        StudyConfig.from_dict({"bogus": 1})
    st = _study(k_values=(3.0,))
    assert StudyConfig.from_dict(st.to_dict()) == st
