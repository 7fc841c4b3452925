import numpy as np
import pytest
from hypothesis import given, strategies as st

from ssgrn import em, selection, simulate
from ssgrn.errors import DataError, InfeasibleError


def test_aicc_examples():
    assert selection.aicc(0.0, 10, 0) == 0.0
    assert selection.aicc(-100.0, 100, 5) == pytest.approx(210.6383, abs=1e-4)
    with pytest.raises(InfeasibleError):
        selection.aicc(-50.0, 12, 11)


@given(st.integers(2, 10_000), st.data())
def test_correction_not_smaller_than_aic(N, data):
    P = data.draw(st.integers(0, N - 2))
    ll = data.draw(st.floats(-1e6, 1e6))
    assert selection.aicc(ll, N, P) >= selection.aic(ll, P) - 1e-9 * abs(ll)


def test_parse_k_range():
    assert selection.parse_k_range("0..4") == [0, 1, 2, 3, 4]
    assert selection.parse_k_range("1, 3") == [1, 3]
    with pytest.raises(DataError):
        selection.parse_k_range("a..b")


@pytest.fixture(scope="module")
def data():
    prm = simulate.random_ground_truth(3, 1, seed=2)
    ds, _ = simulate.generate(prm, 8, 30, seed=2)
    return ds


def test_single_candidate(data):
    rep = selection.select_k(data, [2])
    assert rep.chosen_k == 2 and len(rep.entries) == 1


def test_report_is_sorted_and_consistent(data):
    rep = selection.select_k(data, [2, 0, 1])
    assert [e.k for e in rep.entries] == [0, 1, 2]
    for e in rep.entries:
        assert e.aicc == pytest.approx(selection.aicc(e.loglik, e.N, e.P))
        assert e.loglik == rep.fits[e.k].loglik
    best = min((e for e in rep.entries if e.converged), key=lambda e: e.aicc)
    assert rep.chosen_k == best.k


def test_infeasible_k_rejected_before_fitting():
    ds, _ = simulate.generate(simulate.random_ground_truth(2, 1, 0), 3, 2, 0)
    with pytest.raises(InfeasibleError):
        selection.select_k(ds, [0, 5])


def test_no_converged_candidate(data):
    with pytest.raises(em.NumericalError):
        selection.select_k(data, [1, 2], em.FitConfig(max_iter=1, tol=1e-14))
