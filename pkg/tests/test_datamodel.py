import numpy as np
import pytest
from hypothesis import given, strategies as st

from ssgrn.datamodel import (
    Dims,
    ExpressionDataset,
    ModelParams,
    assemble_graph_matrix,
    disassemble_graph_matrix,
    max_hidden_k,
    param_count,
)
from ssgrn.errors import DataError, InfeasibleError


@pytest.mark.parametrize("p, k, expected", [(58, 4, 3844), (1, 0, 1), (2, 2, 16)])
def test_param_count(p, k, expected):
    assert param_count(p, k) == expected


@pytest.mark.parametrize(
    "p, T, n_R, expected", [(58, 10, 44, 101), (2, 10, 50, 29)]
)
def test_max_hidden_k(p, T, n_R, expected):
    assert max_hidden_k(p, T, n_R) == expected


def test_max_hidden_k_infeasible():
    with pytest.raises(InfeasibleError):
        max_hidden_k(1, 1, 1)


@given(st.integers(1, 40), st.integers(1, 30), st.integers(1, 60))
def test_max_hidden_k_is_largest_strict_solution(p, T, n_R):
    n = p * T * n_R
    brute = [k for k in range(0, 500) if p * p + 2 * k * p + k * k < n]
    if not brute:
        with pytest.raises(InfeasibleError):
            max_hidden_k(p, T, n_R)
    else:
        assert max_hidden_k(p, T, n_R) == max(brute)


@given(st.integers(1, 30), st.integers(0, 30))
def test_param_count_increasing_in_k(p, k):
    assert param_count(p, k + 1) > param_count(p, k)


@given(st.integers(1, 20), st.integers(2, 15), st.integers(1, 30), st.integers(0, 20))
def test_feasibility_matches_param_count(p, T, n_R, k):
    d = Dims(p, T, n_R, k)
    assert d.feasible == (param_count(p, k) < p * T * n_R)


def test_dims_validation():
    with pytest.raises(DataError):
        Dims(0, 10, 1)
    with pytest.raises(DataError):
        Dims(2, 1, 1)


def _params(B, Z, A, F, s2=1.0):
    return ModelParams(F=F, A=A, Z=Z, B=B, sigma2_xi=s2)


def test_assemble_zero():
    g = assemble_graph_matrix(_params(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros((1, 2)), np.zeros((1, 1))))
    assert g.G.shape == (3, 3)
    assert not g.G.any()


def test_assemble_identity_blocks():
    g = assemble_graph_matrix(_params(np.eye(2), np.zeros((2, 1)), np.zeros((1, 2)), np.ones((1, 1))))
    np.testing.assert_array_equal(g.G, np.eye(3))
    assert g.block_of(0, 2) == "Z" and g.block_of(2, 0) == "A" and g.block_of(2, 2) == "F"


@given(st.integers(1, 5), st.integers(0, 4), st.integers(0, 2**31 - 1))
def test_assemble_round_trip(p, k, seed):
    rng = np.random.default_rng(seed)
    prm = _params(rng.normal(size=(p, p)), rng.normal(size=(p, k)),
                  rng.normal(size=(k, p)), rng.normal(size=(k, k)))
    blocks = disassemble_graph_matrix(assemble_graph_matrix(prm))
    for name in "FAZB":
        np.testing.assert_array_equal(blocks[name], getattr(prm, name))


def test_model_params_invariants():
    with pytest.raises(DataError):
        _params(np.eye(2), np.zeros((2, 1)), np.zeros((1, 2)), np.eye(1), s2=0.0)
    with pytest.raises(DataError):
        ModelParams(F=np.eye(1), A=np.zeros((1, 2)), Z=np.zeros((2, 1)), B=np.eye(2),
                    sigma2_xi=1.0, sigma2_eta=2.0)
    with pytest.raises(DataError):
        ModelParams(F=np.eye(1), A=np.zeros((1, 2)), Z=np.zeros((2, 1)), B=np.eye(2),
                    sigma2_xi=1.0, Q0=[-1.0])
    prm = _params(np.eye(2), np.zeros((2, 1)), np.zeros((1, 2)), np.eye(1))
    np.testing.assert_array_equal(prm.Q0, [1.0])
    np.testing.assert_array_equal(prm.a0, [0.0])
    with pytest.raises(ValueError):
        prm.B[0, 0] = 3.0


def test_dataset_validation():
    v = np.zeros((2, 3, 4))
    ds = ExpressionDataset(v, ("a", "b"))
    assert ds.dims == Dims(2, 3, 4)
    assert ds.series().shape == (4, 3, 2)
    with pytest.raises(DataError):
        ExpressionDataset(v, ("a", "a"))
    with pytest.raises(DataError):
        ExpressionDataset(v, ("a",))
    bad = v.copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(DataError):
        ExpressionDataset(bad, ("a", "b"))
