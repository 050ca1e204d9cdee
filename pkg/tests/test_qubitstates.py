import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spdcqubits.qubitstates import (QubitDensityMatrix, dv_witness, make_reference,
                                    random_pure_two_qubit, separable_zcov_max, spin_moments,
                                    zcov_direct, zcov_formula, zcov_maximize)


def test_ghz_moments():
    sm = spin_moments(make_reference("ghz"))
    assert all(v == pytest.approx(0, abs=1e-15) for axes in sm.mean.values() for v in axes.values())
    for pair in ((1, 2), (1, 3), (2, 3)):
        assert sm.cov["z"][pair] == pytest.approx(0.25, abs=1e-15)
        assert sm.cov["x"][pair] == pytest.approx(0, abs=1e-15)
        assert sm.cov["y"][pair] == pytest.approx(0, abs=1e-15)


def test_w_moments():
    sm = spin_moments(make_reference("w"))
    for pair in ((1, 2), (1, 3), (2, 3)):
        assert sm.cov["x"][pair] == pytest.approx(1 / 6)
        assert sm.cov["y"][pair] == pytest.approx(1 / 6)
        assert sm.cov["z"][pair] == pytest.approx(-1 / 9)


def test_dephased_ghz_matches_ghz_moments():
    ghz = spin_moments(make_reference("ghz")).flat()
    deph = spin_moments(make_reference("dephased_ghz")).flat()
    assert max(abs(ghz[k] - deph[k]) for k in ghz) < 1e-15


def test_mimic_mixture_zz_covariance():
    # the three-term mixture only reaches a third of the GHZ correlation
    sm = spin_moments(make_reference("mimic_ghz"))
    assert all(v == pytest.approx(1 / 12) for v in sm.cov["z"].values())


@pytest.mark.parametrize("kind", ["mimic_ghz", "dephased_ghz", "mixed"])
def test_separable_references(kind):
    rho = make_reference(kind)
    assert np.allclose(rho.rebuild_from_decomposition(), rho.matrix, atol=1e-15)
    assert dv_witness(rho) <= 0
    assert not rho.is_pure


def test_dv_witness_values():
    assert dv_witness(make_reference("ghz")) == pytest.approx(0, abs=1e-15)
    assert dv_witness(make_reference("w")) == pytest.approx(0, abs=1e-15)
    assert dv_witness(make_reference("mimic_ghz")) == pytest.approx(-1 / np.sqrt(6))
    assert dv_witness(make_reference("dephased_ghz")) == pytest.approx(-0.5)


def test_unknown_kind():
    with pytest.raises(ValueError):
        make_reference("cluster")


@pytest.mark.parametrize("matrix", [np.eye(3) / 3, np.eye(4), np.diag([1.5, -0.5, 0, 0]),
                                    np.array([[0.5, 1], [0, 0.5]]).repeat(2, 0).repeat(2, 1) / 2])
def test_density_matrix_validation(matrix):
    with pytest.raises(ValueError):
        QubitDensityMatrix(matrix)


def test_no_decomposition():
    with pytest.raises(ValueError):
        make_reference("ghz").rebuild_from_decomposition()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_zcov_formula_matches_direct(seed):
    c = random_pure_two_qubit(np.random.default_rng(seed), 1)[0]
    assert zcov_formula(c) == pytest.approx(zcov_direct(c), abs=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_zcov_bounded(seed):
    c = random_pure_two_qubit(np.random.default_rng(seed), 1)[0]
    assert -0.25 - 1e-12 <= zcov_formula(c) <= 0.25 + 1e-12


def test_zcov_bell_state():
    assert zcov_formula(np.array([1, 0, 0, 1]) / np.sqrt(2)) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        zcov_formula([1, 0, 0])
    with pytest.raises(ValueError):
        zcov_formula([1, 0, 0, 1])


def test_zcov_maximize_small():
    value, arg = zcov_maximize(2000, seed=3)
    assert 0.2499 <= value <= 0.25 + 1e-9
    p = np.abs(arg) ** 2
    assert p[0] == pytest.approx(0.5, abs=1e-3) and p[3] == pytest.approx(0.5, abs=1e-3)
    assert zcov_maximize(2000, seed=3)[0] == value
    with pytest.raises(ValueError):
        zcov_maximize(0)


def test_separable_bound_below_entangled():
    # product mixtures of two qubits cannot exceed 1/4 either; they stay well below here
    assert separable_zcov_max(20000, seed=0) < 0.25
