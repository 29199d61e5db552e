import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from isothc.hamiltonian import (
    ElectronicHamiltonian,
    FcidumpError,
    build_many_body_operator,
    ground_state_energy,
    norm_summary,
    parse_fcidump,
    rotate_to_h_eigenbasis,
    write_fcidump,
)

import oracles

_rng = np.random.default_rng(20240811)


def test_single_orbital_spinful_matrix():
    e, v = -0.7, 0.4
    H = ElectronicHamiltonian(1, 0.0, np.array([[e]]), np.full((1, 1, 1, 1), v))
    op = build_many_body_operator(H, spinful=True)
    assert op.n_modes == 2
    expected = np.diag([0.0, e, e, 2 * e + v])
    assert_allclose(op.matrix, expected, atol=1e-12)


def test_two_level_one_electron_ground_state():
    h = np.diag([-1.0, 1.0])
    H = ElectronicHamiltonian(2, 0.0, h, np.zeros((2, 2, 2, 2)))
    assert ground_state_energy(H, n_electrons=1) == pytest.approx(-1.0, abs=1e-12)


@pytest.mark.parametrize("n,spinful", [(1, False), (2, False), (3, False), (2, True)])
def test_operator_matches_string_oracle(n, spinful):
    H = oracles.random_hamiltonian(n, _rng)
    op = build_many_body_operator(H, spinful=spinful)
    assert_allclose(op.matrix, oracles.dense_hamiltonian(H, spinful), atol=1e-10)


@pytest.mark.parametrize("n,n_elec,spinful", [(3, 2, False), (2, 2, True), (3, 1, False)])
def test_ground_state_matches_full_ci_oracle(n, n_elec, spinful):
    H = oracles.random_hamiltonian(n, _rng)
    expected = oracles.full_ci_ground_energy(H, n_elec, spinful)
    assert ground_state_energy(H, n_elec, spinful=spinful) == pytest.approx(
        expected, abs=1e-10
    )


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_operator_is_hermitian_and_number_conserving(n, seed):
    H = oracles.random_hamiltonian(n, np.random.default_rng(seed))
    op = build_many_body_operator(H)
    assert_allclose(op.matrix, op.matrix.conj().T, atol=1e-12)
    weights = np.array([bin(x).count("1") for x in range(2**n)])
    number = np.diag(weights.astype(float))
    assert_allclose(op.matrix @ number, number @ op.matrix, atol=1e-12)


def test_mode_cap_enforced():
    H = oracles.random_hamiltonian(2, _rng)
    with pytest.raises(ValueError, match="cap"):
        build_many_body_operator(H, max_modes=1)


def test_rotation_diagonalizes_h_and_preserves_spectrum():
    H = oracles.random_hamiltonian(3, _rng)
    rotated, basis = rotate_to_h_eigenbasis(H)
    off = rotated.h - np.diag(np.diag(rotated.h))
    assert np.max(np.abs(off)) < 1e-10
    assert_allclose(basis @ basis.T, np.eye(3), atol=1e-12)
    e0 = ground_state_energy(H, 2)
    e0_rot = ground_state_energy(rotated, 2)
    assert e0_rot == pytest.approx(e0, abs=1e-10)


def test_rotation_of_diagonal_h_is_a_signed_permutation():
    h = np.diag([0.3, -1.2, 0.5])
    H = ElectronicHamiltonian(3, 0.0, h, np.zeros((3,) * 4))
    rotated, basis = rotate_to_h_eigenbasis(H)
    assert_allclose(np.abs(basis), np.eye(3)[:, np.argsort(np.diag(h))], atol=1e-12)
    assert_allclose(np.sort(np.diag(rotated.h)), np.sort(np.diag(h)), atol=1e-12)


# ---------------------------------------------------------------------------
# FCIDUMP round trips and error handling
# ---------------------------------------------------------------------------

@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_fcidump_round_trip(n, seed):
    H = oracles.random_hamiltonian(n, np.random.default_rng(seed))
    text = write_fcidump(H)
    back = parse_fcidump(text)
    assert back.n_orbitals == n
    assert_allclose(back.h, H.h, atol=1e-12)
    assert_allclose(back.eri, H.eri, atol=1e-12)
    assert back.core_energy == pytest.approx(H.core_energy, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_json_round_trip(n, seed):
    H = oracles.random_hamiltonian(n, np.random.default_rng(seed))
    back = ElectronicHamiltonian.from_json(H.to_json())
    assert_allclose(back.h, H.h, atol=1e-12)
    assert_allclose(back.eri, H.eri, atol=1e-12)


def test_parse_expands_eightfold_symmetry():
    text = "\n".join(
        [
            "&FCI NORB=2,NELEC=2,MS2=0,&END",
            " 0.5  1 1 1 1",
            " 0.25 2 1 1 1",
            " -0.3 1 1 0 0",
            " 1.75 0 0 0 0",
        ]
    )
    H = parse_fcidump(text)
    assert H.core_energy == pytest.approx(1.75)
    assert H.h[0, 0] == pytest.approx(-0.3)
    for idx in [(1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)]:
        assert H.eri[idx] == pytest.approx(0.25)


def test_parse_accepts_lowercase_header_and_orbsym():
    text = "&fci norb=1, nelec=2, ms2=0, orbsym=1, isym=1 &end\n 2.0 1 1 0 0\n"
    H = parse_fcidump(text)
    assert H.n_orbitals == 1 and H.n_electrons == 2
    assert H.h[0, 0] == pytest.approx(2.0)


def test_parse_rejects_missing_header():
    with pytest.raises(FcidumpError, match="header"):
        parse_fcidump("1.0 1 1 0 0\n&FCI\n")
    with pytest.raises(FcidumpError):
        parse_fcidump("no header at all")


def test_parse_rejects_out_of_range_index():
    with pytest.raises(FcidumpError, match="out of range"):
        parse_fcidump("&FCI NORB=2,&END\n 1.0 3 1 0 0\n")


def test_parse_rejects_conflicting_duplicates():
    text = "&FCI NORB=2,&END\n 1.0 1 2 0 0\n 2.0 2 1 0 0\n"
    with pytest.raises(FcidumpError, match="line 3"):
        parse_fcidump(text)


def test_constructor_rejects_asymmetric_tensors():
    with pytest.raises(ValueError, match="symmetric"):
        ElectronicHamiltonian(2, 0.0, np.array([[0.0, 1.0], [0.0, 0.0]]),
                              np.zeros((2,) * 4))
    eri = np.zeros((2,) * 4)
    eri[0, 1, 0, 0] = 1.0
    with pytest.raises(ValueError, match="symmetry"):
        ElectronicHamiltonian(2, 0.0, np.zeros((2, 2)), eri)


# ---------------------------------------------------------------------------
# Norm summaries
# ---------------------------------------------------------------------------

def test_norm_summary_l1_values():
    H = oracles.random_hamiltonian(2, _rng)
    summary = norm_summary(H, vtilde=np.array([[1.0, -2.0], [-2.0, 3.0]]))
    assert summary.l1_h == pytest.approx(np.abs(H.h).sum())
    assert summary.l1_v == pytest.approx(np.abs(H.eri).sum())
    assert summary.l1_vtilde == pytest.approx(8.0)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_operator_norm_bounded_by_twice_l1(n, seed):
    # spectral norm of each term is at most 1, with a factor <= 2 to spare
    H = oracles.random_hamiltonian(n, np.random.default_rng(seed))
    summary = norm_summary(H, include_operator_norms=True)
    assert summary.opnorm_h <= 2 * summary.l1_h + 1e-9
    assert summary.opnorm_v <= 2 * summary.l1_v + 1e-9
