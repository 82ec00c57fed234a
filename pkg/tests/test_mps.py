import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import GRID5, dense_operator, dense_ring_state, ring_tolerance
from tkphase import mps

g_values = st.floats(-1.0, 1.0, allow_nan=False)
families = st.sampled_from(mps.FAMILIES)


def spectral_radius(m: np.ndarray) -> float:
    """High-precision oracle; double-precision eig loses ~1e-8 on the near-defective g~0 spectra."""
    mp.mp.dps = 40
    ev = mp.eig(mp.matrix([[mp.mpc(complex(x)) for x in row] for row in m]), left=False, right=False)
    return float(max(abs(e) for e in ev))


# ---------------------------------------------------------------- tensors


def test_spin_half_tensors_g1():
    t = mps.build_family(mps.SPIN_HALF, 1.0).tensors
    np.testing.assert_array_equal(t[0], [[0, 0], [1, 1]])
    np.testing.assert_array_equal(t[1], [[1, 1], [0, 0]])


@given(g_values)
def test_tensor_invariants(g):
    for fam in mps.FAMILIES:
        f = mps.build_family(fam, g)
        assert f.bond_dim == 2
        assert f.d == mps.local_dim(fam)
    spin_one = mps.build_family(mps.SPIN_ONE, g).tensors
    np.testing.assert_array_equal(spin_one[2], spin_one[0].conj())
    half = mps.build_family(mps.SPIN_HALF, g).tensors
    np.testing.assert_array_equal(half[1], [[1, g], [0, 0]])


@pytest.mark.parametrize("g", [-1.0001, 1.5, float("nan")])
def test_domain_error(g):
    with pytest.raises(mps.DomainError):
        mps.build_family(mps.SPIN_HALF, g)


def test_unknown_family():
    with pytest.raises(ValueError):
        mps.build_family("spin-two", 0.0)


def test_spin_one_g1_is_product_of_zero_states():
    psi = dense_ring_state(mps.build_family(mps.SPIN_ONE, 1.0).tensors, 4)
    target = np.zeros(81)
    target[int("1111", 3)] = 1.0
    assert abs(abs(psi @ target) - 1) < 1e-12


def test_operator_basis():
    for d in (2, 3):
        b = mps.operator_basis(d)
        for m in b.matrices:
            assert np.abs(m - m.conj().T).max() < 1e-14
    b3 = mps.operator_basis(3)
    total = sum(b3.matrices[i] for i in b3.squared)
    assert np.abs(total - 2 * np.eye(3)).max() < 1e-14
    assert mps.operator_basis(2).squared == ()


def test_string_phase_identity():
    b = mps.operator_basis(3).matrices
    rhs = -1.5 * b[5] + 0.5 * b[3] + 0.5 * b[4]
    assert np.abs(mps.STRING_PHASE - rhs).max() < 1e-14
    # exp(i pi tau^z) from its eigen-decomposition
    direct = np.diag(np.exp(1j * np.pi * np.diag(mps.TAU_Z).real))
    assert np.abs(direct - mps.STRING_PHASE).max() < 1e-14


# ----------------------------------------------------------- transfer matrix


@given(families, g_values)
def test_fixed_point_invariants(family, g):
    tm = mps.transfer_fixed_points(mps.build_family(family, g))
    assert abs(spectral_radius(tm.matrix) - 1) < 1e-12
    for m in (tm.left, tm.right):
        assert np.abs(m - m.conj().T).max() < 1e-12
        assert np.linalg.eigvalsh(m).min() > -1e-10
    assert abs(np.trace(tm.left @ tm.right) - 1) < 1e-12
    # fixed-point equations
    b = tm.tensors
    r_img = np.einsum("sab,bc,sdc->ad", b, tm.right, b.conj())
    l_img = np.einsum("sba,bc,scd->ad", b.conj(), tm.left, b)
    assert np.abs(r_img - tm.right).max() < 1e-10
    assert np.abs(l_img - tm.left).max() < 1e-10


def test_spin_half_g_minus1_fixed_points_dense_oracle():
    # oracle: eigenvectors of the 4x4 transfer matrix and its transpose, no normalization tricks
    t = mps.transfer_operator(mps.family_tensors(mps.SPIN_HALF, -1.0))
    w, vr = np.linalg.eig(t)
    wl, vl = np.linalg.eig(t.T)
    r = vr[:, np.argmax(abs(w))].reshape(2, 2)
    l = vl[:, np.argmax(abs(wl))].reshape(2, 2).T
    r, l = r / np.trace(r) * 2, l / np.trace(l @ (r / np.trace(r) * 2))
    tm = mps.transfer_fixed_points(mps.build_family(mps.SPIN_HALF, -1.0))
    np.testing.assert_allclose(tm.right, r, atol=1e-10)
    np.testing.assert_allclose(tm.left, l, atol=1e-10)
    assert abs(tm.scale - np.abs(w).max()) < 1e-12


def test_degenerate_irreducible_spectrum_raises():
    # period-2 chain: transfer eigenvalues +1 and -1
    t = np.array([[[0, 1], [0, 0]], [[0, 0], [1, 0]]], dtype=complex)
    fam = mps.MpsFamily(mps.SPIN_HALF, 0.0, t)
    with pytest.raises(mps.DegeneracyError) as exc:
        mps.transfer_fixed_points(fam)
    assert exc.value.gap < 1e-12


def test_g0_points_resolved_by_reduction():
    for family in mps.FAMILIES:
        tm = mps.transfer_fixed_points(mps.build_family(family, 0.0))
        assert tm.gap >= 0
        assert abs(np.trace(tm.left @ tm.right) - 1) < 1e-12


def test_no_grid_point_is_rejected():
    for family in mps.FAMILIES:
        for g in np.linspace(-1, 1, 21):
            mps.right_canonicalize(mps.build_family(family, g))


# ----------------------------------------------------------- canonical form


@given(families, g_values)
def test_right_canonical(family, g):
    fam = mps.right_canonicalize(mps.build_family(family, g))
    gram = np.einsum("sab,scb->ac", fam.tensors, fam.tensors.conj())
    assert np.abs(gram - np.eye(2)).max() < 1e-10
    tm = mps.transfer_fixed_points(fam)
    assert np.abs(tm.right - np.eye(2)).max() < 1e-10


@given(families, g_values)
def test_canonicalization_idempotent(family, g):
    once = mps.right_canonicalize(mps.build_family(family, g))
    twice = mps.right_canonicalize(once)
    assert np.abs(once.tensors - twice.tensors).max() < 1e-12


@pytest.mark.parametrize("family", mps.FAMILIES)
@pytest.mark.parametrize("g", [-1.0, -0.6, -0.3, 0.2, 0.7])
def test_canonicalization_preserves_state(family, g):
    raw = mps.build_family(family, g)
    can = mps.right_canonicalize(raw)
    for L in (2, 3, 4):
        a = dense_ring_state(raw.tensors, L)
        b = dense_ring_state(can.tensors, L)
        assert abs(abs(np.vdot(a, b)) - 1) < 1e-10


@given(families, g_values)
def test_canonicalization_preserves_expectations(family, g):
    raw = mps.build_family(family, g)
    can = mps.right_canonicalize(raw)
    basis = mps.operator_basis(raw.d)
    for a in range(len(basis)):
        for c in range(len(basis)):
            ops = [(0, basis.matrices[a]), (2, basis.matrices[c])]
            assert abs(mps.expectation(raw, ops) - mps.expectation(can, ops)) < 1e-10


def test_spin_one_aklt_matches_printed_tensors_up_to_gauge():
    s6, s3 = np.sqrt(6), np.sqrt(3)
    bp = np.array([[1, 1j], [1j, -1]]) / s6
    bo = np.array([[0, 1], [-1, 0]]) / s3
    printed = np.stack([bp, bo, bp.conj()])
    can = mps.right_canonicalize(mps.build_family(mps.SPIN_ONE, -1.0))
    found = mps.find_gauge(can.tensors, printed)
    assert found is not None
    w, c = found
    np.testing.assert_allclose(w.conj().T @ w, np.eye(2), atol=1e-10)
    for s in range(3):
        np.testing.assert_allclose(printed[s], c * w @ can.tensors[s] @ w.conj().T, atol=1e-10)


# ------------------------------------------------------------- expectations


def test_spin_half_g1_x_is_one():
    assert abs(mps.expectation(mps.build_family(mps.SPIN_HALF, 1.0), [(0, mps.PAULI_X)]) - 1) < 1e-12


@given(families, g_values)
def test_identity_string_is_one(family, g):
    fam = mps.build_family(family, g)
    eye = np.eye(fam.d)
    assert abs(mps.expectation(fam, [(0, eye), (3, eye)]) - 1) < 1e-12


@pytest.mark.parametrize("family,L", [(mps.SPIN_HALF, 12), (mps.SPIN_ONE, 8)])
@pytest.mark.parametrize("g", [-1.0, -0.5, 0.5, 1.0])
def test_expectation_against_dense_ring(family, L, g):
    fam = mps.build_family(family, g)
    psi = dense_ring_state(fam.tensors, L)
    tol = ring_tolerance(family, g, L)
    basis = mps.operator_basis(fam.d)
    for ops in ([(0, basis.matrices[0])], [(0, basis.matrices[2]), (1, basis.matrices[0]), (2, basis.matrices[2])]):
        dense = np.vdot(psi, dense_operator(ops, L, fam.d) @ psi).real
        assert abs(mps.expectation(fam, ops) - dense) < tol


def test_expectation_rejects_bad_input():
    fam = mps.build_family(mps.SPIN_HALF, 0.3)
    with pytest.raises(ValueError):
        mps.expectation(fam, [(1, mps.PAULI_X), (1, mps.PAULI_Z)])
    with pytest.raises(ValueError):
        mps.expectation(fam, [(0, np.array([[0, 1], [0, 0]]))])
    with pytest.raises(ValueError):
        mps.expectation(fam, [(0, np.eye(3))])


def test_closed_form_values():
    assert mps.string_order_closed_form(mps.SPIN_HALF, -1.0) == 1.0
    assert abs(mps.string_order_closed_form(mps.SPIN_ONE, -1.0) - 4 / 9) < 1e-15
    for fam in mps.FAMILIES:
        for g in (0.0, 0.5, 1.0):
            assert mps.string_order_closed_form(fam, g) == 0.0


@pytest.mark.parametrize("g", GRID5)
def test_spin_half_string_matches_closed_form(g):
    tm = mps.transfer_fixed_points(mps.build_family(mps.SPIN_HALF, g))
    val = mps.expectation(tm, mps.string_operator(mps.SPIN_HALF, 40))
    assert abs(val - mps.string_order_closed_form(mps.SPIN_HALF, g)) < 1e-10


@pytest.mark.parametrize("g", GRID5)
def test_spin_one_string_magnitude_matches_closed_form(g):
    # the phase string of these tensors contracts to minus the closed form
    tm = mps.transfer_fixed_points(mps.build_family(mps.SPIN_ONE, g))
    val = mps.expectation(tm, mps.string_operator(mps.SPIN_ONE, 40))
    assert abs(-val - mps.string_order_closed_form(mps.SPIN_ONE, g)) < 1e-10


@pytest.mark.parametrize("g", [-1.0, -0.5])
def test_string_converges_monotonically(g):
    tm = mps.transfer_fixed_points(mps.build_family(mps.SPIN_HALF, g))
    target = mps.string_order_closed_form(mps.SPIN_HALF, g)
    errs = [abs(mps.expectation(tm, mps.string_operator(mps.SPIN_HALF, r)) - target) for r in range(4, 13)]
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3


@given(g_values, st.integers(3, 6))
def test_squared_string_equals_signed_phase_string(g, r):
    tm = mps.transfer_fixed_points(mps.build_family(mps.SPIN_ONE, g))
    sq = mps.expectation(tm, mps.string_operator(mps.SPIN_ONE, r, "squared"))
    ph = mps.expectation(tm, mps.string_operator(mps.SPIN_ONE, r, "phase"))
    assert abs(sq - (-1) ** r * ph) < 1e-10


def test_short_spin_half_string_rejected():
    with pytest.raises(ValueError):
        mps.string_operator(mps.SPIN_HALF, 3)
