
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qudcomp.errors import DimensionError, SizeGuardError
from qudcomp.gates import hadamard, omega, pauli_x, pauli_z, sum_gate, tgate
from qudcomp.linalg import random_unitary
from qudcomp.pauli import (
    PauliProduct,
    decompose_pauli,
    enumerate_group,
    generator,
    group_order_by_closure,
    is_clifford,
    matrix_of,
    pauli_mul,
)


@st.composite
def products(draw, d=None, n=None):
    d = d or draw(st.integers(2, 5))
    n = n or draw(st.integers(1, 2))
    v = st.integers(0, d - 1)
    return PauliProduct(d, draw(v), tuple(draw(v) for _ in range(n)), tuple(draw(v) for _ in range(n)))


@st.composite
def pairs(draw):
    d = draw(st.integers(2, 5))
    n = draw(st.integers(1, 2))
    return draw(products(d, n)), draw(products(d, n))


def test_matrix_of_single():
    p = PauliProduct(3, 1, (2,), (1,))
    expected = omega(3) * np.linalg.matrix_power(pauli_x(3), 2) @ pauli_z(3)
    np.testing.assert_allclose(matrix_of(p), expected, atol=1e-12)


def test_normalization():
    assert PauliProduct(3, 4, (5,), (-1,)) == PauliProduct(3, 1, (2,), (2,))


@given(pairs())
def test_homomorphism(pq):
    p, q = pq
    np.testing.assert_allclose(matrix_of(pauli_mul(p, q)), matrix_of(p) @ matrix_of(q), atol=1e-10)


@given(products())
def test_decompose_round_trip(p):
    assert decompose_pauli(matrix_of(p), p.d, p.n) == p


def test_decompose_rejects_non_pauli():
    assert decompose_pauli(hadamard(3), 3, 1) is None
    assert decompose_pauli(np.exp(0.3j) * pauli_x(3), 3, 1) is None


@pytest.mark.parametrize("d,n", [(2, 1), (3, 1), (2, 2)])
def test_enumerate_size_and_uniqueness(d, n):
    group = enumerate_group(d, n)
    assert len(group) == d ** (2 * n + 1)
    assert len(set(group)) == len(group)
    assert group[0] == PauliProduct.identity(d, n)


def test_enumerate_guard():
    with pytest.raises(SizeGuardError):
        enumerate_group(10, 3)


def test_mismatched_multiply():
    with pytest.raises(DimensionError):
        pauli_mul(PauliProduct.identity(2, 1), PauliProduct.identity(3, 1))


@pytest.mark.parametrize("d,expected", [(2, 8), (3, 27), (5, 125)])
def test_closure_order(d, expected):
    assert group_order_by_closure(d) == expected


class TestClifford:
    def test_qubit_hadamard_tableau(self):
        ok, tab = is_clifford(hadamard(2), 2, 1)
        assert ok
        assert tab.x_images == (generator(2, 1, "z", 0),)
        assert tab.z_images == (generator(2, 1, "x", 0),)

    @pytest.mark.parametrize("d", [2, 3, 5])
    def test_basis_cliffords(self, d):
        for U in (pauli_x(d), pauli_z(d), hadamard(d)):
            assert is_clifford(U, d, 1)[0]

    @pytest.mark.parametrize("d", [2, 3])
    def test_sum_is_clifford(self, d):
        assert is_clifford(sum_gate(d, d), d, 2)[0]

    @pytest.mark.parametrize("d", [3, 5])
    def test_t_is_not(self, d):
        assert is_clifford(tgate(d), d, 1) == (False, None)

    def test_random_unitary_is_not(self, rng):
        assert not is_clifford(random_unitary(9, rng), 3, 2)[0]

    @pytest.mark.parametrize("d", [2, 3])
    def test_tableau_conjugates_every_product(self, d):
        C = np.kron(hadamard(d), np.eye(d)) @ sum_gate(d, d)
        ok, tab = is_clifford(C, d, 2)
        assert ok
        for p in enumerate_group(d, 2):
            np.testing.assert_allclose(matrix_of(tab.conjugate(p)), C @ matrix_of(p) @ C.conj().T, atol=1e-10)

    def test_guard(self):
        with pytest.raises(SizeGuardError):
            is_clifford(np.eye(10**3), 10, 3)
