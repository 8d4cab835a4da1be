
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qudcomp.errors import DimensionError, SizeGuardError, SKConvergenceError
from qudcomp.gates import hadamard, pauli_z, tgate
from qudcomp.ir import Circuit
from qudcomp.linalg import dist, random_unitary
from qudcomp.sim import contract_to_unitary
from qudcomp.synth_sk import (
    ApproximationTable,
    GateWord,
    approx_decompose,
    build_table,
    default_basis,
    free_reduce,
    nearest,
    register_basis,
    solovay_kitaev,
    solovay_kitaev_trace,
    to_special,
    word_to_ops,
)


@pytest.fixture(scope="module")
def qubit_table():
    return build_table(2, max_len=10)


@pytest.fixture(scope="module")
def qutrit_table():
    return build_table(3, max_len=6)


def test_default_basis_names():
    assert [b.name for b in default_basis(2)] == ["H", "T", "Tdag"]
    assert [b.name for b in default_basis(3)] == ["H", "Hdag", "T", "Tdag"]


def test_register_basis_counts():
    assert len(register_basis(3, 2)) == 8 + 4
    assert len(register_basis(2, 2)) == 6 + 2


def test_free_reduce():
    inv = [0, 2, 1]
    assert free_reduce((1, 2, 0, 1, 1, 2), inv) == (0, 1)


def test_short_table_contents():
    t = build_table(2, max_len=1)
    assert t.words[0] == ()
    assert sorted(t.words[1:]) == [(0,), (1,), (2,)]


def test_table_entries_match_words(qutrit_table):
    t = qutrit_table
    for k in range(0, len(t), max(1, len(t) // 50)):
        np.testing.assert_allclose(t.matrices[k], t.word_matrix(t.words[k]), atol=1e-10)


def test_table_has_no_phase_duplicates():
    t = build_table(3, max_len=4)
    M = t.matrices.reshape(len(t), -1)
    overlaps = np.abs(M.conj() @ M.T) / 3
    np.fill_diagonal(overlaps, 0)
    assert overlaps.max() < 1 - 1e-9


def test_table_ordering(qutrit_table):
    lengths = [len(w) for w in qutrit_table.words]
    assert lengths == sorted(lengths)


def test_table_cap():
    with pytest.raises(SizeGuardError):
        build_table(3, max_len=8, max_entries=100)
    t = ApproximationTable((3,), default_basis(3), max_entries=100).extend(8, strict_cap=False)
    assert len(t) <= 100


def test_table_bad_length():
    with pytest.raises(DimensionError):
        build_table(2, max_len=0)


def test_nearest_matches_brute_force(qutrit_table, rng):
    t = qutrit_table
    for _ in range(5):
        U = random_unitary(3, rng)
        brute = min(dist(t.word_matrix(w), U) for w in t.words)
        assert dist(nearest(t, U).matrix, U) == pytest.approx(brute, abs=1e-9)


def test_nearest_exact_entry(qubit_table):
    w = nearest(qubit_table, pauli_z(2))
    assert w.letters == (1, 1, 1, 1)


def test_save_load(tmp_path, qutrit_table):
    path = tmp_path / "t.npz"
    qutrit_table.save(path)
    back = ApproximationTable.load(path)
    assert back.words == qutrit_table.words
    np.testing.assert_array_equal(back.matrices, qutrit_table.matrices)


def test_to_special(rng):
    U = random_unitary(3, rng)
    S = to_special(U)
    assert np.linalg.det(S) == pytest.approx(1.0)
    assert dist(S, U) == pytest.approx(0, abs=1e-7)


@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3, 4]), st.floats(1e-4, 0.3))
def test_approx_decompose_is_exact_commutator(seed, D, scale):
    rng = np.random.default_rng(seed)
    H = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
    H = (H + H.conj().T) / 2
    H -= np.trace(H) / D * np.eye(D)
    H *= scale / np.linalg.norm(H, 2)
    w, Q = np.linalg.eigh(H)
    Delta = to_special(Q @ np.diag(np.exp(1j * w)) @ Q.conj().T)
    V, W = approx_decompose(Delta)
    comm = V @ W @ V.conj().T @ W.conj().T
    np.testing.assert_allclose(comm, Delta, atol=1e-9)
    e = dist(Delta, np.eye(D))
    assert dist(V, np.eye(D)) < 4 * np.sqrt(e) + 1e-6


def test_approx_decompose_threshold():
    with pytest.raises(SKConvergenceError):
        approx_decompose(hadamard(2) * np.exp(1j * np.pi / 2))


def test_sk_trace_monotone(qubit_table, rng):
    for _ in range(3):
        U = random_unitary(2, rng)
        word, trace = solovay_kitaev_trace(qubit_table, U, 3)
        assert all(b <= a for a, b in zip(trace.kept, trace.kept[1:]))
        assert dist(word.matrix, U) == pytest.approx(trace.kept[-1], abs=1e-12)
        np.testing.assert_allclose(word.matrix, qubit_table.word_matrix(word.letters), atol=1e-9)


def test_sk_improves_on_table(qubit_table, rng):
    U = random_unitary(2, rng)
    base = qubit_table.nearest_distance(U)
    assert dist(solovay_kitaev(qubit_table, U, 2).matrix, U) < base


def test_sk_z_exact(qubit_table):
    word = solovay_kitaev(qubit_table, pauli_z(2), 3)
    assert dist(word.matrix, pauli_z(2)) < 1e-7


def test_sk_bad_depth(qubit_table):
    with pytest.raises(DimensionError):
        solovay_kitaev(qubit_table, np.eye(2), -1)


def test_word_to_ops_merges_runs(qubit_table):
    w = GateWord((1, 1, 0, 1), qubit_table.word_matrix((1, 1, 0, 1)))
    ops = word_to_ops(qubit_table, w, [5])
    assert [(op.gate.kind.value, op.gate.power) for op in ops] == [("T", 2), ("H", 1), ("T", 1)]
    assert all(op.targets == (5,) for op in ops)


def test_word_to_ops_contracts(qutrit_table, rng):
    for k in rng.integers(0, len(qutrit_table), 10):
        w = qutrit_table.word(int(k))
        c = Circuit(((0, 3),), tuple(word_to_ops(qutrit_table, w, [0])))
        np.testing.assert_allclose(contract_to_unitary(c), w.matrix, atol=1e-10)


def test_register_table_words():
    t = build_table(2, basis=register_basis(2, 2), max_len=3, dims=(2, 2))
    for k in (5, len(t) // 2, len(t) - 1):
        w = t.word(k)
        c = Circuit(((0, 2), (1, 2)), tuple(word_to_ops(t, w, [0, 1])))
        np.testing.assert_allclose(contract_to_unitary(c), w.matrix, atol=1e-10)


def test_t_powers_found(qutrit_table):
    for p in range(1, 4):
        U = np.linalg.matrix_power(tgate(3), p)
        assert qutrit_table.nearest_distance(U) == pytest.approx(0, abs=1e-7)
