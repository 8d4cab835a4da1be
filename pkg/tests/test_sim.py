import numpy as np
import pytest
from conftest import dense_unitary
from hypothesis import given
from hypothesis import strategies as st

from qudcomp.errors import DimensionError, SchemaError, SizeGuardError
from qudcomp.gates import GateKind, GateRef
from qudcomp.ir import Builder, Circuit, Operation
from qudcomp.linalg import random_unitary
from qudcomp.sim import (
    StateVector,
    contract_to_unitary,
    counts_from_json,
    distribution,
    marginal,
    run_statevector,
    sample,
    state_from_json,
)


def random_circuit(rng, dims, n_ops):
    ids = list(range(len(dims)))
    ops = []
    for _ in range(n_ops):
        choice = int(rng.integers(5))
        if choice == 0:
            q = int(rng.integers(len(dims)))
            kind = ["X", "Z", "H", "T", "Hdag", "Y"][int(rng.integers(6))]
            ops.append(Operation(GateRef.basis(kind, dims[q], int(rng.integers(1, 4))), (q,)))
            continue
        a, b = (int(x) for x in rng.choice(ids, 2, replace=False))
        da, db = dims[a], dims[b]
        if choice == 1:
            ops.append(Operation(GateRef.sum(da, db), (a, b)))
        elif choice == 2:
            ops.append(Operation(GateRef.custom(random_unitary(da * db, rng), (da, db)), (a, b)))
        elif choice == 3:
            ops.append(Operation(GateRef.mux([random_unitary(db, rng) for _ in range(da)], (da,), db), (a, b)))
        else:
            ops.append(Operation(GateRef(GateKind.X, (da, db), control_value=int(rng.integers(da))), (a, b)))
    return Circuit(tuple(zip(ids, dims)), tuple(ops))


@given(st.integers(0, 2**32 - 1), st.lists(st.integers(2, 4), min_size=1, max_size=3))
def test_contraction_matches_reference(seed, dims):
    rng = np.random.default_rng(seed)
    if len(dims) == 1:
        dims = dims + [2]
    c = random_circuit(rng, tuple(dims), 12)
    np.testing.assert_allclose(contract_to_unitary(c), dense_unitary(c), atol=1e-10)


@given(st.integers(0, 2**32 - 1))
def test_statevector_is_first_column(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, (3, 2, 3), 10)
    state = run_statevector(c)
    np.testing.assert_allclose(state.amplitudes, dense_unitary(c)[:, 0], atol=1e-10)


def test_initial_state(rng):
    c = random_circuit(rng, (2, 3), 6)
    psi = random_unitary(6, rng)[:, 0]
    out = run_statevector(c, StateVector((2, 3), psi))
    np.testing.assert_allclose(out.amplitudes, dense_unitary(c) @ psi, atol=1e-10)
    with pytest.raises(DimensionError):
        run_statevector(c, StateVector.zero((3, 2)))


def test_qudit_order_most_significant_first():
    c = Circuit(((0, 2), (1, 3)), (Operation(GateRef.basis("X", 3, -1), (1,)),))
    state = run_statevector(c)
    assert state.amplitude((0, 1)) == pytest.approx(1.0)


def test_bell_sampling():
    b = Builder()
    q, p = b.register(2, 2)
    q = b.hadamard(q)
    q, p = b.cnot(q, p)
    b.measure(q, p)
    c = b.circuit()
    state = run_statevector(c)
    res = sample(state, c.measured, 1000, seed=3)
    assert set(res.counts) == {(0, 0), (1, 1)}
    assert sum(res.counts.values()) == 1000
    assert sample(state, c.measured, 1000, seed=3).to_json() == res.to_json()
    assert counts_from_json(res.to_json()) == res


def test_marginal_order():
    amps = np.zeros(6)
    amps[np.ravel_multi_index((1, 2), (2, 3))] = 1
    state = StateVector((2, 3), amps)
    p, dims = marginal(state, (1, 0))
    assert dims == (3, 2)
    assert p[2, 1] == 1


def test_distribution_keys():
    state = StateVector((2, 2), np.array([1, 0, 0, 1]) / np.sqrt(2))
    assert distribution(state) == pytest.approx({"0,0": 0.5, "1,1": 0.5})


def test_sample_rejects_bad_shots():
    with pytest.raises(DimensionError):
        sample(StateVector.zero((2,)), (0,), 0, 1)


def test_contract_guards():
    big = Circuit(tuple((k, 3) for k in range(10)))
    with pytest.raises(SizeGuardError):
        contract_to_unitary(big)
    b = Builder()
    b.measure(b.qudit(2))
    with pytest.raises(SchemaError):
        contract_to_unitary(b.circuit())


def test_state_json_round_trip(rng):
    s = StateVector((3,), random_unitary(3, rng)[:, 0])
    back = state_from_json(s.to_json())
    np.testing.assert_array_equal(back.amplitudes, s.amplitudes)
