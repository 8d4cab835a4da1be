import json

import numpy as np
import pytest
from conftest import dense_unitary
from hypothesis import given
from hypothesis import strategies as st

from qudcomp.errors import DimensionError, SKConvergenceError
from qudcomp.gates import GateKind, GateRef, hadamard, pauli_z
from qudcomp.ir import Builder, Circuit, Measurement, Operation
from qudcomp.linalg import dist, random_unitary
from qudcomp.pipeline import (
    CSV_HEADER,
    CompileOptions,
    Method,
    compile_circuit,
    compile_unitary,
    embedding_isometry,
    retarget_circuit,
    retarget_unitary,
    subspace_choice,
    wires_needed,
)
from qudcomp.sim import contract_to_unitary, distribution, run_statevector

CSD = CompileOptions(method="csd")


class TestOptions:
    def test_defaults(self):
        o = CompileOptions()
        assert o.method is Method.HYBRID and o.epsilon == 0.05

    @pytest.mark.parametrize("kw", [{"epsilon": 0}, {"sk_depth": -1}, {"sk_depth": 1.5}, {"method": "magic"}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            CompileOptions(**kw)


class TestCsd:
    @pytest.mark.parametrize("d,n", [(2, 2), (3, 2), (2, 3)])
    def test_exact(self, d, n, rng):
        U = random_unitary(d**n, rng)
        c, rep = compile_unitary(U, d, CSD)
        np.testing.assert_allclose(contract_to_unitary(c), U, atol=1e-8)
        assert rep.distance < 1e-7
        assert rep.method == "csd" and rep.n == n

    def test_bad_size(self):
        with pytest.raises(DimensionError):
            compile_unitary(np.eye(6), 4, CSD)


class TestHybrid:
    def test_qubit_pair(self, rng):
        U = random_unitary(4, rng)
        c, rep = compile_unitary(U, 2, CompileOptions(epsilon=0.05))
        assert dist(contract_to_unitary(c), U) <= 0.05
        assert rep.distance == pytest.approx(dist(dense_unitary(c), U), abs=1e-9)
        kinds = {op.gate.kind for op in c.ops}
        assert kinds <= {GateKind.H, GateKind.HDAG, GateKind.T, GateKind.TDAG}
        assert rep.sk_runs >= 1

    def test_single_qudit_z(self):
        c, rep = compile_unitary(pauli_z(3), 3, CompileOptions())
        assert rep.distance < 1e-7
        assert rep.gate_counts["H"] == 0

    def test_local_gate_stays_local(self):
        U = np.kron(pauli_z(2), np.eye(2))
        c, rep = compile_unitary(U, 2, CompileOptions())
        assert rep.distance < 1e-7
        assert {op.targets for op in c.ops} == {(0,)}

    def test_identity_is_empty(self):
        c, _ = compile_unitary(np.eye(9), 3, CompileOptions())
        assert c.ops == ()

    def test_cache_does_not_change_output(self, rng):
        U = random_unitary(4, rng)
        on, r_on = compile_unitary(U, 2, CompileOptions(cache_enabled=True))
        off, r_off = compile_unitary(U, 2, CompileOptions(cache_enabled=False))
        assert on.ops == off.ops
        assert r_off.cache_hits == 0

    def test_cache_hits_on_repeated_payloads(self):
        # both multiplexer branches carry the same gate up to phase
        U = np.kron(np.eye(2), hadamard(2)) @ np.diag([1, 1, 1j, 1j])
        _, on = compile_unitary(U, 2, CompileOptions())
        _, off = compile_unitary(U, 2, CompileOptions(cache_enabled=False))
        assert on.cache_hits > 0
        assert on.sk_runs < off.sk_runs
        assert on.distance <= 0.05

    @given(st.integers(0, 2**32 - 1))
    def test_random_qubit_pairs_within_epsilon(self, seed):
        U = random_unitary(4, np.random.default_rng(seed))
        _, rep = compile_unitary(U, 2, CompileOptions(epsilon=0.1))
        assert rep.distance <= 0.1


class TestSk:
    def test_single_qudit(self, rng):
        U = random_unitary(2, rng)
        c, rep = compile_unitary(U, 2, CompileOptions(method="sk", epsilon=0.02))
        assert dist(contract_to_unitary(c), U) <= 0.02

    def test_register_refuses_when_table_cannot_grow(self, rng):
        U = random_unitary(9, rng)
        with pytest.raises(SKConvergenceError):
            compile_unitary(U, 3, CompileOptions(method="sk", max_table_entries=500))


class TestReport:
    def test_csv_and_json(self, rng):
        _, rep = compile_unitary(random_unitary(4, rng), 2, CSD)
        row = rep.csv_row(3)
        assert len(row) == len(CSV_HEADER)
        assert row[3] == 3
        json.dumps(rep.to_json())


class TestCompileCircuit:
    def test_preserves_semantics(self, rng):
        b = Builder()
        q, p, r = b.register(3, 3)
        q, p = b.apply(GateRef.custom(random_unitary(9, rng), (3, 3)), q, p)
        r = b.hadamard(r)
        c = b.circuit()
        out, reports = compile_circuit(c, CSD)
        assert len(reports) == 2
        np.testing.assert_allclose(contract_to_unitary(out), contract_to_unitary(c), atol=1e-8)

    def test_keeps_mixed_and_measurements(self):
        b = Builder()
        q, p = b.qudit(2), b.qudit(3)
        q, p = b.apply(GateRef.sum(2, 3), q, p)
        b.measure(q, p)
        out, reports = compile_circuit(b.circuit(), CSD)
        assert reports == []
        assert isinstance(out.ops[-1], Measurement)


class TestRetarget:
    @pytest.mark.parametrize("d,e,n,m", [(3, 2, 1, 2), (2, 3, 1, 1), (5, 2, 1, 3), (3, 2, 2, 4), (4, 2, 1, 2)])
    def test_wires_needed(self, d, e, n, m):
        assert wires_needed(d, e, n) == m

    @pytest.mark.parametrize("d", range(2, 6))
    @pytest.mark.parametrize("e", range(2, 6))
    def test_retarget_unitary(self, d, e, rng):
        A = random_unitary(d, rng)
        B, m = retarget_unitary(A, d, 1, e)
        assert B.shape == (e**m, e**m)
        np.testing.assert_allclose(B.conj().T @ B, np.eye(e**m), atol=1e-12)
        np.testing.assert_array_equal(B[:d, :d], A)

    def test_subspace_choice(self, rng):
        A = random_unitary(2, rng)
        B = subspace_choice(A, [3, 1], size=4)
        assert B[3, 1] == A[0, 1] and B[1, 3] == A[1, 0]
        assert B[0, 0] == 1 and B[2, 2] == 1
        for bad in ([1, 1], [0, 4], [0]):
            with pytest.raises(DimensionError):
                subspace_choice(A, bad, size=4)

    def test_hadamard_on_two_qubits(self):
        b = Builder()
        b.hadamard(b.qudit(3))
        out = retarget_circuit(b.circuit(), 2, CSD)
        assert out.dims == (2, 2)
        probs = distribution(run_statevector(out))
        assert probs == pytest.approx({"0,0": 1 / 3, "0,1": 1 / 3, "1,0": 1 / 3}, abs=1e-12)

    @pytest.mark.parametrize("placement", ["leading", "trailing"])
    def test_mixed_circuit_on_image(self, placement, rng):
        b = Builder()
        q, p = b.qudit(3), b.qudit(2)
        q, p = b.apply(GateRef.custom(random_unitary(6, rng), (3, 2)), q, p)
        p = b.hadamard(p)
        c = b.circuit()
        out = retarget_circuit(c, 2, CSD, placement=placement)
        V = embedding_isometry(c.dims, 2, placement)
        np.testing.assert_allclose(contract_to_unitary(out) @ V, V @ contract_to_unitary(c), atol=1e-8)

    def test_default_is_hybrid_within_epsilon(self, rng):
        A = random_unitary(3, rng)
        c = Circuit(((0, 3),), (Operation(GateRef.custom(A, (3,)), (0,)),))
        out = retarget_circuit(c, 2)
        assert {op.gate.kind for op in out.ops} <= {GateKind.H, GateKind.T, GateKind.TDAG}
        V = embedding_isometry((3,), 2)
        image = V.conj().T @ contract_to_unitary(out) @ V
        assert dist(image, A) <= 0.05 + 1e-9

    def test_same_dimension_is_unchanged(self):
        b = Builder()
        b.hadamard(b.qudit(2))
        c = b.circuit()
        assert retarget_circuit(c, 2) is c

    def test_measurement_maps_to_wire_group(self):
        b = Builder()
        q = b.qudit(3)
        b.measure(q)
        out = retarget_circuit(b.circuit(), 2, CSD)
        assert out.measured == (0, 1)

    def test_bad_placement(self):
        with pytest.raises(ValueError):
            retarget_circuit(Circuit(((0, 3),)), 2, placement="middle")
