import numpy as np
import pytest
from conftest import dense_unitary
from hypothesis import given
from hypothesis import strategies as st

from qudcomp.errors import DimensionError, LinearityError, MeasuredQuditError, SchemaError
from qudcomp.gates import GateKind, GateRef
from qudcomp.ir import (
    Builder,
    Circuit,
    Measurement,
    Operation,
    alloc_qudit,
    alloc_register,
    apply,
    builder_new,
    ccnot_gate,
    lower_operation,
    measure,
    qft_block,
    to_dag,
)
from qudcomp.linalg import random_unitary


def qft_matrix(N):
    j = np.arange(N)
    return np.exp(2j * np.pi * np.outer(j, j) / N) / np.sqrt(N)


class TestBuilder:
    def test_fresh_handles(self):
        b = Builder()
        q = b.qudit(3)
        q2 = b.hadamard(q)
        assert (q2.id, q2.generation) == (q.id, 1)

    def test_reuse_rejected(self):
        b = Builder()
        q = b.qudit(3)
        b.hadamard(q)
        with pytest.raises(LinearityError):
            b.x(q)

    def test_same_qudit_twice(self):
        b = Builder()
        q = b.qudit(2)
        with pytest.raises(LinearityError):
            b.apply(GateRef.sum(2, 2), q, q)

    def test_foreign_handle(self):
        q = Builder().qudit(2)
        with pytest.raises(LinearityError):
            Builder().x(q)

    def test_measured_is_terminal(self):
        b = Builder()
        q = b.qudit(2)
        (q,), marker = b.measure(q)
        assert marker == Measurement((0,))
        with pytest.raises(MeasuredQuditError):
            b.x(q)

    def test_dimension_mismatch(self):
        b = Builder()
        q = b.qudit(3)
        with pytest.raises(DimensionError):
            b.apply(GateRef.basis("X", 2), q)

    def test_register_validation(self):
        with pytest.raises(DimensionError):
            Builder().register(2, 0)
        with pytest.raises(DimensionError):
            Builder().qudit(1)

    def test_function_wrappers(self):
        b = builder_new()
        q = alloc_qudit(b, 3)
        r = alloc_register(b, 3, 2)
        (q,) = apply(b, GateRef.basis("H", 3), q)
        r = qft_block(b, r)
        handles, _ = measure(b, [q, *r])
        assert len(handles) == 3
        assert b.circuit().measured == (0, 1, 2)

    def test_failed_op_leaves_state_unchanged(self):
        b = Builder()
        q, p = b.register(2, 2)
        with pytest.raises(DimensionError):
            b.apply(GateRef.basis("X", 3), q)
        q = b.x(q)
        assert len(b.circuit().ops) == 1

    @given(st.integers(0, 2**32 - 1))
    def test_random_programs_accept_valid_and_reject_reuse(self, seed):
        rng = np.random.default_rng(seed)
        b = Builder()
        handles = b.register(int(rng.integers(2, 4)), 3)
        stale = []
        for _ in range(int(rng.integers(1, 12))):
            k = int(rng.integers(3))
            stale.append(handles[k])
            handles[k] = b.hadamard(handles[k])
        b.circuit()
        with pytest.raises(LinearityError):
            b.z(stale[int(rng.integers(len(stale)))])


class TestBlocks:
    @pytest.mark.parametrize("d,n", [(2, 1), (2, 3), (3, 2)])
    def test_qft_unitary(self, d, n):
        b = Builder()
        b.qft(b.register(d, n))
        np.testing.assert_allclose(dense_unitary(b.circuit()), qft_matrix(d**n), atol=1e-10)

    def test_inverse_qft(self):
        b = Builder()
        b.inverse_qft(b.register(3, 2))
        np.testing.assert_allclose(dense_unitary(b.circuit()), qft_matrix(9).conj().T, atol=1e-10)

    @pytest.mark.parametrize("d,t,phase", [(2, 3, 5 / 8), (3, 2, 4 / 9)])
    def test_qpe_exact_phase(self, d, t, phase):
        U = np.diag([1, np.exp(2j * np.pi * phase)])
        b = Builder()
        cs = b.register(d, t)
        (tq,) = b.register(2, 1)
        tq = b.x(tq)
        b.qpe(U, cs, [tq])
        U_full = dense_unitary(b.circuit())
        psi = U_full[:, 0]
        probs = np.abs(psi.reshape(d**t, 2)) ** 2
        k = round(phase * d**t)
        assert probs[k].sum() == pytest.approx(1.0, abs=1e-10)

    def test_ccnot_truth_table(self):
        g = ccnot_gate()
        M = g.matrix
        for c in range(2):
            for a in range(2):
                for t in range(2):
                    col = (c * 3 + a) * 2 + t
                    expected = (c * 3 + a) * 2 + (t ^ (c & a))
                    assert abs(M[expected, col]) == pytest.approx(1.0)

    def test_ccnot_decomposition_matches(self):
        b = Builder()
        c0, anc, t = b.qudit(2), b.qudit(3), b.qudit(2)
        b.ccnot(c0, anc, t)
        c = b.circuit()
        lowered = Circuit(c.qudits, lower_operation(c.ops[0]))
        assert all(len(op.targets) == 2 for op in lowered.ops)
        np.testing.assert_allclose(dense_unitary(lowered), dense_unitary(c), atol=1e-12)


class TestCircuit:
    def test_json_round_trip(self, rng):
        b = Builder()
        q, p = b.qudit(3), b.qudit(2)
        q = b.hadamard(q)
        q, p = b.apply(GateRef.custom(random_unitary(6, rng), (3, 2)), q, p)
        b.measure(q, p)
        c = b.circuit()
        back = Circuit.from_json(c.to_json())
        assert back.qudits == c.qudits
        assert back.ops == c.ops

    @pytest.mark.parametrize("obj,where", [
        ({"ops": []}, "qudits"),
        ({"qudits": [{"id": 0}]}, "qudits[0]"),
        ({"qudits": [{"id": 0, "dim": 2}], "ops": [{"foo": 1}]}, "ops[0]"),
        ({"qudits": [{"id": 0, "dim": 2}], "ops": [{"gate": {"kind": "X", "dims": [3]}, "targets": [0]}]}, "$"),
        ({"qudits": [{"id": 0, "dim": 2}], "ops": [{"measure": [0]}, {"gate": {"kind": "X", "dims": [2]}, "targets": [0]}]}, "$"),
    ])
    def test_schema_errors(self, obj, where):
        with pytest.raises(SchemaError) as info:
            Circuit.from_json(obj)
        assert str(info.value).startswith("$") and where in str(info.value)

    def test_gate_counts(self):
        ops = (
            Operation(GateRef.basis("T", 3, 4), (0,)),
            Operation(GateRef.basis("Hdag", 3, 1), (0,)),
            Operation(GateRef.sum(3, 3, 2), (0, 1)),
            Operation(GateRef(GateKind.X, (3, 3), control_value=1), (0, 1)),
        )
        counts = Circuit(((0, 3), (1, 3)), ops).gate_counts()
        assert counts["T"] == 4 and counts["H"] == 1 and counts["SUM"] == 2
        assert counts["X"] == 1 and counts["multiplexer"] == 1


class TestDag:
    def test_joins_and_passes(self):
        c = Circuit(((0, 2), (1, 2)), (
            Operation(GateRef.basis("H", 2), (0,)),
            Operation(GateRef.sum(2, 2), (0, 1)),
        ))
        g = to_dag(c).graph
        assert g.in_degree((1, 1)) == 2
        roles = {g.edges[e]["role"] for e in g.in_edges((1, 1))}
        assert roles == {"target", "control"}
        assert g.edges[(0, 1), (0, 2)]["role"] == "pass"

    def test_three_qudit_join(self):
        b = Builder()
        b.ccnot(b.qudit(2), b.qudit(3), b.qudit(2))
        dag = to_dag(b.circuit())
        assert len(dag.ops) == 3
        assert dag.max_in_degree() == 2

    def test_acyclic(self):
        b = Builder()
        b.qft(b.register(3, 3))
        import networkx as nx
        assert nx.is_directed_acyclic_graph(to_dag(b.circuit()).graph)
