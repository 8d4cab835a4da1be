"""Circuit construction with linear-use qudit handles.

A :class:`Builder` hands out :class:`QuditHandle` tokens. Every operation
consumes the handles it is given and returns fresh ones (same id, next
generation); passing a consumed handle again raises :class:`LinearityError`.
This enforces the no-cloning discipline at construction time.

Every qudit starts in ``|0>``. Measurement is terminal: once measured, a qudit
cannot be targeted again.

Example:
    >>> b = Builder()
    >>> q = b.qudit(3)
    >>> q = b.hadamard(q)
    >>> q, _ = b.measure(q)
    >>> circuit = b.circuit()
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from collections.abc import Sequence

import networkx as nx
import numpy as np

from .errors import DimensionError, LinearityError, MeasuredQuditError, SchemaError
from .gates import GateKind, GateRef, gate_from_json, gate_to_json, swap_gate
from .linalg import check_dimension, require_unitary

_builder_serial = itertools.count()


@dataclasses.dataclass(frozen=True)
class QuditHandle:
    id: int
    dim: int
    generation: int
    owner: int = dataclasses.field(repr=False, compare=True)


@dataclasses.dataclass(frozen=True)
class Operation:
    gate: GateRef
    targets: tuple

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(self.targets) != len(self.gate.dims):
            raise DimensionError(f"{self.gate!r} needs {len(self.gate.dims)} targets, got {len(self.targets)}")
        if len(set(self.targets)) != len(self.targets):
            raise DimensionError(f"duplicate targets {self.targets}")


@dataclasses.dataclass(frozen=True)
class Measurement:
    targets: tuple

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))


@dataclasses.dataclass(frozen=True)
class Circuit:
    """Ordered operations over a mixed-dimension register.

    Attributes:
        qudits: ``(id, dim)`` pairs; position in this tuple is the qudit's axis
            in state vectors (position 0 is the most significant digit).
        ops: :class:`Operation` and :class:`Measurement` items in order.
    """

    qudits: tuple
    ops: tuple = ()

    def __post_init__(self):
        qudits = tuple((int(i), check_dimension(int(d))) for i, d in self.qudits)
        object.__setattr__(self, "qudits", qudits)
        object.__setattr__(self, "ops", tuple(self.ops))
        dims = dict(qudits)
        if len(dims) != len(qudits):
            raise DimensionError("duplicate qudit ids")
        measured = set()
        for k, op in enumerate(self.ops):
            for t in op.targets:
                if t not in dims:
                    raise DimensionError(f"op {k} targets unknown qudit {t}")
                if t in measured:
                    raise MeasuredQuditError(f"op {k} targets qudit {t} after its measurement")
            if isinstance(op, Measurement):
                measured.update(op.targets)
            elif tuple(dims[t] for t in op.targets) != op.gate.dims:
                raise DimensionError(
                    f"op {k}: gate dims {op.gate.dims} do not match target dims "
                    f"{tuple(dims[t] for t in op.targets)}"
                )

    @property
    def ids(self) -> tuple:
        return tuple(i for i, _ in self.qudits)

    @property
    def dims(self) -> tuple:
        return tuple(d for _, d in self.qudits)

    @property
    def num_qudits(self) -> int:
        return len(self.qudits)

    @property
    def gates(self) -> tuple:
        return tuple(op for op in self.ops if isinstance(op, Operation))

    @property
    def measured(self) -> tuple:
        """Measured qudit ids in order of first measurement."""
        out = []
        for op in self.ops:
            if isinstance(op, Measurement):
                out.extend(t for t in op.targets if t not in out)
        return tuple(out)

    def axis(self, qid: int) -> int:
        return self.ids.index(qid)

    def gate_counts(self) -> dict:
        """Counts per gate family; basis gates count ``abs(power)`` each.

        Value-controlled basis gates count in their family and also under
        ``"multiplexer"``, which tallies every controlled operation.
        """
        counts = {"H": 0, "T": 0, "SUM": 0, "X": 0, "Z": 0, "Y": 0, "multiplexer": 0, "custom": 0}
        for op in self.gates:
            g = op.gate
            k = g.kind
            if k in (GateKind.H, GateKind.HDAG):
                counts["H"] += abs(g.power)
            elif k in (GateKind.T, GateKind.TDAG):
                counts["T"] += abs(g.power)
            elif k is GateKind.SUM:
                counts["SUM"] += abs(g.power)
            elif k in (GateKind.X, GateKind.Z, GateKind.Y):
                counts[k.value] += abs(g.power)
            elif k in (GateKind.MULTIPLEXER, GateKind.CONTROLLED_U):
                counts["multiplexer"] += 1
            else:
                counts["custom"] += 1
            if g.control_value is not None:
                counts["multiplexer"] += 1
        return counts

    def to_json(self) -> dict:
        ops = []
        for op in self.ops:
            if isinstance(op, Measurement):
                ops.append({"measure": list(op.targets)})
            else:
                ops.append({"gate": gate_to_json(op.gate), "targets": list(op.targets)})
        return {"qudits": [{"id": i, "dim": d} for i, d in self.qudits], "ops": ops}

    @classmethod
    def from_json(cls, obj) -> "Circuit":
        """Parse the circuit interchange format.

        Raises:
            SchemaError: with a path to the offending element.
        """
        if not isinstance(obj, dict) or not isinstance(obj.get("qudits"), list):
            raise SchemaError("$: expected an object with a 'qudits' list")
        qudits = []
        for k, q in enumerate(obj["qudits"]):
            if not isinstance(q, dict) or not isinstance(q.get("id"), int) or not isinstance(q.get("dim"), int):
                raise SchemaError(f"$.qudits[{k}]: expected {{'id': int, 'dim': int}}")
            qudits.append((q["id"], q["dim"]))
        ops = []
        for k, item in enumerate(obj.get("ops", [])):
            path = f"$.ops[{k}]"
            if not isinstance(item, dict):
                raise SchemaError(f"{path}: expected an object")
            if "measure" in item:
                if not isinstance(item["measure"], list):
                    raise SchemaError(f"{path}.measure: expected a list of ids")
                ops.append(Measurement(tuple(item["measure"])))
            elif "gate" in item:
                gate = gate_from_json(item["gate"], f"{path}.gate")
                targets = item.get("targets")
                if not isinstance(targets, list):
                    raise SchemaError(f"{path}.targets: expected a list of ids")
                try:
                    ops.append(Operation(gate, tuple(targets)))
                except DimensionError as exc:
                    raise SchemaError(f"{path}: {exc}") from None
            else:
                raise SchemaError(f"{path}: expected a 'gate' or 'measure' entry")
        try:
            return cls(tuple(qudits), tuple(ops))
        except (DimensionError, MeasuredQuditError) as exc:
            raise SchemaError(f"$: {exc}") from None

    def to_dag(self) -> "CircuitDag":
        return to_dag(self)


class Builder:
    """Single-owner circuit builder enforcing linear use of qudit handles."""

    def __init__(self):
        self._serial = next(_builder_serial)
        self._dims: dict[int, int] = {}
        self._generation: dict[int, int] = {}
        self._measured: set[int] = set()
        self._ops: list = []

    @property
    def num_qudits(self) -> int:
        return len(self._dims)

    # Allocation

    def qudit(self, d: int) -> QuditHandle:
        """Allocate one qudit of dimension ``d`` in state ``|0>``."""
        d = check_dimension(d)
        qid = len(self._dims)
        self._dims[qid] = d
        self._generation[qid] = 0
        return QuditHandle(qid, d, 0, self._serial)

    def register(self, d: int, n: int) -> list[QuditHandle]:
        """Allocate ``n >= 1`` qudits of dimension ``d``."""
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise DimensionError(f"register size must be a positive integer, got {n!r}")
        d = check_dimension(d)
        return [self.qudit(d) for _ in range(n)]

    alloc_qudit = qudit
    alloc_register = register

    # Linearity bookkeeping

    def _consume(self, handles) -> list[QuditHandle]:
        handles = list(handles)
        for h in handles:
            if not isinstance(h, QuditHandle):
                raise TypeError(f"expected a QuditHandle, got {type(h).__name__}")
            if h.owner != self._serial or h.id not in self._dims:
                raise LinearityError(f"handle for qudit {h.id} belongs to a different builder")
            if h.id in self._measured:
                raise MeasuredQuditError(f"qudit {h.id} has already been measured")
            if h.generation != self._generation[h.id]:
                raise LinearityError(
                    f"qudit {h.id} handle of generation {h.generation} was already consumed "
                    f"(current generation {self._generation[h.id]})"
                )
        ids = [h.id for h in handles]
        if len(set(ids)) != len(ids):
            raise LinearityError(f"the same qudit appears twice in one operation: {ids}")
        return handles

    def _reissue(self, handles) -> tuple:
        out = []
        for h in handles:
            self._generation[h.id] += 1
            out.append(QuditHandle(h.id, h.dim, self._generation[h.id], self._serial))
        return tuple(out)

    # Operations

    def apply(self, gate: GateRef, *targets) -> tuple:
        """Append ``gate`` on ``targets`` (handles, in gate order).

        Returns:
            Fresh handles for the targets, in the same order.

        Raises:
            LinearityError: a handle was already consumed or repeated.
            MeasuredQuditError: a target was measured.
            DimensionError: the gate dims differ from the target dims.
        """
        if len(targets) == 1 and isinstance(targets[0], (list, tuple)):
            targets = tuple(targets[0])
        handles = self._consume(targets)
        dims = tuple(self._dims[h.id] for h in handles)
        if dims != gate.dims:
            raise DimensionError(f"{gate!r} expects dims {gate.dims}, targets have {dims}")
        self._ops.append(Operation(gate, tuple(h.id for h in handles)))
        return self._reissue(handles)

    def _single(self, kind, q, power=1):
        if isinstance(q, (list, tuple)):
            return [self._single(kind, h, power) for h in q]
        (out,) = self.apply(GateRef.basis(kind, q.dim, power), q)
        return out

    def hadamard(self, q, power=1):
        return self._single(GateKind.H, q, power)

    def x(self, q, power=1):
        return self._single(GateKind.X, q, power)

    def z(self, q, power=1):
        return self._single(GateKind.Z, q, power)

    def t(self, q, power=1):
        return self._single(GateKind.T, q, power)

    def sum(self, control: QuditHandle, target: QuditHandle, power=1) -> tuple:
        return self.apply(GateRef.sum(control.dim, target.dim, power), control, target)

    def cnot(self, control: QuditHandle, target: QuditHandle) -> tuple:
        """Qubit CNOT, identical to ``sum`` on two qubits."""
        if control.dim != 2 or target.dim != 2:
            raise DimensionError("cnot acts on two qubits; use sum for qudits")
        return self.sum(control, target)

    def ccnot(self, c0: QuditHandle, ancilla: QuditHandle, target: QuditHandle) -> tuple:
        """Toffoli on two qubits using a qutrit ``ancilla`` as the second control.

        Flips ``target`` when ``c0 == 1`` and ``ancilla == 1``. The ancilla is
        restored. Stored as one three-qudit op that carries a two-qudit
        decomposition: ``c0`` lifts the ancilla from ``|1>`` to ``|2>``, the
        ancilla flips the target on ``|2>``, and the lift is undone.
        """
        if (c0.dim, ancilla.dim, target.dim) != (2, 3, 2):
            raise DimensionError("ccnot expects (qubit, qutrit, qubit)")
        gate = ccnot_gate()
        return self.apply(gate, c0, ancilla, target)

    def measure(self, *targets) -> tuple:
        """Measure ``targets``; returns ``(fresh handles, Measurement marker)``."""
        if len(targets) == 1 and isinstance(targets[0], (list, tuple)):
            targets = tuple(targets[0])
        handles = self._consume(targets)
        marker = Measurement(tuple(h.id for h in handles))
        self._ops.append(marker)
        fresh = self._reissue(handles)
        self._measured.update(h.id for h in handles)
        return fresh, marker

    def qft(self, targets: Sequence[QuditHandle], inverse=False) -> list[QuditHandle]:
        """Append the qudit quantum Fourier transform on ``targets``.

        ``targets[0]`` is the most significant digit. The block's unitary is
        ``w**(jk) / sqrt(d**n)`` with ``w = exp(2 pi i / d**n)``.
        """
        hs = list(targets)
        if not hs:
            raise DimensionError("qft needs at least one qudit")
        d = hs[0].dim
        if any(h.dim != d for h in hs):
            raise DimensionError("qft requires a uniform qudit dimension")
        self._consume(hs)
        ops = _qft_ops(d, len(hs), inverse)
        for gate, pos in ops:
            hs_sub = [hs[p] for p in pos]
            new = self.apply(gate, *hs_sub)
            for p, h in zip(pos, new):
                hs[p] = h
        return hs

    def inverse_qft(self, targets):
        return self.qft(targets, inverse=True)

    qft_block = qft

    def qpe(self, U, controls: Sequence[QuditHandle], targets: Sequence[QuditHandle]):
        """Append phase estimation of ``U`` (acting on ``targets``).

        Controls get a Fourier layer, control ``k`` (most significant first)
        applies ``U**(d**(t-1-k))`` controlled-power style, and the controls
        finish with an inverse QFT.

        Returns:
            ``(controls, targets)`` as fresh handles.
        """
        cs, ts = list(controls), list(targets)
        if not cs:
            raise DimensionError("qpe needs at least one control")
        d = cs[0].dim
        if any(c.dim != d for c in cs):
            raise DimensionError("qpe controls must share one dimension")
        U = require_unitary(U, name="U")
        tdims = tuple(t.dim for t in ts)
        if U.shape[0] != math.prod(tdims):
            raise DimensionError(f"U has size {U.shape[0]}, targets span {math.prod(tdims)}")
        self._consume(cs + ts)
        cs = self.hadamard(cs)
        t = len(cs)
        for k in range(t):
            payload = np.linalg.matrix_power(U, d ** (t - 1 - k))
            gate = GateRef(GateKind.CONTROLLED_U, (d, *tdims), payload=payload)
            new = self.apply(gate, cs[k], *ts)
            cs[k], ts = new[0], list(new[1:])
        cs = self.inverse_qft(cs)
        return cs, ts

    qpe_block = qpe

    def circuit(self) -> Circuit:
        return Circuit(tuple(self._dims.items()), tuple(self._ops))


def builder_new() -> Builder:
    return Builder()


# Function-style wrappers around the Builder methods


def alloc_qudit(b: Builder, d: int) -> QuditHandle:
    return b.qudit(d)


def alloc_register(b: Builder, d: int, n: int) -> list[QuditHandle]:
    return b.register(d, n)


def apply(b: Builder, g: GateRef, targets) -> tuple:
    return b.apply(g, *targets) if isinstance(targets, (list, tuple)) else b.apply(g, targets)


def measure(b: Builder, targets) -> tuple:
    return b.measure(*targets) if isinstance(targets, (list, tuple)) else b.measure(targets)


def qft_block(b: Builder, targets) -> list[QuditHandle]:
    return b.qft(targets)


def qpe_block(b: Builder, U, controls, targets):
    return b.qpe(U, controls, targets)


def _qft_ops(d: int, n: int, inverse: bool) -> list:
    """Gate list (gate, local positions) for the n-qudit QFT or its inverse."""
    ops = []
    for j in range(n):
        ops.append((GateRef.basis(GateKind.H, d), (j,)))
        for k in range(j + 1, n):
            m = k - j + 1
            entries = [np.diag(np.exp(2j * np.pi * a * np.arange(d) / d**m)) for a in range(d)]
            ops.append((GateRef.mux(entries, (d,), d), (k, j)))
    for j in range(n // 2):
        ops.append((GateRef.custom(swap_gate(d), (d, d)), (j, n - 1 - j)))
    if inverse:
        ops = [(g.inverse(), pos) for g, pos in reversed(ops)]
    return ops


def ccnot_gate() -> GateRef:
    """Qubit-qutrit-qubit Toffoli with its two-qudit decomposition attached."""
    lift = np.eye(3, dtype=complex)[[0, 2, 1]]
    x2 = np.array([[0, 1], [1, 0]], dtype=complex)
    step1 = GateRef.mux([np.eye(3), lift], (2,), 3)
    step2 = GateRef.mux([np.eye(2), np.eye(2), x2], (3,), 2)
    decomposition = ((step1, (0, 1)), (step2, (1, 2)), (step1, (0, 1)))
    # Acts as a Toffoli while the ancilla stays in {|0>, |1>}; the payload is
    # the exact product of the decomposition, including the |2> sector.
    a = np.kron(step1.matrix, np.eye(2))
    b = np.kron(np.eye(2), step2.matrix)
    M = a @ b @ a
    return GateRef.custom(M, (2, 3, 2), decomposition=decomposition)


def lower_operation(op: Operation) -> list[Operation]:
    """Replace ops carrying a decomposition by their two-qudit parts."""
    dec = op.gate.decomposition
    if dec is None:
        return [op]
    out = []
    for g, pos in dec:
        out.extend(lower_operation(Operation(g, tuple(op.targets[p] for p in pos))))
    return out


@dataclasses.dataclass(frozen=True, eq=False)
class CircuitDag:
    """Structural DAG of a circuit.

    Vertices are qudit states ``(id, generation)``. Every gate on ``k`` qudits
    advances each target by one generation. The last target of a gate (the
    acted-on qudit of a controlled gate) gets a join vertex with one incoming
    edge per participating qudit; the other targets get one pass-through edge.
    Edges carry the index of the operation in ``ops``.

    Attributes:
        graph: the ``networkx.DiGraph``.
        qudits: ``(id, dim)`` pairs of the source circuit.
        ops: the lowered operation list the edges refer to.
    """

    graph: nx.DiGraph
    qudits: tuple
    ops: tuple

    @property
    def dims(self) -> tuple:
        return tuple(d for _, d in self.qudits)

    @property
    def ids(self) -> tuple:
        return tuple(i for i, _ in self.qudits)

    def topological_ops(self) -> list[int]:
        """Operation indices in execution order.

        ``ops`` is stored in a topological order of the graph: every edge
        leaving a vertex belongs to a later operation than the edges entering
        it.
        """
        return list(range(len(self.ops)))

    def max_in_degree(self) -> int:
        return max((deg for _, deg in self.graph.in_degree()), default=0)


def to_dag(c: Circuit) -> CircuitDag:
    """Build the qudit-state DAG, lowering ops that carry a decomposition."""
    ops = []
    for op in c.ops:
        if isinstance(op, Operation):
            ops.extend(lower_operation(op))
        else:
            ops.append(op)
    g = nx.DiGraph()
    current = {}
    for qid, d in c.qudits:
        g.add_node((qid, 0), qudit=qid, dim=d, generation=0)
        current[qid] = 0
    for k, op in enumerate(ops):
        prev = {t: (t, current[t]) for t in op.targets}
        for t in op.targets:
            current[t] += 1
            g.add_node((t, current[t]), qudit=t, dim=dict(c.qudits)[t], generation=current[t])
        if isinstance(op, Measurement):
            for t in op.targets:
                g.add_edge(prev[t], (t, current[t]), op=k, role="measure")
            continue
        *ctrls, target = op.targets
        new_target = (target, current[target])
        g.add_edge(prev[target], new_target, op=k, role="target")
        for t in ctrls:
            g.add_edge(prev[t], new_target, op=k, role="control")
            g.add_edge(prev[t], (t, current[t]), op=k, role="pass")
    return CircuitDag(g, c.qudits, tuple(ops))
