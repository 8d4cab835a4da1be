"""Compilation pipelines and dimension retargeting.

Three synthesis methods share one entry point, :func:`compile_unitary`:

* ``csd``: exact Cosine-Sine lowering to controlled single-qudit gates.
* ``sk``: Solovay-Kitaev directly on the input. Multi-qudit inputs use a
  table over the whole register (single-qudit ``H, H^dag, T, T^dag`` and
  two-qudit ``SUM, SUM^dag`` letters).
* ``hybrid``: CSD first, then every single-qudit payload of the lowered
  circuit is replaced by a Solovay-Kitaev word. Payloads equal up to phase
  are approximated once and reused.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
import math
import time
from collections.abc import Sequence

import numpy as np

from .config import Tolerances, resolve
from .errors import DimensionError, NumericalError, SKConvergenceError
from .gates import GateKind, GateRef
from .ir import Circuit, Measurement, Operation
from .linalg import check_dimension, dist, require_unitary
from .sim import contract_to_unitary
from .synth_csd import csd_qudit, lower_to_circuit, qudit_count
from .synth_sk import (
    ApproximationTable,
    GateWord,
    default_table,
    register_basis,
    solovay_kitaev_trace,
    word_runs,
    word_to_ops,
    _keys,
)


class Method(str, enum.Enum):
    CSD = "csd"
    SK = "sk"
    HYBRID = "hybrid"


@dataclasses.dataclass
class CompileOptions:
    """Settings for :func:`compile_unitary`.

    Attributes:
        method: ``csd``, ``sk`` or ``hybrid``.
        epsilon: target phase-invariant distance for ``sk`` and ``hybrid``.
        sk_depth: maximum number of Solovay-Kitaev refinement levels; each
            approximation stops at the first level that meets its target.
        table: single-qudit base table (default: the shared table for ``d``).
            Tables grow in place when a target needs a deeper table.
        cache_enabled: reuse words for payloads that are equal up to phase.
        max_table_entries: entry cap when tables are deepened or when ``sk``
            builds a register-wide table (default: a 256 MiB budget).
        tol: tolerance record.
    """

    method: Method | str = Method.HYBRID
    epsilon: float = 0.05
    sk_depth: int = 8
    table: ApproximationTable | None = None
    cache_enabled: bool = True
    max_table_entries: int | None = None
    tol: Tolerances | None = None

    def __post_init__(self):
        self.method = Method(self.method)
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if isinstance(self.sk_depth, bool) or not isinstance(self.sk_depth, int) or self.sk_depth < 0:
            raise ValueError(f"sk_depth must be a non-negative integer, got {self.sk_depth!r}")


@dataclasses.dataclass
class CompileReport:
    method: str
    d: int
    n: int
    epsilon: float
    csd_ms: float = 0.0
    sk_ms: float = 0.0
    total_ms: float = 0.0
    factor_count: int = 0
    gate_counts: dict = dataclasses.field(default_factory=dict)
    distance: float = float("nan")
    cache_hits: int = 0
    distinct_payloads: int = 0
    sk_runs: int = 0

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    def csv_row(self, trial: int = 0) -> list:
        return [
            self.method, self.d, self.n, trial, self.epsilon,
            f"{self.csd_ms:.3f}", f"{self.sk_ms:.3f}", f"{self.total_ms:.3f}",
            self.gate_counts.get("H", 0), self.gate_counts.get("T", 0), self.gate_counts.get("SUM", 0),
            f"{self.distance:.3e}",
        ]


CSV_HEADER = ["method", "d", "n", "trial", "epsilon", "csd_ms", "sk_ms", "total_ms", "gate_h", "gate_t", "gate_sum", "distance"]


def _ms(t0: float) -> float:
    return (time.perf_counter() - t0) * 1e3


class _PayloadCompiler:
    """Approximates single-qudit payloads with SK, deepening the table on refusal."""

    def __init__(self, table: ApproximationTable, opts: CompileOptions, tol: Tolerances):
        self.table = table
        self.opts = opts
        self.tol = tol
        self.cache: dict = {}
        self.hits = 0
        self.runs = 0

    def _sk(self, U, target: float) -> GateWord:
        while True:
            try:
                word, trace = solovay_kitaev_trace(self.table, U, self.opts.sk_depth, target=target, tol=self.tol)
                return word
            except SKConvergenceError:
                before = len(self.table)
                cap = self.opts.max_table_entries or self.table.max_entries
                self.table.max_entries = cap
                self.table.extend(self.table.max_len + 1, strict_cap=False)
                if len(self.table) == before:
                    raise

    def word(self, U, target: float) -> GateWord:
        """SK word for ``U`` at accuracy ``target``.

        Cached words are reused only for payloads equal to the cached one up
        to phase (within ``dedup_tol``) and the same target, so results do not
        depend on whether the cache is enabled.
        """
        if not self.opts.cache_enabled:
            self.runs += 1
            return self._sk(U, target)
        key = (bytes(_keys(U[None])[0][0]), target)
        hit = self.cache.get(key)
        if hit is not None and dist(hit[0], U) <= self.tol.dedup_tol:
            self.hits += 1
            return hit[1]
        self.runs += 1
        word = self._sk(U, target)
        self.cache.setdefault(key, (U, word))
        return word


def _phase_of(word: GateWord, U) -> float:
    """``beta`` with ``word.matrix ~ exp(i beta) U``."""
    return float(np.angle(np.vdot(U, word.matrix)))


@functools.lru_cache(maxsize=4096)
def _controlled_letter(kind: GateKind, dims: tuple, power: int, value: int) -> GateRef:
    return GateRef(kind, dims, power, control_value=value)


def _emit_word(ops: list, table, word: GateWord, controls: tuple, control_dims: tuple, value, target: int):
    if not controls:
        ops.extend(word_to_ops(table, word, (target,)))
        return
    wires = (*controls, target)
    for a, power in word_runs(table, word):
        g = table.basis[a].gate
        ops.append(Operation(_controlled_letter(g.kind, (*control_dims, g.dims[-1]), power, value), wires))


def _compile_controlled(ops, pc: _PayloadCompiler, entries, controls: tuple, target: int, d: int, tau: float):
    """Emit SK words for a (possibly multiplexed) single-qudit payload, fixing branch phases."""
    if not controls:
        word = pc.word(entries[0], tau)
        _emit_word(ops, pc.table, word, (), (), None, target)
        return
    cdims = (d,) * len(controls)
    betas = np.zeros(len(entries))
    for v, M in enumerate(entries):
        word = pc.word(M, tau)
        betas[v] = _phase_of(word, M)
        _emit_word(ops, pc.table, word, controls, cdims, v, target)
    betas -= betas[0]
    if np.max(np.abs(np.angle(np.exp(1j * betas)))) < 1e-14:
        return
    # diag(exp(-i beta)) on the control register, as a multiplexer on its last qudit
    phases = np.exp(-1j * betas).reshape(-1, d)
    sub = [np.diag(row) for row in phases]
    _compile_controlled(ops, pc, sub, controls[:-1], controls[-1], d, tau)


def _hybrid_ops(lowered: Circuit, pc: _PayloadCompiler, d: int, tau: float) -> list:
    ops: list = []
    for op in lowered.ops:
        g = op.gate
        if g.kind is GateKind.CUSTOM and len(g.dims) == 1:
            _compile_controlled(ops, pc, [g.payload], (), op.targets[0], d, tau)
        elif g.kind is GateKind.MULTIPLEXER:
            _compile_controlled(ops, pc, list(g.control_map), op.targets[:-1], op.targets[-1], d, tau)
        else:
            raise NumericalError(f"unexpected gate {g!r} in the lowered circuit")
    return ops


def _check_size(U, d):
    d = check_dimension(d)
    U = require_unitary(U)
    return U, d, qudit_count(U.shape[0], d)


def csd_compile(U, d: int, opts: CompileOptions | None = None) -> tuple[Circuit, CompileReport]:
    """Exact CSD lowering of ``U``."""
    opts = opts or CompileOptions(method=Method.CSD)
    tol = resolve(opts.tol)
    U, d, n = _check_size(U, d)
    t0 = time.perf_counter()
    factors = csd_qudit(U, d, tol)
    circuit = lower_to_circuit(factors, d, n, tol)
    elapsed = _ms(t0)
    report = CompileReport("csd", d, n, opts.epsilon, csd_ms=elapsed, total_ms=elapsed, factor_count=len(factors))
    report.gate_counts = circuit.gate_counts()
    report.distance = dist(contract_to_unitary(circuit, guard=max(U.shape[0], 2**14)), U)
    if report.distance > tol.lower_tol:
        raise NumericalError(f"CSD lowering missed the input by {report.distance:.2e}")
    return circuit, report


def hybrid_compile(U, d: int, opts: CompileOptions | None = None) -> tuple[Circuit, CompileReport]:
    """CSD lowering followed by Solovay-Kitaev on every single-qudit payload.

    Each payload gets an accuracy target of ``epsilon / sqrt(L)`` for ``L``
    gate layers in the lowered circuit (a multiplexer's branches act on
    orthogonal subspaces, so they share one layer's budget). Multiplexer
    branches are approximated only up to phase; the relative phases are
    removed by a diagonal gate on the control qudits, compiled the same way.
    If the contracted result still misses ``epsilon`` the targets are halved
    and the pass repeats (cached words that already meet the new target are
    kept).

    Raises:
        SKConvergenceError: a payload could not be approximated even after
            deepening the table to its entry cap.
        NumericalError: ``epsilon`` was not reached.
    """
    opts = opts or CompileOptions()
    tol = resolve(opts.tol)
    U, d, n = _check_size(U, d)
    t_start = time.perf_counter()
    factors = csd_qudit(U, d, tol)
    lowered = lower_to_circuit(factors, d, n, tol)
    csd_ms = _ms(t_start)
    t_sk = time.perf_counter()
    table = opts.table if opts.table is not None else default_table(d)
    pc = _PayloadCompiler(table, opts, tol)
    layers = max(1, 2 * len(lowered.ops))
    tau = opts.epsilon / math.sqrt(layers)
    qudits = tuple((q, d) for q in range(n))
    for _ in range(6):
        ops = _hybrid_ops(lowered, pc, d, tau)
        circuit = Circuit(qudits, tuple(ops))
        sk_ms = _ms(t_sk)
        distance = dist(contract_to_unitary(circuit, guard=max(U.shape[0], 2**14)), U)
        if distance <= opts.epsilon:
            break
        t_sk = time.perf_counter() - sk_ms / 1e3
        tau /= 2
    else:
        raise NumericalError(f"hybrid compile reached distance {distance:.3e} > epsilon {opts.epsilon}")
    report = CompileReport(
        "hybrid", d, n, opts.epsilon, csd_ms=csd_ms, sk_ms=sk_ms, total_ms=csd_ms + sk_ms,
        factor_count=len(factors), gate_counts=circuit.gate_counts(), distance=distance,
        cache_hits=pc.hits, distinct_payloads=len(pc.cache), sk_runs=pc.runs,
    )
    return circuit, report


def sk_compile(U, d: int, opts: CompileOptions | None = None) -> tuple[Circuit, CompileReport]:
    """Solovay-Kitaev on the whole input.

    A single qudit uses ``opts.table`` (or the shared default table). For
    ``n > 1`` a register-wide table is enumerated inside the call, deepening
    until the nearest entry is within the balance threshold of the target or
    the entry cap is reached.

    Raises:
        SKConvergenceError: the base approximation is too coarse at the cap,
            or ``epsilon`` was not reached within ``sk_depth`` levels.
    """
    opts = opts or CompileOptions(method=Method.SK)
    tol = resolve(opts.tol)
    U, d, n = _check_size(U, d)
    t0 = time.perf_counter()
    if n == 1:
        table = opts.table if opts.table is not None else default_table(d)
    else:
        table = ApproximationTable((d,) * n, register_basis(d, n), opts.max_table_entries)
    while True:
        try:
            word, trace = solovay_kitaev_trace(table, U, opts.sk_depth, target=opts.epsilon, tol=tol)
            break
        except SKConvergenceError as exc:
            before = len(table)
            table.extend(table.max_len + 1, strict_cap=False)
            if len(table) == before:
                raise SKConvergenceError(
                    f"{exc} (table of {len(table)} words, length {table.max_len}, is at its entry cap)", exc.trace
                ) from None
    ops = word_to_ops(table, word, tuple(range(n)))
    circuit = Circuit(tuple((q, d) for q in range(n)), tuple(ops))
    elapsed = _ms(t0)
    distance = dist(contract_to_unitary(circuit, guard=max(U.shape[0], 2**14)), U)
    report = CompileReport("sk", d, n, opts.epsilon, sk_ms=elapsed, total_ms=elapsed,
                           gate_counts=circuit.gate_counts(), distance=distance, sk_runs=1)
    if distance > opts.epsilon:
        raise SKConvergenceError(
            f"Solovay-Kitaev reached {distance:.3e} > epsilon {opts.epsilon} after {len(trace.kept) - 1} levels",
            trace.kept,
        )
    return circuit, report


def compile_unitary(U, d: int, opts: CompileOptions | None = None) -> tuple[Circuit, CompileReport]:
    opts = opts or CompileOptions()
    return {Method.CSD: csd_compile, Method.SK: sk_compile, Method.HYBRID: hybrid_compile}[opts.method](U, d, opts)


def compile_circuit(c: Circuit, opts: CompileOptions | None = None) -> tuple[Circuit, list]:
    """Compile every gate of a circuit whose qudits share one dimension.

    Gates on mixed dimensions are kept as they are; measurements pass through.

    Returns:
        ``(circuit, reports)`` with one report per compiled gate.
    """
    opts = opts or CompileOptions()
    dims = dict(c.qudits)
    ops, reports = [], []
    for op in c.ops:
        if isinstance(op, Measurement):
            ops.append(op)
            continue
        tdims = {dims[t] for t in op.targets}
        if len(tdims) != 1:
            ops.append(op)
            continue
        d = tdims.pop()
        sub, rep = compile_unitary(op.gate.matrix, d, opts)
        reports.append(rep)
        for sop in sub.ops:
            ops.append(Operation(sop.gate, tuple(op.targets[t] for t in sop.targets)))
    return Circuit(c.qudits, tuple(ops)), reports


# Retargeting


def wires_needed(d: int, e: int, n: int = 1) -> int:
    """Smallest ``m`` with ``e**m >= d**n``."""
    m, size, target = 0, 1, d**n
    while size < target:
        size *= e
        m += 1
    return m


def subspace_choice(A, placement: Sequence[int], *, size: int) -> np.ndarray:
    """Embed ``A`` on the basis states ``placement`` of a ``size``-dim space.

    ``B[placement[i], placement[j]] = A[i, j]``; every other basis state is
    left unchanged.

    Raises:
        DimensionError: placement is not injective, out of range, or of the
            wrong length.
    """
    A = np.asarray(A, dtype=complex)
    placement = [int(p) for p in placement]
    if len(placement) != A.shape[0]:
        raise DimensionError(f"placement has {len(placement)} entries, A has size {A.shape[0]}")
    if len(set(placement)) != len(placement):
        raise DimensionError("placement must be injective")
    if any(not 0 <= p < size for p in placement):
        raise DimensionError(f"placement indices must lie in [0, {size})")
    B = np.eye(size, dtype=complex)
    idx = np.array(placement)
    B[np.ix_(idx, idx)] = A
    return B


def retarget_unitary(A, d: int, n: int, e: int) -> tuple[np.ndarray, int]:
    """Embed a ``d**n`` unitary into ``m`` qudits of dimension ``e`` as ``A (+) I``."""
    d, e = check_dimension(d), check_dimension(e, "e")
    A = require_unitary(A)
    if A.shape[0] != d**n:
        raise DimensionError(f"A has size {A.shape[0]}, expected {d}**{n}")
    m = wires_needed(d, e, n)
    return subspace_choice(A, range(d**n), size=e**m), m


def _local_placement(dims: Sequence[int], groups: Sequence[int], e: int, trailing: bool) -> list[int]:
    """Physical indices of the logical basis states of qudits ``dims``.

    Qudit ``i`` (dimension ``dims[i]``) is stored in ``groups[i]`` wires of
    dimension ``e``; logical value ``x`` sits at group value ``x`` (leading)
    or ``e**m - d + x`` (trailing).
    """
    sizes = [e**m for m in groups]
    out = []
    for digits in np.ndindex(*dims):
        idx = 0
        for x, dq, s in zip(digits, dims, sizes):
            idx = idx * s + (s - dq + x if trailing else x)
        out.append(idx)
    return out


def retarget_circuit(
    c: Circuit,
    e: int,
    opts: CompileOptions | None = None,
    placement: str = "leading",
) -> Circuit:
    """Rewrite a circuit for qudits of dimension ``e``.

    Each logical qudit of dimension ``d`` becomes ``m`` wires of dimension
    ``e`` with ``e**m >= d``. Gates already acting on dimension-``e`` qudits
    are kept; every other gate is embedded on its wires with
    :func:`subspace_choice` and decomposed with ``opts.method`` (default
    ``hybrid``; pass ``method="csd"`` for an exact decomposition).

    Args:
        c: source circuit.
        e: target qudit dimension.
        opts: compile options for the embedded gates.
        placement: ``"leading"`` or ``"trailing"`` position of each qudit's
            logical states inside its wire group.
    """
    e = check_dimension(e, "e")
    if placement not in ("leading", "trailing"):
        raise ValueError("placement must be 'leading' or 'trailing'")
    if all(dq == e for dq in c.dims):
        return c
    opts = opts or CompileOptions()
    wires: dict = {}
    qudits = []
    for qid, dq in c.qudits:
        m = wires_needed(dq, e)
        wires[qid] = tuple(range(len(qudits), len(qudits) + m))
        qudits.extend((w, e) for w in wires[qid])
    dims = dict(c.qudits)
    ops: list = []
    for op in c.ops:
        if isinstance(op, Measurement):
            ops.append(Measurement(tuple(w for t in op.targets for w in wires[t])))
            continue
        tdims = [dims[t] for t in op.targets]
        if all(dq == e for dq in tdims):
            ops.append(Operation(op.gate, tuple(wires[t][0] for t in op.targets)))
            continue
        groups = [len(wires[t]) for t in op.targets]
        local = [w for t in op.targets for w in wires[t]]
        size = e ** len(local)
        B = subspace_choice(op.gate.matrix, _local_placement(tdims, groups, e, placement == "trailing"), size=size)
        sub, _ = compile_unitary(B, e, opts)
        ops.extend(Operation(s.gate, tuple(local[t] for t in s.targets)) for s in sub.ops)
    return Circuit(tuple(qudits), tuple(ops))


def embedding_isometry(dims: Sequence[int], e: int, placement: str = "leading") -> np.ndarray:
    """Columns are the images of the logical basis states under :func:`retarget_circuit`."""
    groups = [wires_needed(dq, e) for dq in dims]
    idx = _local_placement(list(dims), groups, e, placement == "trailing")
    size = e ** sum(groups)
    V = np.zeros((size, math.prod(dims)), dtype=complex)
    V[idx, np.arange(len(idx))] = 1
    return V
