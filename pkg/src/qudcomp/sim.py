"""Dense state-vector simulation of mixed-dimension qudit circuits.

Amplitudes use mixed-radix order with qudit 0 (the first entry of
``Circuit.qudits``) as the most significant digit. Internally a state is a
tensor of shape ``(batch, *dims)`` so that the same kernels serve single
states and whole-unitary contraction.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .config import Tolerances, resolve
from .errors import DimensionError, NumericalError, SchemaError, SizeGuardError
from .gates import BASIS_KINDS, GateKind
from .ir import Circuit, CircuitDag, Measurement, Operation, to_dag

RNG_NAME = "numpy.PCG64"
DEFAULT_SIZE_GUARD = 2**14


@dataclasses.dataclass(frozen=True, eq=False)
class StateVector:
    dims: tuple
    amplitudes: np.ndarray
    ids: tuple | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != math.prod(dims):
            raise DimensionError(f"{amps.size} amplitudes for dims {dims}")
        ids = tuple(range(len(dims))) if self.ids is None else tuple(self.ids)
        if len(ids) != len(dims):
            raise DimensionError("one id per qudit required")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "ids", ids)

    @classmethod
    def zero(cls, dims, ids=None) -> "StateVector":
        amps = np.zeros(math.prod(dims), dtype=complex)
        amps[0] = 1
        return cls(tuple(dims), amps, ids)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def amplitude(self, digits) -> complex:
        return complex(self.amplitudes[np.ravel_multi_index(tuple(digits), self.dims)])

    def to_json(self) -> dict:
        return {
            "dims": list(self.dims),
            "ids": list(self.ids),
            "re": self.amplitudes.real.tolist(),
            "im": self.amplitudes.imag.tolist(),
        }


@dataclasses.dataclass(frozen=True)
class CountsResult:
    """Sampled outcome counts keyed by digit tuples (one digit per measured qudit)."""

    counts: dict
    shots: int
    seed: int
    measured: tuple
    rng: str = RNG_NAME

    def to_json(self) -> dict:
        keys = sorted(self.counts)
        return {
            "shots": self.shots,
            "seed": self.seed,
            "measured": list(self.measured),
            "rng": self.rng,
            "counts": {",".join(map(str, k)): int(self.counts[k]) for k in keys},
        }


def _apply_local(psi: np.ndarray, M: np.ndarray, dims: tuple, control_value, axes: tuple) -> np.ndarray:
    """Apply ``M`` to the last of ``axes``, on the slice where the others read ``control_value``."""
    src = [1 + a for a in axes]
    view = np.moveaxis(psi, src, list(range(1, 1 + len(axes))))
    if control_value is None:
        sl = view
    else:
        digits = np.unravel_index(control_value, dims[:-1])
        sl = view[(slice(None), *[int(x) for x in digits])]
    sl[...] = np.tensordot(M, sl, axes=([1], [1])).swapaxes(0, 1)
    return psi


def _apply(psi: np.ndarray, op: Operation, axes: tuple) -> np.ndarray:
    """Apply ``op`` to tensor ``psi`` of shape ``(batch, *dims)``; may work in place."""
    g = op.gate
    k = len(axes)
    src = [1 + a for a in axes]
    dst = list(range(1, 1 + k))
    dims = g.dims
    if g.kind in BASIS_KINDS and (g.control_value is not None or k == 1):
        return _apply_local(psi, g.target_matrix, dims, g.control_value, axes)
    view = np.moveaxis(psi, src, dst)
    if g.kind is GateKind.MULTIPLEXER:
        n_ctrl = math.prod(dims[:-1])
        for v in range(n_ctrl):
            if g.identity_entries[v]:
                continue
            digits = np.unravel_index(v, dims[:-1])
            sl = view[(slice(None), *[int(x) for x in digits])]
            sl[...] = np.tensordot(g.control_map[v], sl, axes=([1], [1])).swapaxes(0, 1)
        return psi
    shape = view.shape
    flat = view.reshape(shape[0], math.prod(dims), -1)
    out = np.einsum("ij,bjr->bir", g.matrix, flat).reshape(shape)
    return np.ascontiguousarray(np.moveaxis(out, dst, src))


def _fusable(op) -> tuple | None:
    """``(targets, control_value, matrix)`` for gates acting as one matrix on their last target."""
    if not isinstance(op, Operation):
        return None
    g = op.gate
    if g.kind in BASIS_KINDS:
        return op.targets, g.control_value, g.target_matrix
    if g.kind is GateKind.CUSTOM and len(g.dims) == 1:
        return op.targets, None, g.matrix
    return None


def _fused(ops):
    """Merge runs of single-target gates sharing targets and control value.

    Yields operations and ``(targets, dims, control_value, matrix)`` tuples.
    """
    run = None
    for op in ops:
        f = _fusable(op)
        if f is not None and run is not None and f[:2] == run[0][:2]:
            run[1] = f[2] @ run[1]
            continue
        if run is not None:
            yield (*run[0][:2], run[0][2], run[1])
            run = None
        if f is None:
            yield op
        else:
            run = [(f[0], f[1], op.gate.dims), f[2]]
    if run is not None:
        yield (*run[0][:2], run[0][2], run[1])


def _run(psi: np.ndarray, ops, axis_of: dict, tol: Tolerances, norm_every: int):
    """Apply ``ops`` in order, fusing consecutive gates on the same wires."""
    psi = np.ascontiguousarray(psi)
    expected = None
    for count, item in enumerate(_fused(ops), 1):
        if isinstance(item, Measurement):
            continue
        if isinstance(item, Operation):
            psi = _apply(psi, item, tuple(axis_of[t] for t in item.targets))
        else:
            targets, control_value, dims, M = item
            psi = _apply_local(psi, M, dims, control_value, tuple(axis_of[t] for t in targets))
        if norm_every and count % norm_every == 0:
            expected = _check_norm(psi, tol, expected)
    _check_norm(psi, tol, expected)
    return psi


def _check_norm(psi, tol, expected):
    norms = np.sum(np.abs(psi.reshape(psi.shape[0], -1)) ** 2, axis=1)
    if np.max(np.abs(norms - 1)) > tol.norm_tol:
        raise NumericalError(f"state norm drifted to {norms.max():.15f} (limit {tol.norm_tol:.1e})")
    return norms


def run_statevector(
    dag: CircuitDag | Circuit,
    initial: StateVector | None = None,
    tol: Tolerances | None = None,
    norm_every: int = 64,
) -> StateVector:
    """Execute a circuit (or its DAG) on ``initial`` (default ``|0...0>``).

    Measurement markers are ignored here: sampling is done from the returned
    state by :func:`sample`.

    Args:
        dag: the circuit DAG; a :class:`Circuit` is converted with ``to_dag``.
        initial: starting state with the circuit's dims.
        tol: tolerance record; ``norm_tol`` bounds norm drift.
        norm_every: check the norm after every this many gates (0 disables
            intermediate checks; the final state is always checked).

    Raises:
        DimensionError: initial dims differ from the circuit dims.
        NumericalError: the norm drifted beyond ``norm_tol``.
    """
    tol = resolve(tol)
    if isinstance(dag, Circuit):
        dag = to_dag(dag)
    dims = dag.dims
    if initial is None:
        initial = StateVector.zero(dims, dag.ids)
    elif tuple(initial.dims) != tuple(dims):
        raise DimensionError(f"initial state dims {initial.dims} differ from circuit dims {dims}")
    axis_of = {qid: k for k, qid in enumerate(dag.ids)}
    ops = [dag.ops[k] for k in dag.topological_ops()]
    psi = initial.amplitudes.reshape((1, *dims)).copy()
    psi = _run(psi, ops, axis_of, tol, norm_every)
    return StateVector(dims, psi.reshape(-1), dag.ids)


def marginal(state: StateVector, measured) -> tuple[np.ndarray, tuple]:
    """Exact marginal distribution over the ``measured`` qudit ids.

    Returns:
        ``(probabilities, dims)`` with probabilities shaped by the measured dims.
    """
    measured = tuple(measured)
    for m in measured:
        if m not in state.ids:
            raise DimensionError(f"unknown qudit id {m}")
    axes = [state.ids.index(m) for m in measured]
    probs = state.probabilities().reshape(state.dims)
    rest = tuple(a for a in range(len(state.dims)) if a not in axes)
    p = probs.sum(axis=rest) if rest else probs
    # sum keeps remaining axes in increasing order; permute to the requested order
    order = sorted(axes)
    p = np.transpose(p, [order.index(a) for a in axes])
    return p, tuple(state.dims[a] for a in axes)


def sample(state: StateVector, measured, shots: int, seed: int) -> CountsResult:
    """Draw ``shots`` outcomes of the measured qudits from the exact marginal.

    Uses ``numpy.random.Generator(PCG64(seed))`` and a single multinomial draw,
    so results are reproducible for a fixed seed.
    """
    if isinstance(shots, bool) or not isinstance(shots, (int, np.integer)) or shots < 1:
        raise DimensionError(f"shots must be a positive integer, got {shots!r}")
    p, mdims = marginal(state, measured)
    flat = p.reshape(-1)
    flat = np.clip(flat, 0, None)
    flat = flat / flat.sum()
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.multinomial(int(shots), flat)
    counts = {}
    for idx in np.flatnonzero(draws):
        counts[tuple(int(x) for x in np.unravel_index(idx, mdims))] = int(draws[idx])
    return CountsResult(counts, int(shots), int(seed), tuple(measured))


def distribution(state: StateVector, measured=None) -> dict:
    """Exact outcome probabilities keyed by ``"d0,d1,..."`` strings (nonzero only)."""
    measured = state.ids if measured is None else tuple(measured)
    p, mdims = marginal(state, measured)
    out = {}
    for idx in np.flatnonzero(p.reshape(-1) > 1e-15):
        key = ",".join(str(int(x)) for x in np.unravel_index(idx, mdims))
        out[key] = float(p.reshape(-1)[idx])
    return out


def contract_to_unitary(c: Circuit, guard: int = DEFAULT_SIZE_GUARD, tol: Tolerances | None = None) -> np.ndarray:
    """Dense unitary of a measurement-free circuit.

    Applies the circuit to every basis state at once (as a batch).

    Raises:
        SchemaError: the circuit contains a measurement.
        SizeGuardError: the total dimension exceeds ``guard``.
    """
    tol = resolve(tol)
    if any(isinstance(op, Measurement) for op in c.ops):
        raise SchemaError("contract_to_unitary needs a circuit without measurements")
    D = math.prod(c.dims)
    if D > guard:
        raise SizeGuardError(f"total dimension {D} exceeds the contraction guard {guard}")
    axis_of = {qid: k for k, qid in enumerate(c.ids)}
    psi = np.eye(D, dtype=complex).reshape((D, *c.dims))
    psi = _run(psi, c.ops, axis_of, tol, norm_every=256)
    U = psi.reshape(D, D).T
    res = float(np.max(np.abs(U.conj().T @ U - np.eye(D)))) if D else 0.0
    if res > tol.unitarity_tol:
        raise NumericalError(f"contracted circuit is not unitary (residual {res:.2e})")
    return U


def counts_from_json(obj) -> CountsResult:
    counts = {tuple(int(x) for x in k.split(",")): v for k, v in obj["counts"].items()}
    return CountsResult(counts, obj["shots"], obj["seed"], tuple(obj.get("measured", ())), obj.get("rng", RNG_NAME))


def state_from_json(obj) -> StateVector:
    try:
        amps = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
        return StateVector(tuple(obj["dims"]), amps, tuple(obj["ids"]) if "ids" in obj else None)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"state: {exc}") from None
