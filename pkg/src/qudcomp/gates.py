"""Elementary qudit gates: matrix factories and the symbolic :class:`GateRef`.

Conventions:

* ``pauli_x(d)`` has a one at ``(j, j+1 mod d)``, so ``X|j> = |j-1 mod d>``.
  The more common cyclic shift ``|j> -> |j+1>`` is ``X**(d-1)``.
* ``pauli_z(d) = diag(w**j)`` with ``w = exp(2 pi i / d)``. With the X above,
  ``X Z = w Z X``.
* ``hadamard(d)`` is the Fourier matrix ``w**(jk) / sqrt(d)``.
* ``tgate(d) = diag(exp(2 pi i j / d**3))``, so ``T**d == Z`` for ``d = 2``
  (``T**4 == Z``) and ``T**9 == Z`` for ``d = 3``.
* ``pauli_y(d) = exp(i pi / d) X Z``; the prefactor makes the determinant real
  and gives ``sigma_y`` at ``d = 2``.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
import math
from collections.abc import Mapping, Sequence

import numpy as np

from .config import Tolerances
from .errors import DimensionError, SchemaError
from .linalg import check_dimension, matrix_from_json, matrix_to_json, require_unitary


def omega(d: int) -> complex:
    return np.exp(2j * np.pi / d)


def pauli_x(d: int) -> np.ndarray:
    d = check_dimension(d)
    X = np.zeros((d, d), dtype=complex)
    X[np.arange(d), (np.arange(d) + 1) % d] = 1
    return X


def pauli_z(d: int) -> np.ndarray:
    d = check_dimension(d)
    return np.diag(omega(d) ** np.arange(d))


def pauli_y(d: int) -> np.ndarray:
    d = check_dimension(d)
    return np.exp(1j * np.pi / d) * pauli_x(d) @ pauli_z(d)


def hadamard(d: int) -> np.ndarray:
    d = check_dimension(d)
    j = np.arange(d)
    return omega(d) ** np.outer(j, j) / math.sqrt(d)


def tgate(d: int) -> np.ndarray:
    d = check_dimension(d)
    return np.diag(np.exp(2j * np.pi * np.arange(d) / d**3))


def sum_gate(d_control: int, d_target: int) -> np.ndarray:
    """Permutation ``|i, j> -> |i, (i + j) mod d_target>`` (control first)."""
    dc = check_dimension(d_control, "d_control")
    dt = check_dimension(d_target, "d_target")
    n = dc * dt
    M = np.zeros((n, n), dtype=complex)
    for i in range(dc):
        for j in range(dt):
            M[i * dt + (i + j) % dt, i * dt + j] = 1
    return M


def swap_gate(d: int) -> np.ndarray:
    d = check_dimension(d)
    M = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            M[j * d + i, i * d + j] = 1
    return M


def multiplexer(blocks: Sequence[np.ndarray], tol: Tolerances | None = None) -> np.ndarray:
    """Block-diagonal direct sum: control value ``j`` applies ``blocks[j]``.

    Raises:
        DimensionError: if there are fewer than two blocks or sizes differ.
        NotUnitaryError: if a block is not unitary.
    """
    blocks = [require_unitary(b, tol, f"block {k}") for k, b in enumerate(blocks)]
    if len(blocks) < 2:
        raise DimensionError("a multiplexer needs one block per control value (at least 2)")
    size = blocks[0].shape[0]
    if any(b.shape[0] != size for b in blocks):
        raise DimensionError("all multiplexer blocks must have the same size")
    out = np.zeros((size * len(blocks),) * 2, dtype=complex)
    for k, b in enumerate(blocks):
        out[k * size:(k + 1) * size, k * size:(k + 1) * size] = b
    return out


def controlled_power(U, d_control: int, tol: Tolerances | None = None) -> np.ndarray:
    """``diag(U**0, U**1, ..., U**(d_control - 1))``."""
    dc = check_dimension(d_control, "d_control")
    U = require_unitary(U, tol, "U")
    return multiplexer([np.linalg.matrix_power(U, j) for j in range(dc)], tol)


def two_level_rotation(theta: float, d: int, level: int) -> np.ndarray:
    """Real rotation ``[[c, -s], [s, c]]`` on levels ``(level, level+1)``."""
    R = np.eye(d, dtype=complex)
    c, s = math.cos(theta), math.sin(theta)
    R[level, level] = R[level + 1, level + 1] = c
    R[level, level + 1] = -s
    R[level + 1, level] = s
    return R


class GateKind(str, enum.Enum):
    X = "X"
    Z = "Z"
    Y = "Y"
    H = "H"
    HDAG = "Hdag"
    T = "T"
    TDAG = "Tdag"
    SUM = "SUM"
    CONTROLLED_U = "ControlledU"
    MULTIPLEXER = "Multiplexer"
    CUSTOM = "Custom"


_SINGLE_QUDIT = {
    GateKind.X: pauli_x,
    GateKind.Z: pauli_z,
    GateKind.Y: pauli_y,
    GateKind.H: hadamard,
    GateKind.HDAG: lambda d: hadamard(d).conj().T,
    GateKind.T: tgate,
    GateKind.TDAG: lambda d: tgate(d).conj().T,
}

BASIS_KINDS = frozenset(_SINGLE_QUDIT)


def _value_controlled(U: np.ndarray, n_controls: int, value: int) -> np.ndarray:
    t = U.shape[0]
    M = np.eye(n_controls * t, dtype=complex)
    M[value * t:(value + 1) * t, value * t:(value + 1) * t] = U
    return M


@dataclasses.dataclass(frozen=True, eq=False)
class GateRef:
    """Symbolic description of a gate acting on qudits with dimensions ``dims``.

    Kinds and their layout:

    * ``X, Z, Y, H, Hdag, T, Tdag``: single-qudit basis gates raised to
      ``power``. With ``control_value`` set, ``dims`` lists the control
      dimensions followed by the target dimension and the gate fires only when
      the controls (read as one mixed-radix number) equal ``control_value``.
    * ``SUM``: ``dims = (d_control, d_target)``, raised to ``power``.
    * ``ControlledU``: ``dims = (d_control, *target_dims)``; control value
      ``j`` applies ``payload ** j``.
    * ``Multiplexer``: ``dims = (*control_dims, d_target)``; control value
      ``j`` applies ``control_map[j]`` to the last qudit.
    * ``Custom``: ``payload`` acts on all of ``dims``. An optional
      ``decomposition`` holds an equivalent sequence of ``(GateRef, positions)``
      over the same local qudits, used when lowering to two-qudit gates.
    """

    kind: GateKind
    dims: tuple
    power: int = 1
    payload: np.ndarray | None = None
    control_map: Mapping | None = None
    control_value: int | None = None
    decomposition: tuple | None = None

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        dims = tuple(check_dimension(int(x), "gate dimension") for x in self.dims)
        if not dims:
            raise DimensionError("gate dims must be nonempty")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "power", int(self.power))
        if kind in BASIS_KINDS:
            if self.control_value is None:
                if len(dims) != 1:
                    raise DimensionError(f"{kind.value} acts on one qudit, got dims {dims}")
            else:
                n_ctrl = math.prod(dims[:-1])
                if len(dims) < 2 or not 0 <= self.control_value < n_ctrl:
                    raise DimensionError("control_value must index the control register")
        elif kind is GateKind.SUM and len(dims) != 2:
            raise DimensionError(f"SUM acts on two qudits, got dims {dims}")
        if kind in (GateKind.CUSTOM, GateKind.CONTROLLED_U):
            if self.payload is None:
                raise DimensionError(f"{kind.value} requires a payload")
            size = math.prod(dims if kind is GateKind.CUSTOM else dims[1:])
            if kind is GateKind.CONTROLLED_U and len(dims) < 2:
                raise DimensionError("ControlledU needs a control and at least one target")
            payload = require_unitary(self.payload, name=f"{kind.value} payload")
            if payload.shape[0] != size:
                raise DimensionError(f"payload size {payload.shape[0]} does not match dims {dims}")
            payload = payload.copy()
            payload.setflags(write=False)
            object.__setattr__(self, "payload", payload)
        elif self.payload is not None:
            raise DimensionError(f"{kind.value} does not take a payload")
        if kind is GateKind.MULTIPLEXER:
            if self.control_map is None or len(dims) < 2:
                raise DimensionError("Multiplexer needs controls, a target and a control_map")
            n_ctrl = math.prod(dims[:-1])
            cmap = self.control_map
            if not isinstance(cmap, Mapping):
                cmap = dict(enumerate(cmap))
            keys = sorted(int(k) for k in cmap)
            if keys != list(range(n_ctrl)):
                raise DimensionError(f"control_map must have exactly one entry per control value 0..{n_ctrl - 1}")
            entries = []
            for k in range(n_ctrl):
                m = require_unitary(cmap[k], name=f"control_map[{k}]")
                if m.shape[0] != dims[-1]:
                    raise DimensionError(f"control_map[{k}] has size {m.shape[0]}, target dim is {dims[-1]}")
                m = m.copy()
                m.setflags(write=False)
                entries.append(m)
            object.__setattr__(self, "control_map", tuple(entries))
        elif self.control_map is not None:
            raise DimensionError(f"{kind.value} does not take a control_map")

    # Convenience constructors

    @classmethod
    def basis(cls, kind, d, power=1):
        return cls(GateKind(kind), (d,), power)

    @classmethod
    def custom(cls, U, dims, decomposition=None):
        return cls(GateKind.CUSTOM, tuple(dims), payload=np.asarray(U, dtype=complex), decomposition=decomposition)

    @classmethod
    def sum(cls, d_control, d_target, power=1):
        return cls(GateKind.SUM, (d_control, d_target), power)

    @classmethod
    def mux(cls, entries, control_dims, d_target):
        return cls(GateKind.MULTIPLEXER, (*control_dims, d_target), control_map=dict(enumerate(entries)))

    @property
    def num_qudits(self) -> int:
        return len(self.dims)

    @property
    def is_controlled(self) -> bool:
        return self.kind in (GateKind.MULTIPLEXER, GateKind.CONTROLLED_U) or self.control_value is not None

    @functools.cached_property
    def target_matrix(self) -> np.ndarray:
        """Single-qudit matrix of a basis gate (ignoring any control)."""
        if self.kind not in BASIS_KINDS:
            raise TypeError(f"{self.kind.value} is not a single-qudit basis gate")
        base = _SINGLE_QUDIT[self.kind](self.dims[-1])
        return np.linalg.matrix_power(base, self.power % _order(self.kind, self.dims[-1]))

    @functools.cached_property
    def matrix(self) -> np.ndarray:
        """Dense unitary on the gate's local space, first qudit most significant."""
        k = self.kind
        if k in BASIS_KINDS:
            if self.control_value is None:
                out = self.target_matrix
            else:
                out = _value_controlled(self.target_matrix, math.prod(self.dims[:-1]), self.control_value)
        elif k is GateKind.SUM:
            out = np.linalg.matrix_power(sum_gate(*self.dims), self.power % self.dims[1])
        elif k is GateKind.CONTROLLED_U:
            out = controlled_power(self.payload, self.dims[0])
        elif k is GateKind.MULTIPLEXER:
            out = multiplexer(self.control_map)
        else:
            out = np.asarray(self.payload)
        out = np.array(out, dtype=complex)
        out.setflags(write=False)
        return out

    @functools.cached_property
    def identity_entries(self) -> tuple:
        """For multiplexers, whether each control_map entry is exactly the identity."""
        if self.kind is not GateKind.MULTIPLEXER:
            return ()
        eye = np.eye(self.dims[-1])
        return tuple(bool(np.array_equal(m, eye)) for m in self.control_map)

    def inverse(self) -> "GateRef":
        k = self.kind
        if k in BASIS_KINDS or k is GateKind.SUM:
            return dataclasses.replace(self, power=-self.power)
        if k is GateKind.MULTIPLEXER:
            return dataclasses.replace(self, control_map={j: m.conj().T for j, m in enumerate(self.control_map)})
        dec = None
        if self.decomposition is not None:
            dec = tuple((g.inverse(), pos) for g, pos in reversed(self.decomposition))
        return dataclasses.replace(self, payload=self.payload.conj().T, decomposition=dec)

    def __eq__(self, other):
        if not isinstance(other, GateRef):
            return NotImplemented
        if (self.kind, self.dims, self.power, self.control_value) != (
            other.kind, other.dims, other.power, other.control_value
        ):
            return False
        if (self.payload is None) != (other.payload is None):
            return False
        if self.payload is not None and not np.array_equal(self.payload, other.payload):
            return False
        if (self.control_map is None) != (other.control_map is None):
            return False
        if self.control_map is not None:
            return all(np.array_equal(a, b) for a, b in zip(self.control_map, other.control_map))
        return True

    def __hash__(self):
        return hash((self.kind, self.dims, self.power, self.control_value))

    def __repr__(self):
        parts = [self.kind.value, f"dims={list(self.dims)}"]
        if self.power != 1:
            parts.append(f"power={self.power}")
        if self.control_value is not None:
            parts.append(f"if={self.control_value}")
        return f"GateRef({', '.join(parts)})"


def _order(kind: GateKind, d: int) -> int:
    """A multiple of the order of the base matrix, used to reduce powers."""
    if kind in (GateKind.T, GateKind.TDAG):
        return d**3
    if kind in (GateKind.H, GateKind.HDAG):
        return 4
    if kind is GateKind.Y:
        return 2 * d
    return d


def gate_to_json(g: GateRef) -> dict:
    out = {
        "kind": g.kind.value,
        "dims": list(g.dims),
        "power": g.power,
        "payload": None if g.payload is None else matrix_to_json(g.payload),
    }
    if g.control_map is not None:
        out["control_map"] = {str(j): matrix_to_json(m) for j, m in enumerate(g.control_map)}
    if g.control_value is not None:
        out["control_value"] = g.control_value
    if g.decomposition is not None:
        out["decomposition"] = [{"gate": gate_to_json(sub), "positions": list(pos)} for sub, pos in g.decomposition]
    return out


def gate_from_json(obj, path="gate") -> GateRef:
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: expected an object")
    try:
        kind = GateKind(obj["kind"])
    except (KeyError, ValueError):
        raise SchemaError(f"{path}.kind: missing or unknown gate kind {obj.get('kind')!r}") from None
    dims = obj.get("dims")
    if not isinstance(dims, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in dims):
        raise SchemaError(f"{path}.dims: expected a list of integers")
    power = obj.get("power", 1)
    if not isinstance(power, int) or isinstance(power, bool):
        raise SchemaError(f"{path}.power: expected an integer")
    payload = obj.get("payload")
    if payload is not None:
        payload = matrix_from_json(payload, f"{path}.payload")
    cmap = obj.get("control_map")
    if cmap is not None:
        if not isinstance(cmap, dict):
            raise SchemaError(f"{path}.control_map: expected an object")
        try:
            cmap = {int(k): matrix_from_json(v, f"{path}.control_map.{k}") for k, v in cmap.items()}
        except ValueError as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"{path}.control_map: keys must be integers") from None
    dec = obj.get("decomposition")
    if dec is not None:
        dec = tuple(
            (gate_from_json(item["gate"], f"{path}.decomposition[{i}]"), tuple(item["positions"]))
            for i, item in enumerate(dec)
        )
    try:
        return GateRef(kind, tuple(dims), power, payload, cmap, obj.get("control_value"), dec)
    except (DimensionError, ValueError) as exc:
        raise SchemaError(f"{path}: {exc}") from None
