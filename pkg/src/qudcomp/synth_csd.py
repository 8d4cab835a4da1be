"""Cosine-Sine decomposition of qudit unitaries and its lowering to circuits.

:func:`csd2` splits a unitary along one row/column partition.
:func:`csd_qudit` peels the leading qudit off a ``d**n`` unitary one
basis value at a time, giving ``2**d - 1`` factors (block-diagonal
multiplexers interleaved with cosine-sine layers). :func:`lower_to_circuit` turns those
factors into single-qudit gates controlled on the values of other qudits.
"""

from __future__ import annotations

import dataclasses
import enum

import numpy as np
import scipy.linalg

from .config import Tolerances, resolve
from .errors import DimensionError, NumericalError
from .gates import GateRef, two_level_rotation
from .ir import Circuit, Operation
from .linalg import matrix_to_json, require_unitary


def cs_matrix(theta, p: int, q: int) -> np.ndarray:
    """Middle factor of :func:`csd2` for a ``(p, q)`` partition.

    With ``k = min(p, q)`` angles, ``C = diag(cos theta)``, ``S = diag(sin theta)``:

    * ``p <= q``: ``[[C, -S, 0], [S, C, 0], [0, 0, I]]``, blocks ``(p, p, q-p)``.
    * ``p > q``: ``[[I, 0, 0], [0, C, -S], [0, S, C]]``, blocks ``(p-q, q, q)``.
    """
    theta = np.asarray(theta, dtype=float)
    k = min(p, q)
    c, s = np.diag(np.cos(theta)), np.diag(np.sin(theta))
    M = np.eye(p + q, dtype=complex)
    a = 0 if p <= q else p - q
    b = p
    M[a:a + k, a:a + k] = c
    M[a:a + k, b:b + k] = -s
    M[b:b + k, a:a + k] = s
    M[b:b + k, b:b + k] = c
    return M


def csd2(U, r: int, tol: Tolerances | None = None):
    """Cosine-Sine decomposition along the partition ``(r, m - r)``.

    Returns ``(L1, L2, theta, R1, R2)`` with
    ``U = diag(L1, L2) @ cs_matrix(theta, r, m - r) @ diag(R1, R2)``.
    ``theta`` has ``min(r, m - r)`` entries in ``[0, pi/2]``, ascending. The work is
    done by LAPACK's CS decomposition (``scipy.linalg.cossin``).

    Args:
        U: unitary ``m x m``.
        r: size of the leading partition, ``0 < r < m``.
        tol: tolerances; ``csd_tol`` bounds the reconstruction residual.

    Raises:
        NotUnitaryError: ``U`` is not unitary.
        DimensionError: ``r`` is out of range.
        NumericalError: the reconstruction residual exceeds ``csd_tol``.
    """
    tol = resolve(tol)
    U = require_unitary(U, tol, "U")
    m = U.shape[0]
    if not 0 < r < m:
        raise DimensionError(f"partition size must satisfy 0 < r < {m}, got {r}")
    p, q = r, m - r
    (L1, L2), theta, (R1, R2) = scipy.linalg.cossin(U, p=p, q=p, separate=True)
    if p < q:
        # LAPACK orders the trailing block as (I, C); move C to the front
        perm = np.r_[q - p:q, 0:q - p]
        L2, R2 = L2[:, perm], R2[perm, :]
    k = len(theta)
    order = np.argsort(theta, kind="stable")
    theta = np.clip(theta[order], 0.0, np.pi / 2)
    if p <= q:
        # angle i couples column i of both partitions
        L1, R1 = L1[:, order], R1[order, :]
        idx = np.r_[order, k:q]
        L2, R2 = L2[:, idx], R2[idx, :]
    else:
        idx = np.r_[0:p - k, p - k + order]
        L1, R1 = L1[:, idx], R1[idx, :]
        L2, R2 = L2[:, order], R2[order, :]
    residual = reconstruction_residual(U, L1, L2, theta, R1, R2)
    if residual > tol.csd_tol:
        raise NumericalError(f"csd2 reconstruction residual {residual:.2e} exceeds {tol.csd_tol:.1e}")
    return L1, L2, theta, R1, R2


def reconstruction_residual(U, L1, L2, theta, R1, R2) -> float:
    p = L1.shape[0]
    q = L2.shape[0]
    left = np.zeros((p + q, p + q), dtype=complex)
    right = np.zeros_like(left)
    left[:p, :p], left[p:, p:] = L1, L2
    right[:p, :p], right[p:, p:] = R1, R2
    return float(np.max(np.abs(left @ cs_matrix(theta, p, q) @ right - U)))


class FactorKind(str, enum.Enum):
    BLOCK_DIAG = "BlockDiag"
    COSINE_SINE = "CosineSine"


@dataclasses.dataclass(frozen=True, eq=False)
class CsdFactor:
    """One factor of a qudit CSD, acting on the full ``size``-dimensional space.

    ``BlockDiag`` factors hold ``blocks``: one unitary per value of the leading
    qudit (a single ``d x d`` block for a one-qudit leaf). ``CosineSine``
    factors hold ``angles`` (one per value of the remaining qudits) coupling
    leading-qudit level ``level`` with ``level + 1``; ``span`` is the index
    range of the coupled partition and ``partition`` its ``(p, q)`` split.
    """

    kind: FactorKind
    size: int
    blocks: tuple | None = None
    angles: np.ndarray | None = None
    level: int = 0
    span: tuple = (0, 0)
    partition: tuple = (0, 0)

    def matrix(self) -> np.ndarray:
        if self.kind is FactorKind.BLOCK_DIAG:
            out = np.zeros((self.size, self.size), dtype=complex)
            k = 0
            for b in self.blocks:
                s = b.shape[0]
                out[k:k + s, k:k + s] = b
                k += s
            return out
        out = np.eye(self.size, dtype=complex)
        a, b = self.span
        out[a:b, a:b] = cs_matrix(self.angles, *self.partition)
        return out

    def to_json(self) -> dict:
        if self.kind is FactorKind.BLOCK_DIAG:
            return {"kind": self.kind.value, "span": [0, self.size], "blocks": [matrix_to_json(b) for b in self.blocks]}
        return {
            "kind": self.kind.value,
            "span": list(self.span),
            "partition": list(self.partition),
            "level": self.level,
            "angles": [float(t) for t in self.angles],
        }


def qudit_count(size: int, d: int) -> int:
    """``n`` with ``d**n == size``, or ``DimensionError``."""
    n, m = 0, 1
    while m < size:
        m *= d
        n += 1
    if m != size or n < 1:
        raise DimensionError(f"matrix size {size} is not a positive power of {d}")
    return n


def _peel(U: np.ndarray, r: int, tol: Tolerances) -> list[CsdFactor]:
    """Factors of ``U`` (size ``k * r``) along partitions of size ``r``."""
    m = U.shape[0]
    k = m // r
    if k == 1:
        return [CsdFactor(FactorKind.BLOCK_DIAG, m, blocks=(U,))]
    L1, L2, theta, R1, R2 = csd2(U, r, tol)
    left = _peel(L2, r, tol)
    right = _peel(R2, r, tol)

    def shift(f: CsdFactor) -> CsdFactor:
        if f.kind is FactorKind.BLOCK_DIAG:
            return CsdFactor(FactorKind.BLOCK_DIAG, m, blocks=(np.eye(r, dtype=complex), *f.blocks))
        return dataclasses.replace(f, size=m, level=f.level + 1, span=(f.span[0] + r, f.span[1] + r))

    out = [CsdFactor(FactorKind.BLOCK_DIAG, m, blocks=(L1, *left[0].blocks))]
    out += [shift(f) for f in left[1:]]
    out.append(CsdFactor(FactorKind.COSINE_SINE, m, angles=theta, level=0, span=(0, m), partition=(r, m - r)))
    out.append(CsdFactor(FactorKind.BLOCK_DIAG, m, blocks=(R1, *right[0].blocks)))
    out += [shift(f) for f in right[1:]]
    return out


def csd_qudit(U, d: int, tol: Tolerances | None = None) -> list[CsdFactor]:
    """Decompose a ``d**n`` unitary along the leading qudit.

    For ``n == 1`` the input is returned as a single one-block leaf. For
    ``n >= 2`` the result has ``2**d - 1`` factors alternating between
    ``BlockDiag`` (``d`` blocks of size ``d**(n-1)``) and ``CosineSine``;
    their ordered product is ``U``. Each peeled level splits the trailing
    block again, which doubles the factor count per level.

    Raises:
        DimensionError: the size is not a power of ``d``.
        NumericalError: propagated from :func:`csd2`.
    """
    tol = resolve(tol)
    U = require_unitary(U, tol, "U")
    n = qudit_count(U.shape[0], d)
    if n == 1:
        return [CsdFactor(FactorKind.BLOCK_DIAG, d, blocks=(U,))]
    return _peel(U, d ** (n - 1), tol)


def reassemble(factors) -> np.ndarray:
    out = np.eye(factors[0].size, dtype=complex)
    for f in factors:
        out = out @ f.matrix()
    return out


def _is_identity(M, atol=1e-13) -> bool:
    return bool(np.max(np.abs(M - np.eye(M.shape[0]))) <= atol)


def _emit_mux(ops: list, controls: tuple, target: int, d: int, entries: list):
    """Append a gate applying ``entries[v]`` to ``target`` when ``controls == v``."""
    if all(_is_identity(e) for e in entries):
        return
    first = entries[0]
    if not controls or all(np.max(np.abs(e - first)) <= 1e-13 for e in entries[1:]):
        ops.append(Operation(GateRef.custom(first, (d,)), (target,)))
        return
    gate = GateRef.mux(entries, (d,) * len(controls), d)
    ops.append(Operation(gate, (*controls, target)))


def _lower(groups: list, controls: tuple, targets: tuple, d: int, tol: Tolerances, ops: list):
    """Lower factor lists that share one structure.

    ``groups[v]`` is the factor list applying when ``controls`` read ``v``.
    Operations are emitted in circuit (time) order, i.e. right to left in the
    matrix product.
    """
    lead, rest = targets[0], targets[1:]
    for idx in reversed(range(len(groups[0]))):
        proto = groups[0][idx]
        if proto.kind is FactorKind.BLOCK_DIAG:
            if not rest:
                _emit_mux(ops, controls, lead, d, [g[idx].blocks[0] for g in groups])
                continue
            sub = [csd_qudit(b, d, tol) for g in groups for b in g[idx].blocks]
            _lower(sub, controls + (lead,), rest, d, tol, ops)
        else:
            entries = [
                two_level_rotation(theta, d, proto.level)
                for g in groups
                for theta in g[idx].angles
            ]
            _emit_mux(ops, controls + rest, lead, d, entries)


def lower_to_circuit(factors, d: int, n: int, tol: Tolerances | None = None) -> Circuit:
    """Turn :func:`csd_qudit` factors into a circuit on qudits ``0..n-1``.

    ``BlockDiag`` factors become multiplexers selected by the leading qudit
    and are decomposed recursively; at the last level every block is a
    single-qudit gate controlled on all other qudits. ``CosineSine`` factors
    become two-level real rotations on the leading qudit, selected by the
    values of the remaining qudits. Identity gates are dropped, and
    multiplexers whose entries are all equal become plain single-qudit gates.
    """
    tol = resolve(tol)
    factors = list(factors)
    if not factors or factors[0].size != d**n:
        raise DimensionError(f"factors do not describe a {d}**{n} unitary")
    ops: list = []
    _lower([factors], (), tuple(range(n)), d, tol, ops)
    return Circuit(tuple((q, d) for q in range(n)), tuple(ops))
