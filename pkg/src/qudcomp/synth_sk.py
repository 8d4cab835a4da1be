"""Solovay-Kitaev approximation over a finite gate basis.

Words are sequences of basis-letter indices in circuit (time) order: the first
letter is applied first, so the matrix of ``(a, b, c)`` is ``M_c @ M_b @ M_a``.

The base case is a table of all freely reduced words up to a maximum length,
deduplicated up to global phase. Refinement follows the usual recursion:
the residual ``Delta = U @ U_prev^dag`` is written as an exact balanced group
commutator ``V W V^dag W^dag`` and ``V``, ``W`` are approximated one level
shallower.
"""

from __future__ import annotations

import dataclasses
import functools
import hashlib
import itertools
import json
import math
from collections.abc import Sequence

import numpy as np

from .config import Tolerances, resolve
from .errors import DimensionError, SchemaError, SizeGuardError, SKConvergenceError
from .gates import BASIS_KINDS, GateKind, GateRef, _order
from .ir import Circuit, Operation
from .linalg import dist, gellmann_basis, hermitian_exp, principal_log, random_unitary, require_unitary

TABLE_FORMAT_VERSION = 1
DEFAULT_TABLE_BYTES = 256 * 2**20
EPSILON0_SAMPLES = 1000
EPSILON0_SEED = 20240917


@dataclasses.dataclass(frozen=True, eq=False)
class BasisLetter:
    """One basis gate: a :class:`GateRef` placed on local qudit ``positions``."""

    name: str
    gate: GateRef
    positions: tuple = (0,)


def default_basis(d: int) -> list[BasisLetter]:
    """``{H, T, T^dag}`` for qubits and ``{H, H^dag, T, T^dag}`` otherwise."""
    letters = [BasisLetter("H", GateRef.basis(GateKind.H, d))]
    if d != 2:
        letters.append(BasisLetter("Hdag", GateRef.basis(GateKind.HDAG, d)))
    letters.append(BasisLetter("T", GateRef.basis(GateKind.T, d)))
    letters.append(BasisLetter("Tdag", GateRef.basis(GateKind.TDAG, d)))
    return letters


def register_basis(d: int, n: int) -> list[BasisLetter]:
    """Basis over ``n`` qudits: ``H, H^dag, T, T^dag`` per qudit and ``SUM, SUM^dag`` per ordered pair."""
    letters = []
    for q in range(n):
        for kind in (GateKind.H, GateKind.HDAG, GateKind.T, GateKind.TDAG):
            if d == 2 and kind is GateKind.HDAG:
                continue
            letters.append(BasisLetter(f"{kind.value}{q}", GateRef.basis(kind, d), (q,)))
    for c in range(n):
        for t in range(n):
            if c != t:
                letters.append(BasisLetter(f"SUM{c}{t}", GateRef.sum(d, d), (c, t)))
                if d != 2:
                    letters.append(BasisLetter(f"SUMdag{c}{t}", GateRef.sum(d, d, -1), (c, t)))
    return letters


def _letter_matrix(letter: BasisLetter, dims: tuple) -> np.ndarray:
    from .sim import contract_to_unitary

    circuit = Circuit(tuple(enumerate(dims)), (Operation(letter.gate, letter.positions),))
    return contract_to_unitary(circuit)


def _basis_hash(dims, mats) -> str:
    h = hashlib.sha256(repr(tuple(dims)).encode())
    for m in mats:
        h.update(np.round(np.asarray(m), 12).astype(complex).tobytes())
    return h.hexdigest()


@dataclasses.dataclass(frozen=True, eq=False)
class GateWord:
    """A freely reduced word over a table's basis, with its cached matrix."""

    letters: tuple
    matrix: np.ndarray

    def __len__(self):
        return len(self.letters)


def free_reduce(letters, inverse) -> tuple:
    out = []
    for a in letters:
        if out and out[-1] == inverse[a]:
            out.pop()
        else:
            out.append(a)
    return tuple(out)


def _keys(mats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Phase-canonical hash keys on two grids offset by half a cell."""
    n = mats.shape[0]
    flat = mats.reshape(n, -1)
    pivot = np.argmax(np.abs(flat) > 0.1, axis=1)
    ref = flat[np.arange(n), pivot]
    canon = flat * (np.abs(ref) / ref)[:, None]
    scaled = canon.view(np.float64).reshape(n, -1) * 1e6
    k1 = np.floor(scaled + 0.5).astype(np.int64)
    k2 = np.floor(scaled).astype(np.int64)
    void = np.dtype((np.void, k1.shape[1] * 8))
    return np.ascontiguousarray(k1).view(void).ravel(), np.ascontiguousarray(k2).view(void).ravel()


class ApproximationTable:
    """Phase-deduplicated table of short words for the base approximation.

    Entries are ordered by word length, then lexicographically by letters.

    Attributes:
        dims: qudit dimensions the words act on (one entry for a single qudit).
        basis: the basis letters; every letter's inverse must be present.
        inverse: ``inverse[a]`` is the index of the letter inverting ``a``.
        max_len: longest word length enumerated so far.
    """

    def __init__(self, dims, basis: Sequence[BasisLetter], max_entries: int | None = None):
        self.dims = tuple(int(x) for x in dims)
        self.D = math.prod(self.dims)
        if not basis:
            raise DimensionError("the basis must contain at least one gate")
        self.basis = tuple(basis)
        self.letter_mats = np.array([_letter_matrix(b, self.dims) for b in self.basis])
        self.inverse = self._find_inverses()
        # letters with equal class (>= 0) multiply by adding powers; -1 never merges
        classes: dict = {}
        self._merge_class = tuple(
            classes.setdefault((b.positions, b.gate.kind, b.gate.dims), len(classes))
            if _mergeable(b, b) and b.gate.kind in BASIS_KINDS else -1
            for b in self.basis
        )
        self.basis_hash = _basis_hash(self.dims, self.letter_mats)
        if max_entries is None:
            max_entries = DEFAULT_TABLE_BYTES // (16 * self.D * self.D)
        self.max_entries = int(max_entries)
        eye = np.eye(self.D, dtype=complex)[None]
        self._mat_chunks = [eye]
        self.words: list[tuple] = [()]
        k1, k2 = _keys(eye)
        self._seen1 = {bytes(k1[0]): 0}
        self._seen2 = {bytes(k2[0]): 0}
        self._frontier = np.array([0])
        self._last = np.array([-1])
        self.max_len = 0
        self._flat_conj = None

    def _find_inverses(self) -> tuple:
        inv = []
        for a, m in enumerate(self.letter_mats):
            target = m.conj().T
            match = [b for b, n in enumerate(self.letter_mats) if dist(n, target) < 1e-9]
            if not match:
                raise DimensionError(f"basis letter {self.basis[a].name!r} has no inverse in the basis")
            inv.append(match[0])
        return tuple(inv)

    def __len__(self):
        return len(self.words)

    @property
    def matrices(self) -> np.ndarray:
        if len(self._mat_chunks) > 1:
            self._mat_chunks = [np.concatenate(self._mat_chunks)]
        return self._mat_chunks[0]

    def _flat(self):
        if self._flat_conj is None or self._flat_conj.shape[0] != len(self.words):
            self._flat_conj = self.matrices.reshape(len(self.words), -1).conj()
            self._flat_conj32 = self._flat_conj.astype(np.complex64)
        return self._flat_conj

    def _overlaps(self, targets: np.ndarray) -> np.ndarray:
        """``|tr(W^dag U)|`` for every entry ``W`` and each target row, screened in single precision.

        Entries within a safety margin of each column's maximum are recomputed
        in double precision so the maximizer and its ties are exact.
        """
        flat = self._flat()
        coarse = np.abs(self._flat_conj32 @ targets.T.astype(np.complex64))
        margin = 1e-4 * self.D
        for col in range(targets.shape[0]):
            cand = np.flatnonzero(coarse[:, col] >= coarse[:, col].max() - margin)
            coarse[:, col] = -1.0
            coarse[cand, col] = np.abs(flat[cand] @ targets[col])
        return coarse

    def extend(self, max_len: int, strict_cap: bool = True) -> "ApproximationTable":
        """Enumerate words up to ``max_len`` (continuing from the current length).

        Args:
            max_len: new maximum word length.
            strict_cap: raise :class:`SizeGuardError` when the entry cap is hit;
                otherwise stop enumerating and keep the entries found so far.
        """
        letters = self.letter_mats
        L = len(self.basis)
        inv = np.array(self.inverse)
        while self.max_len < max_len:
            if len(self._frontier) == 0:
                self.max_len = max_len
                break
            front = self.matrices[self._frontier]
            # candidate (i, a) = word_i followed by letter a; row-major keeps lex order
            cand = np.einsum("aij,fjk->faik", letters, front).reshape(-1, self.D, self.D)
            parent = np.repeat(self._frontier, L)
            letter = np.tile(np.arange(L), len(self._frontier))
            last = np.repeat(self._last, L)
            ok = (last < 0) | (inv[letter] != last)
            cand, parent, letter = cand[ok], parent[ok], letter[ok]
            k1, k2 = _keys(cand)
            _, first = np.unique(k1, return_index=True)
            first.sort()
            keep = []
            for i in first:
                b1, b2 = bytes(k1[i]), bytes(k2[i])
                if b1 in self._seen1 or b2 in self._seen2:
                    continue
                idx = len(self.words) + len(keep)
                self._seen1[b1] = idx
                self._seen2[b2] = idx
                keep.append(i)
            if len(self.words) + len(keep) > self.max_entries:
                if strict_cap:
                    raise SizeGuardError(
                        f"table would exceed {self.max_entries} entries at word length {self.max_len + 1}"
                    )
                for i in keep:
                    self._seen1.pop(bytes(k1[i]), None)
                    self._seen2.pop(bytes(k2[i]), None)
                return self
            keep = np.array(keep, dtype=int)
            start = len(self.words)
            self.words.extend(self.words[p] + (int(a),) for p, a in zip(parent[keep], letter[keep]))
            self._mat_chunks.append(cand[keep])
            self._frontier = np.arange(start, len(self.words))
            self._last = letter[keep]
            self.max_len += 1
        self.__dict__.pop("achieved_epsilon0", None)
        return self

    def word(self, index: int) -> GateWord:
        return GateWord(self.words[index], self.matrices[index])

    def word_matrix(self, letters) -> np.ndarray:
        M = np.eye(self.D, dtype=complex)
        for a in letters:
            M = self.letter_mats[a] @ M
        return M

    def nearest(self, U) -> GateWord:
        """Entry minimizing the phase-invariant distance to ``U``.

        Ties (overlaps within 1e-12) go to the earliest entry, which is the
        shortest and then lexicographically smallest word.
        """
        U = np.asarray(U, dtype=complex)
        if U.shape != (self.D, self.D):
            raise DimensionError(f"expected a {self.D}x{self.D} matrix, got {U.shape}")
        overlap = self._overlaps(U.reshape(1, -1))[:, 0].astype(float)
        best = overlap.max()
        idx = int(np.flatnonzero(overlap >= best - 1e-12)[0])
        return self.word(idx)

    def nearest_distance(self, U) -> float:
        return dist(self.nearest(U).matrix, U)

    @functools.cached_property
    def achieved_epsilon0(self) -> float:
        """Largest nearest-entry distance over 1000 fixed Haar-random targets."""
        return float(np.max(self.epsilon0_samples()))

    def epsilon0_samples(self, samples: int = EPSILON0_SAMPLES, seed: int = EPSILON0_SEED) -> np.ndarray:
        rng = np.random.default_rng(seed)
        targets = np.array([random_unitary(self.D, rng) for _ in range(samples)])
        flat = self._flat()
        out = np.empty(samples)
        chunk = max(1, 2**22 // max(1, flat.shape[0]))
        for s in range(0, samples, chunk):
            block = targets[s:s + chunk].reshape(-1, self.D * self.D)
            best = np.abs(flat @ block.T).max(axis=0) / self.D
            out[s:s + chunk] = np.sqrt(np.clip(1 - best, 0, None))
        return out

    # Persistence

    def save(self, path) -> None:
        words = np.full((len(self.words), max(1, self.max_len)), -1, dtype=np.int16)
        for i, w in enumerate(self.words):
            words[i, :len(w)] = w
        meta = {
            "version": TABLE_FORMAT_VERSION,
            "dims": list(self.dims),
            "max_len": self.max_len,
            "basis_hash": self.basis_hash,
            "basis": [
                {"name": b.name, "kind": b.gate.kind.value, "dims": list(b.gate.dims),
                 "power": b.gate.power, "positions": list(b.positions)}
                for b in self.basis
            ],
        }
        with open(path, "wb") as fh:
            np.savez_compressed(fh, meta=np.array(json.dumps(meta)), words=words, matrices=self.matrices)

    @classmethod
    def load(cls, path, basis: Sequence[BasisLetter] | None = None) -> "ApproximationTable":
        """Load a table saved by :meth:`save`.

        Basis gates are rebuilt from the stored descriptors (or taken from
        ``basis``) and must hash to the stored value.

        Raises:
            SchemaError: unknown version or mismatching basis.
        """
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            words = data["words"]
            mats = data["matrices"]
        if meta.get("version") != TABLE_FORMAT_VERSION:
            raise SchemaError(f"unsupported table version {meta.get('version')!r}")
        if basis is None:
            basis = [
                BasisLetter(b["name"], GateRef(GateKind(b["kind"]), tuple(b["dims"]), b["power"]), tuple(b["positions"]))
                for b in meta["basis"]
            ]
        table = cls(meta["dims"], basis)
        if table.basis_hash != meta["basis_hash"]:
            raise SchemaError("table basis does not match the stored basis hash")
        table.words = [tuple(int(a) for a in row if a >= 0) for row in words]
        table._mat_chunks = [mats]
        table.max_len = int(meta["max_len"])
        k1, k2 = _keys(mats)
        table._seen1 = {bytes(k): i for i, k in enumerate(k1)}
        table._seen2 = {bytes(k): i for i, k in enumerate(k2)}
        frontier = [i for i, w in enumerate(table.words) if len(w) == table.max_len]
        table._frontier = np.array(frontier, dtype=int)
        table._last = np.array([table.words[i][-1] if table.words[i] else -1 for i in frontier], dtype=int)
        return table


def nearest(table: ApproximationTable, U) -> GateWord:
    """Function form of :meth:`ApproximationTable.nearest`."""
    return table.nearest(U)


def build_table(
    d: int,
    basis: Sequence[BasisLetter] | None = None,
    max_len: int = 10,
    max_entries: int | None = None,
    dims: tuple | None = None,
) -> ApproximationTable:
    """Enumerate all freely reduced words up to ``max_len``, deduplicated up to phase.

    Args:
        d: qudit dimension.
        basis: basis letters (default :func:`default_basis`).
        max_len: maximum word length, at least 1.
        max_entries: entry cap; exceeding it raises :class:`SizeGuardError`.
        dims: qudit dims the basis acts on (default ``(d,)``).
    """
    if isinstance(max_len, bool) or not isinstance(max_len, int) or max_len < 1:
        raise DimensionError(f"max_len must be a positive integer, got {max_len!r}")
    if basis is None:
        basis = default_basis(d)
    table = ApproximationTable(dims or (d,), basis, max_entries)
    return table.extend(max_len)


_DEFAULT_TABLE_LENGTHS = {2: 14, 3: 11}
_default_tables: dict = {}


def default_table(d: int) -> ApproximationTable:
    """Process-wide default table for one qudit of dimension ``d`` (built once)."""
    if d not in _default_tables:
        _default_tables[d] = build_table(d, max_len=_DEFAULT_TABLE_LENGTHS.get(d, 8))
    return _default_tables[d]


# Group-commutator decomposition


def to_special(U) -> np.ndarray:
    """Rescale ``U`` into SU(D), picking the root of ``det`` closest to the identity."""
    D = U.shape[0]
    base = U * np.exp(-1j * np.angle(np.linalg.det(U)) / D)
    roots = np.exp(2j * np.pi * np.arange(D) / D)
    traces = [np.trace(base * r).real for r in roots]
    return base * roots[int(np.argmax(traces))]


def _commutator(V, W):
    return V @ W @ V.conj().T @ W.conj().T


def _batched_hermitian_exp(H: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(H)
    return (v * np.exp(1j * w)[:, None, :]) @ v.conj().swapaxes(1, 2)


def _batched_near_identity_log(M: np.ndarray) -> np.ndarray:
    """Hermitian ``K`` with ``M = exp(iK)`` for a stack of unitaries.

    The eigenvectors come from the Hermitian matrix ``(M - M^dag) / 2i``,
    which shares them with ``M`` as long as every eigenphase lies strictly
    inside ``(-pi/2, pi/2)``. Entries violating that are returned as NaN.
    """
    S = (M - M.conj().swapaxes(1, 2)) / 2j
    _, Q = np.linalg.eigh(S)
    ev = np.einsum("bji,bjk,bki->bi", Q.conj(), M, Q)
    K = (Q * np.angle(ev)[:, None, :]) @ Q.conj().swapaxes(1, 2)
    K = (K + K.conj().swapaxes(1, 2)) / 2
    bad = np.any(ev.real < 1e-3, axis=1)
    K[bad] = np.nan
    return K


def approx_decompose(Delta, tol: Tolerances | None = None, max_iter: int = 40) -> tuple[np.ndarray, np.ndarray]:
    """Write ``Delta`` (in SU(D), near the identity) as ``V W V^dag W^dag``.

    A first-order solution comes from ladder-shaped Hermitian generators in
    the eigenbasis of ``log Delta``; Gauss-Newton on the Gell-Mann coordinates
    of both generators then makes the commutator exact.

    Returns:
        ``(V, W)`` with ``dist(V, I)`` and ``dist(W, I)`` of order ``sqrt(dist(Delta, I))``.

    Raises:
        SKConvergenceError: ``dist(Delta, I)`` is at or above
            ``balance_threshold``, or the correction did not converge.
    """
    tol = resolve(tol)
    Delta = to_special(require_unitary(Delta, tol, "Delta"))
    D = Delta.shape[0]
    eps = dist(Delta, np.eye(D))
    if eps >= tol.balance_threshold:
        raise SKConvergenceError(
            f"residual at distance {eps:.3f} from the identity is above the balance threshold "
            f"{tol.balance_threshold}; use a deeper table"
        )
    eye = np.eye(D, dtype=complex)
    if eps < 1e-15:
        return eye, eye.copy()
    A = principal_log(Delta, tol)
    a, Q = np.linalg.eigh(A)
    p = np.maximum(-0.5 * np.cumsum(a)[:-1], 0.0)
    f = np.sqrt(p)
    F0 = np.diag(f, 1) + np.diag(f, -1)
    G0 = np.diag(-1j * f, 1) + np.diag(1j * f, -1)
    F = Q @ F0 @ Q.conj().T
    G = Q @ G0 @ Q.conj().T
    lam = gellmann_basis(D)
    n = len(lam)
    Delta_dag = Delta.conj().T

    def coords(H):
        return np.einsum("aij,...ji->...a", lam, H).real / 2

    def build(x):
        return hermitian_exp(np.tensordot(x[:n], lam, 1)), hermitian_exp(np.tensordot(x[n:], lam, 1))

    def residuals(X):
        """Residual coordinates for each row of ``X`` (one batched pass)."""
        V = _batched_hermitian_exp(np.tensordot(X[:, :n], lam, 1))
        W = _batched_hermitian_exp(np.tensordot(X[:, n:], lam, 1))
        Vh, Wh = V.conj().swapaxes(1, 2), W.conj().swapaxes(1, 2)
        M = V @ W @ Vh @ Wh @ Delta_dag
        K = _batched_near_identity_log(M)
        for b in np.flatnonzero(np.isnan(K[:, 0, 0].real)):
            K[b] = principal_log(M[b], tol)
        return coords(K)

    def jacobian_pinv(x, r):
        h = 1e-7
        J = (residuals(x[None] + h * np.eye(2 * n)) - r).T / h
        return np.linalg.pinv(J)

    x = np.concatenate([coords(F), coords(G)])
    r = residuals(x[None])[0]
    Jp = None
    # chord iterations: the Jacobian is reused while the residual keeps shrinking fast
    for _ in range(max_iter):
        norm = np.linalg.norm(r)
        if norm < 1e-14:
            break
        if Jp is None:
            Jp = jacobian_pinv(x, r)
        x_new = x - Jp @ r
        r_new = residuals(x_new[None])[0]
        if np.linalg.norm(r_new) > 0.25 * norm:
            Jp = None
        x, r = x_new, r_new
    V, W = build(x)
    err = float(np.max(np.abs(_commutator(V, W) - Delta)))
    if err > 1e-10:
        raise SKConvergenceError(f"group commutator correction did not converge (error {err:.2e})")
    return V, W


# Recursion


@dataclasses.dataclass
class SKTrace:
    """Distances of the successive approximations of the top-level target.

    ``kept[k]`` is the distance of the level-``k`` result; ``raw[k]`` is the
    distance of the plain commutator refinement before the keep-best rule.
    """

    kept: list = dataclasses.field(default_factory=list)
    raw: list = dataclasses.field(default_factory=list)


class _Solver:
    def __init__(self, table: ApproximationTable, tol: Tolerances):
        self.table = table
        self.tol = tol
        self.inverse = table.inverse

    def inv(self, w: GateWord) -> GateWord:
        return GateWord(tuple(self.inverse[a] for a in reversed(w.letters)), w.matrix.conj().T)

    def refine(self, U, prev: GateWord, depth: int) -> GateWord:
        """One commutator refinement of ``prev`` using depth ``depth`` sub-approximations."""
        Delta = to_special(U @ prev.matrix.conj().T)
        V, W = approx_decompose(Delta, self.tol)
        v = self.solve(V, depth)
        w = self.solve(W, depth)
        vi, wi = self.inv(v), self.inv(w)
        # matrix V W V^dag W^dag U_prev: time order U_prev, W^dag, V^dag, W, V
        letters = free_reduce(prev.letters + wi.letters + vi.letters + w.letters + v.letters, self.inverse)
        M = v.matrix @ w.matrix @ vi.matrix @ wi.matrix @ prev.matrix
        return GateWord(letters, M)

    def solve(self, U, n: int) -> GateWord:
        word = self.table.nearest(U)
        best = dist(word.matrix, U)
        for k in range(1, n + 1):
            if best < 1e-15:
                break
            cand = self.refine(U, word, k - 1)
            e = dist(cand.matrix, U)
            if e <= best:
                word, best = cand, e
        return word


def solovay_kitaev_trace(
    table: ApproximationTable,
    U,
    n: int,
    target: float | None = None,
    strict: bool = False,
    tol: Tolerances | None = None,
) -> tuple[GateWord, SKTrace]:
    """Approximate ``U`` with ``n`` refinement levels and report the error trace.

    Each level refines the previous result with one group-commutator step.
    When a refinement is farther from ``U`` than the previous result, the
    previous result is kept (the trace is therefore non-increasing) unless
    ``strict`` is set, in which case :class:`SKConvergenceError` is raised.

    Args:
        table: base-approximation table.
        U: target unitary of the table's size.
        n: number of refinement levels.
        target: stop early once the distance is at most this value.
        strict: raise instead of keeping the previous result.
        tol: tolerance record.

    Raises:
        SKConvergenceError: a residual is too far from the identity (deepen the
            table), or ``strict`` and a refinement increased the error.
    """
    tol = resolve(tol)
    U = require_unitary(U, tol, "U")
    if U.shape != (table.D, table.D):
        raise DimensionError(f"U has shape {U.shape}, table works on {table.D}x{table.D}")
    if isinstance(n, bool) or not isinstance(n, int) or n < 0:
        raise DimensionError(f"depth must be a non-negative integer, got {n!r}")
    solver = _Solver(table, tol)
    trace = SKTrace()
    word = table.nearest(U)
    e = dist(word.matrix, U)
    trace.kept.append(e)
    trace.raw.append(e)
    for k in range(1, n + 1):
        if e < 1e-15 or (target is not None and e <= target):
            break
        try:
            cand = solver.refine(U, word, k - 1)
        except SKConvergenceError as exc:
            raise SKConvergenceError(str(exc), trace.kept) from None
        ce = dist(cand.matrix, U)
        trace.raw.append(ce)
        if ce <= e:
            word, e = cand, ce
        elif strict:
            raise SKConvergenceError(f"refinement {k} increased the error from {e:.3e} to {ce:.3e}", trace.raw)
        trace.kept.append(e)
    return word, trace


def solovay_kitaev(table: ApproximationTable, U, n: int, tol: Tolerances | None = None) -> GateWord:
    """Solovay-Kitaev approximation of ``U`` at depth ``n`` (see :func:`solovay_kitaev_trace`)."""
    return solovay_kitaev_trace(table, U, n, tol=tol)[0]


def word_runs(table: ApproximationTable, word: GateWord) -> list[tuple[int, int]]:
    """Merge runs of the same basis gate on the same qudits into ``(letter, power)`` pairs.

    Runs whose total power is a multiple of the gate's order are dropped.
    """
    out = []
    for a, group in itertools.groupby(word.letters, key=lambda a: table._merge_class[a]):
        group = list(group)
        g = table.basis[group[0]].gate
        if len(group) == 1 or a < 0:
            out.extend((b, table.basis[b].gate.power) for b in group)
            continue
        power = sum(table.basis[b].gate.power for b in group) % _order(g.kind, g.dims[-1])
        if power:
            out.append((group[0], power))
    return out


def word_to_ops(table: ApproximationTable, word: GateWord, wires: Sequence[int]) -> list[Operation]:
    """Circuit operations for ``word`` with local qudit ``k`` mapped to ``wires[k]``.

    Runs of the same basis gate on the same qudits are merged into one gate
    with a power.
    """
    ops = []
    for a, power in word_runs(table, word):
        letter = table.basis[a]
        g = letter.gate if power == letter.gate.power else _with_power(letter.gate, power)
        ops.append(Operation(g, tuple(wires[p] for p in letter.positions)))
    return ops


@functools.lru_cache(maxsize=1024)
def _with_power(gate: GateRef, power: int) -> GateRef:
    return dataclasses.replace(gate, power=power)


def _mergeable(a: BasisLetter, b: BasisLetter) -> bool:
    ga, gb = a.gate, b.gate
    return (
        a.positions == b.positions
        and ga.kind is gb.kind
        and ga.dims == gb.dims
        and ga.payload is None
        and ga.control_map is None
        and ga.control_value is None
    )
