"""Generalized Pauli products over Z_d and Clifford checks.

A product is encoded as ``(lam, x, z)`` and realized as
``w**lam * kron_i(X**x_i @ Z**z_i)`` with ``X`` and ``Z`` from
:mod:`qudcomp.gates`. Since ``Z X = w**-1 X Z`` for those matrices, moving
``Z**z1`` past ``X**x2`` during multiplication contributes ``w**(-z1 . x2)``.
"""

from __future__ import annotations

import dataclasses
import functools
import itertools

import numpy as np

from .config import Tolerances, resolve
from .errors import DimensionError, SizeGuardError
from .gates import omega, pauli_x, pauli_z
from .linalg import check_dimension, require_unitary

GROUP_SIZE_GUARD = 10**6


@dataclasses.dataclass(frozen=True)
class PauliProduct:
    d: int
    lam: int
    x: tuple
    z: tuple

    def __post_init__(self):
        d = check_dimension(self.d)
        x = tuple(int(v) % d for v in self.x)
        z = tuple(int(v) % d for v in self.z)
        if len(x) != len(z) or not x:
            raise DimensionError("x and z must have the same nonzero length")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "lam", int(self.lam) % d)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return len(self.x)

    @classmethod
    def identity(cls, d, n):
        return cls(d, 0, (0,) * n, (0,) * n)

    def to_json(self) -> dict:
        return {"d": self.d, "lambda": self.lam, "x": list(self.x), "z": list(self.z)}

    @classmethod
    def from_json(cls, obj) -> "PauliProduct":
        return cls(obj["d"], obj["lambda"], tuple(obj["x"]), tuple(obj["z"]))

    def __mul__(self, other):
        return pauli_mul(self, other)


def pauli_mul(p1: PauliProduct, p2: PauliProduct) -> PauliProduct:
    """Group product with the phase correction from reordering ``Z`` past ``X``."""
    if p1.d != p2.d or p1.n != p2.n:
        raise DimensionError(f"cannot multiply (d={p1.d}, n={p1.n}) by (d={p2.d}, n={p2.n})")
    d = p1.d
    correction = -sum(a * b for a, b in zip(p1.z, p2.x))
    return PauliProduct(
        d,
        p1.lam + p2.lam + correction,
        tuple(a + b for a, b in zip(p1.x, p2.x)),
        tuple(a + b for a, b in zip(p1.z, p2.z)),
    )


@functools.lru_cache(maxsize=None)
def _xz_power(d: int, x: int, z: int) -> np.ndarray:
    m = np.linalg.matrix_power(pauli_x(d), x) @ np.linalg.matrix_power(pauli_z(d), z)
    m.setflags(write=False)
    return m


def matrix_of(p: PauliProduct) -> np.ndarray:
    out = np.array([[omega(p.d) ** p.lam]], dtype=complex)
    for xi, zi in zip(p.x, p.z):
        out = np.kron(out, _xz_power(p.d, xi, zi))
    return out


def enumerate_group(d: int, n: int) -> list[PauliProduct]:
    """All ``d**(2n+1)`` products in lexicographic order of ``(lam, x, z)``.

    Raises:
        SizeGuardError: if the group has more than ``10**6`` elements.
    """
    d = check_dimension(d)
    if n < 1:
        raise DimensionError("n must be at least 1")
    if d ** (2 * n + 1) > GROUP_SIZE_GUARD:
        raise SizeGuardError(f"Pauli group of size {d ** (2 * n + 1)} exceeds the guard {GROUP_SIZE_GUARD}")
    out = []
    for lam in range(d):
        for x in itertools.product(range(d), repeat=n):
            for z in itertools.product(range(d), repeat=n):
                out.append(PauliProduct(d, lam, x, z))
    return out


def decompose_pauli(M, d: int, n: int, tol: Tolerances | None = None) -> PauliProduct | None:
    """Return ``p`` with ``matrix_of(p) == M`` within ``clifford_tol``, else ``None``.

    ``M`` is matched against the phase-free products by normalized overlap; the
    phase must then be a power of ``w``.
    """
    tol = resolve(tol)
    M = np.asarray(M, dtype=complex)
    D = d**n
    if M.shape != (D, D):
        raise DimensionError(f"expected a {D}x{D} matrix")
    for x in itertools.product(range(d), repeat=n):
        for z in itertools.product(range(d), repeat=n):
            base = matrix_of(PauliProduct(d, 0, x, z))
            overlap = np.vdot(base, M) / D
            if abs(abs(overlap) - 1) > tol.clifford_tol:
                continue
            lam = round(np.angle(overlap) / (2 * np.pi / d)) % d
            cand = PauliProduct(d, lam, x, z)
            if np.max(np.abs(matrix_of(cand) - M)) <= tol.clifford_tol:
                return cand
            return None
    return None


@dataclasses.dataclass(frozen=True)
class CliffordTableau:
    """Images of the generators under conjugation ``P -> C P C^dag``.

    Attributes:
        x_images: image of ``X_i`` for each qudit ``i``.
        z_images: image of ``Z_i`` for each qudit ``i``.
    """

    d: int
    n: int
    x_images: tuple
    z_images: tuple

    def conjugate(self, p: PauliProduct) -> PauliProduct:
        """Image of an arbitrary product, built from the generator images.

        ``X^x Z^z`` is expanded as ``X_0^x_0 ... X_{n-1}^x_{n-1} Z_0^z_0 ...``,
        which equals the tensor form because generators on different qudits
        commute.
        """
        if p.d != self.d or p.n != self.n:
            raise DimensionError("product does not match the tableau")
        acc = PauliProduct(self.d, p.lam, (0,) * self.n, (0,) * self.n)
        for i, e in enumerate(p.x):
            for _ in range(e):
                acc = pauli_mul(acc, self.x_images[i])
        for i, e in enumerate(p.z):
            for _ in range(e):
                acc = pauli_mul(acc, self.z_images[i])
        return acc

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "x_images": [p.to_json() for p in self.x_images],
            "z_images": [p.to_json() for p in self.z_images],
        }


def generator(d: int, n: int, which: str, i: int) -> PauliProduct:
    x = [0] * n
    z = [0] * n
    (x if which == "x" else z)[i] = 1
    return PauliProduct(d, 0, tuple(x), tuple(z))


def is_clifford(C, d: int, n: int, tol: Tolerances | None = None) -> tuple[bool, CliffordTableau | None]:
    """Check whether ``C`` maps every generator ``X_i, Z_i`` to a Pauli product.

    Returns:
        ``(True, tableau)`` on success, ``(False, None)`` otherwise.

    Raises:
        SizeGuardError: when the Pauli group of (d, n) exceeds the size guard.
        NotUnitaryError: for non-unitary ``C``.
    """
    tol = resolve(tol)
    d = check_dimension(d)
    if d ** (2 * n + 1) > GROUP_SIZE_GUARD:
        raise SizeGuardError(f"Pauli group of size {d ** (2 * n + 1)} exceeds the guard {GROUP_SIZE_GUARD}")
    C = require_unitary(C, tol, "C")
    if C.shape[0] != d**n:
        raise DimensionError(f"C has size {C.shape[0]}, expected {d**n}")
    images = {"x": [], "z": []}
    for which in ("x", "z"):
        for i in range(n):
            g = matrix_of(generator(d, n, which, i))
            img = decompose_pauli(C @ g @ C.conj().T, d, n, tol)
            if img is None:
                return False, None
            images[which].append(img)
    return True, CliffordTableau(d, n, tuple(images["x"]), tuple(images["z"]))


def group_order_by_closure(d: int) -> int:
    """Size of the matrix group generated by ``X``, ``Z`` (and hence ``w I``) for one qudit."""
    gens = [pauli_x(d), pauli_z(d)]
    key = lambda m: tuple(np.round(m, 8).reshape(-1).tolist())
    seen = {key(np.eye(d, dtype=complex)): np.eye(d, dtype=complex)}
    frontier = list(seen.values())
    while frontier:
        nxt = []
        for m in frontier:
            for g in gens:
                p = m @ g
                k = key(p)
                if k not in seen:
                    seen[k] = p
                    nxt.append(p)
        frontier = nxt
    return len(seen)
