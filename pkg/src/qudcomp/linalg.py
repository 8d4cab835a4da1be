"""Dense complex linear algebra and su(d) Lie-algebra helpers.

The generalized Gell-Mann basis is ordered as follows (``d*(d-1)/2`` entries in
each of the first two groups, ``d-1`` in the last):

1. symmetric pairs ``E_jk + E_kj`` for ``j < k`` in row-major order,
2. antisymmetric pairs ``-i E_jk + i E_kj`` for ``j < k`` in the same order,
3. diagonal elements ``sqrt(2/(l(l+1))) (sum_{j<l} E_jj - l E_ll)`` for
   ``l = 1 .. d-1``.

For ``d = 2`` this gives ``(sigma_x, sigma_y, sigma_z)``; for ``d = 3`` the
familiar eight Gell-Mann matrices, up to ordering.
"""

from __future__ import annotations

import dataclasses
import functools
import math

import numpy as np
import scipy.linalg

from .config import Tolerances, resolve
from .errors import (
    BranchCutError,
    DimensionError,
    NotUnitaryError,
    SchemaError,
)


def check_dimension(d, name="d"):
    if isinstance(d, bool) or not isinstance(d, (int, np.integer)):
        raise DimensionError(f"{name} must be an integer, got {d!r}")
    if d < 2:
        raise DimensionError(f"{name} must be at least 2, got {d}")
    return int(d)


def as_square(U, name="matrix") -> np.ndarray:
    """Convert ``U`` to a complex square 2-d array or raise ``DimensionError``."""
    M = np.asarray(U, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    return M


def unitarity_residual(U) -> float:
    U = np.asarray(U)
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def is_unitary(U, tol: Tolerances | None = None) -> bool:
    U = np.asarray(U)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        return False
    return unitarity_residual(U) <= resolve(tol).unitarity_tol


def require_unitary(U, tol: Tolerances | None = None, name="matrix") -> np.ndarray:
    """Return ``U`` as a complex array, raising if it is not square and unitary."""
    M = as_square(U, name)
    if not np.all(np.isfinite(M)):
        raise NotUnitaryError(f"{name} has non-finite entries")
    res = unitarity_residual(M)
    limit = resolve(tol).unitarity_tol
    if res > limit:
        raise NotUnitaryError(f"{name} is not unitary: max|U^dag U - I| = {res:.3e} > {limit:.1e}")
    return M


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a complex Gaussian matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def random_special_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    U = random_unitary(d, rng)
    return U * np.exp(-1j * np.angle(np.linalg.det(U)) / d)


def dist(U, V) -> float:
    """Global-phase-invariant distance ``sqrt(max(0, 1 - |tr(U^dag V)| / d))``."""
    U = np.asarray(U)
    V = np.asarray(V)
    if U.shape != V.shape or U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise DimensionError(f"shape mismatch: {U.shape} vs {V.shape}")
    # 1 - |tr(U^dag V)|/d equals |V - e^{i phi} U|_F^2 / (2d) for the optimal
    # phase phi; the norm form avoids cancellation for nearly equal inputs.
    t = np.vdot(U, V)
    phase = t / abs(t) if abs(t) > 0 else 1.0
    gap = np.linalg.norm(V - phase * U) ** 2 / (2 * U.shape[0])
    return math.sqrt(max(0.0, min(1.0, gap)))


@functools.lru_cache(maxsize=None)
def _gellmann(d: int) -> np.ndarray:
    mats = []
    pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = m[k, j] = 1
        mats.append(m)
    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = -1j
        m[k, j] = 1j
        mats.append(m)
    for l in range(1, d):
        m = np.zeros((d, d), dtype=complex)
        m[np.arange(l), np.arange(l)] = 1
        m[l, l] = -l
        mats.append(m * math.sqrt(2.0 / (l * (l + 1))))
    basis = np.array(mats)
    basis.setflags(write=False)
    return basis


def gellmann_basis(d: int) -> np.ndarray:
    """Return the ``d**2 - 1`` generalized Gell-Mann matrices, stacked.

    The matrices are traceless, Hermitian, and normalized so that
    ``tr(L_a L_b) = 2 delta_ab``. The returned array is read-only.

    Args:
        d: Hilbert-space dimension, at least 2.

    Returns:
        Array of shape ``(d**2 - 1, d, d)``.
    """
    return _gellmann(check_dimension(d))


@dataclasses.dataclass(frozen=True, eq=False)
class StructureTensors:
    """Structure constants of su(d) in the Gell-Mann basis.

    Attributes:
        f: totally antisymmetric constants, ``[L_k, L_l] = 2i f_klm L_m``.
        dsym: symmetric constants, ``{L_k, L_l} = (4/d) delta_kl I + 2 dsym_klm L_m``.
    """

    d: int
    f: np.ndarray
    dsym: np.ndarray


@functools.lru_cache(maxsize=None)
def _structure(d: int) -> StructureTensors:
    lam = _gellmann(d)
    # triple[k, l, m] = tr(L_k L_l L_m)
    triple = np.einsum("kab,lbc,mca->klm", lam, lam, lam, optimize=True)
    swapped = triple.transpose(1, 0, 2)
    f = ((triple - swapped) / 4j).real
    dsym = ((triple + swapped) / 4).real
    f.setflags(write=False)
    dsym.setflags(write=False)
    return StructureTensors(d, f, dsym)


def structure_constants(d: int) -> StructureTensors:
    """Compute (and cache) the su(d) structure constants from trace formulas."""
    return _structure(check_dimension(d))


def _coeff_pair(A, B, t: StructureTensors):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = t.d * t.d - 1
    if A.shape != (n,) or B.shape != (n,):
        raise DimensionError(f"coefficient vectors must have length {n}, got {A.shape} and {B.shape}")
    return A, B


def cross(A, B, t: StructureTensors) -> np.ndarray:
    """Antisymmetric product ``(A x B)_j = f_jkl A_k B_l``."""
    A, B = _coeff_pair(A, B, t)
    return np.einsum("jkl,k,l->j", t.f, A, B)


def dot_sym(A, B, t: StructureTensors) -> np.ndarray:
    """Symmetric product ``(A o B)_j = dsym_jkl A_k B_l``."""
    A, B = _coeff_pair(A, B, t)
    return np.einsum("jkl,k,l->j", t.dsym, A, B)


def coeffs_to_matrix(coeffs, d: int) -> np.ndarray:
    """Return ``sum_j c_j L_j``."""
    lam = gellmann_basis(d)
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (d * d - 1,):
        raise DimensionError(f"expected {d * d - 1} coefficients, got {coeffs.shape}")
    return np.tensordot(coeffs, lam, axes=1)


def matrix_to_coeffs(H) -> np.ndarray:
    """Project a traceless Hermitian matrix onto the Gell-Mann basis."""
    H = as_square(H)
    lam = gellmann_basis(H.shape[0])
    return np.einsum("aij,ji->a", lam, H).real / 2


@dataclasses.dataclass(frozen=True, eq=False)
class SuCoordinates:
    """A unitary written as ``e^{i phase} exp(-i sum_j coeffs_j L_j)``."""

    phase: float
    coeffs: np.ndarray

    @property
    def d(self) -> int:
        return math.isqrt(len(self.coeffs) + 1)


def hermitian_exp(H) -> np.ndarray:
    """``exp(iH)`` for Hermitian ``H`` via its eigendecomposition."""
    w, v = np.linalg.eigh(H)
    return (v * np.exp(1j * w)) @ v.conj().T


def principal_log(V, tol: Tolerances | None = None) -> np.ndarray:
    """Hermitian ``Phi`` with ``V = exp(i Phi)`` and eigenvalues in ``(-pi, pi]``.

    Raises:
        BranchCutError: when an eigenphase is within ``branch_tol`` of ``pi``,
            where the principal branch is ambiguous.
    """
    tol = resolve(tol)
    T, Z = scipy.linalg.schur(np.asarray(V, dtype=complex), output="complex")
    phases = np.angle(np.diag(T))
    if np.any(np.pi - np.abs(phases) < tol.branch_tol):
        raise BranchCutError("eigenphase on the branch cut at +-pi; the principal logarithm is ambiguous")
    Phi = (Z * phases) @ Z.conj().T
    return (Phi + Phi.conj().T) / 2


def su_log(U, tol: Tolerances | None = None) -> SuCoordinates:
    """Split a unitary into a global phase and su(d) coordinates.

    The phase is ``gamma = arg(det U) / d``. The generator is the principal
    logarithm of ``e^{-i gamma} U``. When that logarithm is not traceless (its
    trace is then a nonzero multiple of ``2 pi``), the multiple is moved into
    ``gamma`` so the coordinates stay in su(d); ``e^{i d gamma} = det U``
    still holds.

    Raises:
        NotUnitaryError: for non-unitary input.
        BranchCutError: for eigenphases of ``e^{-i gamma} U`` at ``+-pi``.
    """
    tol = resolve(tol)
    U = require_unitary(U, tol, "U")
    d = U.shape[0]
    gamma = float(np.angle(np.linalg.det(U))) / d
    Phi = principal_log(U * np.exp(-1j * gamma), tol)
    k = round(float(np.trace(Phi).real) / (2 * np.pi))
    if k:
        Phi = Phi - (2 * np.pi * k / d) * np.eye(d)
        gamma += 2 * np.pi * k / d
    # V = exp(i Phi) = exp(-i L) with L = -Phi
    return SuCoordinates(gamma, matrix_to_coeffs(-Phi))


def su_exp(c: SuCoordinates, d: int) -> np.ndarray:
    """Inverse of :func:`su_log`: ``e^{i gamma} exp(-i sum_j L_j Lambda_j)``."""
    d = check_dimension(d)
    coeffs = np.asarray(c.coeffs, dtype=float)
    if coeffs.shape != (d * d - 1,):
        raise DimensionError(f"expected {d * d - 1} coefficients for d={d}, got {coeffs.shape}")
    L = coeffs_to_matrix(coeffs, d)
    return np.exp(1j * c.phase) * hermitian_exp(-L)


def closest_unitary(M) -> np.ndarray:
    """Polar factor of ``M``: the unitary nearest to it in Frobenius norm."""
    u, _, vh = np.linalg.svd(M)
    return u @ vh


def matrix_to_json(M) -> dict:
    M = as_square(M)
    flat = M.reshape(-1)
    return {"dim": M.shape[0], "re": flat.real.tolist(), "im": flat.imag.tolist()}


def matrix_from_json(obj, path="matrix") -> np.ndarray:
    """Parse ``{"dim", "re", "im"}`` into a square complex matrix.

    Raises:
        SchemaError: for missing fields, wrong lengths or non-finite entries.
    """
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: expected an object with dim/re/im")
    try:
        n = obj["dim"]
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: {exc}") from None
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise SchemaError(f"{path}.dim: expected a positive integer")
    if re.shape != (n * n,) or im.shape != (n * n,):
        raise SchemaError(f"{path}: re/im must each hold dim*dim = {n * n} numbers")
    if not (np.all(np.isfinite(re)) and np.all(np.isfinite(im))):
        raise SchemaError(f"{path}: NaN or infinite entries are not allowed")
    return (re + 1j * im).reshape(n, n)
