"""Augmented complex linear algebra.

A zero-mean complex vector ``x`` is fully described to second order by its
covariance ``R = E{x x^H}`` and pseudocovariance ``P = E{x x^T}``.  Stacking
``x`` with its conjugate gives the augmented vector ``x^a = [x; x*]`` whose
covariance is ``[[R, P], [P*, R*]]``.  Augmented vectors are in one-to-one
correspondence with real composite vectors ``[Re x; Im x]`` through the
matrix ``J = [[I, jI], [I, -jI]]`` (``x^a = J x^r``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NotAugmented, NotPSD, Singular, StructureError, ZeroVariance

DEFAULT_TOL = 1e-10
COND_LIMIT = 1e12


def _scale(a):
    a = np.asarray(a)
    if a.size == 0:
        return 1.0
    return max(1.0, float(np.max(np.abs(a))))


def as_matrix(a, dtype=complex):
    """Return ``a`` as a finite 2-D array (scalars become 1x1)."""
    m = np.array(a, dtype=dtype)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2 or 0 in m.shape:
        raise StructureError(f"expected a non-empty matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise StructureError("matrix has non-finite entries")
    return m


def is_hermitian(a, tol=DEFAULT_TOL):
    a = np.asarray(a)
    return a.shape[0] == a.shape[1] and np.allclose(a, a.conj().T, rtol=0, atol=tol * _scale(a))


def min_eigenvalue(a):
    """Smallest eigenvalue of the Hermitian part of ``a``."""
    a = np.asarray(a)
    return float(np.linalg.eigvalsh(0.5 * (a + a.conj().T))[0])


def check_psd(a, tol=DEFAULT_TOL, what="matrix"):
    """Raise :class:`NotPSD` unless ``a`` is Hermitian positive semi-definite."""
    if not is_hermitian(a, tol):
        raise NotPSD(f"{what} is not Hermitian")
    lam = min_eigenvalue(a)
    if lam < -tol * _scale(a):
        raise NotPSD(f"{what} has eigenvalue {lam:.3e} < 0")


def checked_solve(a, b, exc=Singular, what="matrix"):
    """Solve ``a X = b`` after rejecting matrices with condition number > 1e12."""
    a = np.asarray(a)
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise exc(f"{what} is singular to working precision (cond={cond:.3e})")
    return np.linalg.solve(a, b)


def checked_inv(a, exc=Singular, what="matrix"):
    a = np.asarray(a)
    return checked_solve(a, np.eye(a.shape[0], dtype=a.dtype), exc=exc, what=what)


def augment_vector(x):
    """Return ``[x; x*]`` (stacked along the last axis)."""
    x = np.asarray(x, dtype=complex)
    if not np.all(np.isfinite(x)):
        raise StructureError("vector has non-finite entries")
    return np.concatenate([x, x.conj()], axis=-1)


def augment_blocks(a1, a2):
    """Materialize ``[[a1, a2], [a2*, a1*]]``."""
    a1 = np.asarray(a1)
    a2 = np.asarray(a2)
    return np.block([[a1, a2], [a2.conj(), a1.conj()]])


@dataclass(frozen=True, eq=False)
class AugmentedMatrix:
    """Matrix with the conjugate block pattern ``[[A1, A2], [A2*, A1*]]``.

    Only the two independent blocks are stored, so the pattern cannot be
    violated.  Blocks may be rectangular (e.g. augmented observation
    matrices are ``2K x 2L``).
    """

    a1: np.ndarray
    a2: np.ndarray

    def __post_init__(self):
        a1 = as_matrix(self.a1)
        a2 = as_matrix(self.a2)
        if a1.shape != a2.shape:
            raise StructureError(f"block shapes differ: {a1.shape} vs {a2.shape}")
        a1.setflags(write=False)
        a2.setflags(write=False)
        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "a2", a2)

    @classmethod
    def from_full(cls, m, tol=DEFAULT_TOL):
        m = as_matrix(m)
        r, c = m.shape
        if r % 2 or c % 2:
            raise StructureError(f"odd dimension {m.shape} cannot be augmented")
        p, q = r // 2, c // 2
        a1, a2 = m[:p, :q], m[:p, q:]
        if not np.allclose(m, augment_blocks(a1, a2), rtol=0, atol=tol * _scale(m)):
            raise StructureError("matrix does not have the conjugate block pattern")
        return cls(a1, a2)

    @property
    def shape(self):
        r, c = self.a1.shape
        return (2 * r, 2 * c)

    @cached_property
    def full(self):
        m = augment_blocks(self.a1, self.a2)
        m.setflags(write=False)
        return m

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.full, dtype=dtype)

    @property
    def H(self):
        return AugmentedMatrix(self.a1.conj().T, self.a2.T)

    def __matmul__(self, other):
        if isinstance(other, AugmentedMatrix):
            b1, b2 = other.a1, other.a2
            return AugmentedMatrix(
                self.a1 @ b1 + self.a2 @ b2.conj(),
                self.a1 @ b2 + self.a2 @ b1.conj(),
            )
        return self.full @ np.asarray(other)

    def __add__(self, other):
        if not isinstance(other, AugmentedMatrix):
            return NotImplemented
        return AugmentedMatrix(self.a1 + other.a1, self.a2 + other.a2)

    def __sub__(self, other):
        if not isinstance(other, AugmentedMatrix):
            return NotImplemented
        return AugmentedMatrix(self.a1 - other.a1, self.a2 - other.a2)

    def inv(self):
        # the inverse of a pattern matrix has the pattern; re-read it off
        inv = checked_inv(self.full, what="augmented matrix")
        return AugmentedMatrix.from_full(inv, tol=1e-8)

    def is_strictly_linear(self, tol=0.0):
        return bool(np.all(np.abs(self.a2) <= tol))


@dataclass(frozen=True, eq=False)
class SecondOrderStats:
    """Covariance/pseudocovariance pair of a zero-mean complex vector.

    Parameters
    ----------
    cov : array_like
        Hermitian covariance ``E{x x^H}``.
    pcov : array_like, optional
        Symmetric pseudocovariance ``E{x x^T}``; zero (circular) if omitted.
    tol : float
        Relative tolerance of the structural checks.
    """

    cov: np.ndarray
    pcov: np.ndarray = None
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        cov = as_matrix(self.cov)
        pcov = np.zeros_like(cov) if self.pcov is None else as_matrix(self.pcov)
        if cov.shape[0] != cov.shape[1]:
            raise StructureError(f"covariance must be square, got {cov.shape}")
        if pcov.shape != cov.shape:
            raise StructureError("covariance and pseudocovariance shapes differ")
        if not is_hermitian(cov, self.tol):
            raise StructureError("covariance is not Hermitian")
        if not np.allclose(pcov, pcov.T, rtol=0, atol=self.tol * _scale(pcov)):
            raise StructureError("pseudocovariance is not symmetric")
        check_psd(augment_blocks(cov, pcov), self.tol, what="augmented covariance")
        cov.setflags(write=False)
        pcov.setflags(write=False)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "pcov", pcov)

    @classmethod
    def scalar(cls, variance, pseudovariance=0.0):
        return cls(np.array([[variance]]), np.array([[pseudovariance]]))

    @property
    def dim(self):
        return self.cov.shape[0]

    @property
    def is_circular(self):
        return not np.any(self.pcov)

    def augmented(self):
        return AugmentedMatrix(self.cov, self.pcov)

    def real_covariance(self):
        """Covariance of the composite real vector ``[Re x; Im x]``."""
        r, p = self.cov, self.pcov
        raa = 0.5 * (r + p).real
        rbb = 0.5 * (r - p).real
        rab = 0.5 * (p - r).imag
        return np.block([[raa, rab], [rab.T, rbb]])

    def __repr__(self):
        return f"SecondOrderStats(dim={self.dim}, circular={self.is_circular})"


def build_augmented_cov(stats: SecondOrderStats) -> AugmentedMatrix:
    m = stats.augmented()
    check_psd(m.full, stats.tol, what="augmented covariance")
    return m


def circularity_degree(stats) -> float:
    """``|E{u^2}| / E{|u|^2}`` for a scalar; 0 is circular, 1 maximally noncircular."""
    if not isinstance(stats, SecondOrderStats):
        stats = SecondOrderStats.scalar(*stats)
    if stats.dim != 1:
        raise StructureError("circularity degree is defined for scalars only")
    var = stats.cov[0, 0].real
    if var <= 0:
        raise ZeroVariance("variance must be positive")
    return float(abs(stats.pcov[0, 0]) / var)


class DualityMap:
    """The map ``J_q`` between augmented complex and composite real vectors."""

    def __init__(self, q: int):
        if q < 1:
            raise StructureError("dimension must be positive")
        self.q = q
        eye = np.eye(q)
        self.J = np.block([[eye, 1j * eye], [eye, -1j * eye]])
        self.J_inv = 0.5 * self.J.conj().T
        self.J.setflags(write=False)
        self.J_inv.setflags(write=False)

    def to_real(self, za):
        """``J^{-1} z^a``, applied along the last axis."""
        return (np.asarray(za) @ self.J_inv.T).real

    def to_augmented(self, zr):
        return np.asarray(zr) @ self.J.T

    @staticmethod
    def transport(m, left: "DualityMap", right: "DualityMap"):
        """``J_left^{-1} m J_right``: maps an augmented operator to its real dual."""
        return (left.J_inv @ np.asarray(m) @ right.J).real

    def transport_cov(self, c):
        """``J^{-1} c J^{-H}`` for a covariance-type matrix."""
        return (self.J_inv @ np.asarray(c) @ self.J_inv.conj().T).real

    def untransport(self, m, left: "DualityMap", right: "DualityMap"):
        return left.J @ np.asarray(m) @ right.J_inv


def complex_to_real(v, tol=DEFAULT_TOL):
    """Map an augmented vector ``[z; z*]`` to ``[Re z; Im z]``."""
    v = np.asarray(v, dtype=complex)
    n = v.shape[-1]
    if n % 2:
        raise NotAugmented("augmented vectors have even length")
    q = n // 2
    upper, lower = v[..., :q], v[..., q:]
    if not np.allclose(lower, upper.conj(), rtol=0, atol=tol * _scale(v)):
        raise NotAugmented("lower half is not the conjugate of the upper half")
    return DualityMap(q).to_real(v)


def real_to_complex(r):
    """Inverse of :func:`complex_to_real`; returns the augmented vector."""
    r = np.asarray(r, dtype=float)
    if r.shape[-1] % 2:
        raise StructureError("composite real vectors have even length")
    return DualityMap(r.shape[-1] // 2).to_augmented(r)


def wl_mmse_coefficients(R_x, P_x, R_yx, P_yx):
    """Coefficients ``(B, C)`` of the widely linear MMSE estimate ``y = B x + C x*``.

    Raises
    ------
    Singular
        If ``R_x`` or its Schur-type complement ``R_x - P_x R_x*^{-1} P_x*``
        cannot be inverted.
    """
    R_x, P_x = as_matrix(R_x), as_matrix(P_x)
    R_yx, P_yx = as_matrix(R_yx), as_matrix(P_yx)
    rc_inv = checked_inv(R_x.conj(), what="R_x")
    D = checked_inv(R_x - P_x @ rc_inv @ P_x.conj(), what="Schur complement")
    E = -D @ P_x @ rc_inv
    B = R_yx @ D + P_yx @ E.conj()
    C = R_yx @ E + P_yx @ D.conj()
    return B, C
