"""Quotient geometry of full-rank factor matrices modulo orthogonal gauge.

Points are N x k real matrices of full column rank; two points U and UQ with
Q orthogonal describe the same rank-k PSD matrix UU^T, so the search space is
the quotient by O(k). The vertical space at U is {U W : W skew}, the
horizontal space is its orthogonal complement {D : D^T U = U^T D}, and the
Procrustes distance min_Q ||U - VQ||_F is the natural quotient metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    GramNotSPD,
    NonFiniteEntry,
    NotHorizontal,
    NotSkew,
    RankDeficientFactor,
)

# Validation tolerances. Relative throughout; absolute floors guard the
# zero-scale corner cases.
GRAM_SPD_RTOL = 1e-12
SKEW_INPUT_RTOL = 1e-10
SYLVESTER_RESIDUAL_RTOL = 1e-10
HORIZONTAL_RTOL = 1e-10
BASIS_DROP_TOL = 1e-8
FULL_RANK_RTOL = 1e-12


def _as_matrix(obj) -> np.ndarray:
    if isinstance(obj, FactorPoint):
        return obj.entries
    if isinstance(obj, HorizontalTangent):
        return obj.entries
    arr = np.asarray(obj, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d array, got shape {arr.shape}")
    return arr


def _frozen_copy(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FactorPoint:
    """A full-column-rank N x k factor matrix.

    Construction rejects rank-deficient input: the smallest singular value
    must exceed FULL_RANK_RTOL times the largest. Entries are copied and
    frozen so downstream code cannot mutate a shared point.
    """

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=float)
        if arr.ndim != 2:
            raise DimensionMismatch(f"factor must be 2-d, got shape {arr.shape}")
        n, k = arr.shape
        if k < 1 or n < k:
            raise DimensionMismatch(f"factor needs n >= k >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteEntry("factor entries must be finite")
        sigma = np.linalg.svd(arr, compute_uv=False)
        if sigma[-1] <= FULL_RANK_RTOL * max(sigma[0], 1.0):
            raise RankDeficientFactor(
                f"factor is rank deficient: sigma_min={sigma[-1]:.3e}, "
                f"sigma_max={sigma[0]:.3e}"
            )
        object.__setattr__(self, "entries", _frozen_copy(arr))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def gram(self) -> np.ndarray:
        return self.entries.T @ self.entries

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))


@dataclass(frozen=True)
class HorizontalTangent:
    """A tangent direction D at base point U with D^T U symmetric.

    The constructor verifies horizontality: ||D^T U - U^T D||_F must not
    exceed HORIZONTAL_RTOL * ||D||_F * ||U||_F. Use horizontal_project to
    build one from an arbitrary ambient direction.
    """

    entries: np.ndarray
    base: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = np.asarray(self.entries, dtype=float)
        u = _as_matrix(self.base)
        if d.shape != u.shape:
            raise DimensionMismatch(
                f"tangent shape {d.shape} does not match base shape {u.shape}"
            )
        if not np.all(np.isfinite(d)):
            raise NonFiniteEntry("tangent entries must be finite")
        skew_part = d.T @ u - u.T @ d
        bound = HORIZONTAL_RTOL * np.linalg.norm(d) * np.linalg.norm(u)
        if np.linalg.norm(skew_part) > max(bound, 0.0):
            raise NotHorizontal(
                f"direction is not horizontal: ||D^T U - U^T D|| = "
                f"{np.linalg.norm(skew_part):.3e} exceeds {bound:.3e}"
            )
        object.__setattr__(self, "entries", _frozen_copy(d))
        object.__setattr__(self, "base", _frozen_copy(u))

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))


@dataclass(frozen=True)
class SkewFactor:
    """A k x k skew-symmetric matrix stored by its strict lower triangle.

    Mirroring is exact by construction: matrix() returns L - L^T, so
    matrix()[i, j] == -matrix()[j, i] holds bit-for-bit and the diagonal
    is exactly zero.
    """

    strict_lower: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.strict_lower, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionMismatch(f"strict lower part must be square, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteEntry("skew entries must be finite")
        object.__setattr__(self, "strict_lower", _frozen_copy(np.tril(arr, k=-1)))

    @classmethod
    def from_matrix(cls, omega: np.ndarray) -> "SkewFactor":
        m = np.asarray(omega, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"skew matrix must be square, got {m.shape}")
        asym = np.linalg.norm(m + m.T)
        if asym > SKEW_INPUT_RTOL * max(np.linalg.norm(m), 1e-300):
            raise NotSkew(f"matrix is not skew-symmetric: ||M + M^T|| = {asym:.3e}")
        return cls(np.tril(m, k=-1))

    @property
    def dim(self) -> int:
        return self.strict_lower.shape[0]

    def matrix(self) -> np.ndarray:
        return self.strict_lower - self.strict_lower.T


def solve_skew_sylvester(gram: np.ndarray, rhs: np.ndarray) -> SkewFactor:
    """Solve Omega G + G Omega = S for skew Omega, G symmetric positive definite.

    G is eigendecomposed as V diag(g) V^T and the solution is read off
    entrywise in that basis, (V^T Omega V)_ij = (V^T S V)_ij / (g_i + g_j).
    Raises GramNotSPD when the smallest eigenvalue of G does not clear
    GRAM_SPD_RTOL times the largest, and NotSkew when S is not skew.
    """
    g_mat = np.asarray(gram, dtype=float)
    s_mat = np.asarray(rhs, dtype=float)
    if g_mat.ndim != 2 or g_mat.shape[0] != g_mat.shape[1]:
        raise DimensionMismatch(f"gram matrix must be square, got {g_mat.shape}")
    if s_mat.shape != g_mat.shape:
        raise DimensionMismatch(
            f"rhs shape {s_mat.shape} does not match gram shape {g_mat.shape}"
        )
    if not (np.all(np.isfinite(g_mat)) and np.all(np.isfinite(s_mat))):
        raise NonFiniteEntry("sylvester inputs must be finite")
    s_norm = np.linalg.norm(s_mat)
    if np.linalg.norm(s_mat + s_mat.T) > SKEW_INPUT_RTOL * max(s_norm, 1e-300):
        raise NotSkew("sylvester rhs must be skew-symmetric")

    sym = 0.5 * (g_mat + g_mat.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    if eigvals[0] <= GRAM_SPD_RTOL * max(eigvals[-1], 0.0):
        raise GramNotSPD(
            f"gram matrix is numerically singular: min eig {eigvals[0]:.3e}, "
            f"max eig {eigvals[-1]:.3e}"
        )
    s_tilde = eigvecs.T @ s_mat @ eigvecs
    omega_tilde = s_tilde / (eigvals[:, None] + eigvals[None, :])
    omega = eigvecs @ omega_tilde @ eigvecs.T
    omega = 0.5 * (omega - omega.T)

    residual = np.linalg.norm(omega @ sym + sym @ omega - s_mat)
    budget = SYLVESTER_RESIDUAL_RTOL * (
        np.linalg.norm(sym) * np.linalg.norm(omega) + s_norm
    )
    if residual > max(budget, 1e-300):
        raise GramNotSPD(
            f"sylvester solve lost accuracy: residual {residual:.3e} "
            f"exceeds {budget:.3e}"
        )
    return SkewFactor(np.tril(omega, k=-1))


def horizontal_project(u, z) -> HorizontalTangent:
    """Orthogonal projection of an ambient direction Z onto the horizontal
    space at U: P_U(Z) = Z - U Omega with Omega solving the skew Sylvester
    equation Omega G + G Omega = U^T Z - Z^T U, G = U^T U."""
    u_mat = _as_matrix(u)
    z_mat = np.asarray(z, dtype=float)
    if z_mat.shape != u_mat.shape:
        raise DimensionMismatch(
            f"direction shape {z_mat.shape} does not match point shape {u_mat.shape}"
        )
    gram = u_mat.T @ u_mat
    horiz = z_mat
    # Two passes: the first removes the vertical component, the second is
    # iterative refinement so the leftover skew defect scales with the
    # output norm rather than the input norm.
    for _ in range(2):
        skew_rhs = horiz.T @ u_mat - u_mat.T @ horiz
        skew_rhs = 0.5 * (skew_rhs - skew_rhs.T)  # exact skewness for the solver gate
        omega = solve_skew_sylvester(gram, -skew_rhs)
        horiz = horiz - u_mat @ omega.matrix()
    if np.linalg.norm(horiz) <= 1e-12 * np.linalg.norm(z_mat):
        # The input was vertical up to rounding; the true projection is zero.
        horiz = np.zeros_like(z_mat)
    return HorizontalTangent(horiz, u_mat)


def procrustes_distance(u, v) -> float:
    """Gauge-invariant distance min over orthogonal Q of ||U - VQ||_F.

    Reflections are included (full O(k), not SO(k)); for k = 1 this is
    min(||u - v||, ||u + v||)."""
    dist, _ = procrustes_align(u, v)
    return dist


def procrustes_align(u, v) -> tuple[float, np.ndarray]:
    """Distance and the optimal gauge: Q minimizing ||U - VQ||_F."""
    u_mat = _as_matrix(u)
    v_mat = _as_matrix(v)
    if u_mat.shape != v_mat.shape:
        raise DimensionMismatch(
            f"cannot compare factors of shapes {u_mat.shape} and {v_mat.shape}"
        )
    cross = v_mat.T @ u_mat
    left, _, right_t = np.linalg.svd(cross)
    q_opt = left @ right_t
    # norm of the aligned difference, not the nuclear-norm identity: the
    # identity cancels catastrophically near zero distance
    return float(np.linalg.norm(u_mat - v_mat @ q_opt)), q_opt


def horizontal_basis(u) -> list[HorizontalTangent]:
    """Orthonormal basis of the horizontal space at U.

    The Nk canonical directions are projected, then reduced by
    column-pivoted Gram-Schmidt (largest residual first, ties to the lowest
    index); candidates with residual norm below BASIS_DROP_TOL are dropped.
    The result has exactly Nk - k(k-1)/2 elements.
    """
    u_mat = _as_matrix(u)
    n, k = u_mat.shape
    expected = n * k - k * (k - 1) // 2

    candidates = []
    for i in range(n):
        for j in range(k):
            e = np.zeros((n, k))
            e[i, j] = 1.0
            candidates.append(horizontal_project(u_mat, e).entries.copy())

    basis: list[np.ndarray] = []
    residuals = [c.copy() for c in candidates]
    alive = list(range(len(residuals)))
    while alive:
        norms = [np.linalg.norm(residuals[i]) for i in alive]
        best = int(np.argmax(norms))
        if norms[best] < BASIS_DROP_TOL:
            break
        idx = alive.pop(best)
        vec = residuals[idx]
        # Second orthogonalization pass for numerical hygiene.
        for b in basis:
            vec = vec - np.vdot(b, vec) * b
        vec = vec / np.linalg.norm(vec)
        basis.append(vec)
        for i in alive:
            residuals[i] = residuals[i] - np.vdot(vec, residuals[i]) * vec

    if len(basis) != expected:
        raise RankDeficientFactor(
            f"horizontal space at this point has numerical dimension "
            f"{len(basis)}, expected {expected}"
        )
    return [HorizontalTangent(b, u_mat) for b in basis]
