"""Critical point search and correspondence with analytic references.

A damped Newton iteration on the gradient map finds critical points of any
risk model from seed points; records carry the limiting gradient norm and a
curvature classification. Analytic enumerations of the population critical
points serve as references, and a greedy mutual-nearest matching pairs a
found set against a reference set.

Factor models with k >= 2 columns are classified through the horizontal
restriction of the Hessian and deduplicated up to gauge; width-one factors
and plain vectors live in ambient coordinates, where sign-flipped copies
are distinct points.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import GramNotSPD, InvalidConfig, RankDeficientFactor
from .manifold import horizontal_basis, procrustes_distance
from .risk_models import SensingGroundTruth
from .spectral import dense_euclidean_hessian, min_eig_euclidean, min_eig_horizontal

# convergence declared at 1e-8 * (1 + value scale); curvature sign calls and
# duplicate merges use the model's own scales
TAU_CRIT_FACTOR = 1e-8
TAU_EIG_FACTOR = 1e-6
TAU_DEDUPE_FACTOR = 1e-4

MAX_NEWTON_ITER = 100
MAX_POLISH_ITER = 40
MAX_BACKTRACKS = 20
MAX_STALLS = 5
MAX_SEARCH_DIM = 64

KIND_MIN = "LocalMin"
KIND_SADDLE = "StrictSaddle"
KIND_DEGENERATE = "Degenerate"


def _uses_quotient(model) -> bool:
    return model.is_factor and model.shape[1] >= 2


def _damped_newton_step(hess: np.ndarray, grad_flat: np.ndarray) -> np.ndarray:
    """Newton step that repels saddles: eigenvalues keep their sign but
    their magnitude is floored, so the step stays finite near degeneracy."""
    eigvals, eigvecs = np.linalg.eigh(hess)
    floor = 1e-10 * max(float(np.max(np.abs(eigvals))), 1e-30)
    signs = np.where(eigvals >= 0.0, 1.0, -1.0)
    damped = signs * np.maximum(np.abs(eigvals), floor)
    return -eigvecs @ ((eigvecs.T @ grad_flat) / damped)


def damped_newton(model, seed_point, max_iter: int = MAX_NEWTON_ITER):
    """Drive the gradient to zero from one seed.

    Returns (point, grad_norm, n_iter, converged). Convergence means the
    gradient norm dropped below 1e-8 * (1 + value scale); afterwards a
    polish phase keeps stepping while the gradient still shrinks, which
    pushes through directions where the Hessian degenerates at the root.
    """
    point = model._coerce(seed_point)
    tau = TAU_CRIT_FACTOR * (1.0 + model.value_scale)
    grad = model.euclidean_grad(point)
    grad_norm = float(np.linalg.norm(grad))
    stalls = 0
    iters = 0
    while iters < max_iter and grad_norm > tau:
        iters += 1
        hess = dense_euclidean_hessian(model, point)
        step = _damped_newton_step(hess, grad.ravel()).reshape(point.shape)
        cap = 0.5 * (1.0 + float(np.linalg.norm(point)))
        step_norm = float(np.linalg.norm(step))
        if step_norm > cap:
            step = step * (cap / step_norm)
        best_point, best_norm = point, grad_norm
        scale = 1.0
        for _ in range(MAX_BACKTRACKS):
            candidate = point + scale * step
            norm = float(np.linalg.norm(model.euclidean_grad(candidate)))
            if norm < best_norm:
                best_point, best_norm = candidate, norm
                break
            scale *= 0.5
        if best_norm >= grad_norm:
            stalls += 1
            if stalls >= MAX_STALLS:
                break
        else:
            stalls = 0
        point, grad_norm = best_point, best_norm
        grad = model.euclidean_grad(point)
    converged = grad_norm <= tau
    if converged:
        for _ in range(MAX_POLISH_ITER):
            hess = dense_euclidean_hessian(model, point)
            step = _damped_newton_step(hess, grad.ravel()).reshape(point.shape)
            cap = 0.5 * (1.0 + float(np.linalg.norm(point)))
            step_norm = float(np.linalg.norm(step))
            if step_norm > cap:
                step = step * (cap / step_norm)
            candidate = point + step
            norm = float(np.linalg.norm(model.euclidean_grad(candidate)))
            if not (norm < 0.9 * grad_norm or norm == 0.0):
                break
            point, grad_norm = candidate, norm
            grad = model.euclidean_grad(point)
            if grad_norm == 0.0:
                break
    return point, grad_norm, iters, converged


@dataclass(frozen=True)
class CriticalPointRecord:
    location: np.ndarray
    grad_norm: float
    lambda_min: float
    kind: str
    basin_seed: int
    note: str = ""

    def to_json_dict(self) -> dict:
        return {
            "location_row_major": self.location.ravel().tolist(),
            "shape": list(self.location.shape),
            "grad_norm": self.grad_norm,
            "lambda_min": self.lambda_min,
            "kind": self.kind,
            "basin_seed": self.basin_seed,
            "note": self.note,
        }


@dataclass(frozen=True)
class CriticalSearchResult:
    records: tuple
    n_seeds: int
    n_converged: int
    n_failed: int
    dedupe_tol: float

    @property
    def locations(self) -> list:
        return [r.location for r in self.records]

    def of_kind(self, kind: str) -> list:
        return [r for r in self.records if r.kind == kind]

    def to_json_dict(self) -> dict:
        return {
            "n_seeds": self.n_seeds,
            "n_converged": self.n_converged,
            "n_failed": self.n_failed,
            "dedupe_tol": self.dedupe_tol,
            "records": [r.to_json_dict() for r in self.records],
        }


def _dedupe_distance(model, a: np.ndarray, b: np.ndarray) -> float:
    if _uses_quotient(model):
        return procrustes_distance(a, b)
    return float(np.linalg.norm(a - b))


def _classify(model, point: np.ndarray):
    tau_eig = TAU_EIG_FACTOR * model.hessian_scale
    note = ""
    if _uses_quotient(model):
        try:
            lam = min_eig_horizontal(model, point).lambda_min
        except (RankDeficientFactor, GramNotSPD):
            # the quotient geometry breaks down at rank-deficient factors;
            # fall back to the ambient Hessian, which only widens the
            # negative spectrum
            lam = min_eig_euclidean(model, point).lambda_min
            note = "rank-deficient factor, ambient curvature reported"
    else:
        lam = min_eig_euclidean(model, point).lambda_min
    if lam > tau_eig:
        kind = KIND_MIN
    elif lam < -tau_eig:
        kind = KIND_SADDLE
    else:
        kind = KIND_DEGENERATE
    return float(lam), kind, note


def find_critical_points(model, seed_points, max_iter: int = MAX_NEWTON_ITER) -> CriticalSearchResult:
    """Run the damped Newton search from every seed and merge duplicates.

    Seeds that fail to converge are counted, not fatal. Duplicates merge
    at 1e-4 times the domain scale, keeping the representative with the
    smaller gradient norm.
    """
    dim = int(np.prod(model.shape))
    if dim > MAX_SEARCH_DIM:
        raise InvalidConfig(
            f"dense search supports at most {MAX_SEARCH_DIM} dimensions, "
            f"model has {dim}"
        )
    tol = TAU_DEDUPE_FACTOR * model.domain_scale
    found: list[CriticalPointRecord] = []
    n_converged = 0
    n_failed = 0
    n_seeds = 0
    for seed_index, seed in enumerate(seed_points):
        n_seeds += 1
        point, grad_norm, _, converged = damped_newton(model, seed, max_iter)
        if not converged:
            n_failed += 1
            continue
        n_converged += 1
        keeper = None
        for i, record in enumerate(found):
            if _dedupe_distance(model, record.location, point) <= tol:
                keeper = i
                break
        if keeper is not None:
            if grad_norm < found[keeper].grad_norm:
                lam, kind, note = _classify(model, point)
                found[keeper] = CriticalPointRecord(
                    location=point,
                    grad_norm=grad_norm,
                    lambda_min=lam,
                    kind=kind,
                    basin_seed=seed_index,
                    note=note,
                )
            continue
        lam, kind, note = _classify(model, point)
        found.append(
            CriticalPointRecord(
                location=point,
                grad_norm=grad_norm,
                lambda_min=lam,
                kind=kind,
                basin_seed=seed_index,
                note=note,
            )
        )
    return CriticalSearchResult(
        records=tuple(found),
        n_seeds=n_seeds,
        n_converged=n_converged,
        n_failed=n_failed,
        dedupe_tol=tol,
    )


def grid_seed_points(lo: float, hi: float, spacing: float, dim: int) -> list:
    """Uniform grid seeds over [lo, hi]^dim, inclusive of both ends."""
    if not (hi > lo and spacing > 0.0):
        raise InvalidConfig("grid needs hi > lo and positive spacing")
    count = int(round((hi - lo) / spacing)) + 1
    axis = np.linspace(lo, hi, count)
    if dim * math.log(count) > math.log(1e6):
        raise InvalidConfig("grid would exceed a million seeds")
    return [np.array(p) for p in itertools.product(axis, repeat=dim)]


def refine_minimum_horizontal(model, seed_point, max_iter: int = MAX_NEWTON_ITER):
    """Newton refinement of a factor minimum inside the horizontal space.

    Builds the horizontal Hessian in an explicit basis and steps only along
    horizontal directions, so the gauge degeneracy of the ambient Hessian
    never enters. Intended for polishing near-minima; returns the refined
    factor and its Riemannian gradient norm.
    """
    if not model.is_factor:
        raise InvalidConfig("horizontal refinement needs a factor model")
    point = model._coerce(seed_point)
    tau = TAU_CRIT_FACTOR * (1.0 + model.value_scale)
    for _ in range(max_iter):
        grad = model.euclidean_grad(point)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tau:
            break
        basis = horizontal_basis(point)
        mats = [b.entries for b in basis]
        d = len(mats)
        hess = np.empty((d, d))
        rhs = np.empty(d)
        for i, e_i in enumerate(mats):
            image = model.hess_vec(point, e_i)
            rhs[i] = np.vdot(grad, e_i)
            for j in range(i, d):
                hess[i, j] = np.vdot(image, mats[j])
                hess[j, i] = hess[i, j]
        coeffs = _damped_newton_step(hess, rhs)
        step = sum(c * e for c, e in zip(coeffs, mats))
        cap = 0.5 * (1.0 + float(np.linalg.norm(point)))
        step_norm = float(np.linalg.norm(step))
        if step_norm > cap:
            step = step * (cap / step_norm)
        best_point, best_norm = point, grad_norm
        scale = 1.0
        for _ in range(MAX_BACKTRACKS):
            candidate = point + scale * step
            norm = float(np.linalg.norm(model.euclidean_grad(candidate)))
            if norm < best_norm:
                best_point, best_norm = candidate, norm
                break
            scale *= 0.5
        if best_norm >= grad_norm:
            # Newton stalled; a value-decreasing gradient step keeps the
            # refinement moving through nearly flat valleys where the
            # Newton direction loses to its own small eigenvalues.
            value = model.value(point)
            scale = cap / max(grad_norm, 1e-30)
            moved = False
            for _ in range(MAX_BACKTRACKS):
                candidate = point - scale * grad
                if model.value(candidate) < value:
                    point = candidate
                    moved = True
                    break
                scale *= 0.5
            if not moved:
                break
            continue
        point = best_point
    return point, float(np.linalg.norm(model.euclidean_grad(point)))


# ---------------------------------------------------------------------------
# analytic references
# ---------------------------------------------------------------------------


def analytic_critical_points_ms(
    truth: SensingGroundTruth, include_signs: bool = False
) -> list:
    """Population critical factors: one canonical representative per
    eigendirection subset of size at most k, zero-padded on the right.

    include_signs expands each nonzero point to both signs, which only
    makes sense in ambient width-one coordinates.
    """
    k = truth.target_rank
    if include_signs and k != 1:
        raise InvalidConfig("sign expansion is only meaningful for width one")
    points = []
    for size in range(k + 1):
        for subset in itertools.combinations(range(truth.rank), size):
            block = truth.eigvecs[:, list(subset)] * np.sqrt(
                truth.eigvals[list(subset)]
            )
            point = np.zeros((truth.dim, k))
            point[:, :size] = block
            points.append(point)
            if include_signs and size > 0:
                points.append(-point)
    return points


def analytic_critical_points_pr(signal) -> list:
    """Population critical vectors: zero, both signs of the signal, and a
    representative saddle pair per orthocomplement direction.

    For N = 2 the saddle set is exactly those two points; for N >= 3 it is
    a whole sphere and the returned saddles are representatives only.
    """
    xstar = np.asarray(signal, dtype=float)
    dim = xstar.shape[0]
    norm_star = float(np.linalg.norm(xstar))
    points = [np.zeros(dim), xstar.copy(), -xstar.copy()]
    if dim >= 2:
        basis, _ = np.linalg.qr(
            np.column_stack([xstar / norm_star, np.eye(dim)])[:, : dim + 1]
        )
        for i in range(1, dim):
            w = basis[:, i]
            saddle = norm_star / math.sqrt(3.0) * w
            points.append(saddle)
            points.append(-saddle)
    return points


# ---------------------------------------------------------------------------
# correspondence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorrespondenceReport:
    """Greedy mutual-nearest matching of found points against references.

    pairs hold (found_index, reference_index, distance). Unmatched found
    points are labeled spurious, unmatched references missed. The
    heuristic_bound 2 * epsilon / eta estimates how far an empirical
    critical point can drift from its population counterpart when the
    gradient deviation stays under epsilon and the curvature stays above
    eta; it normalizes the local curvature to one, so it guides rather
    than certifies.
    """

    pairs: tuple
    spurious: tuple
    missed: tuple
    heuristic_bound: float

    @property
    def all_matched_within_bound(self) -> bool:
        if self.spurious or self.missed:
            return False
        return all(d <= self.heuristic_bound for _, _, d in self.pairs)

    def to_json_dict(self) -> dict:
        return {
            "pairs": [
                {"found": f, "reference": r, "distance": d}
                for f, r, d in self.pairs
            ],
            "spurious": list(self.spurious),
            "missed": list(self.missed),
            "heuristic_bound": self.heuristic_bound,
            "all_matched_within_bound": self.all_matched_within_bound,
        }


def _pair_distance(a: np.ndarray, b: np.ndarray, metric: str) -> float:
    if metric == "euclidean":
        return float(np.linalg.norm(a - b))
    if metric == "sign_euclidean":
        return min(
            float(np.linalg.norm(a - b)), float(np.linalg.norm(a + b))
        )
    if metric == "procrustes":
        return procrustes_distance(a, b)
    raise InvalidConfig(f"unknown metric {metric!r}")


def match_correspondence(
    found, reference, epsilon: float, eta: float, metric: str = "euclidean"
) -> CorrespondenceReport:
    """Pair each found point with its nearest reference, injectively.

    Candidate pairs are sorted by distance (ties broken by indices) and
    accepted greedily while both sides are unused, which realizes the
    mutual-nearest matching for separated references.
    """
    if eta <= 0.0 or epsilon < 0.0:
        raise InvalidConfig("need epsilon >= 0 and eta > 0 for the bound")
    found = [np.asarray(p, dtype=float) for p in found]
    reference = [np.asarray(p, dtype=float) for p in reference]
    candidates = sorted(
        (
            (_pair_distance(f, r, metric), fi, ri)
            for fi, f in enumerate(found)
            for ri, r in enumerate(reference)
        ),
    )
    used_found: set = set()
    used_ref: set = set()
    pairs = []
    for dist, fi, ri in candidates:
        if fi in used_found or ri in used_ref:
            continue
        used_found.add(fi)
        used_ref.add(ri)
        pairs.append((fi, ri, float(dist)))
    pairs.sort(key=lambda t: t[0])
    return CorrespondenceReport(
        pairs=tuple(pairs),
        spurious=tuple(i for i in range(len(found)) if i not in used_found),
        missed=tuple(i for i in range(len(reference)) if i not in used_ref),
        heuristic_bound=2.0 * epsilon / eta,
    )
