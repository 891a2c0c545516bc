"""Euclidean distance matrix completion and embedding.

A squared EDM of points in D dimensions has rank at most D+2, so missing
entries can be recovered by alternating between a rank-(D+2) eigenvalue
truncation and re-imposing the known entries together with symmetry,
hollowness and non-negativity. Classical multidimensional scaling turns a
complete EDM back into coordinates, and a quantized alphabet of admissible
squared distances (generated by sweeping relative body rotations) can snap
completed entries onto physically possible values.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import Conformation, random_rotation, rotation_2d
from .measurement import PartialEdm

COMPLETION_TOL = 1e-10
COMPLETION_MAX_ITER = 500

# Rank of a squared EDM generated by D-dimensional points is <= D + 2.
EDM_RANK_SURPLUS = 2


class NonEuclideanMatrixError(ValueError):
    """Input is too far from any Euclidean distance matrix."""


@dataclass
class CompletionResult:
    """Completed squared EDM plus diagnostics.

    ``completed`` is hollow, symmetric and non-negative with the originally
    known entries (marked in ``known_mask``) reproduced exactly in hard
    constraint mode. ``final_objective`` is the relative mismatch between
    the final low-rank iterate and the known entries.
    """

    completed: np.ndarray
    known_mask: np.ndarray
    iterations: int
    final_objective: float
    converged: bool

    def distances(self) -> np.ndarray:
        return np.sqrt(self.completed)


@dataclass(frozen=True)
class DistanceAlphabet:
    """Sorted admissible squared cross distances on a fixed quantization grid."""

    values: np.ndarray
    quantization_step: float
    num_rotation_samples: int

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size < 1:
            raise ValueError("alphabet must not be empty")
        if not np.all(np.isfinite(values)) or values.min() < 0:
            raise ValueError("alphabet values must be finite and non-negative")
        values = np.unique(values)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


def _rank_truncate(matrix: np.ndarray, rank: int) -> np.ndarray:
    """Nearest (Frobenius) matrix of the given rank; EDMs are indefinite so
    eigenvalues are kept by magnitude."""
    evals, evecs = np.linalg.eigh(matrix)
    keep = np.argsort(np.abs(evals))[-rank:]
    return (evecs[:, keep] * evals[keep]) @ evecs[:, keep].T


def _kabsch(source: np.ndarray, target: np.ndarray):
    """Proper rotation and translation mapping source onto target."""
    sc, tc = source.mean(axis=0), target.mean(axis=0)
    h = (source - sc).T @ (target - tc)
    u, _, vt = np.linalg.svd(h)
    signs = np.ones(h.shape[0])
    signs[-1] = np.sign(np.linalg.det(vt.T @ u.T)) or 1.0
    rot = (vt.T * signs) @ u.T
    return rot, tc - rot @ sc


def _linear_trilaterate(anchors: np.ndarray, dists: np.ndarray):
    """Closed-form point fix (exact for noiseless ranges): subtracting the
    first range equation from the rest leaves a linear system."""
    a0, d0 = anchors[0], dists[0]
    lhs = 2.0 * (anchors[1:] - a0)
    rhs = (d0**2 - dists[1:] ** 2
           + (anchors[1:] ** 2).sum(axis=1) - (a0**2).sum())
    if np.linalg.matrix_rank(lhs) < anchors.shape[1]:
        return None
    return np.linalg.lstsq(lhs, rhs, rcond=None)[0]


def _congruent_fill(partial: PartialEdm):
    """Geometric starting guess for the unknown cross entries.

    Embeds the fully observed anchor and body blocks separately, pins body
    nodes with enough observed cross distances by trilateration in the
    anchor frame, aligns the body embedding onto those pins (trying both
    chiralities) and reads the missing entries off the reconstruction.
    Returns None when the block structure is missing or too degenerate,
    in which case the caller falls back to a constant fill.
    """
    m = partial.num_anchors
    dim = partial.dim
    n = partial.size
    if m is None or m < dim + 1 or n - m < 1:
        return None
    k = n - m
    try:
        anchors = edm_to_points(partial.values_sq[:m, :m], dim)
        body = (edm_to_points(partial.values_sq[m:, m:], dim)
                if k > 1 else np.zeros((1, dim)))
    except (NonEuclideanMatrixError, ValueError):
        return None

    cross_mask = partial.mask[:m, m:]
    cross_d = np.sqrt(np.where(cross_mask, partial.values_sq[:m, m:], 0.0))
    body_d = np.sqrt(partial.values_sq[m:, m:])

    # Pin nodes one by one; a pinned node becomes a reference for the rest
    # because the body block supplies its distances to every other node.
    pins: dict[int, np.ndarray] = {}
    progress = True
    while progress:
        progress = False
        for j in range(k):
            if j in pins:
                continue
            rows = np.flatnonzero(cross_mask[:, j])
            refs = [anchors[rows]] + [pins[p][None, :] for p in pins]
            dists = [cross_d[rows, j]] + [body_d[p, j:j + 1] for p in pins]
            refs = np.vstack(refs)
            dists = np.concatenate(dists)
            if refs.shape[0] < dim + 1:
                continue
            fix = _linear_trilaterate(refs, dists)
            if fix is not None:
                pins[j] = fix
                progress = True
    if len(pins) < dim:
        return None

    order = sorted(pins)
    pin_pts = np.asarray([pins[j] for j in order])
    if len(pins) == k:
        placed = pin_pts
    else:
        # align the body embedding onto the pins to place the rest
        best = None
        for chirality in (1.0, -1.0):
            emb = body.copy()
            emb[:, -1] *= chirality
            rot, shift = _kabsch(emb[order], pin_pts)
            cand = emb @ rot.T + shift
            diff = anchors[:, None, :] - cand[None, :, :]
            fit = np.sqrt((diff**2).sum(axis=2)) - cross_d
            score = float((fit[cross_mask] ** 2).sum())
            if best is None or score < best[0]:
                best = (score, cand)
        placed = best[1]
        placed[order] = pin_pts

    points = np.vstack([anchors, placed])
    diff = points[:, None, :] - points[None, :, :]
    return (diff**2).sum(axis=2)


def complete_edm(partial: PartialEdm, rank_slack: int = 0,
                 max_iter: int = COMPLETION_MAX_ITER,
                 tol: float = COMPLETION_TOL,
                 hard_constraints: bool = True,
                 stall_threshold: float = 1e-6) -> CompletionResult:
    """Fill the missing entries of a partial squared EDM.

    Alternates a rank-(dim+2+rank_slack) eigentruncation with restoring the
    known entries and projecting onto hollow symmetric non-negative
    matrices, until the relative Frobenius change drops below ``tol`` or
    ``max_iter`` is reached. ``rank_slack`` loosens the rank cap for noisy
    data. With ``hard_constraints`` disabled the returned matrix is the
    final low-rank iterate itself, so known entries may deviate by up to
    ``final_objective`` relative. ``converged`` requires both a stalled
    iteration and a final objective at or below ``stall_threshold``;
    inconsistent known entries leave the objective stuck above it.
    """
    known = partial.mask.copy()
    target = np.where(known, partial.values_sq, 0.0)
    if known.all():
        return CompletionResult(partial.values_sq.copy(), known, 0, 0.0, True)

    rank = partial.dim + EDM_RANK_SURPLUS + int(rank_slack)
    known_norm = max(np.linalg.norm(target[known]), 1e-300)

    # Start the unknowns from a geometric reconstruction of the two blocks
    # when the layout allows it; otherwise fall back to the mean observed
    # cross-block entry (or any observed off-diagonal entry).
    guess = _congruent_fill(partial)
    if guess is not None:
        current = np.where(known, target, np.maximum(guess, 0.0))
    else:
        off_diag = known & ~np.eye(partial.size, dtype=bool)
        if partial.num_anchors is not None:
            m = partial.num_anchors
            cross = np.zeros_like(known)
            cross[:m, m:] = True
            cross[m:, :m] = True
            pool = known & cross
            if not pool.any():
                pool = off_diag
        else:
            pool = off_diag
        fill = float(target[pool].mean()) if pool.any() else float(target[off_diag].mean())
        current = np.where(known, target, fill)

    iterations = 0
    stalled = False
    low_rank = current
    for iterations in range(1, max_iter + 1):
        low_rank = _rank_truncate(current, rank)
        step = np.where(known, target, low_rank)
        step = 0.5 * (step + step.T)
        step = np.maximum(step, 0.0)
        np.fill_diagonal(step, 0.0)
        change = np.linalg.norm(step - current) / max(np.linalg.norm(current), 1e-300)
        current = step
        if change < tol:
            stalled = True
            break
    objective = float(np.linalg.norm((low_rank - target)[known]) / known_norm)
    if hard_constraints:
        # re-imposing the constraints last keeps known entries bit-exact
        current = np.where(known, target, current)
    else:
        current = 0.5 * (low_rank + low_rank.T)
        current = np.maximum(current, 0.0)
        np.fill_diagonal(current, 0.0)
    converged = stalled and objective <= stall_threshold
    return CompletionResult(current, known, iterations, objective, converged)


def edm_to_points(edm, dim: int) -> np.ndarray:
    """Embed a complete squared EDM into coordinates by classical MDS.

    Double-centers the matrix and takes the top ``dim`` eigenpairs. The
    result reproduces the distances up to a rigid motion plus possible
    reflection. Mildly negative eigenvalues among the top ``dim`` are
    clamped to zero with a warning; a strongly negative spectrum (most
    negative eigenvalue beyond 10% of the largest positive one) raises
    NonEuclideanMatrixError.
    """
    edm = np.asarray(edm, dtype=float)
    n = edm.shape[0]
    if edm.ndim != 2 or edm.shape[1] != n:
        raise ValueError("EDM must be square")
    if not np.all(np.isfinite(edm)):
        raise ValueError("EDM must be complete and finite")
    if np.abs(edm - edm.T).max() > 1e-9 * max(np.abs(edm).max(), 1.0):
        raise ValueError("EDM must be symmetric")
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")

    centering = np.eye(n) - np.full((n, n), 1.0 / n)
    gram = -0.5 * centering @ edm @ centering
    gram = 0.5 * (gram + gram.T)
    evals, evecs = np.linalg.eigh(gram)
    floor = max(1e-12, 1e-12 * n * max(np.abs(edm).max(), 1.0))
    most_negative = -evals[0]
    largest = max(evals[-1], 0.0)
    if most_negative > max(0.1 * largest, floor):
        raise NonEuclideanMatrixError(
            f"negative eigenvalue {-most_negative:.3e} too large for a "
            f"Euclidean matrix (largest positive {largest:.3e})")
    top = evals[-dim:][::-1]
    vecs = evecs[:, -dim:][:, ::-1]
    if top.min() < -floor:
        warnings.warn("clamping negative eigenvalues in MDS embedding; "
                      "input is slightly non-Euclidean", RuntimeWarning)
    top = np.maximum(top, 0.0)
    return vecs * np.sqrt(top)


def build_distance_alphabet(conf1: Conformation, conf2: Conformation,
                            center_distance: float,
                            num_rotation_samples: int,
                            quantization_step: float,
                            seed: int = 0) -> DistanceAlphabet:
    """Enumerate the squared cross distances two bodies can realize.

    Both conformations are centered; body 2 is placed ``center_distance``
    away and swept through sampled relative rotations (a uniform angle grid
    in 2D, uniform random rotations in 3D). Every anchor-free cross
    distance seen is quantized to the grid and collected into a sorted,
    deduplicated alphabet.
    """
    if conf1.dim != conf2.dim:
        raise ValueError("conformation dimensions differ")
    if center_distance < 0:
        raise ValueError("center_distance must be non-negative")
    if num_rotation_samples < 1:
        raise ValueError("at least one rotation sample is required")
    if quantization_step <= 0:
        raise ValueError("quantization_step must be positive")
    dim = conf1.dim
    c1 = conf1.coords - conf1.coords.mean(axis=0)
    c2 = conf2.coords - conf2.coords.mean(axis=0)
    offset = np.zeros(dim)
    offset[0] = center_distance

    if dim == 2:
        angles = 2.0 * np.pi * np.arange(num_rotation_samples) / num_rotation_samples
        rotations = [rotation_2d(a) for a in angles]
    else:
        rng = np.random.default_rng(seed)
        rotations = [random_rotation(rng, 3) for _ in range(num_rotation_samples)]

    seen = []
    for rot in rotations:
        placed = c2 @ rot.T + offset
        sq = ((c1[:, None, :] - placed[None, :, :]) ** 2).sum(axis=2)
        seen.append(sq.reshape(-1))
    quantized = np.round(np.concatenate(seen) / quantization_step) * quantization_step
    return DistanceAlphabet(np.unique(quantized), quantization_step,
                            num_rotation_samples)


def snap_to_alphabet(result: CompletionResult,
                     alphabet: DistanceAlphabet) -> CompletionResult:
    """Replace every originally-unknown completed entry by the nearest
    alphabet member (ties go to the smaller value). Known entries are left
    untouched and symmetry is re-enforced. Idempotent."""
    values = alphabet.values
    completed = result.completed.copy()
    n = completed.shape[0]
    free = ~result.known_mask
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    targets = free & upper
    entries = completed[targets]
    idx = np.searchsorted(values, entries)
    left = values[np.clip(idx - 1, 0, len(values) - 1)]
    right = values[np.clip(idx, 0, len(values) - 1)]
    # ties resolve toward the smaller member
    snapped = np.where(np.abs(entries - left) <= np.abs(entries - right),
                       left, right)
    completed[targets] = snapped
    completed = np.triu(completed) + np.triu(completed, 1).T
    return CompletionResult(completed, result.known_mask, result.iterations,
                            result.final_objective, result.converged)
