"""Pose, point and motion estimators.

The main pipeline localizes each body node from its anchor ranges
(Gauss-Newton multilateration) and then fits the rigid pose to the node
fixes with a weighted orthogonal Procrustes alignment. Companions cover
hybrid range+angle point fixes, anchorless body-to-body relative pose from
cross distances, and linear velocity estimation from range-rates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .completion import edm_to_points
from .geometry import (
    BodyMotion,
    Conformation,
    Pose,
    apply_pose,
    cross_matrix,
)
from .measurement import AnchorSet, MaskedRangeMatrix, wrap_angle

GN_STEP_TOL = 1e-10
GN_MAX_ITER = 100

# Regularizer added to stage-1 residual variances so noiseless nodes do not
# produce infinite weights.
WEIGHT_EPSILON = 1e-12

_J2 = np.array([[0.0, -1.0], [1.0, 0.0]])


class InsufficientMeasurementsError(ValueError):
    """Fewer observations than the estimate needs."""


class DegenerateGeometryError(ValueError):
    """The observation geometry cannot pin down the estimate."""


@dataclass
class PointFix:
    """Single-point localization result.

    ``candidates`` carries both mirror solutions when the observed anchor
    geometry leaves a reflection ambiguity (then ``ambiguous`` is set and
    ``position`` is the candidate on the deterministic side of the anchor
    hyperplane).
    """

    position: np.ndarray
    residual_rms: float
    iterations: int
    converged: bool
    ambiguous: bool = False
    candidates: tuple = ()


@dataclass
class PoseEstimate:
    """Rigid pose estimate with per-stage residual summaries."""

    pose: Pose
    stage1_rms: float
    stage2_rms: float
    iterations: int
    rotation_unique: bool = True
    ambiguous_nodes: tuple = ()

    def to_json(self) -> str:
        return json.dumps({
            "R": self.pose.rotation.tolist(),
            "t": self.pose.translation.tolist(),
            "residuals": {"stage1_rms": self.stage1_rms,
                          "stage2_rms": self.stage2_rms},
        })


@dataclass
class RelativePoseEstimate:
    """Pose of body 2 expressed in body 1's frame.

    ``center_offset`` is the vector between the two geometric centers in
    body 1's frame. ``reflection_resolved`` is False when both embedding
    chiralities explain the data equally well (degenerate flat bodies).
    """

    pose: Pose
    center_offset: np.ndarray
    residual_rms: float
    reflection_resolved: bool = True


@dataclass
class MotionEstimate:
    motion: BodyMotion
    residual_rms: float


def _observed(values, mask):
    values = np.asarray(values, dtype=float).reshape(-1)
    if mask is None:
        mask = np.isfinite(values)
    else:
        mask = np.asarray(mask, dtype=bool).reshape(-1) & np.isfinite(values)
    return values, mask


def _affine_basis(points: np.ndarray, tol: float = 1e-9):
    """Orthonormal directions spanning the points' affine hull, plus rank."""
    center = points.mean(axis=0)
    _, svals, vt = np.linalg.svd(points - center, full_matrices=True)
    svals = np.concatenate([svals, np.zeros(points.shape[1] - len(svals))])
    scale = max(svals.max(initial=0.0), 1.0)
    rank = int(np.sum(svals > tol * scale))
    return center, vt, rank


def _range_residual(x, anchors, dists):
    return np.sqrt(((x - anchors) ** 2).sum(axis=1)) - dists


def _gauss_newton_ranges(x, anchors, dists):
    iterations = 0
    converged = False
    obj = float((_range_residual(x, anchors, dists) ** 2).sum())
    for iterations in range(1, GN_MAX_ITER + 1):
        diff = x - anchors
        norm = np.sqrt((diff**2).sum(axis=1))
        norm = np.maximum(norm, 1e-300)
        resid = norm - dists
        jac = diff / norm[:, None]
        jtj = jac.T @ jac
        try:
            step = np.linalg.solve(jtj, -jac.T @ resid)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac, -resid, rcond=None)[0]
        # backtrack so badly conditioned geometry cannot launch the iterate
        # off to overflow
        scale = 1.0
        for _ in range(30):
            trial_obj = float((_range_residual(x + scale * step,
                                               anchors, dists) ** 2).sum())
            if trial_obj <= obj:
                break
            scale *= 0.5
        x = x + scale * step
        obj = float((_range_residual(x, anchors, dists) ** 2).sum())
        if np.linalg.norm(scale * step) < GN_STEP_TOL:
            converged = True
            break
    resid = _range_residual(x, anchors, dists)
    return x, float(np.sqrt(np.mean(resid**2))), iterations, converged


def _linearized_fix(anchors, dists):
    """Closed-form start point: subtract the first range equation from the
    rest, which leaves a linear system in the unknown position."""
    a0, d0 = anchors[0], dists[0]
    rows = 2.0 * (anchors[1:] - a0)
    rhs = (anchors[1:] ** 2).sum(axis=1) - (a0**2).sum() - dists[1:] ** 2 + d0**2
    return np.linalg.lstsq(rows, rhs, rcond=None)[0]


def multilaterate(anchors: AnchorSet, ranges, mask=None,
                  initial_guess=None) -> PointFix:
    """Locate one point from its distances to known anchors.

    ``ranges`` is a length-M vector aligned with the anchor set; NaN (or a
    False ``mask`` bit) marks unobserved entries. With observed anchors
    spanning the space, Gauss-Newton refines a linearized closed-form start
    until the step norm drops below 1e-10 (at most 100 iterations). When
    the observed anchors span only a hyperplane, both mirror candidates are
    computed and flagged.
    """
    values, obs = _observed(ranges, mask)
    dim = anchors.dim
    if values.shape[0] != anchors.num_anchors:
        raise ValueError("ranges length must match the anchor count")
    pts = anchors.positions[obs]
    dists = values[obs]
    if dists.size and dists.min() < 0:
        raise ValueError("ranges must be non-negative")
    n_obs = pts.shape[0]
    if n_obs < dim:
        raise InsufficientMeasurementsError(
            f"{n_obs} observed ranges cannot fix a point in {dim}D")

    exact = np.flatnonzero(dists == 0.0)
    if exact.size:
        pos = pts[exact[0]].copy()
        resid = np.sqrt(((pos - pts) ** 2).sum(axis=1)) - dists
        return PointFix(pos, float(np.sqrt(np.mean(resid**2))), 0, True)

    center, axes, rank = _affine_basis(pts)
    if rank == dim:
        x0 = np.asarray(initial_guess, dtype=float) if initial_guess is not None \
            else _linearized_fix(pts, dists)
        x, rms, iters, converged = _gauss_newton_ranges(x0, pts, dists)
        return PointFix(x, rms, iters, converged)
    if rank != dim - 1:
        raise DegenerateGeometryError(
            "observed anchors span too few dimensions for a point fix")

    # Mirror-pair branch: solve within the anchors' hyperplane, then place
    # the out-of-plane component on both sides.
    in_plane = axes[:rank]
    normal = axes[rank]
    flip = np.flatnonzero(np.abs(normal) > 1e-12)
    if flip.size and normal[flip[0]] < 0:
        normal = -normal
    b = (pts - pts[0]) @ in_plane.T
    d0 = dists[0]
    rows = -2.0 * b[1:]
    rhs = dists[1:] ** 2 - d0**2 - (b[1:] ** 2).sum(axis=1)
    y = np.linalg.lstsq(rows, rhs, rcond=None)[0]
    z_sq = np.mean(dists**2 - ((y - b) ** 2).sum(axis=1))
    z = np.sqrt(max(z_sq, 0.0))
    base = pts[0] + y @ in_plane
    candidates = []
    total_iters = 0
    converged = True
    for signed in (base + z * normal, base - z * normal):
        x, rms, iters, ok = _gauss_newton_ranges(signed, pts, dists)
        candidates.append((x, rms))
        total_iters += iters
        converged = converged and ok
    rms = min(r for _, r in candidates)
    return PointFix(candidates[0][0], rms, total_iters, converged,
                    ambiguous=True,
                    candidates=tuple(c for c, _ in candidates))


def _weighted_kabsch(source: np.ndarray, target: np.ndarray, weights):
    """Proper rotation + translation minimizing the weighted alignment error
    from source points onto target points."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    src_bar = (w[:, None] * source).sum(axis=0) / total
    dst_bar = (w[:, None] * target).sum(axis=0) / total
    src_c = source - src_bar
    dst_c = target - dst_bar
    cov = (src_c * w[:, None]).T @ dst_c
    u, _, vt = np.linalg.svd(cov)
    v = vt.T
    signs = np.ones(source.shape[1])
    signs[-1] = np.sign(np.linalg.det(v @ u.T)) or 1.0
    rot = (v * signs) @ u.T
    trans = dst_bar - rot @ src_bar
    resid = dst_c - src_c @ rot.T
    rms = float(np.sqrt((w * (resid**2).sum(axis=1)).sum() / total))
    return rot, trans, rms


def fit_pose_procrustes(conf: Conformation, points, weights=None) -> PoseEstimate:
    """Fit the rigid pose aligning a conformation onto estimated node
    positions (weighted orthogonal Procrustes).

    Zero-weight nodes are ignored. When the effective conformation does not
    span the space (e.g. a single node, or two nodes in 3D) the optimal
    rotation is not unique; a valid minimizer is still returned with
    ``rotation_unique`` cleared.
    """
    points = np.asarray(points, dtype=float)
    if points.shape != conf.coords.shape:
        raise ValueError("points shape must match the conformation")
    if not np.all(np.isfinite(points)):
        raise ValueError("points must be finite")
    if weights is None:
        weights = np.ones(conf.num_nodes)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (conf.num_nodes,):
        raise ValueError("one weight per node required")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ValueError("weights must be non-negative and finite")
    if weights.sum() <= 0:
        raise ValueError("at least one positive weight required")

    active = weights > 0
    rot, trans, rms = _weighted_kabsch(conf.coords[active], points[active],
                                       weights[active])
    _, _, rank = _affine_basis(conf.coords[active])
    pose = Pose.from_matrix(rot, trans, reorthonormalize=True)
    return PoseEstimate(pose, stage1_rms=0.0, stage2_rms=rms, iterations=0,
                        rotation_unique=rank == conf.dim)


def rbl_two_stage(anchors: AnchorSet, ranges: MaskedRangeMatrix,
                  conf: Conformation, weighted: bool = True) -> PoseEstimate:
    """Two-stage rigid body localization.

    Stage 1 multilaterates every node with at least dim+1 observed ranges;
    nodes with fewer are dropped (zero weight). Stage 2 fits the pose by
    Procrustes, weighting each node by the inverse of its stage-1 residual
    variance (plus a small regularizer); ``weighted=False`` switches to
    uniform weights over the localized nodes.
    """
    if anchors.dim != conf.dim:
        raise ValueError("anchor and conformation dimensions differ")
    if ranges.shape != (anchors.num_anchors, conf.num_nodes):
        raise ValueError("range matrix shape must be (num_anchors, num_nodes)")
    dim = conf.dim
    points = np.zeros_like(conf.coords)
    weights = np.zeros(conf.num_nodes)
    sq_resid_sum = 0.0
    used_ranges = 0
    total_iters = 0
    ambiguous = []
    for node in range(conf.num_nodes):
        col = ranges.values[:, node]
        n_obs = int(ranges.mask[:, node].sum())
        if n_obs < dim + 1:
            continue
        fix = multilaterate(anchors, col, ranges.mask[:, node])
        points[node] = fix.position
        weights[node] = 1.0 / (fix.residual_rms**2 + WEIGHT_EPSILON) \
            if weighted else 1.0
        sq_resid_sum += fix.residual_rms**2 * n_obs
        used_ranges += n_obs
        total_iters += fix.iterations
        if fix.ambiguous:
            ambiguous.append(node)
    if not np.any(weights > 0):
        raise InsufficientMeasurementsError("no node has enough observed ranges")

    estimate = fit_pose_procrustes(conf, points, weights)
    stage1_rms = float(np.sqrt(sq_resid_sum / used_ranges)) if used_ranges else 0.0
    return PoseEstimate(estimate.pose, stage1_rms, estimate.stage2_rms,
                        total_iters, estimate.rotation_unique,
                        tuple(ambiguous))


def _polar_point(anchor, dist, azimuth, elevation=None):
    if elevation is None:
        return anchor + dist * np.array([np.cos(azimuth), np.sin(azimuth)])
    ce = np.cos(elevation)
    return anchor + dist * np.array([ce * np.cos(azimuth),
                                     ce * np.sin(azimuth),
                                     np.sin(elevation)])


def localize_point_hybrid(anchors: AnchorSet, ranges=None, azimuths=None,
                          elevations=None, sigma_range: float = 1.0,
                          sigma_angle: float = 1.0,
                          initial_guess=None) -> PointFix:
    """Locate one point from any mix of ranges and angles of arrival.

    All measurement vectors have length M with NaN marking unobserved
    entries. Residuals are stacked with 1/sigma weighting and solved by
    Gauss-Newton (step tolerance 1e-10, at most 100 iterations). Angles
    resolve ambiguities ranges alone cannot, e.g. a single anchor with one
    range and one azimuth already fixes a 2D point.
    """
    dim = anchors.dim
    m = anchors.num_anchors
    nothing = np.full(m, np.nan)
    r_vals, r_obs = _observed(nothing if ranges is None else ranges, None)
    a_vals, a_obs = _observed(nothing if azimuths is None else azimuths, None)
    e_vals, e_obs = _observed(nothing if elevations is None else elevations, None)
    if dim == 2 and e_obs.any():
        raise ValueError("elevation measurements require 3D anchors")
    for vec in (r_vals, a_vals, e_vals):
        if vec.shape[0] != m:
            raise ValueError("measurement vectors must have one entry per anchor")
    n_total = int(r_obs.sum() + a_obs.sum() + e_obs.sum())
    if n_total < dim:
        raise InsufficientMeasurementsError(
            f"{n_total} observations cannot fix a point in {dim}D")
    w_range = 1.0 / sigma_range if sigma_range > 0 else 1.0
    w_angle = 1.0 / sigma_angle if sigma_angle > 0 else 1.0

    def residual_jacobian(x):
        rows_r, rows_j = [], []
        for n in np.flatnonzero(r_obs):
            diff = x - anchors.positions[n]
            dist = max(np.linalg.norm(diff), 1e-300)
            rows_r.append(w_range * (dist - r_vals[n]))
            rows_j.append(w_range * diff / dist)
        for n in np.flatnonzero(a_obs):
            diff = x - anchors.positions[n]
            rho_sq = diff[0] ** 2 + diff[1] ** 2
            rho_sq = max(rho_sq, 1e-300)
            pred = np.arctan2(diff[1], diff[0])
            rows_r.append(w_angle * wrap_angle(pred - a_vals[n]))
            grad = np.zeros(dim)
            grad[0] = -diff[1] / rho_sq
            grad[1] = diff[0] / rho_sq
            rows_j.append(w_angle * grad)
        for n in np.flatnonzero(e_obs):
            diff = x - anchors.positions[n]
            rho = max(np.hypot(diff[0], diff[1]), 1e-300)
            r_sq = max((diff**2).sum(), 1e-300)
            pred = np.arctan2(diff[2], rho)
            rows_r.append(w_angle * (pred - e_vals[n]))
            grad = np.array([-diff[0] * diff[2] / (r_sq * rho),
                             -diff[1] * diff[2] / (r_sq * rho),
                             rho / r_sq])
            rows_j.append(w_angle * grad)
        return np.array(rows_r), np.array(rows_j)

    # Candidate start points: caller guess, polar fixes from anchors with a
    # full range+angle pair, a linearized multilateration fix, and a nudged
    # anchor centroid as a fallback.
    candidates = []
    if initial_guess is not None:
        candidates.append(np.asarray(initial_guess, dtype=float))
    pair = r_obs & a_obs & (e_obs if dim == 3 else True)
    for n in np.flatnonzero(pair):
        candidates.append(_polar_point(anchors.positions[n], r_vals[n], a_vals[n],
                                       e_vals[n] if dim == 3 else None))
    if r_obs.sum() >= dim + 1:
        candidates.append(_linearized_fix(anchors.positions[r_obs], r_vals[r_obs]))
    if dim == 2 and a_obs.sum() >= 2:
        # bearing-ray intersection of the first two azimuth anchors
        i, j = np.flatnonzero(a_obs)[:2]
        d_i = np.array([np.cos(a_vals[i]), np.sin(a_vals[i])])
        d_j = np.array([np.cos(a_vals[j]), np.sin(a_vals[j])])
        system = np.column_stack([d_i, -d_j])
        if abs(np.linalg.det(system)) > 1e-12:
            s = np.linalg.solve(system, anchors.positions[j] - anchors.positions[i])
            candidates.append(anchors.positions[i] + s[0] * d_i)
    candidates.append(anchors.positions.mean(axis=0) + 0.37)

    best, best_obj = None, np.inf
    for cand in candidates:
        obj = float((residual_jacobian(cand)[0] ** 2).sum())
        if obj < best_obj:
            best, best_obj = cand, obj

    x = best
    resid, jac = residual_jacobian(x)
    if np.linalg.matrix_rank(jac) < dim:
        raise DegenerateGeometryError("measurements do not pin down the point")
    converged = False
    iterations = 0
    obj = float((resid**2).sum())
    for iterations in range(1, GN_MAX_ITER + 1):
        resid, jac = residual_jacobian(x)
        try:
            step = np.linalg.solve(jac.T @ jac, -jac.T @ resid)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac, -resid, rcond=None)[0]
        # backtrack: a full Gauss-Newton step can overshoot when angle
        # residuals flatten out far from the anchors
        scale = 1.0
        for _ in range(30):
            trial = x + scale * step
            trial_obj = float((residual_jacobian(trial)[0] ** 2).sum())
            if trial_obj <= obj:
                break
            scale *= 0.5
        x = x + scale * step
        obj = float((residual_jacobian(x)[0] ** 2).sum())
        if np.linalg.norm(scale * step) < GN_STEP_TOL:
            converged = True
            break
    resid, _ = residual_jacobian(x)
    rms = float(np.sqrt(np.mean(resid**2)))
    return PointFix(x, rms, iterations, converged)


def _relative_residual(a: float, b: float) -> float:
    return abs(a - b) / max(a, b, 1e-300)


def relative_pose_anchorless(conf1: Conformation, conf2: Conformation,
                             cross: MaskedRangeMatrix) -> RelativePoseEstimate:
    """Relative pose of body 2 in body 1's frame from cross distances only.

    Stacks both bodies' internal distance blocks with the measured cross
    distances into one squared EDM, embeds it by classical MDS and aligns
    the body-1 part back onto its conformation. Both embedding chiralities
    are tried; the one aligning body 1 better wins, with the cross-distance
    fit as tie-breaker. If both chiralities tie (flat bodies), the estimate
    is returned with ``reflection_resolved`` cleared.
    """
    if conf1.dim != conf2.dim:
        raise ValueError("conformation dimensions differ")
    dim = conf1.dim
    k1, k2 = conf1.num_nodes, conf2.num_nodes
    if cross.shape != (k1, k2):
        raise ValueError("cross matrix shape must be (k1, k2)")
    if not np.all(cross.mask):
        raise ValueError("cross distances must be fully observed; "
                         "complete the distance matrix first")

    n = k1 + k2
    edm = np.zeros((n, n))
    edm[:k1, :k1] = conf1.pairwise_distances() ** 2
    edm[k1:, k1:] = conf2.pairwise_distances() ** 2
    edm[:k1, k1:] = cross.values**2
    edm[k1:, :k1] = edm[:k1, k1:].T
    embedded = edm_to_points(edm, dim)
    # eigentruncation turns a zero Gram eigenvalue into sqrt(eps)-sized
    # coordinates, so the rank test needs a matching tolerance
    if _affine_basis(embedded, tol=1e-6)[2] < dim:
        raise DegenerateGeometryError(
            "combined point set does not span the space")

    scale = float(np.sqrt(np.mean(edm)))
    options = []
    for chirality in (1.0, -1.0):
        pts = embedded.copy()
        pts[:, -1] *= chirality
        rot, trans, align_rms = _weighted_kabsch(pts[:k1], conf1.coords,
                                                 np.ones(k1))
        body2 = pts[k1:] @ rot.T + trans
        pred = np.sqrt(((conf1.coords[:, None, :] - body2[None, :, :]) ** 2)
                       .sum(axis=2))
        cross_rms = float(np.sqrt(np.mean((pred - cross.values) ** 2)))
        options.append((align_rms, cross_rms, body2))

    atol = 1e-9 * max(scale, 1.0)
    a0, a1 = options[0][0], options[1][0]
    resolved = True
    if max(a0, a1) > atol and _relative_residual(a0, a1) > 1e-6:
        choice = options[0] if a0 <= a1 else options[1]
    else:
        c0, c1 = options[0][1], options[1][1]
        if max(c0, c1) > atol and _relative_residual(c0, c1) > 1e-6:
            choice = options[0] if c0 <= c1 else options[1]
        else:
            choice = options[0]
            resolved = False

    body2 = choice[2]
    rot, trans, rms = _weighted_kabsch(conf2.coords, body2, np.ones(k2))
    pose = Pose.from_matrix(rot, trans, reorthonormalize=True)
    offset = body2.mean(axis=0) - conf1.coords.mean(axis=0)
    return RelativePoseEstimate(pose, offset, rms, resolved)


def estimate_motion(anchors: AnchorSet, pose: Pose, conf: Conformation,
                    range_rates, mask=None) -> MotionEstimate:
    """Angular and translational velocity from range-rate measurements.

    With the pose known, each observed range-rate is linear in the unknown
    (omega, t_dot), so the estimate is a single linear least-squares solve.
    ``range_rates`` is M x K with NaN for unobserved pairs.
    """
    if anchors.dim != conf.dim:
        raise ValueError("anchor and conformation dimensions differ")
    if pose.dim != conf.dim:
        raise ValueError("pose and conformation dimensions differ")
    rates = np.asarray(range_rates, dtype=float)
    if rates.shape != (anchors.num_anchors, conf.num_nodes):
        raise ValueError("range-rate matrix shape must be (num_anchors, num_nodes)")
    if mask is None:
        obs = np.isfinite(rates)
    else:
        obs = np.asarray(mask, dtype=bool) & np.isfinite(rates)
    dim = conf.dim
    n_unknowns = 3 if dim == 2 else 6
    if obs.sum() < n_unknowns:
        raise InsufficientMeasurementsError(
            f"{int(obs.sum())} range-rates cannot fix {n_unknowns} velocity unknowns")

    body = apply_pose(conf, pose)
    rotated = conf.coords @ pose.rotation.T
    rows = []
    rhs = []
    for n, m in zip(*np.nonzero(obs)):
        diff = body.positions[m] - anchors.positions[n]
        dist = np.linalg.norm(diff)
        if dist <= 0:
            raise ValueError("node coincides with an anchor; rate undefined")
        u = diff / dist
        if dim == 2:
            rows.append([u @ (_J2 @ rotated[m]), u[0], u[1]])
        else:
            rows.append(np.concatenate([np.cross(rotated[m], u), u]))
        rhs.append(rates[n, m])
    design = np.array(rows)
    rhs = np.array(rhs)
    if np.linalg.matrix_rank(design) < n_unknowns:
        raise DegenerateGeometryError(
            "range-rate geometry does not separate rotation from translation")
    theta, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    resid = design @ theta - rhs
    rms = float(np.sqrt(np.mean(resid**2)))
    if dim == 2:
        motion = BodyMotion(float(theta[0]), theta[1:])
    else:
        motion = BodyMotion(theta[:3], theta[3:])
    return MotionEstimate(motion, rms)
