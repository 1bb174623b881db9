"""Contact-consistent body fitting: the full objective and its optimizer.

The objective combines keypoint reprojection, pose/shape regularization, a
sphere-proxy self-collision penalty and the contact consistency terms.
Descent is plain gradient descent with Armijo backtracking; the
nearest-neighbour matches of the contact terms are recomputed at the start
of every evaluation and frozen inside each gradient (ICP-style).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .body import (PoseParams, facet_geometry, facet_normal_vertex_jacobian,
                   pose_mesh, pose_mesh_with_jacobian)
from .contact_geometry import (loss_distance, loss_distance_frozen,
                               loss_normal)
from .errors import OptimizationError, ParameterError
from .regions import region_facets


@dataclass(frozen=True)
class ObjectiveWeights:
    """Term weights of the reconstruction objective."""

    lambda_s: float = 1.0
    lambda_psr: float = 1e-2
    lambda_col: float = 1.0
    lambda_d: float = 1.0
    lambda_n: float = 0.1
    lambda_pose: float = 1.0   # rotation part inside the regularizer
    lambda_shape: float = 1.0  # shape part inside the regularizer

    def __post_init__(self):
        vals = (self.lambda_s, self.lambda_psr, self.lambda_col,
                self.lambda_d, self.lambda_n, self.lambda_pose, self.lambda_shape)
        if min(vals) < 0:
            raise ParameterError("objective weights must be non-negative")


@dataclass(frozen=True)
class OptimizerSettings:
    iterations: int = 300
    step_size: float = 1.0
    armijo_c: float = 1e-4
    max_backtracks: int = 40
    fd_step: float = 1e-4  # probe step of finite_difference_gradient

    def __post_init__(self):
        if self.iterations < 0 or self.step_size <= 0 or self.max_backtracks < 1:
            raise ParameterError("invalid optimizer settings")


@dataclass
class LossBreakdown:
    """Raw (unweighted) per-term values for one objective evaluation."""

    l_s: float
    l_psr: float
    l_col: float
    l_d: float
    l_n: float
    total: float  # weighted sum


@dataclass
class CollisionProxySet:
    """Per-region bounding sphere plus excluded region pairs.

    The sphere center is the posed region centroid plus a fixed offset;
    radii and exclusions are frozen when fitted.
    """

    radii: np.ndarray    # (N_R,)
    offsets: np.ndarray  # (N_R, 3)
    excluded: set        # of (lo, hi) region pairs

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        self.offsets = np.asarray(self.offsets, dtype=float)
        if (self.radii <= 0).any():
            raise ParameterError("proxy radii must be positive")
        self.excluded = {(min(a, b), max(a, b)) for a, b in self.excluded}
        self._mask = None

    def exclusion_mask(self, n):
        if self._mask is None or self._mask.shape[0] != n:
            mask = np.zeros((n, n), dtype=bool)
            for a, b in self.excluded:
                mask[a, b] = mask[b, a] = True
            self._mask = mask
        return self._mask


def fit_collision_proxies(centers, region_map, min_radius=5e-3):
    """Bounding spheres of the region facet centers at the given pose.

    Region pairs already penetrating at fit time are excluded: the penalty
    is meant to punish new, pose-induced penetrations only.
    """
    n = region_map.granularity
    centroids = np.empty((n, 3))
    radii = np.empty(n)
    for r in range(n):
        pts = np.asarray(centers)[region_facets(region_map, r)]
        centroids[r] = pts.mean(axis=0)
        radii[r] = max(float(np.linalg.norm(pts - centroids[r], axis=1).max()),
                       min_radius)
    excluded = set()
    for a in range(n):
        for b in range(a + 1, n):
            if np.linalg.norm(centroids[a] - centroids[b]) < radii[a] + radii[b]:
                excluded.add((a, b))
    return CollisionProxySet(radii, np.zeros((n, 3)), excluded)


def loss_collision(centers, region_map, proxies, sig=None):
    """Sphere-penetration penalty over non-excluded region pairs.

    Pairs marked contact in the signature are skipped (they are supposed to
    touch). Returns (value, grad w.r.t. facet centers (F, 3)).
    """
    centers = np.asarray(centers, dtype=float)
    n = region_map.granularity
    if len(proxies.radii) != n:
        raise ParameterError("proxy count does not match region map granularity")
    f2r = region_map.facet_to_region
    counts = np.bincount(f2r, minlength=n).astype(float)
    cents = np.zeros((n, 3))
    np.add.at(cents, f2r, centers)
    cents = cents / counts[:, None] + proxies.offsets

    skip = proxies.exclusion_mask(n).copy()
    if sig is not None:
        for a, b in sig.contact_pairs():
            skip[a, b] = skip[b, a] = True
    diff = cents[:, None, :] - cents[None, :, :]
    d = np.sqrt((diff ** 2).sum(axis=-1))
    pen = proxies.radii[:, None] + proxies.radii[None, :] - d
    active = (~skip) & (pen > 0.0) & (d > 1e-12)
    active &= np.triu(np.ones((n, n), dtype=bool), k=1)
    value = float((pen[active] ** 2).sum())

    coef = np.zeros((n, n))
    coef[active] = -2.0 * pen[active] / d[active]
    coef = coef + coef.T
    grad_cents = (coef[:, :, None] * diff).sum(axis=1)
    grad = grad_cents[f2r] / counts[f2r][:, None]
    return value, grad


def _projection_terms(model, verts, vjac, camera, keypoints, joint_ids):
    """Projection loss from precomputed posed vertices (and optionally the
    vertex jacobian). Returns (value, grad-or-None)."""
    joints = model.joint_regressor @ verts
    cam_pts = camera.transform(joints[joint_ids])
    visible = cam_pts[:, 2] > 0.0
    if not visible.all():
        warnings.warn(f"{int((~visible).sum())} keypoint joint(s) behind camera; "
                      f"masked out", stacklevel=3)
    if not visible.any():
        return 0.0, (np.zeros(model.num_params) if vjac is not None else None)

    k_vis = int(visible.sum())
    value = 0.0
    grad = np.zeros(model.num_params) if vjac is not None else None
    flat_vjac = vjac.reshape(model.num_vertices, -1) if vjac is not None else None
    for row in np.flatnonzero(visible):
        x, y, z = cam_pts[row]
        u = camera.fx * x / z + camera.cx
        v = camera.fy * y / z + camera.cy
        res = np.array([u, v]) - keypoints[row]
        value += float(res @ res)
        if vjac is not None:
            duv_dcam = np.array([[camera.fx / z, 0.0, -camera.fx * x / z**2],
                                 [0.0, camera.fy / z, -camera.fy * y / z**2]])
            dl_dworld = (2.0 / k_vis) * res @ duv_dcam @ camera.rotation
            jjac = model.joint_regressor[joint_ids[row]] @ flat_vjac
            grad += dl_dworld @ jjac.reshape(3, model.num_params)
    return value / k_vis, grad


def loss_projection(model, params, camera, keypoints, keypoint_joints,
                    with_jacobian=True):
    """Mean squared pixel error of projected joints against 2D targets.

    Joints behind the camera are masked out with a warning. Returns
    (value, grad over packed params) or just the value when
    with_jacobian=False.
    """
    keypoints = np.asarray(keypoints, dtype=float)
    joint_ids = np.asarray(keypoint_joints, dtype=int)
    if keypoints.ndim != 2 or keypoints.shape[1] != 2:
        raise ParameterError("keypoints must be (K, 2)")
    if len(joint_ids) != len(keypoints):
        raise ParameterError("one joint index per keypoint required")
    if len(keypoints) > model.num_joints:
        raise ParameterError("more keypoints than joints")

    if with_jacobian:
        verts, vjac = pose_mesh_with_jacobian(model, params)
        return _projection_terms(model, verts, vjac, camera, keypoints, joint_ids)
    verts = pose_mesh(model, params)
    value, _ = _projection_terms(model, verts, None, camera, keypoints, joint_ids)
    return value


def loss_regularizer(params, init, lambda_pose=1.0, lambda_shape=1.0,
                     with_jacobian=True):
    """Quadratic pull of rotations toward the initial pose and shape toward
    zero. Returns (value, grad over packed params)."""
    drot = params.joint_rotations - init.joint_rotations
    value = lambda_pose * float((drot ** 2).sum()) \
        + lambda_shape * float((params.shape ** 2).sum())
    if not with_jacobian:
        return value
    grad = np.zeros(3 * len(params.joint_rotations) + 6)
    grad[:drot.size] = 2.0 * lambda_pose * drot.ravel()
    grad[-3:] = 2.0 * lambda_shape * params.shape
    return value, grad


@dataclass
class ReconstructionProblem:
    model: object
    region_map: object
    camera: object
    keypoints: np.ndarray       # (K, 2) pixel targets
    keypoint_joints: np.ndarray  # (K,) joint index per keypoint (the mask)
    signature: object
    initial_params: PoseParams
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    settings: OptimizerSettings = field(default_factory=OptimizerSettings)
    proxies: CollisionProxySet = None  # fitted at the initial pose when None
    selection_mode: str = "all"
    selection_k: int = 2

    def __post_init__(self):
        self.keypoints = np.asarray(self.keypoints, dtype=float)
        self.keypoint_joints = np.asarray(self.keypoint_joints, dtype=int)
        if len(self.keypoints) > self.model.num_joints:
            raise ParameterError("more keypoints than joints")
        if self.signature.granularity != self.region_map.granularity:
            raise ParameterError("signature and region map granularities differ")
        if self.proxies is None:
            centers = facet_geometry(pose_mesh(self.model, self.initial_params),
                                     self.model.faces).centers
            self.proxies = fit_collision_proxies(centers, self.region_map)


def _scatter_centers_to_vertices(grad_centers, faces, num_vertices):
    grad_verts = np.zeros((num_vertices, 3))
    for c in range(3):
        np.add.at(grad_verts, faces[:, c], grad_centers / 3.0)
    return grad_verts


def evaluate_breakdown(problem, params):
    """Per-term values at params with fresh contact matches."""
    w = problem.weights
    verts = pose_mesh(problem.model, params)
    geom = facet_geometry(verts, problem.model.faces)
    l_s, _ = _projection_terms(problem.model, verts, None, problem.camera,
                               problem.keypoints, problem.keypoint_joints)
    l_psr = loss_regularizer(params, problem.initial_params,
                             w.lambda_pose, w.lambda_shape, with_jacobian=False)
    l_col, _ = loss_collision(geom.centers, problem.region_map,
                              problem.proxies, problem.signature)
    l_d, matches, _ = loss_distance(geom.centers, problem.signature,
                                    problem.region_map,
                                    mode=problem.selection_mode,
                                    k=problem.selection_k)
    if matches.entries:
        l_n, _ = loss_normal(geom.normals, matches)
    else:
        l_n = 0.0
    total = (w.lambda_s * l_s + w.lambda_psr * l_psr + w.lambda_col * l_col
             + w.lambda_d * l_d + w.lambda_n * l_n)
    breakdown = LossBreakdown(l_s, l_psr, l_col, l_d, l_n, total)
    _check_finite(breakdown)
    return breakdown, matches


def _check_finite(b):
    for name in ("l_s", "l_psr", "l_col", "l_d", "l_n"):
        if not np.isfinite(getattr(b, name)):
            raise OptimizationError(f"loss term {name} is non-finite")


def evaluate_gradient(problem, params):
    """Weighted-total gradient over packed params, matches frozen inside."""
    model = problem.model
    w = problem.weights
    verts, vjac = pose_mesh_with_jacobian(model, params)
    geom = facet_geometry(verts, model.faces)

    _, g_s = _projection_terms(model, verts, vjac, problem.camera,
                               problem.keypoints, problem.keypoint_joints)
    _, g_psr = loss_regularizer(params, problem.initial_params,
                                w.lambda_pose, w.lambda_shape)
    _, g_col_centers = loss_collision(geom.centers, problem.region_map,
                                      problem.proxies, problem.signature)
    _, matches, _ = loss_distance(geom.centers, problem.signature,
                                  problem.region_map,
                                  mode=problem.selection_mode,
                                  k=problem.selection_k)
    _, g_d_centers = loss_distance_frozen(geom.centers, matches)

    grad_verts = _scatter_centers_to_vertices(
        w.lambda_col * g_col_centers + w.lambda_d * g_d_centers,
        model.faces, model.num_vertices)

    if matches.entries and w.lambda_n != 0.0:
        _, g_n_normals = loss_normal(geom.normals, matches)
        face_ids = np.flatnonzero(np.any(g_n_normals != 0.0, axis=1))
        blocks = facet_normal_vertex_jacobian(verts, model.faces, face_ids)
        for row, fid in enumerate(face_ids):
            gn = w.lambda_n * g_n_normals[fid]
            for corner in range(3):
                grad_verts[model.faces[fid, corner]] += gn @ blocks[row, corner]

    grad = np.einsum("vc,vcp->p", grad_verts, vjac)
    grad += w.lambda_s * g_s + w.lambda_psr * g_psr
    return grad


def finite_difference_gradient(problem, params, step=None):
    """Central-difference gradient of the frozen-match objective.

    Cross-validation oracle for evaluate_gradient: matches and proxies are
    frozen at params, then every packed parameter is probed with the
    settings' fd_step (parameter counts are small enough for this to be
    cheap).
    """
    model = problem.model
    w = problem.weights
    step = problem.settings.fd_step if step is None else step
    geom0 = facet_geometry(pose_mesh(model, params), model.faces)
    _, matches, _ = loss_distance(geom0.centers, problem.signature,
                                  problem.region_map,
                                  mode=problem.selection_mode,
                                  k=problem.selection_k)

    def frozen_total(x):
        p = PoseParams.from_vector(x, model.num_joints)
        verts = pose_mesh(model, p)
        geom = facet_geometry(verts, model.faces)
        l_s, _ = _projection_terms(model, verts, None, problem.camera,
                                   problem.keypoints, problem.keypoint_joints)
        l_psr = loss_regularizer(p, problem.initial_params, w.lambda_pose,
                                 w.lambda_shape, with_jacobian=False)
        l_col, _ = loss_collision(geom.centers, problem.region_map,
                                  problem.proxies, problem.signature)
        l_d, _ = loss_distance_frozen(geom.centers, matches)
        if matches.entries:
            l_n, _ = loss_normal(geom.normals, matches)
        else:
            l_n = 0.0
        return (w.lambda_s * l_s + w.lambda_psr * l_psr + w.lambda_col * l_col
                + w.lambda_d * l_d + w.lambda_n * l_n)

    x0 = params.to_vector()
    grad = np.empty_like(x0)
    for i in range(len(x0)):
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += step
        xm[i] -= step
        grad[i] = (frozen_total(xp) - frozen_total(xm)) / (2.0 * step)
    return grad


def optimize(problem):
    """Minimize the objective from the problem's initial parameters.

    Returns (final PoseParams, trace) where trace is the list of
    LossBreakdown rows at the initial point and after every accepted step;
    the total column is non-increasing by construction. Stops early when no
    backtracked step achieves the Armijo decrease.
    """
    model = problem.model
    settings = problem.settings
    x = problem.initial_params.to_vector()
    params = PoseParams.from_vector(x, model.num_joints)
    breakdown, _ = evaluate_breakdown(problem, params)
    trace = [breakdown]
    alpha = settings.step_size

    for _ in range(settings.iterations):
        grad = evaluate_gradient(problem, params)
        if not np.isfinite(grad).all():
            raise OptimizationError("gradient is non-finite")
        gnorm2 = float(grad @ grad)
        if gnorm2 == 0.0:
            break
        accepted = False
        a = alpha
        for _ in range(settings.max_backtracks):
            x_new = x - a * grad
            try:
                params_new = PoseParams.from_vector(x_new, model.num_joints)
                breakdown_new, _ = evaluate_breakdown(problem, params_new)
            except OptimizationError:
                a *= 0.5
                continue
            if breakdown_new.total <= breakdown.total - settings.armijo_c * a * gnorm2:
                accepted = True
                break
            a *= 0.5
        if not accepted:
            break
        x, params, breakdown = x_new, params_new, breakdown_new
        trace.append(breakdown)
        alpha = min(a * 4.0, settings.step_size)

    return params, trace
